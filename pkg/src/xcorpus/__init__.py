"""Cross-corpus stress and arousal detection from ECG and EDA."""

__version__ = "0.1.0"

from .errors import XcorpusError
from .signal_model import FEATURE_NAMES, Corpus, LabelScheme, Modality, PhaseRecord, RawReport, SignalTrace

__all__ = ["FEATURE_NAMES", "Corpus", "LabelScheme", "Modality", "PhaseRecord", "RawReport", "SignalTrace",
           "XcorpusError", "__version__"]
