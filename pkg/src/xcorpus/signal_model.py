"""Core domain types: traces, phases, self-reports, corpora, feature vectors.

All types are frozen dataclasses and validate themselves on construction, so an
object that exists is an object that satisfies its invariants.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    Empty,
    NonFinite,
    NonPositiveRate,
    SchemeMismatch,
    ValidationError,
)


class Modality(str, enum.Enum):
    ECG = "ECG"
    EDA = "EDA"


class LabelScheme(str, enum.Enum):
    SUDS = "SUDS"
    STAI6 = "STAI6"
    AROUSAL_CONTINUOUS = "AROUSAL_CONTINUOUS"


# closed score range per scheme
SCORE_RANGES = {
    LabelScheme.SUDS: (0.0, 100.0),
    LabelScheme.STAI6: (6.0, 24.0),
    LabelScheme.AROUSAL_CONTINUOUS: (1.0, 10.0),
}


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    arr.setflags(write=False)
    return arr


def validate_trace(trace) -> None:
    """Check the invariants of a :class:`SignalTrace`.

    Returns ``None`` when the trace is valid and raises otherwise.

    Raises
    ------
    NonPositiveRate
        The sampling rate is zero, negative or not a number.
    Empty
        The trace holds no samples.
    NonFinite
        A sample is NaN or infinite; ``.index`` names the first offender.
    """
    rate = trace.sampling_rate_hz
    if not (isinstance(rate, (int, float, np.floating, np.integer)) and math.isfinite(rate) and rate > 0):
        raise NonPositiveRate(f"sampling rate must be positive, got {rate!r}")
    samples = np.asarray(trace.samples, dtype=float)
    if samples.size == 0:
        raise Empty("trace has no samples")
    bad = np.flatnonzero(~np.isfinite(samples))
    if bad.size:
        raise NonFinite(bad[0])


@dataclass(frozen=True, eq=False)
class SignalTrace:
    """Uniformly sampled physiological signal.

    ``samples`` are millivolts for ECG and microsiemens for EDA.
    """

    samples: np.ndarray
    sampling_rate_hz: float
    modality: Modality

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_array(self.samples))
        object.__setattr__(self, "modality", Modality(self.modality))
        validate_trace(self)
        object.__setattr__(self, "sampling_rate_hz", float(self.sampling_rate_hz))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sampling_rate_hz

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.sampling_rate_hz

    def replace_samples(self, samples) -> "SignalTrace":
        return SignalTrace(samples, self.sampling_rate_hz, self.modality)

    def slice_time(self, start_s: float, end_s: float) -> "SignalTrace":
        """Samples with ``start_s <= t < end_s``."""
        i0 = int(math.ceil(start_s * self.sampling_rate_hz - 1e-9))
        i1 = int(math.ceil(end_s * self.sampling_rate_hz - 1e-9))
        return SignalTrace(self.samples[max(i0, 0):i1], self.sampling_rate_hz, self.modality)

    def __eq__(self, other):
        if not isinstance(other, SignalTrace):
            return NotImplemented
        return (
            self.modality == other.modality
            and self.sampling_rate_hz == other.sampling_rate_hz
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RawReport:
    """A self-report as collected: one scalar score or a continuous series."""

    scheme: LabelScheme
    scalar_score: Optional[float] = None
    series: Optional[np.ndarray] = None

    def __post_init__(self):
        scheme = LabelScheme(self.scheme)
        object.__setattr__(self, "scheme", scheme)
        lo, hi = SCORE_RANGES[scheme]
        if scheme is LabelScheme.AROUSAL_CONTINUOUS:
            if self.scalar_score is not None or self.series is None:
                raise ValidationError("continuous arousal reports carry a series and no scalar score")
            series = _frozen_array(self.series)
            if series.size == 0:
                raise Empty("arousal series is empty")
            if not np.all(np.isfinite(series)) or series.min() < lo or series.max() > hi:
                raise ValidationError(f"arousal series values must lie in [{lo}, {hi}]")
            object.__setattr__(self, "series", series)
        else:
            if self.series is not None or self.scalar_score is None:
                raise ValidationError(f"{scheme.value} reports carry a scalar score and no series")
            score = float(self.scalar_score)
            if not (lo <= score <= hi):
                raise ValidationError(f"{scheme.value} score {score} outside [{lo}, {hi}]")
            object.__setattr__(self, "scalar_score", score)

    def __eq__(self, other):
        if not isinstance(other, RawReport):
            return NotImplemented
        if self.scheme != other.scheme or self.scalar_score != other.scalar_score:
            return False
        if self.series is None or other.series is None:
            return self.series is None and other.series is None
        return np.array_equal(self.series, other.series)

    __hash__ = None


@dataclass(frozen=True)
class PhaseRecord:
    """One participant in one experiment phase."""

    participant_id: str
    phase_name: str
    traces: Mapping[Modality, SignalTrace]
    self_report: RawReport

    def __post_init__(self):
        traces = {Modality(k): v for k, v in dict(self.traces).items()}
        for mod in (Modality.ECG, Modality.EDA):
            if mod not in traces:
                raise ValidationError(f"phase {self.phase_name!r} of {self.participant_id!r} lacks an {mod.value} trace")
            if traces[mod].modality is not mod:
                raise ValidationError(f"trace stored under {mod.value} has modality {traces[mod].modality.value}")
        d_ecg, d_eda = traces[Modality.ECG].duration_s, traces[Modality.EDA].duration_s
        if abs(d_ecg - d_eda) > 0.01 * max(d_ecg, d_eda):
            raise ValidationError(
                f"ECG ({d_ecg:.3f} s) and EDA ({d_eda:.3f} s) durations differ by more than 1%"
            )
        object.__setattr__(self, "traces", traces)

    @property
    def ecg(self) -> SignalTrace:
        return self.traces[Modality.ECG]

    @property
    def eda(self) -> SignalTrace:
        return self.traces[Modality.EDA]

    @property
    def duration_s(self) -> float:
        return min(self.ecg.duration_s, self.eda.duration_s)


@dataclass(frozen=True)
class Corpus:
    name: str
    label_scheme: LabelScheme
    phases: Sequence[PhaseRecord] = ()

    def __post_init__(self):
        scheme = LabelScheme(self.label_scheme)
        object.__setattr__(self, "label_scheme", scheme)
        phases = tuple(self.phases)
        object.__setattr__(self, "phases", phases)
        seen_done = set()
        seen_pairs = set()
        current = None
        for ph in phases:
            if ph.self_report.scheme is not scheme:
                raise SchemeMismatch(
                    f"corpus {self.name!r} uses {scheme.value} but {ph.participant_id}/{ph.phase_name} "
                    f"reports {ph.self_report.scheme.value}"
                )
            key = (ph.participant_id, ph.phase_name)
            if key in seen_pairs:
                raise ValidationError(f"duplicate phase {key}")
            seen_pairs.add(key)
            if ph.participant_id != current:
                if ph.participant_id in seen_done:
                    raise ValidationError(f"phases of participant {ph.participant_id!r} are not contiguous")
                if current is not None:
                    seen_done.add(current)
                current = ph.participant_id

    @property
    def participant_ids(self) -> list:
        out = []
        for ph in self.phases:
            if not out or out[-1] != ph.participant_id:
                out.append(ph.participant_id)
        return out

    def phases_of(self, participant_id: str) -> list:
        return [ph for ph in self.phases if ph.participant_id == participant_id]


FEATURE_NAMES = (
    "bpm",
    "rmssd_ms",
    "hf_rr",
    "lf_rr",
    "sdnn_ms",
    "mean_scl",
    "scr_rate_per_min",
    "lf_hf_ratio",
    "ecg_mean",
    "ecg_median",
    "ecg_std",
    "ecg_var",
    "eda_mean",
    "eda_median",
    "eda_std",
    "eda_var",
)

# display names in report tables
FEATURE_LABELS = (
    "BPM",
    "RMSSD",
    "HF_RR",
    "LF_RR",
    "SDNN",
    "Mean SCL",
    "SCR rate",
    "LF/HF ratio",
    "ECG mean",
    "ECG median",
    "ECG std",
    "ECG var",
    "EDA mean",
    "EDA median",
    "EDA std",
    "EDA var",
)

NONNEGATIVE_FEATURES = frozenset(
    ["rmssd_ms", "sdnn_ms", "hf_rr", "lf_rr", "scr_rate_per_min", "ecg_std", "ecg_var", "eda_std", "eda_var"]
)


@dataclass(frozen=True)
class FeatureVector:
    """The sixteen per-window features in canonical (report row) order.

    Window-level vectors produced by the feature extractor additionally satisfy
    ``lf_hf_ratio == lf_rr / hf_rr``; chunk averages need not, since the mean of
    ratios is not the ratio of means.
    """

    bpm: float
    rmssd_ms: float
    hf_rr: float
    lf_rr: float
    sdnn_ms: float
    mean_scl: float
    scr_rate_per_min: float
    lf_hf_ratio: float
    ecg_mean: float
    ecg_median: float
    ecg_std: float
    ecg_var: float
    eda_mean: float
    eda_median: float
    eda_std: float
    eda_var: float

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not math.isfinite(v):
                raise ValidationError(f"feature {f.name} is not finite")
            if f.name in NONNEGATIVE_FEATURES and v < 0:
                raise ValidationError(f"feature {f.name} must be non-negative, got {v}")
            object.__setattr__(self, f.name, v)

    def check_ratio(self, rtol: float = 1e-12) -> bool:
        if self.hf_rr <= 0:
            return True
        return math.isclose(self.lf_hf_ratio, self.lf_rr / self.hf_rr, rel_tol=rtol)

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in FEATURE_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> "FeatureVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(FEATURE_NAMES),):
            raise ValidationError(f"expected {len(FEATURE_NAMES)} features, got shape {values.shape}")
        return cls(*(float(v) for v in values))

    def to_dict(self) -> dict:
        return {n: getattr(self, n) for n in FEATURE_NAMES}

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureVector":
        return cls(**{n: float(d[n]) for n in FEATURE_NAMES})


@dataclass(frozen=True)
class Sample:
    """A two-minute chunk: averaged features, binary label and identity."""

    features: FeatureVector
    label: int
    participant_id: str
    corpus_name: str
    phase_name: str
    chunk_index: int = field(default=0)

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label!r}")
        if int(self.chunk_index) != self.chunk_index or self.chunk_index < 0:
            raise ValidationError("chunk_index must be a non-negative integer")
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "chunk_index", int(self.chunk_index))
