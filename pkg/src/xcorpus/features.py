"""Window features, two-minute chunk samples, sample tables and normalization.

A phase is processed once at full length (filtering, R-peaks, EDA
decomposition, SCR detection) and then cut into 60 s windows every 30 s.
Each window yields a :class:`~xcorpus.signal_model.FeatureVector`; windows are
averaged into 120 s chunks, which become the model samples.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import dsp
from .errors import (
    DegenerateSpectrum,
    Empty,
    InsufficientBeats,
    NoBeatsFound,
    NoWindows,
    ParseError,
    PhaseTooShort,
    SpanTooShort,
    TooFewBeats,
    TooFewSamples,
    TooShort,
    ValidationError,
)
from .labels import DEFAULT_RULES, LabelRule, label
from .signal_model import FEATURE_NAMES, Corpus, FeatureVector, Modality, PhaseRecord, Sample, SignalTrace

log = logging.getLogger(__name__)

_EPS = 1e-9


@dataclass(frozen=True)
class WindowSpec:
    length_s: float = 60.0
    step_s: float = 30.0

    def __post_init__(self):
        if not 0 < self.step_s <= self.length_s:
            raise ValidationError("window step must satisfy 0 < step <= length")


@dataclass(frozen=True)
class ChunkSpec:
    chunk_length_s: float = 120.0
    strategy: str = "window_mean"

    def __post_init__(self):
        if self.chunk_length_s <= 0:
            raise ValidationError("chunk length must be positive")
        if self.strategy not in ("window_mean", "recompute"):
            raise ValidationError(f"unknown chunk strategy {self.strategy!r}")


def sliding_windows(phase, spec: WindowSpec = WindowSpec()) -> list:
    """``(start_s, end_s)`` pairs at 0, step, 2*step, ... fully inside the phase.

    ``phase`` is a :class:`PhaseRecord` or a duration in seconds.
    """
    duration = phase.duration_s if hasattr(phase, "duration_s") else float(phase)
    if duration + _EPS < spec.length_s:
        raise PhaseTooShort(f"phase lasts {duration:.2f} s, shorter than a {spec.length_s} s window")
    n = int(math.floor((duration - spec.length_s) / spec.step_s + _EPS)) + 1
    return [(k * spec.step_s, k * spec.step_s + spec.length_s) for k in range(n)]


# ---------------------------------------------------------------------------
# per-window feature groups


def time_domain_hrv(rr_ms) -> tuple:
    """``(bpm, rmssd_ms, sdnn_ms)`` of an RR sequence in milliseconds."""
    rr = np.asarray(rr_ms, dtype=float)
    if rr.size < 3:
        raise InsufficientBeats(f"need at least 3 RR intervals, got {rr.size}")
    bpm = 60000.0 / rr.mean()
    rmssd = math.sqrt(np.mean(np.diff(rr) ** 2))
    sdnn = float(np.std(rr, ddof=1))
    return float(bpm), float(rmssd), sdnn


def hrv_features(rr: dsp.RrSeries) -> tuple:
    """``(bpm, rmssd_ms, sdnn_ms, hf_rr, lf_rr, lf_hf_ratio)`` for one window."""
    bpm, rmssd, sdnn = time_domain_hrv(rr.rr_ms)
    try:
        hf = dsp.band_power(rr, dsp.HF_BAND)
        lf = dsp.band_power(rr, dsp.LF_BAND)
    except SpanTooShort as exc:
        raise InsufficientBeats(str(exc)) from None
    if hf <= 0:
        raise DegenerateSpectrum("no power in the HF band; LF/HF undefined")
    return bpm, rmssd, sdnn, hf, lf, lf / hf


def ecg_features(window: SignalTrace) -> tuple:
    """HRV features of a stand-alone ECG window (filtered here first)."""
    try:
        beats = dsp.detect_r_peaks(dsp.filter_ecg(window))
        rr = dsp.to_rr(beats)
    except (NoBeatsFound, TooFewBeats, TooShort) as exc:
        raise InsufficientBeats(str(exc)) from None
    return hrv_features(rr)


def stat_features(values) -> tuple:
    """``(mean, median, std, var)`` with the N-1 divisor; one value gives zero spread."""
    x = np.asarray(getattr(values, "samples", values), dtype=float)
    if x.size == 0:
        raise Empty("empty window")
    if x.size == 1:
        return float(x[0]), float(x[0]), 0.0, 0.0
    var = float(np.var(x, ddof=1))
    return float(np.mean(x)), float(np.median(x)), math.sqrt(var), var


def eda_window_features(tonic, onsets_s, start_s: float, end_s: float) -> tuple:
    """``(mean_scl, scr_rate_per_min)`` from a tonic slice and SCR onset times."""
    tonic = np.asarray(getattr(tonic, "samples", tonic), dtype=float)
    if tonic.size == 0:
        raise Empty("empty tonic window")
    onsets = np.asarray(onsets_s, dtype=float)
    count = int(np.sum((onsets >= start_s) & (onsets < end_s)))
    return float(np.mean(tonic)), 60.0 * count / (end_s - start_s)


def eda_features(window: SignalTrace) -> tuple:
    """EDA features of a stand-alone window (filtered and decomposed here)."""
    decomp = dsp.decompose_eda(dsp.filter_eda(window))
    onsets = [e.onset_s for e in dsp.detect_scr(decomp.phasic)]
    return eda_window_features(decomp.tonic, onsets, 0.0, window.duration_s)


# ---------------------------------------------------------------------------
# phase processing


@dataclass
class ProcessedPhase:
    """Phase-level intermediate signals shared by all windows of a phase."""

    phase: PhaseRecord
    ecg_filtered: SignalTrace
    beats: Optional[np.ndarray]
    eda_filtered: SignalTrace
    tonic: SignalTrace
    scr_onsets: np.ndarray

    @classmethod
    def from_phase(cls, phase: PhaseRecord) -> "ProcessedPhase":
        ecg_f = dsp.filter_ecg(phase.ecg)
        try:
            beats = dsp.detect_r_peaks(ecg_f).beat_times_s
        except NoBeatsFound:
            beats = None
        eda_f = dsp.filter_eda(phase.eda)
        decomp = dsp.decompose_eda(eda_f)
        onsets = np.array([e.onset_s for e in dsp.detect_scr(decomp.phasic)])
        return cls(phase, ecg_f, beats, eda_f, decomp.tonic, onsets)

    def window_vector(self, start_s: float, end_s: float) -> FeatureVector:
        if self.beats is None:
            raise InsufficientBeats("no beats detected in phase")
        b = self.beats[(self.beats >= start_s) & (self.beats < end_s)]
        if b.size < 4:
            raise InsufficientBeats(f"{b.size} beats in window [{start_s}, {end_s})")
        rr = dsp.to_rr(dsp.BeatSeries(b - start_s, end_s - start_s))
        bpm, rmssd, sdnn, hf, lf, ratio = hrv_features(rr)
        scl, scr_rate = eda_window_features(self.tonic.slice_time(start_s, end_s), self.scr_onsets, start_s, end_s)
        ecg_stats = stat_features(self.ecg_filtered.slice_time(start_s, end_s))
        eda_stats = stat_features(self.eda_filtered.slice_time(start_s, end_s))
        return FeatureVector(bpm, rmssd, hf, lf, sdnn, scl, scr_rate, ratio, *ecg_stats, *eda_stats)


def window_features(phase: PhaseRecord, spec: WindowSpec = WindowSpec(), processed: ProcessedPhase = None):
    """Feature vectors of every usable window of a phase.

    Returns ``(starts, vectors, n_skipped)``; windows without enough beats or
    with an empty HF band are skipped.
    """
    processed = processed or ProcessedPhase.from_phase(phase)
    starts, vectors, skipped = [], [], 0
    for start, end in sliding_windows(phase, spec):
        try:
            vectors.append(processed.window_vector(start, end))
            starts.append(start)
        except (InsufficientBeats, DegenerateSpectrum) as exc:
            skipped += 1
            log.debug("skipping window %s-%s of %s/%s: %s", start, end, phase.participant_id, phase.phase_name, exc)
    return starts, vectors, skipped


def aggregate_chunks(vectors, starts, spec: ChunkSpec = ChunkSpec()) -> list:
    """Average window vectors into chunks by window start time.

    Chunk ``k`` holds windows starting in ``[k*L, (k+1)*L)``.  Returns a list of
    ``(chunk_index, FeatureVector)``; chunks without windows do not appear.
    """
    if len(vectors) == 0:
        raise NoWindows("no windows to aggregate")
    if len(vectors) != len(starts):
        raise ValidationError("vectors and starts differ in length")
    mat = np.vstack([v.to_array() if isinstance(v, FeatureVector) else np.asarray(v, float) for v in vectors])
    idx = np.floor(np.asarray(starts, dtype=float) / spec.chunk_length_s + _EPS).astype(int)
    out = []
    for k in np.unique(idx):
        out.append((int(k), FeatureVector.from_array(mat[idx == k].mean(axis=0))))
    return out


def phase_samples(
    phase: PhaseRecord,
    corpus_name: str,
    window_spec: WindowSpec = WindowSpec(),
    chunk_spec: ChunkSpec = ChunkSpec(),
    rule: LabelRule = None,
) -> list:
    """Samples (one per two-minute chunk) of one phase."""
    y = label(phase.self_report, rule)
    n_chunks = int(math.floor(phase.duration_s / chunk_spec.chunk_length_s + _EPS))
    if n_chunks == 0:
        raise PhaseTooShort(f"phase lasts {phase.duration_s:.1f} s, shorter than one chunk")
    processed = ProcessedPhase.from_phase(phase)
    if chunk_spec.strategy == "recompute":
        chunks = []
        for k in range(n_chunks):
            s = k * chunk_spec.chunk_length_s
            try:
                chunks.append((k, processed.window_vector(s, s + chunk_spec.chunk_length_s)))
            except (InsufficientBeats, DegenerateSpectrum) as exc:
                log.debug("skipping chunk %d of %s/%s: %s", k, phase.participant_id, phase.phase_name, exc)
    else:
        starts, vectors, skipped = window_features(phase, window_spec, processed)
        if skipped:
            log.warning("%s/%s/%s: %d window(s) skipped", corpus_name, phase.participant_id, phase.phase_name, skipped)
        chunks = aggregate_chunks(vectors, starts, chunk_spec) if vectors else []
    return [Sample(vec, y, phase.participant_id, corpus_name, phase.phase_name, k) for k, vec in chunks]


def extract_corpus(
    corpus: Corpus,
    window_spec: WindowSpec = WindowSpec(),
    chunk_spec: ChunkSpec = ChunkSpec(),
    rule: LabelRule = None,
) -> "SampleTable":
    """Samples of every phase of ``corpus``; phases that yield none are logged."""
    rule = rule or DEFAULT_RULES[corpus.label_scheme]
    samples = []
    for ph in corpus.phases:
        try:
            got = phase_samples(ph, corpus.name, window_spec, chunk_spec, rule)
        except (PhaseTooShort, TooShort) as exc:
            log.warning("%s/%s/%s yields no samples: %s", corpus.name, ph.participant_id, ph.phase_name, exc)
            continue
        if not got:
            log.warning("%s/%s/%s yields no samples: no usable windows", corpus.name, ph.participant_id, ph.phase_name)
        samples.extend(got)
    return SampleTable.from_samples(samples)


# ---------------------------------------------------------------------------
# tabular sample sets

ID_COLUMNS = ("participant_id", "corpus_name", "phase_name", "chunk_index", "label")


@dataclass
class SampleTable:
    """Column-oriented set of samples: the model-ready design matrix."""

    X: np.ndarray
    y: np.ndarray
    participant_id: np.ndarray
    corpus_name: np.ndarray
    phase_name: np.ndarray
    chunk_index: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, len(FEATURE_NAMES))
        self.y = np.asarray(self.y, dtype=int)
        for name in ("participant_id", "corpus_name", "phase_name"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=object))
        self.chunk_index = np.asarray(self.chunk_index, dtype=int)
        n = len(self.X)
        if not all(len(a) == n for a in (self.y, self.participant_id, self.corpus_name, self.phase_name, self.chunk_index)):
            raise ValidationError("sample table columns differ in length")
        if n and not np.all(np.isin(self.y, (0, 1))):
            raise ValidationError("labels must be 0 or 1")

    def __len__(self):
        return len(self.X)

    @classmethod
    def empty(cls) -> "SampleTable":
        return cls(np.zeros((0, len(FEATURE_NAMES))), [], [], [], [], [])

    @classmethod
    def from_samples(cls, samples) -> "SampleTable":
        samples = list(samples)
        if not samples:
            return cls.empty()
        return cls(
            np.vstack([s.features.to_array() for s in samples]),
            [s.label for s in samples],
            [s.participant_id for s in samples],
            [s.corpus_name for s in samples],
            [s.phase_name for s in samples],
            [s.chunk_index for s in samples],
        )

    def to_samples(self) -> list:
        return [
            Sample(FeatureVector.from_array(self.X[i]), int(self.y[i]), self.participant_id[i],
                   self.corpus_name[i], self.phase_name[i], int(self.chunk_index[i]))
            for i in range(len(self))
        ]

    @property
    def groups(self) -> np.ndarray:
        """Participant keys unique across corpora."""
        return np.array([f"{c}::{p}" for c, p in zip(self.corpus_name, self.participant_id)], dtype=object)

    @property
    def corpora(self) -> list:
        return sorted(set(self.corpus_name.tolist()))

    def subset(self, mask) -> "SampleTable":
        mask = np.asarray(mask)
        return SampleTable(self.X[mask], self.y[mask], self.participant_id[mask], self.corpus_name[mask],
                           self.phase_name[mask], self.chunk_index[mask])

    def with_labels(self, y) -> "SampleTable":
        return SampleTable(self.X, y, self.participant_id, self.corpus_name, self.phase_name, self.chunk_index)

    def with_features(self, X) -> "SampleTable":
        return SampleTable(X, self.y, self.participant_id, self.corpus_name, self.phase_name, self.chunk_index)

    @classmethod
    def concat(cls, tables) -> "SampleTable":
        tables = [t for t in tables if len(t)]
        if not tables:
            return cls.empty()
        return cls(
            np.vstack([t.X for t in tables]),
            np.concatenate([t.y for t in tables]),
            np.concatenate([t.participant_id for t in tables]),
            np.concatenate([t.corpus_name for t in tables]),
            np.concatenate([t.phase_name for t in tables]),
            np.concatenate([t.chunk_index for t in tables]),
        )

    def equals(self, other: "SampleTable") -> bool:
        return (
            np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and all(np.array_equal(getattr(self, c), getattr(other, c))
                    for c in ("participant_id", "corpus_name", "phase_name", "chunk_index"))
        )

    def to_csv(self, path=None) -> str:
        """Serialize with the sixteen feature columns first; floats round-trip exactly."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(FEATURE_NAMES) + list(ID_COLUMNS))
        for i in range(len(self)):
            w.writerow([repr(float(v)) for v in self.X[i]] + [
                self.participant_id[i], self.corpus_name[i], self.phase_name[i],
                int(self.chunk_index[i]), int(self.y[i]),
            ])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def read_csv(cls, path) -> "SampleTable":
        return cls.from_csv_text(Path(path).read_text(encoding="utf-8"), source=str(path))

    @classmethod
    def from_csv_text(cls, text: str, source: str = "<text>") -> "SampleTable":
        rows = list(csv.reader(io.StringIO(text)))
        expected = list(FEATURE_NAMES) + list(ID_COLUMNS)
        if not rows or rows[0] != expected:
            raise ParseError("unexpected feature-table header", 1, source)
        X, ids = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != len(expected):
                raise ParseError(f"expected {len(expected)} columns, got {len(row)}", lineno, source)
            try:
                X.append([float(v) for v in row[:16]])
                ids.append((row[16], row[17], row[18], int(row[19]), int(row[20])))
            except ValueError:
                raise ParseError("unparsable value", lineno, source) from None
        if not X:
            return cls.empty()
        pid, corp, phase, chunk, y = zip(*ids)
        return cls(np.array(X), y, pid, corp, phase, chunk)


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray = field(repr=False)


def normalize_fit(X) -> NormStats:
    """Per-feature mean and sample standard deviation of the training rows."""
    X = np.asarray(getattr(X, "X", X), dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewSamples("normalization needs at least 2 training samples")
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1)
    mean.setflags(write=False)
    std.setflags(write=False)
    return NormStats(mean, std)


def normalize_apply(stats: NormStats, X):
    """z-score with training statistics; constant training features map to 0.

    Accepts an array or a :class:`SampleTable` and returns the same kind.
    """
    table = X if isinstance(X, SampleTable) else None
    arr = np.asarray(table.X if table is not None else X, dtype=float)
    safe = np.where(stats.std > 0, stats.std, 1.0)
    Z = np.where(stats.std > 0, (arr - stats.mean) / safe, 0.0)
    return table.with_features(Z) if table is not None else Z
