"""Signal conditioning and event detection for ECG and EDA.

ECG path: :func:`filter_ecg` -> :func:`detect_r_peaks` -> :func:`to_rr` ->
:func:`band_power`.  EDA path: :func:`filter_eda` -> :func:`decompose_eda` ->
:func:`detect_scr`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal as ss

from .errors import NoBeatsFound, SpanTooShort, TooFewBeats, TooShort, ValidationError, WrongModality
from .signal_model import Modality, SignalTrace

ECG_BAND_HZ = (3.0, 45.0)
EDA_LOWPASS_HZ = 1.0
TONIC_LOWPASS_HZ = 0.05
RR_BOUNDS_MS = (300.0, 2000.0)
RR_RESAMPLE_HZ = 4.0
HF_BAND = (0.15, 0.4)
LF_BAND = (0.04, 0.15)
REFRACTORY_S = 0.2
MWI_WINDOW_S = 0.150
REFINE_S = 0.050
SCR_MIN_AMPLITUDE_US = 0.01
SCR_MAX_RISE_S = 5.0
# slope-lobe prominence (uS/s) that splits overlapping responses
SCR_SPLIT_SLOPE = 0.02


@dataclass(frozen=True)
class BeatSeries:
    beat_times_s: np.ndarray
    duration_s: float

    def __post_init__(self):
        t = np.array(self.beat_times_s, dtype=float)
        if t.size and (t[0] < 0 or t[-1] >= self.duration_s):
            raise ValidationError("beat times must lie in [0, duration)")
        if t.size > 1 and np.any(np.diff(t) < REFRACTORY_S - 1e-9):
            raise ValidationError("beats closer than the refractory period")
        t.setflags(write=False)
        object.__setattr__(self, "beat_times_s", t)


@dataclass(frozen=True)
class RrSeries:
    rr_ms: np.ndarray
    anchor_times_s: np.ndarray

    def __post_init__(self):
        rr = np.array(self.rr_ms, dtype=float)
        anchors = np.array(self.anchor_times_s, dtype=float)
        if rr.shape != anchors.shape:
            raise ValidationError("rr_ms and anchor_times_s differ in length")
        if np.any(rr <= 0):
            raise ValidationError("RR intervals must be positive")
        rr.setflags(write=False)
        anchors.setflags(write=False)
        object.__setattr__(self, "rr_ms", rr)
        object.__setattr__(self, "anchor_times_s", anchors)

    @property
    def span_s(self) -> float:
        if len(self.anchor_times_s) < 2:
            return 0.0
        return float(self.anchor_times_s[-1] - self.anchor_times_s[0])


@dataclass(frozen=True)
class EdaDecomposition:
    tonic: SignalTrace
    phasic: SignalTrace


@dataclass(frozen=True)
class ScrEvent:
    onset_s: float
    peak_s: float
    amplitude_uS: float


def _require(trace: SignalTrace, modality: Modality, min_duration_s: float):
    if trace.modality is not modality:
        raise WrongModality(f"expected {modality.value} trace, got {trace.modality.value}")
    if trace.duration_s < min_duration_s:
        raise TooShort(f"{modality.value} trace lasts {trace.duration_s:.2f} s, need {min_duration_s} s")


def filter_ecg(trace: SignalTrace, band=ECG_BAND_HZ, order: int = 2) -> SignalTrace:
    """Zero-phase Butterworth band-pass of an ECG trace (3-45 Hz by default).

    The upper edge is clipped below Nyquist for low sampling rates.
    """
    _require(trace, Modality.ECG, 10.0)
    fs = trace.sampling_rate_hz
    hi = min(band[1], 0.45 * fs)
    sos = ss.butter(order, [band[0], hi], btype="bandpass", fs=fs, output="sos")
    x = np.asarray(trace.samples, dtype=float)
    y = ss.sosfiltfilt(sos, x - x.mean(), padlen=min(len(x) - 1, int(3 * fs)))
    return trace.replace_samples(y)


def filter_eda(trace: SignalTrace, cutoff_hz: float = EDA_LOWPASS_HZ, order: int = 4) -> SignalTrace:
    """Zero-phase Butterworth low-pass of an EDA trace (1 Hz by default)."""
    _require(trace, Modality.EDA, 10.0)
    fs = trace.sampling_rate_hz
    sos = ss.butter(order, min(cutoff_hz, 0.45 * fs), btype="lowpass", fs=fs, output="sos")
    x = np.asarray(trace.samples, dtype=float)
    y = ss.sosfiltfilt(sos, x, padlen=min(len(x) - 1, int(10 * fs)))
    return trace.replace_samples(y)


def _moving_average(x: np.ndarray, width: int) -> np.ndarray:
    width = max(int(width), 1)
    kernel = np.full(width, 1.0 / width)
    return np.convolve(x, kernel, mode="same")


def detect_r_peaks(filtered: SignalTrace, refractory_s: float = REFRACTORY_S) -> BeatSeries:
    """Pan-Tompkins style R-peak detector on a band-passed ECG.

    Derivative, squaring and a centred 150 ms moving-window integration give
    an energy envelope whose local maxima are classified as QRS or noise by
    adaptive thresholds (signal/noise peak running estimates, with search-back
    when no beat has been seen for 1.66 mean RR).  Each accepted envelope peak
    is moved to the maximum of the filtered signal within +/-50 ms.

    Raises
    ------
    NoBeatsFound
        Fewer than two beats were detected.
    """
    _require(filtered, Modality.ECG, 10.0)
    fs = filtered.sampling_rate_hz
    x = np.asarray(filtered.samples, dtype=float)
    n = len(x)

    # five-point derivative, centred
    d = np.zeros(n)
    d[2:-2] = (2 * x[4:] + x[3:-1] - x[1:-3] - 2 * x[:-4]) * (fs / 8.0)
    mwi = _moving_average(d * d, round(MWI_WINDOW_S * fs))
    if not np.any(mwi > 0):
        raise NoBeatsFound("signal carries no QRS energy")

    refractory = max(int(round(refractory_s * fs)), 1)
    cand, _ = ss.find_peaks(mwi, distance=refractory)
    if cand.size < 2:
        raise NoBeatsFound(f"only {cand.size} candidate peaks")

    learn = cand[cand < int(2 * fs)]
    if learn.size == 0:
        learn = cand[:1]
    spk = 0.25 * mwi[learn].max()
    npk = 0.5 * mwi[: int(2 * fs)].mean()

    qrs: list[int] = []
    rr_recent: list[int] = []
    last_scan = 0
    for pos, c in enumerate(cand):
        thr1 = npk + 0.25 * (spk - npk)
        peak = mwi[c]
        if peak > thr1 and (not qrs or c - qrs[-1] >= refractory):
            if qrs:
                rr_recent.append(c - qrs[-1])
            qrs.append(c)
            spk = 0.125 * peak + 0.875 * spk
            last_scan = pos + 1
        else:
            npk = 0.125 * peak + 0.875 * npk
        # search-back for a missed beat
        if len(rr_recent) >= 2 and qrs:
            rr_mean = np.mean(rr_recent[-8:])
            if c - qrs[-1] > 1.66 * rr_mean:
                thr2 = 0.5 * (npk + 0.25 * (spk - npk))
                window = [k for k in cand[last_scan:pos + 1] if refractory <= k - qrs[-1] and c - k >= refractory]
                if window:
                    best = max(window, key=lambda k: mwi[k])
                    if mwi[best] > thr2:
                        rr_recent.append(best - qrs[-1])
                        qrs.append(best)
                        spk = 0.25 * mwi[best] + 0.75 * spk
                        last_scan = int(np.searchsorted(cand, best)) + 1

    half = max(int(round(REFINE_S * fs)), 1)
    refined = []
    for c in sorted(qrs):
        lo, hi = max(c - half, 0), min(c + half + 1, n)
        i = lo + int(np.argmax(x[lo:hi]))
        if not refined or i - refined[-1] >= refractory:
            refined.append(i)
        elif x[i] > x[refined[-1]]:
            refined[-1] = i
    if len(refined) < 2:
        raise NoBeatsFound(f"only {len(refined)} beats found")
    return BeatSeries(np.asarray(refined, dtype=float) / fs, filtered.duration_s)


def to_rr(beats: BeatSeries, bounds_ms=RR_BOUNDS_MS) -> RrSeries:
    """Successive beat differences in ms, dropping implausible intervals."""
    t = np.asarray(beats.beat_times_s, dtype=float)
    if t.size < 3:
        raise TooFewBeats(f"need at least 3 beats, got {t.size}")
    rr = np.diff(t) * 1000.0
    keep = (rr >= bounds_ms[0]) & (rr <= bounds_ms[1])
    return RrSeries(rr[keep], t[1:][keep])


def _rr_periodogram(rr: RrSeries, resample_hz: float = RR_RESAMPLE_HZ):
    """One-sided Hann periodogram of the uniformly resampled RR series (ms^2/Hz)."""
    t = rr.anchor_times_s
    grid = t[0] + np.arange(int(np.floor((t[-1] - t[0]) * resample_hz)) + 1) / resample_hz
    x = np.interp(grid, t, rr.rr_ms)
    x = x - x.mean()
    w = np.hanning(len(x))
    spec = np.fft.rfft(x * w)
    psd = (np.abs(spec) ** 2) / (resample_hz * np.sum(w * w))
    if len(x) % 2 == 0:
        psd[1:-1] *= 2.0
    else:
        psd[1:] *= 2.0
    freqs = np.fft.rfftfreq(len(x), d=1.0 / resample_hz)
    return freqs, psd


def band_power(rr: RrSeries, band, min_span_s: float = 30.0) -> float:
    """Power of the RR series inside ``[band[0], band[1])`` Hz, in ms^2.

    The RR series is linearly interpolated to 4 Hz, mean-subtracted,
    Hann-windowed and transformed; the periodogram is summed over the bins in
    the half-open band times the bin width, so adjacent bands add exactly.
    """
    f_lo, f_hi = float(band[0]), float(band[1])
    if not (0 < f_lo < f_hi < 2):
        raise ValueError(f"band must satisfy 0 < lo < hi < 2 Hz, got {band}")
    if rr.span_s < min_span_s:
        raise SpanTooShort(f"RR series spans {rr.span_s:.1f} s, need {min_span_s} s")
    freqs, psd = _rr_periodogram(rr)
    df = freqs[1] - freqs[0]
    mask = (freqs >= f_lo) & (freqs < f_hi)
    return float(np.sum(psd[mask]) * df)


def total_power(rr: RrSeries) -> float:
    """Power over all non-zero frequency bins (ms^2)."""
    freqs, psd = _rr_periodogram(rr)
    return float(np.sum(psd[1:]) * (freqs[1] - freqs[0]))


def decompose_eda(filtered: SignalTrace, cutoff_hz: float = TONIC_LOWPASS_HZ) -> EdaDecomposition:
    """Split EDA into tonic (0.05 Hz zero-phase low-pass) and phasic residual."""
    _require(filtered, Modality.EDA, 30.0)
    fs = filtered.sampling_rate_hz
    x = np.asarray(filtered.samples, dtype=float)
    sos = ss.butter(2, cutoff_hz, btype="lowpass", fs=fs, output="sos")
    tonic = ss.sosfiltfilt(sos, x, padlen=min(len(x) - 1, int(round(3 / cutoff_hz * fs))))
    phasic = x - tonic
    return EdaDecomposition(filtered.replace_samples(tonic), filtered.replace_samples(phasic))


def detect_scr(
    phasic: SignalTrace,
    min_amplitude: float = SCR_MIN_AMPLITUDE_US,
    max_rise_s: float = SCR_MAX_RISE_S,
    split_slope: Optional[float] = SCR_SPLIT_SLOPE,
) -> list:
    """Trough-to-peak SCR detection on the phasic component.

    Every local maximum is paired with the lowest point since the preceding
    local maximum.  Pairs rising less than ``min_amplitude`` or over longer
    than ``max_rise_s`` (the slow recovery from the undershoot the tonic
    filter leaves after a response) are discarded.

    A response that starts while another is still rising leaves no trough of
    its own, only a second lobe in the slope.  With ``split_slope`` set, a
    rise whose slope has several lobes of at least that prominence (uS/s) is
    cut at the slope minima between them, and every piece rising at least
    ``min_amplitude`` becomes an event.  ``None`` keeps one event per rise.
    """
    fs = phasic.sampling_rate_hz
    x = np.asarray(phasic.samples, dtype=float)
    if x.size < 3:
        return []
    peaks, _ = ss.find_peaks(x)
    slope = np.gradient(x) * fs
    max_rise = max_rise_s * fs
    events = []
    prev = 0
    for p in peaks:
        onset = prev + int(np.argmin(x[prev:p + 1]))
        prev = p
        if onset >= p or x[p] - x[onset] < min_amplitude or p - onset > max_rise:
            continue
        starts = [onset]
        if split_slope is not None:
            seg = slope[onset:p + 1]
            lobes, _ = ss.find_peaks(seg, prominence=split_slope)
            for a, b in zip(lobes[:-1], lobes[1:]):
                cut = onset + a + int(np.argmin(seg[a:b + 1]))
                if x[cut] - x[starts[-1]] >= min_amplitude:
                    starts.append(cut)
            if len(starts) > 1 and x[p] - x[starts[-1]] < min_amplitude:
                starts.pop()
        ends = starts[1:] + [p]
        for a, b in zip(starts, ends):
            events.append(ScrEvent(a / fs, b / fs, float(x[b] - x[a])))
    return events
