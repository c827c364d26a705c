"""Corpus I/O and synthetic corpus generation.

On disk a corpus is a JSON manifest plus one two-column CSV per trace::

    time_s,value
    0,0.0123
    0.004,0.0131
    ...

Manifest layout (``format_version`` 1)::

    {
      "format_version": 1,
      "corpus_name": "APD",
      "label_scheme": "SUDS",
      "participants": [
        {"participant_id": "p01",
         "phases": [
           {"phase_name": "baseline",
            "ecg": {"file": "p01/baseline_ecg.csv", "rate_hz": 250},
            "eda": {"file": "p01/baseline_eda.csv", "rate_hz": 50},
            "self_report": {"score": 20}}          # or {"series": [...]}
         ]}
      ]
    }

File paths are relative to the manifest's directory.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidConfig, MissingFile, ParseError, RateMissing, SchemeMismatch, ValidationError
from .signal_model import Corpus, LabelScheme, Modality, PhaseRecord, RawReport, SignalTrace

FORMAT_VERSION = 1
CSV_HEADER = "time_s,value"
TIME_TOLERANCE_S = 1e-6

# Bateman kernel time constants (s)
SCR_RISE_TAU = 0.75
SCR_DECAY_TAU = 2.0
SCR_MIN_AMPLITUDE = 0.05
HF_MOD_HZ = 0.3
LF_MOD_HZ = 0.1


# ---------------------------------------------------------------------------
# CSV traces


def write_trace_csv(path, trace: SignalTrace) -> None:
    times = np.arange(len(trace.samples)) / trace.sampling_rate_hz
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.writelines(f"{t!r},{v!r}\n" for t, v in zip(times.tolist(), trace.samples.tolist()))


def _locate_bad_line(lines, path):
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 columns, got {len(parts)}", lineno, path)
        try:
            t, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"unparsable row {line!r}", lineno, path) from None
        if not (math.isfinite(t) and math.isfinite(v)):
            raise ParseError(f"non-finite value in row {line!r}", lineno, path)
    raise ParseError("malformed CSV", None, path)


def read_trace_csv(path, rate_hz: float, modality: Modality) -> SignalTrace:
    """Read a ``time_s,value`` CSV, checking the time axis against ``rate_hz``."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"trace file not found: {path}")
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ParseError(f"header must be {CSV_HEADER!r}", 1, path)
    body = lines[1:]
    if not body:
        raise ParseError("trace has no rows", 2, path)
    try:
        data = np.loadtxt(body, delimiter=",", dtype=float, ndmin=2)
    except ValueError:
        _locate_bad_line(lines, path)
    if data.shape[1] != 2 or not np.all(np.isfinite(data)):
        _locate_bad_line(lines, path)
    t = data[:, 0]
    expected = np.arange(len(t)) / float(rate_hz)
    off = np.abs(t - t[0] - expected)
    if np.any(off > TIME_TOLERANCE_S):
        bad = int(np.argmax(off > TIME_TOLERANCE_S))
        raise ParseError(f"time axis deviates from a {rate_hz} Hz grid", bad + 2, path)
    return SignalTrace(data[:, 1], rate_hz, modality)


# ---------------------------------------------------------------------------
# manifests


def _report_from_json(entry, scheme: LabelScheme) -> RawReport:
    if "series" in entry:
        return RawReport(scheme, series=np.asarray(entry["series"], dtype=float))
    if "score" in entry:
        return RawReport(scheme, scalar_score=float(entry["score"]))
    raise ValidationError("self_report needs 'score' or 'series'")


def _report_to_json(report: RawReport) -> dict:
    if report.series is not None:
        return {"series": report.series.tolist()}
    return {"score": report.scalar_score}


def _phase_scheme(entry) -> Optional[str]:
    return entry.get("self_report", {}).get("scheme")


def load_corpus(manifest_path) -> Corpus:
    """Load a corpus from its manifest; traces are returned unfiltered.

    Raises
    ------
    MissingFile
        The manifest or a referenced trace file does not exist.
    ParseError
        The manifest is not valid JSON or a CSV row does not parse.
    SchemeMismatch
        A phase declares a self-report scheme other than the corpus scheme.
    RateMissing
        A trace entry has no positive ``rate_hz``.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MissingFile(f"manifest not found: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, manifest_path) from None
    try:
        name = doc["corpus_name"]
        scheme = LabelScheme(doc["label_scheme"])
        participants = doc["participants"]
    except (KeyError, ValueError) as exc:
        raise ParseError(f"manifest field problem: {exc}", None, manifest_path) from None
    root = manifest_path.parent
    phases = []
    for part in participants:
        pid = str(part["participant_id"])
        for entry in part["phases"]:
            declared = _phase_scheme(entry)
            if declared is not None and declared != scheme.value:
                raise SchemeMismatch(f"{pid}/{entry['phase_name']} declares {declared}, corpus uses {scheme.value}")
            traces = {}
            for key, mod in (("ecg", Modality.ECG), ("eda", Modality.EDA)):
                spec = entry.get(key)
                if spec is None:
                    raise ValidationError(f"{pid}/{entry['phase_name']} lacks a {key} entry")
                rate = spec.get("rate_hz")
                if rate is None or not float(rate) > 0:
                    raise RateMissing(f"{pid}/{entry['phase_name']} {key} has no positive rate_hz")
                traces[mod] = read_trace_csv(root / spec["file"], float(rate), mod)
            report = _report_from_json(entry["self_report"], scheme)
            phases.append(PhaseRecord(pid, str(entry["phase_name"]), traces, report))
    return Corpus(name, scheme, phases)


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def export_corpus(corpus: Corpus, ground_truth: Optional["GroundTruth"], directory) -> Path:
    """Write ``corpus`` in the canonical format; returns the manifest path.

    When ``ground_truth`` is given it is written next to the manifest as
    ``ground_truth.json``.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        participants = []
        for pid in corpus.participant_ids:
            pdir = _safe(pid)
            (directory / pdir).mkdir(exist_ok=True)
            entries = []
            for ph in corpus.phases_of(pid):
                entry = {"phase_name": ph.phase_name}
                for key, mod in (("ecg", Modality.ECG), ("eda", Modality.EDA)):
                    rel = f"{pdir}/{_safe(ph.phase_name)}_{key}.csv"
                    write_trace_csv(directory / rel, ph.traces[mod])
                    entry[key] = {"file": rel, "rate_hz": ph.traces[mod].sampling_rate_hz}
                entry["self_report"] = _report_to_json(ph.self_report)
                entries.append(entry)
            participants.append({"participant_id": pid, "phases": entries})
        doc = {
            "format_version": FORMAT_VERSION,
            "corpus_name": corpus.name,
            "label_scheme": corpus.label_scheme.value,
            "participants": participants,
        }
        manifest = directory / "manifest.json"
        manifest.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        if ground_truth is not None:
            (directory / "ground_truth.json").write_text(
                json.dumps(ground_truth.to_dict()) + "\n", encoding="utf-8"
            )
    except OSError as exc:
        raise IOError(f"could not export corpus to {directory}: {exc}") from exc
    return manifest


# ---------------------------------------------------------------------------
# synthetic corpora


@dataclass(frozen=True)
class PhaseSpec:
    name: str
    duration_s: float
    arousal: float


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of a synthetic corpus.

    Only the fields up to ``seed`` are required for the physiological model;
    the remainder shape participant variability, self-reports and sampling.
    """

    n_participants: int
    phases: tuple
    mean_hr_bpm: float = 65.0
    hr_arousal_gain: float = 20.0
    rsa_depth_ms: float = 30.0
    mayer_depth_ms: float = 20.0
    scr_base_rate_per_min: float = 2.0
    scr_arousal_gain: float = 4.0
    noise_std: float = 0.0
    seed: int = 0
    corpus_name: str = "SYNTH"
    label_scheme: LabelScheme = LabelScheme.SUDS
    ecg_rate_hz: float = 250.0
    eda_rate_hz: float = 50.0
    rr_jitter_ms: float = 0.0
    scl_base_uS: float = 2.0
    scl_arousal_gain: float = 1.0
    scl_drift_uS: float = 0.0
    eda_noise_std: float = 0.0
    scr_amplitude_mean_uS: float = 0.3
    participant_hr_sd: float = 0.0
    participant_scl_sd: float = 0.0
    arousal_jitter: float = 0.0
    report_noise: float = 0.0

    def __post_init__(self):
        phases = tuple(p if isinstance(p, PhaseSpec) else PhaseSpec(*p) if not isinstance(p, dict) else PhaseSpec(**p)
                       for p in self.phases)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "label_scheme", LabelScheme(self.label_scheme))
        if self.n_participants < 0:
            raise InvalidConfig("n_participants must be >= 0")
        for p in phases:
            if p.duration_s < 120:
                raise InvalidConfig(f"phase {p.name!r} lasts {p.duration_s} s; at least 120 s required")
            if not 0.0 <= p.arousal <= 1.0:
                raise InvalidConfig(f"phase {p.name!r} arousal {p.arousal} outside [0, 1]")
        if len({p.name for p in phases}) != len(phases):
            raise InvalidConfig("phase names must be unique")
        for name in ("hr_arousal_gain", "rsa_depth_ms", "mayer_depth_ms", "scr_base_rate_per_min",
                     "scr_arousal_gain", "scl_arousal_gain", "noise_std", "rr_jitter_ms", "eda_noise_std",
                     "participant_hr_sd", "participant_scl_sd", "arousal_jitter", "report_noise", "scl_drift_uS"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be >= 0")
        if self.mean_hr_bpm <= 0 or self.ecg_rate_hz <= 0 or self.eda_rate_hz <= 0:
            raise InvalidConfig("mean_hr_bpm and sampling rates must be positive")
        if self.scr_amplitude_mean_uS < SCR_MIN_AMPLITUDE:
            raise InvalidConfig(f"scr_amplitude_mean_uS must be >= {SCR_MIN_AMPLITUDE}")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown SynthConfig fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["label_scheme"] = self.label_scheme.value
        d["phases"] = [asdict(p) for p in self.phases]
        return d


@dataclass
class PhaseTruth:
    participant_id: str
    phase_name: str
    arousal: float
    label: int
    mean_hr_bpm: float
    beat_times_s: np.ndarray
    rr_ms: np.ndarray
    scr_times_s: np.ndarray
    scr_amplitudes_uS: np.ndarray
    tonic_uS: np.ndarray
    tonic_rate_hz: float
    duration_s: float

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseTruth":
        arrays = ("beat_times_s", "rr_ms", "scr_times_s", "scr_amplitudes_uS", "tonic_uS")
        return cls(**{k: (np.asarray(v, dtype=float) if k in arrays else v) for k, v in d.items()})


@dataclass
class GroundTruth:
    corpus_name: str
    phases: list = field(default_factory=list)

    def get(self, participant_id: str, phase_name: str) -> PhaseTruth:
        for p in self.phases:
            if p.participant_id == participant_id and p.phase_name == phase_name:
                return p
        raise KeyError((participant_id, phase_name))

    def to_dict(self) -> dict:
        return {"corpus_name": self.corpus_name, "phases": [p.to_dict() for p in self.phases]}

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(d["corpus_name"], [PhaseTruth.from_dict(p) for p in d["phases"]])

    @classmethod
    def load(cls, path) -> "GroundTruth":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def __eq__(self, other):
        if not isinstance(other, GroundTruth):
            return NotImplemented
        return json.dumps(self.to_dict()) == json.dumps(other.to_dict())


def _qrs_template(dt: np.ndarray) -> np.ndarray:
    """ECG complex around an R peak at dt = 0 (mV); symmetric QRS, later T wave."""
    g = lambda mu, sigma, a: a * np.exp(-0.5 * ((dt - mu) / sigma) ** 2)  # noqa: E731
    return (
        g(0.0, 0.010, 1.0)
        + g(-0.030, 0.010, -0.15)
        + g(0.030, 0.010, -0.15)
        + g(-0.18, 0.025, 0.10)
        + g(0.26, 0.045, 0.25)
    )


def bateman(t: np.ndarray, amplitude: float, rise_tau: float = SCR_RISE_TAU, decay_tau: float = SCR_DECAY_TAU):
    """Bi-exponential SCR shape starting at t = 0 with peak height ``amplitude``."""
    t_peak = math.log(decay_tau / rise_tau) * rise_tau * decay_tau / (decay_tau - rise_tau)
    norm = math.exp(-t_peak / decay_tau) - math.exp(-t_peak / rise_tau)
    out = np.where(t > 0, np.exp(-np.clip(t, 0, None) / decay_tau) - np.exp(-np.clip(t, 0, None) / rise_tau), 0.0)
    return amplitude * out / norm


def beat_times_for(duration_s, base_rr_ms, rsa_depth_ms, mayer_depth_ms, jitter_ms, rng, first_beat_s=0.5):
    """Beat times with RR_n = base + HF/LF sinusoidal modulation + jitter."""
    times = []
    t = first_beat_s
    while t < duration_s:
        times.append(t)
        rr = (
            base_rr_ms
            + rsa_depth_ms * math.sin(2 * math.pi * HF_MOD_HZ * t)
            + mayer_depth_ms * math.sin(2 * math.pi * LF_MOD_HZ * t)
        )
        if jitter_ms > 0:
            rr += jitter_ms * rng.standard_normal()
        t = t + max(rr, 250.0) / 1000.0
    return np.asarray(times)


def render_ecg(beat_times, duration_s, rate_hz, noise_std, rng) -> np.ndarray:
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    ecg = np.zeros(n)
    half = int(0.5 * rate_hz)
    for bt in beat_times:
        c = int(round(bt * rate_hz))
        lo, hi = max(c - half, 0), min(c + half + 1, n)
        ecg[lo:hi] += _qrs_template(t[lo:hi] - bt)
    if noise_std > 0:
        ecg += noise_std * rng.standard_normal(n)
    return ecg


def _report_for(scheme: LabelScheme, arousal: float, duration_s: float, noise: float, rng) -> RawReport:
    a = float(np.clip(arousal + (noise * rng.standard_normal() if noise > 0 else 0.0), 0.0, 1.0))
    if scheme is LabelScheme.SUDS:
        return RawReport(scheme, scalar_score=round(100.0 * a, 1))
    if scheme is LabelScheme.STAI6:
        return RawReport(scheme, scalar_score=float(round(6 + 18 * a)))
    # joystick trace at 1 Hz, centred so that arousal 0.5 maps to 5
    level = 5.0 + 8.0 * (a - 0.5)
    series = np.clip(level + 0.3 * rng.standard_normal(int(duration_s)), 1.0, 10.0)
    return RawReport(scheme, series=np.round(series, 3))


def synth_corpus(config: SynthConfig):
    """Generate a corpus with exactly known beats, SCR events and tonic level.

    Returns ``(corpus, ground_truth)``.  Equal configs give bit-identical output.
    """
    if not isinstance(config, SynthConfig):
        raise InvalidConfig("synth_corpus expects a SynthConfig")
    rng = np.random.default_rng(config.seed)
    phases = []
    truths = []
    width = max(2, len(str(config.n_participants)))
    for i in range(config.n_participants):
        pid = f"p{i + 1:0{width}d}"
        hr_offset = config.participant_hr_sd * rng.standard_normal() if config.participant_hr_sd > 0 else 0.0
        scl_offset = config.participant_scl_sd * rng.standard_normal() if config.participant_scl_sd > 0 else 0.0
        for spec in config.phases:
            arousal = spec.arousal
            if config.arousal_jitter > 0:
                arousal = float(np.clip(arousal + config.arousal_jitter * rng.standard_normal(), 0.0, 1.0))
            mean_hr = max(config.mean_hr_bpm + hr_offset + config.hr_arousal_gain * arousal, 30.0)
            base_rr = 60000.0 / mean_hr
            beats = beat_times_for(spec.duration_s, base_rr, config.rsa_depth_ms, config.mayer_depth_ms,
                                   config.rr_jitter_ms, rng)
            # ECG rendered on integer sample grid; drop beats whose R peak falls off the end
            n_ecg = int(round(spec.duration_s * config.ecg_rate_hz))
            beats = beats[beats < (n_ecg - 1) / config.ecg_rate_hz]
            ecg = render_ecg(beats, spec.duration_s, config.ecg_rate_hz, config.noise_std, rng)

            n_eda = int(round(spec.duration_s * config.eda_rate_hz))
            te = np.arange(n_eda) / config.eda_rate_hz
            level = max(config.scl_base_uS + scl_offset + config.scl_arousal_gain * arousal, 0.1)
            tonic = level + config.scl_drift_uS * np.sin(2 * np.pi * te / (2.0 * spec.duration_s))
            rate = config.scr_base_rate_per_min + config.scr_arousal_gain * arousal
            n_events = rng.poisson(rate * spec.duration_s / 60.0)
            scr_times = np.sort(rng.uniform(0.0, spec.duration_s, n_events))
            amps = SCR_MIN_AMPLITUDE + rng.exponential(config.scr_amplitude_mean_uS - SCR_MIN_AMPLITUDE, n_events)
            eda = tonic.copy()
            for t0, a in zip(scr_times, amps):
                eda += bateman(te - t0, a)
            if config.eda_noise_std > 0:
                eda += config.eda_noise_std * rng.standard_normal(n_eda)

            report = _report_for(config.label_scheme, arousal, spec.duration_s, config.report_noise, rng)
            phases.append(PhaseRecord(
                pid, spec.name,
                {Modality.ECG: SignalTrace(ecg, config.ecg_rate_hz, Modality.ECG),
                 Modality.EDA: SignalTrace(eda, config.eda_rate_hz, Modality.EDA)},
                report,
            ))
            truths.append(PhaseTruth(
                participant_id=pid,
                phase_name=spec.name,
                arousal=arousal,
                label=int(arousal >= 0.5),
                mean_hr_bpm=mean_hr,
                beat_times_s=beats,
                rr_ms=np.diff(beats) * 1000.0,
                scr_times_s=scr_times,
                scr_amplitudes_uS=amps,
                tonic_uS=tonic,
                tonic_rate_hz=config.eda_rate_hz,
                duration_s=float(spec.duration_s),
            ))
    corpus = Corpus(config.corpus_name, config.label_scheme, phases)
    return corpus, GroundTruth(config.corpus_name, truths)


def load_synth_configs(path) -> list:
    """Read one or several SynthConfigs from a JSON file.

    Accepts a single config object, a list, or ``{"corpora": [...]}``.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise MissingFile(f"config not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: {exc}") from None
    if isinstance(doc, dict) and "corpora" in doc:
        doc = doc["corpora"]
    if isinstance(doc, dict):
        doc = [doc]
    return [SynthConfig.from_dict(d) for d in doc]


