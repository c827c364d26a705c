"""
From raw ECG and EDA to one feature row
=======================================

Walks a single synthetic phase through the signal chain: band-pass and
R-peak detection on the ECG, RR intervals and their spectrum, the tonic and
phasic split of the EDA, and finally the 60 s windows averaged into 2 min
chunks.
"""

import numpy as np

from xcorpus import dsp
from xcorpus.features import phase_samples, sliding_windows
from xcorpus.ingest import PhaseSpec, SynthConfig, synth_corpus
from xcorpus.signal_model import FEATURE_NAMES

# one participant, one four-minute phase at fairly high arousal
config = SynthConfig(
    n_participants=1,
    phases=(PhaseSpec("speech", 240.0, 0.7),),
    rr_jitter_ms=15.0,
    noise_std=0.05,
    seed=11,
)
corpus, truth = synth_corpus(config)
phase, gt = corpus.phases[0], truth.phases[0]
print(f"ECG {phase.ecg.samples.size} samples at {phase.ecg.sampling_rate_hz:g} Hz, "
      f"EDA {phase.eda.samples.size} samples at {phase.eda.sampling_rate_hz:g} Hz")

#############################################################################
# Beats and RR intervals
# ----------------------
# The detector works on the 3-45 Hz band-passed trace.  Because the corpus is
# synthetic we know every true beat and can score the detector directly.

filtered = dsp.filter_ecg(phase.ecg)
beats = dsp.detect_r_peaks(filtered)
err = np.abs(beats.beat_times_s[:, None] - gt.beat_times_s[None, :]).min(axis=1)
print(f"{beats.beat_times_s.size} beats found, {gt.beat_times_s.size} planted, "
      f"median timing error {1000 * np.median(err):.1f} ms")

rr = dsp.to_rr(beats)
print(f"mean RR {rr.rr_ms.mean():.0f} ms ({60000 / rr.rr_ms.mean():.1f} bpm; planted {gt.mean_hr_bpm:.1f})")

# the synthetic RR carries 0.1 Hz (LF) and 0.3 Hz (HF) modulation
lf = dsp.band_power(rr, dsp.LF_BAND)
hf = dsp.band_power(rr, dsp.HF_BAND)
print(f"LF {lf:.1f} ms^2, HF {hf:.1f} ms^2, LF/HF {lf / hf:.2f}")

#############################################################################
# Tonic level and responses
# -------------------------

decomp = dsp.decompose_eda(dsp.filter_eda(phase.eda))
events = dsp.detect_scr(decomp.phasic)
print(f"SCL {decomp.tonic.samples.mean():.2f} uS (planted {gt.tonic_uS.mean():.2f}); "
      f"{len(events)} SCRs found, {gt.scr_times_s.size} planted")

#############################################################################
# Windows and chunks
# ------------------
# 60 s windows every 30 s; windows are averaged by the 2 min chunk their start
# falls in, so a four-minute phase gives two samples.

print("window starts:", [s for s, _ in sliding_windows(phase)])
for sample in phase_samples(phase, corpus.name):
    row = sample.features.to_array()
    print(f"chunk {sample.chunk_index}, label {sample.label}:")
    for name, v in zip(FEATURE_NAMES[:8], row[:8]):
        print(f"    {name:<18}{v:10.3f}")
