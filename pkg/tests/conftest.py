import numpy as np
import pytest

from xcorpus.features import SampleTable, extract_corpus
from xcorpus.ingest import PhaseSpec, SynthConfig, synth_corpus
from xcorpus.ml import GridSpec
from xcorpus.signal_model import FEATURE_NAMES

# one cell per kind keeps protocol tests fast
TINY_GRID = GridSpec({
    "SVM_RBF": {"C": [1.0], "gamma": [0.1]},
    "RANDOM_FOREST": {"n_estimators": [25], "max_depth": [4]},
    "GBDT_LEAFWISE": {"n_estimators": [25], "num_leaves": [4], "learning_rate": [0.2]},
    "GBDT_DEPTHWISE": {"n_estimators": [25], "max_depth": [2], "learning_rate": [0.2]},
})

PHASES = (PhaseSpec("rest", 240.0, 0.2), PhaseSpec("task", 240.0, 0.8))


def small_config(**kw):
    base = dict(n_participants=2, phases=PHASES, seed=3, corpus_name="S")
    base.update(kw)
    return SynthConfig(**base)


@pytest.fixture(scope="session")
def small_corpus():
    return synth_corpus(small_config())


@pytest.fixture(scope="session")
def small_table(small_corpus):
    return extract_corpus(small_corpus[0])


def make_table(n_participants=10, per=8, seed=0, corpus="A", signal=2.0, shuffle=False):
    """Feature table whose first column carries the label with ``signal`` separation."""
    rng = np.random.default_rng(seed)
    n = n_participants * per
    y = np.tile(np.repeat([0, 1], per // 2), n_participants)
    X = rng.normal(size=(n, len(FEATURE_NAMES)))
    X[:, 0] += signal * y
    if shuffle:
        y = rng.permutation(y)
    pid = np.repeat([f"p{i:02d}" for i in range(n_participants)], per)
    phase = np.tile([f"ph{j % 4}" for j in range(per)], n_participants)
    chunk = np.tile(np.arange(per) // 4, n_participants)
    return SampleTable(X, y, pid, [corpus] * n, phase, chunk)


def truncated_corpus(corpus, seconds):
    """Copy of ``corpus`` with every phase cut to its first ``seconds``."""
    from xcorpus.signal_model import Corpus, PhaseRecord

    phases = [
        PhaseRecord(
            ph.participant_id,
            ph.phase_name,
            {m: t.slice_time(0.0, seconds) for m, t in ph.traces.items()},
            ph.self_report,
        )
        for ph in corpus.phases
    ]
    return Corpus(corpus.name, corpus.label_scheme, phases)


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
