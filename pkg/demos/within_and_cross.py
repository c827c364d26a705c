"""
Within-corpus and cross-corpus evaluation
=========================================

Two small synthetic corpora share one latent arousal driver but report it on
different questionnaires.  Models trained on one are scored on the other and
compared with 5-fold participant-grouped evaluation inside each corpus.

The bundled ``demo`` config runs the full three-corpus version of this in
about a minute: ``xcorpus report --config demo --out demo_out``.
"""

from xcorpus.eval import EvalConfig, cross_corpus, render_report, within_corpus
from xcorpus.features import extract_corpus
from xcorpus.ingest import PhaseSpec, SynthConfig, synth_corpus
from xcorpus.labels import class_balance
from xcorpus.ml import GridSpec

common = dict(n_participants=8, rr_jitter_ms=10.0, participant_hr_sd=4.0, report_noise=0.05)
anxiety = SynthConfig(
    phases=(PhaseSpec("baseline", 240.0, 0.2), PhaseSpec("speech", 240.0, 0.8)),
    label_scheme="SUDS", corpus_name="ANX", seed=1, **common,
)
stress = SynthConfig(
    phases=(PhaseSpec("baseline", 240.0, 0.25), PhaseSpec("stress", 240.0, 0.75)),
    label_scheme="STAI6", corpus_name="STR", seed=2, mean_hr_bpm=70.0, **common,
)

tables = {}
for cfg in (anxiety, stress):
    corpus, _ = synth_corpus(cfg)
    tables[cfg.corpus_name] = extract_corpus(corpus)
    n_pos, n_neg, _ = class_balance(tables[cfg.corpus_name].y)
    print(f"{cfg.corpus_name}: {n_pos} positive / {n_neg} negative samples")

#############################################################################
# A small grid keeps the run short; the library default grid is larger.

grid = GridSpec({
    "SVM_RBF": {"C": [1.0, 10.0], "gamma": [0.01, 0.1]},
    "RANDOM_FOREST": {"n_estimators": [100], "max_depth": [3]},
    "GBDT_LEAFWISE": {"n_estimators": [100], "num_leaves": [3], "learning_rate": [0.1]},
    "GBDT_DEPTHWISE": {"n_estimators": [100], "max_depth": [3], "learning_rate": [0.1]},
})
config = EvalConfig(grid=grid)
seed = 3

within = [within_corpus(t, seed, config) for t in tables.values()]
print(render_report(within, title="Within-corpus"))

cross = [
    cross_corpus(tables["ANX"], tables["STR"], seed, config),
    cross_corpus(tables["STR"], tables["ANX"], seed, config),
]
print(render_report(cross, title="Cross-corpus (train/test)"))
