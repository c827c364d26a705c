"""Evaluation protocols, the random baseline and table rendering.

Three protocols are supported: participant-grouped k-fold inside one corpus,
train-on-one/test-on-another across corpora, and leave-one-corpus-out over
three corpora.  Every fitted quantity (normalization statistics, SMOTE,
hyperparameter search, the models) comes from the training partition alone;
:func:`fit_pipeline` only ever receives that partition.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    Empty,
    HeldOutNotFound,
    MinorityTooSmall,
    ProtocolError,
    SameCorpus,
    SingleClass,
    SingleClassTestForAuc,
    TooFewParticipants,
    ValidationError,
)
from .features import NormStats, SampleTable, normalize_apply, normalize_fit
from .metrics import accuracy, roc_auc
from .ml import (
    DEFAULT_GRID,
    KINDS,
    ROW_NAMES,
    SMOTE_TRIGGER,
    ClassifierKind,
    GridSpec,
    grid_search,
    participant_folds,
    predict_proba,
    smote,
    train,
)
from .seeding import derive_seed

log = logging.getLogger(__name__)

__all__ = [
    "accuracy", "roc_auc", "random_baseline", "ProtocolKind", "Protocol", "EvalConfig",
    "FittedPipeline", "fit_pipeline", "protocol_splits", "EvalReport", "within_corpus",
    "cross_corpus", "loco", "render_report", "parse_report_csv", "ROW_ORDER", "split_by_corpus",
]

ROW_ORDER = ("Random",) + tuple(ROW_NAMES[k] for k in KINDS) + ("Ensemble",)


def random_baseline(labels, seed: int) -> tuple:
    """Accuracy and AUC of a coin-flip classifier.

    Probabilities are drawn from U(0, 1) and the decision is ``p >= 0.5``,
    which is a fair Bernoulli draw.  The AUC is ``nan`` for single-class
    labels.  Returns ``(accuracy, auc)``.
    """
    labels = np.asarray(labels, dtype=int)
    if labels.size == 0:
        raise Empty("no labels")
    p = np.random.default_rng(seed).random(labels.size)
    acc = accuracy((p >= 0.5).astype(int), labels)
    auc = roc_auc(p, labels) if 0 < labels.sum() < labels.size else float("nan")
    return acc, auc


# ---------------------------------------------------------------------------
# protocols


class ProtocolKind(str, enum.Enum):
    WITHIN = "within"
    CROSS = "cross"
    LOCO = "loco"


@dataclass(frozen=True)
class Protocol:
    """Which corpora train and which corpus is tested.

    For WITHIN ``train`` and ``test`` name the same corpus and ``k`` is the
    fold count.
    """

    kind: ProtocolKind
    train: tuple
    test: str
    k: int = 5

    def __post_init__(self):
        object.__setattr__(self, "kind", ProtocolKind(self.kind))
        object.__setattr__(self, "train", tuple(self.train))
        if self.kind is ProtocolKind.CROSS and self.test in self.train:
            raise SameCorpus(f"cross-corpus train and test are both {self.test!r}")
        if self.kind is ProtocolKind.LOCO and self.test in self.train:
            raise ProtocolError(f"held-out corpus {self.test!r} is also in the pool")

    @property
    def column(self) -> str:
        """Column-group label used in rendered tables."""
        if self.kind is ProtocolKind.WITHIN:
            return self.test
        if self.kind is ProtocolKind.CROSS:
            return f"{self.train[0]}/{self.test}"
        return f"Test: {self.test}"

    @property
    def descriptor(self) -> str:
        if self.kind is ProtocolKind.WITHIN:
            return f"within:{self.test}:k={self.k}"
        return f"{self.kind.value}:{'+'.join(self.train)}->{self.test}"


@dataclass(frozen=True)
class EvalConfig:
    grid: GridSpec = DEFAULT_GRID
    inner_folds: int = 3
    k: int = 5
    stratify: bool = False
    smote_trigger: float = SMOTE_TRIGGER
    ensemble_mode: str = "mean"
    jobs: int = 1


@dataclass
class FittedPipeline:
    """Everything learned from one training partition."""

    stats: NormStats
    models: dict
    hyperparams: dict
    n_train: int

    def predict(self, X, mode: str = "mean") -> dict:
        """Per-row-name probabilities, including the ensemble."""
        Z = normalize_apply(self.stats, np.asarray(X, dtype=float))
        probs = {ROW_NAMES[k]: predict_proba(self.models[k], Z) for k in KINDS}
        stack = np.vstack([probs[ROW_NAMES[k]] for k in KINDS])
        if mode == "mean":
            probs["Ensemble"] = stack.mean(axis=0)
        elif mode == "vote":
            probs["Ensemble"] = (stack >= 0.5).mean(axis=0)
        else:
            raise ValidationError(f"unknown ensemble mode {mode!r}")
        return probs


def _fit_kind(kind, Z, y, groups, Zs, ys, config, seed):
    hp, _ = grid_search(kind, Z, y, groups, config.grid, config.inner_folds,
                        derive_seed(seed, "grid", kind.value), config.smote_trigger)
    return kind, hp, train(kind, Zs, ys, hp, derive_seed(seed, "train", kind.value))


def fit_pipeline(train_table: SampleTable, seed: int, config: EvalConfig = EvalConfig()) -> FittedPipeline:
    """Normalize, oversample, tune and train the four classifiers on one partition."""
    if len(set(train_table.y.tolist())) < 2:
        raise SingleClass("training partition contains a single class")
    stats = normalize_fit(train_table.X)
    Z = normalize_apply(stats, train_table.X)
    y = train_table.y
    groups = train_table.groups
    try:
        Zs, ys = smote(Z, y, seed=derive_seed(seed, "smote"), trigger=config.smote_trigger)
    except MinorityTooSmall:
        log.warning("minority class too small for SMOTE; training on the imbalanced set")
        Zs, ys = Z, y
    if config.jobs > 1:
        from joblib import Parallel, delayed

        out = Parallel(n_jobs=config.jobs)(
            delayed(_fit_kind)(k, Z, y, groups, Zs, ys, config, seed) for k in KINDS)
    else:
        out = [_fit_kind(k, Z, y, groups, Zs, ys, config, seed) for k in KINDS]
    return FittedPipeline(stats, {k: m for k, _, m in out}, {k: hp for k, hp, _ in out}, len(train_table))


def split_by_corpus(tables) -> dict:
    if isinstance(tables, SampleTable):
        tables = [tables]
    merged = SampleTable.concat(list(tables))
    return {c: merged.subset(merged.corpus_name == c) for c in merged.corpora}


def protocol_splits(protocol: Protocol, tables, seed: int, stratify: bool = False) -> list:
    """Return the ``(train, test)`` table pairs a protocol evaluates."""
    corpora = split_by_corpus(tables)
    if protocol.test not in corpora:
        raise HeldOutNotFound(f"corpus {protocol.test!r} not found; have {sorted(corpora)}")
    test_all = corpora[protocol.test]
    if protocol.kind is ProtocolKind.WITHIN:
        n_groups = len(set(test_all.participant_id.tolist()))
        if n_groups < protocol.k:
            raise TooFewParticipants(f"{protocol.test} has {n_groups} participants; {protocol.k} folds need as many")
        folds = participant_folds(test_all.participant_id, protocol.k, derive_seed(seed, "folds", protocol.test),
                                  labels=test_all.y if stratify else None)
        out = []
        for held in folds:
            mask = np.isin(test_all.participant_id, held)
            out.append((test_all.subset(~mask), test_all.subset(mask)))
        return out
    missing = [c for c in protocol.train if c not in corpora]
    if missing:
        raise HeldOutNotFound(f"training corpus {missing[0]!r} not found")
    return [(SampleTable.concat([corpora[c] for c in protocol.train]), test_all)]


# ---------------------------------------------------------------------------
# reports


@dataclass
class EvalReport:
    """Accuracy/AUC per table row for one protocol cell."""

    protocol: Protocol
    seed: int
    rows: dict
    n_train: int
    n_test: int
    hyperparams: list = field(default_factory=list)

    @property
    def column(self) -> str:
        return self.protocol.column

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol.descriptor,
            "column": self.column,
            "seed": self.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "rows": {name: list(v) for name, v in self.rows.items()},
            "hyperparams": [{k.value: hp for k, hp in fold.items()} for fold in self.hyperparams],
        }


def _scores(probs, y):
    acc = accuracy((probs >= 0.5).astype(int), y)
    auc = roc_auc(probs, y) if 0 < y.sum() < y.size else float("nan")
    return acc, auc


def run_protocol(protocol: Protocol, tables, seed: int, config: EvalConfig = EvalConfig()) -> EvalReport:
    splits = protocol_splits(protocol, tables, seed, config.stratify)
    per_fold = {name: [] for name in ROW_ORDER[1:]}
    hps = []
    n_train = 0
    for i, (tr, te) in enumerate(splits):
        fold_seed = derive_seed(seed, protocol.descriptor, i)
        fitted = fit_pipeline(tr, fold_seed, config)
        probs = fitted.predict(te.X, config.ensemble_mode)
        for name in per_fold:
            per_fold[name].append(_scores(probs[name], te.y))
        hps.append(fitted.hyperparams)
        n_train += len(tr)
    # the random row depends only on the test corpus, so it matches across tables
    test_y = split_by_corpus(tables)[protocol.test].y
    rows = {"Random": random_baseline(test_y, derive_seed(seed, "random", protocol.test))}
    with np.errstate(all="ignore"):
        for name, vals in per_fold.items():
            arr = np.array(vals, dtype=float)
            acc = float(np.mean(arr[:, 0]))
            auc = float(np.nanmean(arr[:, 1])) if np.any(np.isfinite(arr[:, 1])) else float("nan")
            rows[name] = (acc, auc)
    return EvalReport(protocol, seed, rows, n_train // len(splits), len(test_y), hps)


def within_corpus(table: SampleTable, seed: int, config: EvalConfig = EvalConfig(), corpus: str = None) -> EvalReport:
    """Participant-grouped k-fold evaluation inside one corpus.

    Fold accuracies and AUCs are averaged with equal weight per fold (a fold
    whose test part is single-class contributes no AUC).
    """
    corpora = split_by_corpus(table)
    if corpus is None:
        if len(corpora) != 1:
            raise ValidationError(f"table holds corpora {sorted(corpora)}; choose one")
        corpus = next(iter(corpora))
    return run_protocol(Protocol(ProtocolKind.WITHIN, (corpus,), corpus, config.k), table, seed, config)


def cross_corpus(train_table: SampleTable, test_table: SampleTable, seed: int,
                 config: EvalConfig = EvalConfig()) -> EvalReport:
    """Train on every sample of one corpus and test on every sample of another."""
    tr_names, te_names = train_table.corpora, test_table.corpora
    if len(tr_names) != 1 or len(te_names) != 1:
        raise ValidationError("cross-corpus evaluation takes one corpus on each side")
    if tr_names == te_names:
        raise SameCorpus(f"train and test are both {tr_names[0]!r}")
    if len(set(test_table.y.tolist())) < 2:
        raise SingleClassTestForAuc(f"test corpus {te_names[0]!r} has a single class; AUC is undefined")
    return run_protocol(Protocol(ProtocolKind.CROSS, (tr_names[0],), te_names[0]),
                        [train_table, test_table], seed, config)


def loco(tables, held_out: str, seed: int, config: EvalConfig = EvalConfig()) -> EvalReport:
    """Pool all corpora except ``held_out`` for training and test on ``held_out``."""
    corpora = split_by_corpus(tables)
    if held_out not in corpora:
        raise HeldOutNotFound(f"corpus {held_out!r} not among {sorted(corpora)}")
    if len(corpora) != 3:
        raise ProtocolError(f"leave-one-corpus-out expects 3 corpora, got {len(corpora)}")
    pool = tuple(c for c in sorted(corpora) if c != held_out)
    return run_protocol(Protocol(ProtocolKind.LOCO, pool, held_out), list(corpora.values()), seed, config)


# ---------------------------------------------------------------------------
# rendering


def _fmt(v) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.3f}"


def _best(reports) -> list:
    """Per report, the (acc, auc) best values among model rows (Random excluded)."""
    out = []
    for r in reports:
        best = []
        for j in range(2):
            vals = [round(r.rows[n][j], 3) for n in ROW_ORDER[1:] if np.isfinite(r.rows[n][j])]
            best.append(max(vals) if vals else None)
        out.append(best)
    return out


def _text_block(reports) -> list:
    best = _best(reports)
    cell_w = 17
    name_w = max(len(n) for n in ROW_ORDER + ("Model",)) + 1
    head1 = "Model".ljust(name_w) + "".join(f"| {r.column:<{cell_w - 2}}" for r in reports)
    head2 = "".ljust(name_w) + "".join(f"| {'Acc':<7} {'AUC':<7}" for _ in reports)
    lines = [head1.rstrip(), head2.rstrip(), "-" * len(head1.rstrip().ljust(name_w + cell_w * len(reports)))]
    for name in ROW_ORDER:
        cells = []
        for r, b in zip(reports, best):
            parts = []
            for j in range(2):
                v = r.rows[name][j]
                mark = "*" if name != "Random" and b[j] is not None and np.isfinite(v) and round(v, 3) == b[j] else ""
                parts.append(f"{_fmt(v) + mark:<7}")
            cells.append("| " + " ".join(parts))
        lines.append((name.ljust(name_w) + "".join(cells)).rstrip())
        if name in ("Random", ROW_NAMES[KINDS[-1]]):
            lines.append("-" * len(lines[2]))
    return lines


def render_report(reports, fmt: str = "text", per_block: int = 3, title: str = None) -> str:
    """Render one table with an (Acc, AUC) column pair per report.

    Text output stacks blocks of at most ``per_block`` column groups and marks
    the best model value of each column with ``*``.  CSV output has a header
    ``Model,<col> Acc,<col> AUC,...`` followed by one row per classifier.
    """
    reports = list(reports)
    if not reports:
        raise Empty("no reports to render")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["Model"]
        for r in reports:
            header += [f"{r.column} Acc", f"{r.column} AUC"]
        w.writerow(header)
        for name in ROW_ORDER:
            row = [name]
            for r in reports:
                row += [_fmt(v) for v in r.rows[name]]
            w.writerow(row)
        return buf.getvalue()
    if fmt != "text":
        raise ValidationError(f"unknown format {fmt!r}")
    lines = [title, ""] if title else []
    for i in range(0, len(reports), per_block):
        if i:
            lines.append("")
        lines += _text_block(reports[i:i + per_block])
    return "\n".join(lines) + "\n"


def parse_report_csv(text: str) -> dict:
    """Read a CSV table back as ``{column: {row: (acc, auc)}}``."""
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    if header[0] != "Model" or (len(header) - 1) % 2:
        raise ValidationError("not a report table")
    cols = [h[:-4] for h in header[1::2]]
    out = {c: {} for c in cols}
    for row in rows[1:]:
        for j, c in enumerate(cols):
            out[c][row[0]] = (float(row[1 + 2 * j]), float(row[2 + 2 * j]))
    return out
