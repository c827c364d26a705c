"""Command-line entry point.

Subcommands::

    xcorpus synth   --config CFG --out DIR          write synthetic corpora
    xcorpus extract MANIFEST... --out DIR           feature tables (CSV)
    xcorpus eval within --features F... --corpus A --out DIR
    xcorpus eval cross  --features F... --train A --test B --out DIR
    xcorpus eval loco   --features F... --hold-out C --out DIR
    xcorpus regress --features F... --out DIR       mixed-model table
    xcorpus report  --config demo --out DIR         the whole pipeline

``--config demo`` names the bundled demo configuration.  The output directory
is ``--out`` if given, else ``$XCORPUS_OUT``, else the config's ``out`` entry,
else ``xcorpus_out``.  Exit codes: 0 success, 2 input or config error,
3 protocol violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import eval as ev
from .errors import HeldOutNotFound, InvalidConfig, MissingFile, ProtocolError, SameCorpus, XcorpusError
from .features import ChunkSpec, SampleTable, WindowSpec, extract_corpus, normalize_apply, normalize_fit
from .ingest import SynthConfig, export_corpus, load_corpus, synth_corpus
from .lmm import fit_lmm, render_lmm_report
from .ml import DEFAULT_GRID, GridSpec
from .seeding import derive_seed
from .signal_model import FEATURE_NAMES

log = logging.getLogger("xcorpus")

EXIT_OK, EXIT_INPUT, EXIT_PROTOCOL = 0, 2, 3
OUT_ENV = "XCORPUS_OUT"
DEFAULT_OUT = "xcorpus_out"


@dataclass
class RunConfig:
    """Everything a pipeline run needs; built from a JSON file."""

    corpora: list = field(default_factory=list)  # SynthConfigs
    manifests: list = field(default_factory=list)
    window: WindowSpec = WindowSpec()
    chunk: ChunkSpec = ChunkSpec()
    grid: GridSpec = DEFAULT_GRID
    eval_options: dict = field(default_factory=dict)
    protocols: tuple = ("within", "cross", "loco")
    standardize: bool = True
    seed: int = 0
    out: str = None

    @classmethod
    def from_dict(cls, d: dict, base: Path = Path(".")) -> "RunConfig":
        known = {"seed", "corpora", "manifests", "window", "chunk", "grid", "eval", "protocols",
                 "standardize", "out"}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in d:
            raise InvalidConfig("config must state a seed")
        manifests = [str(base / m) for m in d.get("manifests", [])]
        for m in manifests:
            if not Path(m).is_file():
                raise InvalidConfig(f"manifest not found: {m}")
        try:
            return cls(
                corpora=[SynthConfig.from_dict(c) for c in d.get("corpora", [])],
                manifests=manifests,
                window=WindowSpec(**d.get("window", {})),
                chunk=ChunkSpec(**d.get("chunk", {})),
                grid=GridSpec(d["grid"]) if "grid" in d else DEFAULT_GRID,
                eval_options=dict(d.get("eval", {})),
                protocols=tuple(d.get("protocols", ("within", "cross", "loco"))),
                standardize=bool(d.get("standardize", True)),
                seed=int(d["seed"]),
                out=d.get("out"),
            )
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(str(exc)) from None

    def eval_config(self, jobs: int = 1) -> ev.EvalConfig:
        opts = {k: v for k, v in self.eval_options.items()
                if k in ("inner_folds", "k", "stratify", "smote_trigger", "ensemble_mode")}
        return ev.EvalConfig(grid=self.grid, jobs=jobs, **opts)


def load_run_config(spec) -> RunConfig:
    """Load a config file, or the bundled one when ``spec`` is ``"demo"``."""
    if spec == "demo":
        text = resources.files("xcorpus").joinpath("configs/demo.json").read_text(encoding="utf-8")
        base = Path(".")
    else:
        path = Path(spec)
        if not path.is_file():
            raise MissingFile(f"config not found: {path}")
        text = path.read_text(encoding="utf-8")
        base = path.parent
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{spec}: {exc}") from None
    if isinstance(doc, list) or "phases" in doc:
        # a bare SynthConfig (or list of them)
        doc = {"seed": 0, "corpora": doc if isinstance(doc, list) else [doc]}
    return RunConfig.from_dict(doc, base)


def _out_dir(args, cfg: RunConfig = None) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or (cfg.out if cfg else None) or DEFAULT_OUT
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _seed(args, cfg: RunConfig = None) -> int:
    if args.seed is not None:
        return int(args.seed)
    return cfg.seed if cfg is not None else 0


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _synth_configs(cfg: RunConfig, seed_override):
    configs = cfg.corpora
    if seed_override is not None:
        configs = [SynthConfig.from_dict({**c.to_dict(), "seed": derive_seed(seed_override, "synth", c.corpus_name)})
                   for c in configs]
    return configs


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    cfg = load_run_config(args.config)
    out = _out_dir(args, cfg)
    for sc in _synth_configs(cfg, args.seed):
        corpus, truth = synth_corpus(sc)
        manifest = export_corpus(corpus, truth, out / sc.corpus_name)
        print(manifest)
    return EXIT_OK


def _extract_one(corpus, cfg: RunConfig, out: Path) -> Path:
    table = extract_corpus(corpus, cfg.window, cfg.chunk)
    path = out / f"{corpus.name}.features.csv"
    table.to_csv(path)
    return path


def cmd_extract(args) -> int:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    out = _out_dir(args, cfg)
    for manifest in args.manifests:
        print(_extract_one(load_corpus(manifest), cfg, out))
    return EXIT_OK


def _read_features(paths) -> SampleTable:
    return SampleTable.concat([SampleTable.read_csv(p) for p in paths])


def _write_reports(reports, out: Path, stem: str, title: str) -> list:
    paths = [
        _write(out / f"{stem}.txt", ev.render_report(reports, "text", title=title)),
        _write(out / f"{stem}.csv", ev.render_report(reports, "csv")),
        _write(out / f"{stem}.json", json.dumps([r.to_dict() for r in reports], indent=1) + "\n"),
    ]
    return paths


def cmd_eval(args) -> int:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    seed = _seed(args, cfg)
    out = _out_dir(args, cfg)
    table = _read_features(args.features)
    econf = cfg.eval_config(args.jobs)
    if args.protocol == "within":
        report = ev.within_corpus(table, seed, econf, corpus=args.corpus)
        stem = f"within_{args.corpus}"
    elif args.protocol == "cross":
        if args.train == args.test:
            raise SameCorpus(f"train and test are both {args.train!r}")
        parts = ev.split_by_corpus(table)
        missing = [c for c in (args.train, args.test) if c not in parts]
        if missing:
            raise HeldOutNotFound(f"corpus {missing[0]!r} not in the feature files")
        report = ev.cross_corpus(parts[args.train], parts[args.test], seed, econf)
        stem = f"cross_{args.train}_{args.test}"
    else:
        report = ev.loco(table, args.hold_out, seed, econf)
        stem = f"loco_{args.hold_out}"
    for p in _write_reports([report], out, stem, report.protocol.descriptor):
        print(p)
    return EXIT_OK


def _regress_tables(table: SampleTable, standardize: bool) -> dict:
    fits = {}
    for name in table.corpora:
        sub = table.subset(table.corpus_name == name)
        X = normalize_apply(normalize_fit(sub.X), sub.X) if standardize else sub.X
        fits[name] = fit_lmm(X, sub.y.astype(float), sub.participant_id, names=FEATURE_NAMES)
    return fits


def cmd_regress(args) -> int:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    out = _out_dir(args, cfg)
    table = _read_features(args.features)
    fits = _regress_tables(table, cfg.standardize)
    print(_write(out / "regression.txt", render_lmm_report(fits)))
    return EXIT_OK


def run_report(cfg: RunConfig, seed: int, out: Path, jobs: int = 1) -> dict:
    """Run synthesis or loading, extraction, regression and every protocol.

    Returns a mapping from artifact name to written path.
    """
    tables = {}
    for sc in cfg.corpora:
        corpus, _ = synth_corpus(sc)
        tables[corpus.name] = extract_corpus(corpus, cfg.window, cfg.chunk)
    for m in cfg.manifests:
        corpus = load_corpus(m)
        tables[corpus.name] = extract_corpus(corpus, cfg.window, cfg.chunk)
    written = {}
    for name, t in tables.items():
        path = out / f"{name}.features.csv"
        t.to_csv(path)
        written[f"features:{name}"] = path
    names = list(tables)
    econf = cfg.eval_config(jobs)
    sections = []
    fits = _regress_tables(SampleTable.concat(tables.values()), cfg.standardize)
    fits = {n: fits[n] for n in names}
    reg = render_lmm_report(fits)
    written["regression"] = _write(out / "regression.txt", reg)
    sections.append("Mixed linear model (label ~ features + participant intercept)\n\n" + reg)
    if "within" in cfg.protocols:
        reps = [ev.within_corpus(tables[n], seed, econf) for n in names]
        written.update(_named(_write_reports(reps, out, "within", "Within-corpus"), "within"))
        sections.append(ev.render_report(reps, title="Within-corpus"))
    if "cross" in cfg.protocols:
        reps = [ev.cross_corpus(tables[a], tables[b], seed, econf)
                for i, a in enumerate(names) for b in names[i + 1:]]
        reps += [ev.cross_corpus(tables[b], tables[a], seed, econf)
                 for i, a in enumerate(names) for b in names[i + 1:]]
        written.update(_named(_write_reports(reps, out, "cross", "Cross-corpus (train/test)"), "cross"))
        sections.append(ev.render_report(reps, title="Cross-corpus (train/test)"))
    if "loco" in cfg.protocols and len(names) == 3:
        reps = [ev.loco(list(tables.values()), n, seed, econf) for n in names]
        written.update(_named(_write_reports(reps, out, "loco", "Leave-one-corpus-out"), "loco"))
        sections.append(ev.render_report(reps, title="Leave-one-corpus-out"))
    header = f"master seed: {seed}\ncorpora: " + ", ".join(f"{n} ({len(tables[n])} samples)" for n in names) + "\n"
    written["report"] = _write(out / "report.txt", header + "\n" + "\n".join(sections))
    return written


def _named(paths, stem):
    return {f"{stem}:{p.suffix[1:]}": p for p in paths}


def cmd_report(args) -> int:
    cfg = load_run_config(args.config)
    out = _out_dir(args, cfg)
    written = run_report(cfg, _seed(args, cfg), out, args.jobs)
    print(written["report"])
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config JSON, or 'demo'")
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--out", default=None, help=f"output directory (else ${OUT_ENV})")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for model fitting")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="xcorpus", description="Cross-corpus physiological affect pipeline.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write synthetic corpora")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", parents=[common], help="extract features from corpus manifests")
    s.add_argument("manifests", nargs="+")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("eval", help="run an evaluation protocol")
    proto = s.add_subparsers(dest="protocol", required=True)
    w = proto.add_parser("within", parents=[common])
    w.add_argument("--corpus", required=True)
    c = proto.add_parser("cross", parents=[common])
    c.add_argument("--train", required=True)
    c.add_argument("--test", required=True)
    lo = proto.add_parser("loco", parents=[common])
    lo.add_argument("--hold-out", required=True)
    for q in (w, c, lo):
        q.add_argument("--features", nargs="+", required=True)
        q.set_defaults(func=cmd_eval)

    s = sub.add_parser("regress", parents=[common], help="mixed-model regression table")
    s.add_argument("--features", nargs="+", required=True)
    s.set_defaults(func=cmd_regress)

    s = sub.add_parser("report", parents=[common], help="full pipeline from a config")
    s.set_defaults(func=cmd_report)
    return p


def _setup_logging(verbose: bool) -> None:
    # own handler on the package logger, so messages reach stderr whatever the root setup
    for h in [h for h in log.handlers if getattr(h, "_xcorpus_cli", False)]:
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler._xcorpus_cli = True
    log.addHandler(handler)
    log.setLevel(logging.INFO if verbose else logging.WARNING)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    if args.command == "report" and not args.config:
        parser.error("report needs --config")
    if args.command == "synth" and not args.config:
        parser.error("synth needs --config")
    try:
        return args.func(args)
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (XcorpusError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
