import filecmp
import json

import numpy as np
import pytest

from xcorpus.cli import main
from xcorpus.eval import ROW_ORDER
from xcorpus.ingest import export_corpus
from xcorpus.lmm import fit_lmm, significance_flags
from xcorpus.signal_model import FEATURE_LABELS

from conftest import make_table, small_config, truncated_corpus


def write_config(path, **kw):
    path.write_text(json.dumps(small_config(**kw).to_dict()))
    return path


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    out = capsys.readouterr() if capsys else None
    return code, out


def test_synth_writes_manifest_and_is_deterministic(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    code, out = run(["synth", "--config", cfg, "--out", tmp_path / "a"], capsys)
    assert code == 0
    manifest = out.out.strip()
    assert manifest.endswith(".json")
    assert run(["synth", "--config", cfg, "--out", tmp_path / "b"])[0] == 0
    cmp = filecmp.dircmp(tmp_path / "a" / "S", tmp_path / "b" / "S")
    assert cmp.left_list == cmp.right_list
    assert not cmp.diff_files and not cmp.funny_files


def test_synth_demo_writes_three_manifests(tmp_path, capsys, monkeypatch):
    import xcorpus.cli as cli

    calls = []
    monkeypatch.setattr(cli, "synth_corpus", lambda sc: calls.append(sc.corpus_name) or (None, None))
    monkeypatch.setattr(cli, "export_corpus", lambda c, t, d: d / "manifest.json")
    code, out = run(["synth", "--config", "demo", "--out", tmp_path], capsys)
    assert code == 0
    assert calls == ["APD", "WESAD", "CASE"]
    assert len(out.out.split()) == 3


def test_synth_rejects_short_phase(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    d = small_config().to_dict()
    d["phases"][0]["duration_s"] = 60.0
    cfg.write_text(json.dumps(d))
    code, out = run(["synth", "--config", cfg, "--out", tmp_path], capsys)
    assert code == 2
    assert "120" in out.err


def test_extract_rows_and_round_trip(tmp_path, capsys, small_corpus, small_table):
    manifest = export_corpus(*small_corpus, tmp_path / "corpus")
    code, out = run(["extract", manifest, "--out", tmp_path], capsys)
    assert code == 0
    from xcorpus.features import SampleTable

    table = SampleTable.read_csv(out.out.strip())
    # 2 participants x 2 phases x 2 chunks
    assert len(table) == 8
    assert table.equals(small_table)


def test_extract_short_phase_warns(tmp_path, capsys, small_corpus):
    manifest = export_corpus(truncated_corpus(small_corpus[0], 90.0), None, tmp_path / "short")
    code, out = run(["extract", manifest, "--out", tmp_path], capsys)
    assert code == 0
    assert "no samples" in out.err
    lines = open(out.out.strip()).read().splitlines()
    assert len(lines) == 1  # header only


def test_extract_missing_manifest(tmp_path, capsys):
    assert run(["extract", tmp_path / "nope.json", "--out", tmp_path], capsys)[0] == 2


@pytest.fixture(scope="module")
def feature_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("feat")
    paths = []
    for i, name in enumerate("ABC"):
        p = d / f"{name}.csv"
        make_table(6 + (i == 2), seed=i, corpus=name).to_csv(p)
        paths.append(p)
    return paths


@pytest.fixture(scope="module")
def tiny_run_config(tmp_path_factory):
    from conftest import TINY_GRID

    p = tmp_path_factory.mktemp("cfg") / "run.json"
    p.write_text(json.dumps({"seed": 1, "grid": TINY_GRID.to_dict()}))
    return p


def test_eval_within_table_shape(tmp_path, capsys, feature_files, tiny_run_config):
    code, out = run(["eval", "within", "--features", feature_files[0], "--corpus", "A",
                     "--config", tiny_run_config, "--out", tmp_path], capsys)
    assert code == 0
    csv_lines = (tmp_path / "within_A.csv").read_text().splitlines()
    assert [ln.split(",")[0] for ln in csv_lines[1:]] == list(ROW_ORDER)


def test_eval_cross_same_corpus_exit_3(tmp_path, capsys, feature_files):
    code, out = run(["eval", "cross", "--features", *feature_files, "--train", "A", "--test", "A",
                     "--out", tmp_path], capsys)
    assert code == 3


def test_eval_loco_counts(tmp_path, capsys, feature_files, tiny_run_config):
    code, _ = run(["eval", "loco", "--features", *feature_files, "--hold-out", "C",
                   "--config", tiny_run_config, "--out", tmp_path], capsys)
    assert code == 0
    (rep,) = json.loads((tmp_path / "loco_C.json").read_text())
    assert rep["n_train"] == 2 * 6 * 8
    assert rep["n_test"] == 7 * 8
    code, _ = run(["eval", "loco", "--features", *feature_files, "--hold-out", "D",
                   "--config", tiny_run_config, "--out", tmp_path], capsys)
    assert code == 3


def planted_bpm_table(seed=0):
    t = make_table(12, per=8, seed=seed, corpus="P", signal=0.0)
    X = t.X.copy()
    X[:, 0] += 1.5 * t.y
    return t.with_features(X)


def test_regress_flags_planted_bpm(tmp_path, capsys):
    path = tmp_path / "p.csv"
    planted_bpm_table().to_csv(path)
    code, out = run(["regress", "--features", path, "--out", tmp_path], capsys)
    assert code == 0
    text = (tmp_path / "regression.txt").read_text()
    bpm_row = next(ln for ln in text.splitlines() if ln.startswith(FEATURE_LABELS[0]))
    assert "*" in bpm_row


def test_regress_duplicate_column_exit_2(tmp_path, capsys):
    t = make_table(8, seed=1, corpus="D")
    X = t.X.copy()
    X[:, 3] = X[:, 2]
    path = tmp_path / "dup.csv"
    t.with_features(X).to_csv(path)
    code, out = run(["regress", "--features", path, "--out", tmp_path], capsys)
    assert code == 2
    assert "lf_rr" in out.err or "hf_rr" in out.err


def test_null_regression_flag_rate():
    rng = np.random.default_rng(0)
    counts = []
    for rep in range(100):
        t = make_table(12, per=8, seed=rep, signal=0.0)
        y = rng.permutation(t.y).astype(float)
        fit = fit_lmm(t.X, y, t.participant_id)
        counts.append(int(np.sum(significance_flags(fit.p[1:]))))
    assert 1.2 <= np.mean(counts) <= 2.0


def test_out_dir_from_environment(tmp_path, capsys, monkeypatch, feature_files):
    monkeypatch.setenv("XCORPUS_OUT", str(tmp_path / "envout"))
    code, out = run(["regress", "--features", feature_files[0]], capsys)
    assert code == 0
    assert (tmp_path / "envout" / "regression.txt").is_file()


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"seed": 1, "colour": "red"}))
    assert run(["report", "--config", bad, "--out", tmp_path], capsys)[0] == 2
    noseed = tmp_path / "noseed.json"
    noseed.write_text(json.dumps({"grid": {}, "manifests": []}))
    assert run(["report", "--config", noseed, "--out", tmp_path], capsys)[0] == 2
    assert run(["report", "--config", tmp_path / "missing.json", "--out", tmp_path], capsys)[0] == 2
