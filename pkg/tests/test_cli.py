import csv

import pytest

from maldomain.cli import (
    PROFILES,
    build_config,
    compare_results,
    main,
    parse_value,
    read_config,
)
from maldomain.classifiers import Family
from maldomain.errors import ConfigurationError, PairingError


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "toy.csv"
    assert main(["generate", "--per-class", "40", "--seed", "3", "--out", str(path)]) == 0
    return path


def _evaluate(data_csv, out, *extra):
    return main(["evaluate", "--data", str(data_csv), "--models", "knn,nb", "--k", "3",
                 "--repeats", "2", "--seed", "5", "--out", str(out), *extra])


def test_parse_value():
    assert parse_value("3") == 3 and parse_value("-2") == -2
    assert parse_value("0.5") == 0.5 and parse_value("1e-3") == 1e-3
    assert parse_value("True") is True and parse_value("none") is None
    assert parse_value("rbf") == "rbf"


def test_config_precedence(tmp_path, data_csv):
    cfg_file = tmp_path / "c.txt"
    cfg_file.write_text("# comment\nrf.n_trees = 300\nknn.k = 3\nseed = 1\n")
    out = tmp_path / "o"
    rc = main(["evaluate", "--profile", "desk", "--config", str(cfg_file), "--set", "knn.k=5",
               "--seed", "9", "--data", str(data_csv), "--models", "knn", "--k", "3",
               "--repeats", "1", "--out", str(out)])
    assert rc == 0
    echo = (out / "effective_config.txt").read_text()
    assert "knn.k = 5\n" in echo
    assert "seed = 9\n" in echo
    cfg = build_config({**PROFILES["desk"], **read_config(cfg_file)})
    assert cfg.spec(Family.RF).params.n_trees == 300
    assert cfg.spec(Family.GBM).params.n_trees == 500
    assert cfg.bpso.swarm_size == 8


def test_evaluate_writes_reports_and_is_deterministic(tmp_path, data_csv):
    assert _evaluate(data_csv, tmp_path / "a") == 0
    assert _evaluate(data_csv, tmp_path / "b") == 0
    for name in ("summary.csv", "folds.csv", "report.txt", "effective_config.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a" / "folds.csv")))
    assert len(rows) == 2 * 2 * 3
    assert {r["model"] for r in rows} == {"knn", "nb"}


def test_exit_codes(tmp_path, data_csv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--data", str(data_csv)])
    assert exc.value.code == 2
    assert main(["evaluate", "--data", str(tmp_path / "missing.csv"), "--models", "knn",
                 "--out", str(tmp_path / "x")]) == 3
    assert _evaluate(data_csv, tmp_path / "y", "--set", "knn.k=0") == 2
    assert _evaluate(data_csv, tmp_path / "z", "--set", "nope=1") == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("domain_id,label\nx,benign\n")
    assert main(["evaluate", "--data", str(bad), "--out", str(tmp_path / "w")]) == 3
    assert "error:" in capsys.readouterr().err


def test_tune(tmp_path, data_csv):
    out = tmp_path / "t"
    assert main(["tune", "--data", str(data_csv), "--model", "knn", "--grid", "k=1,3,5",
                 "--out", str(out)]) == 0
    lines = (out / "grid.csv").read_text().splitlines()
    assert lines[0] == "k,f_measure" and len(lines) == 4
    assert (out / "best.txt").read_text().startswith("knn.k = ")
    assert main(["tune", "--data", str(data_csv), "--out", str(out)]) == 2


def test_select_and_compare(tmp_path, data_csv):
    sel = tmp_path / "sel"
    assert main(["select", "--data", str(data_csv), "--model", "knn", "--k", "3",
                 "--repeats", "2", "--seed", "5", "--swarm-size", "3", "--max-iterations", "2",
                 "--out", str(sel)]) == 0
    assert len((sel / "mask.txt").read_text().strip()) == 16
    assert len((sel / "history.csv").read_text().splitlines()) == 3
    ev = tmp_path / "ev"
    assert _evaluate(data_csv, ev) == 0
    cmp_dir = tmp_path / "cmp"
    assert main(["compare", str(ev / "folds.csv"), str(sel / "folds.csv"), "--blocking", "fold",
                 "--out", str(cmp_dir)]) == 0
    ranks = list(csv.DictReader(open(cmp_dir / "ranks.csv")))
    assert {r["model"] for r in ranks} == {"knn", "nb", "FS_knn"}
    k = 3
    assert sum(float(r["average_rank"]) for r in ranks) == pytest.approx(k * (k + 1) / 2)
    assert "Friedman" in (cmp_dir / "comparison.txt").read_text()


def test_nested_select(tmp_path, data_csv):
    out = tmp_path / "nested"
    assert main(["select", "--data", str(data_csv), "--model", "nb", "--mode", "nested",
                 "--k", "3", "--repeats", "1", "--swarm-size", "2", "--max-iterations", "2",
                 "--out", str(out)]) == 0
    assert len((out / "masks.csv").read_text().splitlines()) == 4


def test_compare_requires_matching_folds(tmp_path, data_csv):
    _evaluate(data_csv, tmp_path / "a")
    main(["evaluate", "--data", str(data_csv), "--models", "c45", "--k", "3", "--repeats", "2",
          "--seed", "6", "--out", str(tmp_path / "b")])
    with pytest.raises(PairingError):
        compare_results([tmp_path / "a" / "folds.csv", tmp_path / "b" / "folds.csv"])
    assert main(["compare", str(tmp_path / "a" / "folds.csv"), str(tmp_path / "b" / "folds.csv"),
                 "--out", str(tmp_path / "c")]) == 3


def test_build_config_errors():
    with pytest.raises(ConfigurationError):
        build_config({"k": "1"})
    with pytest.raises(ConfigurationError):
        build_config({"bpso.seed": "3"})
    with pytest.raises(ConfigurationError):
        build_config({"models": "knn,xgb"})
    with pytest.raises(ConfigurationError):
        build_config({"scaling": "zscore"})


# --- enumerated cases ----------------------------------------------------

def test_generate_counts_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["generate", "--per-class", "1000", "--separation", "3.0", "--seed", "7",
                     "--out", str(p)]) == 0
    assert len(a.read_text().splitlines()) == 2001
    assert a.read_bytes() == b.read_bytes()
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--per-class", "10"])
    assert exc.value.code == 2


def test_nine_default_models_report(tmp_path, data_csv):
    out = tmp_path / "all"
    assert main(["evaluate", "--data", str(data_csv), "--k", "2", "--repeats", "1",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "summary.csv")))
    assert len({r["model"] for r in rows}) == 9
    assert {r["metric"] for r in rows} == {"accuracy", "precision", "recall", "f_measure"}
    report = (out / "report.txt").read_text().splitlines()
    assert len(report) == 3 + 9


def test_model_filter_and_f_consistency(tmp_path):
    # fold-averaged F only tracks F(mean P, mean R) when folds are reasonably large
    data = tmp_path / "big.csv"
    main(["generate", "--per-class", "1000", "--seed", "7", "--out", str(data)])
    out = tmp_path / "two"
    assert main(["evaluate", "--data", str(data), "--models", "knn,rf", "--set",
                 "rf.n_trees=20", "--k", "10", "--repeats", "2", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "summary.csv")))
    by = {(r["model"], r["metric"]): float(r["mean"]) for r in rows}
    assert {m for m, _ in by} == {"knn", "rf"}
    for model in ("knn", "rf"):
        p, r = by[(model, "precision")], by[(model, "recall")]
        assert abs(2 * p * r / (p + r) - by[(model, "f_measure")]) <= 2e-3


def test_single_iteration_select(tmp_path, data_csv):
    out = tmp_path / "one"
    assert main(["select", "--data", str(data_csv), "--model", "nb", "--k", "3", "--repeats",
                 "1", "--swarm-size", "2", "--max-iterations", "1", "--out", str(out)]) == 0
    assert len((out / "history.csv").read_text().splitlines()) == 2
    assert "1" in (out / "mask.txt").read_text()


def test_select_mask_matches_exhaustive_oracle(tmp_path):
    import itertools

    import numpy as np

    from maldomain.bpso import BPSOConfig, make_evaluator
    from maldomain.classifiers import ClassifierSpec
    from maldomain.dataset import Dataset, generate_synthetic, load_csv, min_max_scale, write_csv

    # an 8-feature problem inside the 16-column schema: the other columns are constant
    d = generate_synthetic(100, 3.0, 7)
    X = d.X.copy()
    X[:, 8:] = 1.0
    path = tmp_path / "eight.csv"
    write_csv(Dataset(d.feature_names, X, d.y, d.domain_ids), path)
    out = tmp_path / "sel8"
    assert main(["select", "--data", str(path), "--model", "knn", "--profile", "desk",
                 "--seed", "3", "--k", "2", "--repeats", "1", "--out", str(out)]) == 0
    mask = (out / "mask.txt").read_text().strip()
    cfg = BPSOConfig(swarm_size=8, max_iterations=10, seed=3)
    ev = make_evaluator(min_max_scale(load_csv(path)), ClassifierSpec(Family.KNN), cfg)
    best = max(ev("".join(map(str, m)) + "0" * 8)
               for m in itertools.product([0, 1], repeat=8) if any(m))
    assert best - ev(mask) <= 0.01


def test_compare_identical_files(tmp_path, data_csv):
    _evaluate(data_csv, tmp_path / "a")
    ranks, table = compare_results([tmp_path / "a" / "folds.csv", tmp_path / "a" / "folds.csv"],
                                   "fold")
    names = ranks.models
    assert len(names) == 4
    for i in range(len(names)):
        for j in range(len(names)):
            if i != j and names[i].split(":")[-1] == names[j].split(":")[-1]:
                assert table.p_values[i, j] == 1.0
                assert ranks.average_ranks[i] == ranks.average_ranks[j]
