import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maldomain.dataset import (
    FEATURE_NAMES,
    INFORMATIVE_FEATURES,
    Dataset,
    Label,
    apply_mask,
    as_mask,
    fit_scaling,
    generate_synthetic,
    inverse_scale,
    load_csv,
    mask_to_string,
    min_max_scale,
    stratified_k_folds,
    write_csv,
)
from maldomain.errors import (
    ConfigurationError,
    InvalidSubsetError,
    LabelError,
    ParseError,
    SchemaError,
)


def test_generator_is_deterministic_and_balanced():
    a = generate_synthetic(50, 3.0, 7)
    b = generate_synthetic(50, 3.0, 7)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert a.class_counts() == (50, 50)
    assert a.feature_names == FEATURE_NAMES
    assert not a.scaled
    assert not np.array_equal(a.X, generate_synthetic(50, 3.0, 8).X)


def test_generator_separates_only_informative_columns():
    d = generate_synthetic(2000, 3.0, 1, distribution="gaussian")
    mal, ben = d.X[d.y == 1], d.X[d.y == 0]
    for j in range(d.n_features):
        scale = 10.0 * (j + 1)
        gap = (mal[:, j].mean() - ben[:, j].mean()) / scale
        if j in INFORMATIVE_FEATURES:
            assert gap == pytest.approx(3.0 / np.sqrt(len(INFORMATIVE_FEATURES)), abs=0.1)
        else:
            assert abs(gap) < 0.05


def test_generator_rejects_bad_arguments():
    with pytest.raises(ConfigurationError):
        generate_synthetic(0, 1.0, 0)
    with pytest.raises(ConfigurationError):
        generate_synthetic(5, -1.0, 0)
    with pytest.raises(ConfigurationError):
        generate_synthetic(5, 1.0, 0, distribution="cauchy")


def test_csv_round_trip_is_exact(tmp_path):
    d = generate_synthetic(20, 2.0, 3)
    path = tmp_path / "d.csv"
    write_csv(d, path)
    back = load_csv(path)
    assert np.array_equal(back.X, d.X)
    assert np.array_equal(back.y, d.y)
    assert back.domain_ids == d.domain_ids


def _write(path, header, rows):
    path.write_text("\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n")


def test_csv_errors(tmp_path):
    header = ["domain_id", *FEATURE_NAMES, "label"]
    ok = ["a.com", *["1"] * 16, "malicious"]
    p = tmp_path / "x.csv"
    _write(p, header[:-1], [ok[:-1]])
    with pytest.raises(SchemaError):
        load_csv(p)
    _write(p, header, [["a.com", "abc", *["1"] * 15, "benign"]])
    with pytest.raises(ParseError):
        load_csv(p)
    _write(p, header, [["a.com", *["1"] * 16, "spam"]])
    with pytest.raises(LabelError):
        load_csv(p)
    _write(p, header, [ok[:5]])
    with pytest.raises(ParseError):
        load_csv(p)
    _write(p, header, [["a.com", "nan", *["1"] * 15, "benign"]])
    with pytest.raises(ParseError):
        load_csv(p)


def test_label_tokens():
    assert Label.parse(" Malicious ") is Label.MALICIOUS
    assert Label.parse("benign") is Label.BENIGN
    assert Label.MALICIOUS == 1


def test_dataset_is_immutable():
    d = generate_synthetic(5, 1.0, 0)
    with pytest.raises(ValueError):
        d.X[0, 0] = 1.0


def test_scaling_maps_to_unit_interval_and_inverts():
    d = generate_synthetic(30, 2.0, 5)
    s = min_max_scale(d)
    assert s.scaled
    assert s.X.min() == 0.0 and s.X.max() == 1.0
    assert np.allclose(s.X.min(axis=0), 0) and np.allclose(s.X.max(axis=0), 1)
    assert np.allclose(inverse_scale(s).X, d.X)


def test_constant_column_scales_to_zero():
    X = np.ones((4, 16))
    X[:, 1] = [0, 1, 2, 3]
    d = Dataset(FEATURE_NAMES, X, [0, 1, 0, 1])
    s = min_max_scale(d)
    assert np.all(s.X[:, 0] == 0.0)
    assert np.allclose(s.X[:, 1], [0, 1 / 3, 2 / 3, 1])


def test_external_params_are_applied_without_clipping():
    train = generate_synthetic(20, 2.0, 1)
    params = fit_scaling(train.X)
    test = generate_synthetic(20, 2.0, 2)
    s = min_max_scale(test, params)
    expected = (test.X - params[:, 0]) / (params[:, 1] - params[:, 0])
    assert np.allclose(s.X, expected)


@settings(max_examples=30, deadline=None)
@given(n_mal=st.integers(3, 40), n_ben=st.integers(3, 40), k=st.integers(2, 3),
       seed=st.integers(0, 2**32 - 1))
def test_folds_are_stratified_partitions(n_mal, n_ben, k, seed):
    y = np.array([1] * n_mal + [0] * n_ben)
    d = Dataset(FEATURE_NAMES, np.zeros((len(y), 16)), y)
    folds = stratified_k_folds(d, k, seed)
    seen = np.zeros(len(y), dtype=int)
    sizes = []
    for train, test in folds:
        seen[test] += 1
        assert len(np.intersect1d(train, test)) == 0
        assert len(train) + len(test) == len(y)
        sizes.append(len(test))
        n_test_mal = int(y[test].sum())
        assert abs(n_test_mal - n_mal / k) < 1
    assert np.all(seen == 1)
    assert max(sizes) - min(sizes) <= 1
    assert folds == stratified_k_folds(d, k, seed)


def test_folds_need_enough_records_per_class():
    d = Dataset(FEATURE_NAMES, np.zeros((6, 16)), [1, 1, 0, 0, 0, 0])
    with pytest.raises(ConfigurationError):
        stratified_k_folds(d, 3, 0)
    with pytest.raises(ConfigurationError):
        stratified_k_folds(d, 1, 0)


@given(st.lists(st.booleans(), min_size=16, max_size=16).filter(any))
def test_mask_round_trip(bits):
    m = as_mask(bits)
    assert np.array_equal(as_mask(mask_to_string(m)), m)
    d = generate_synthetic(3, 1.0, 0)
    sub = apply_mask(d, m)
    assert sub.n_features == sum(bits)
    assert sub.feature_names == tuple(n for n, b in zip(FEATURE_NAMES, bits) if b)


def test_mask_errors():
    d = generate_synthetic(3, 1.0, 0)
    with pytest.raises(InvalidSubsetError):
        apply_mask(d, "0" * 16)
    with pytest.raises(InvalidSubsetError):
        apply_mask(d, "1" * 15)
    with pytest.raises(InvalidSubsetError):
        as_mask("10x1")


# --- enumerated cases ----------------------------------------------------

def _csv(path, rows, header=None):
    header = header or ["domain_id", *FEATURE_NAMES, "label"]
    path.write_text("\n".join(",".join(map(str, r)) for r in [header, *rows]) + "\n")


def test_two_row_file(tmp_path):
    p = tmp_path / "two.csv"
    _csv(p, [["a.com", *range(16), "malicious"], ["b.com", *range(16), "benign"]])
    d = load_csv(p)
    assert len(d) == 2 and not d.scaled
    assert d.y.tolist() == [1, 0]


def test_missing_column_is_named(tmp_path):
    p = tmp_path / "m.csv"
    header = ["domain_id", *(n for n in FEATURE_NAMES if n != "alexa_rank"), "label"]
    _csv(p, [["a.com", *range(15), "benign"]], header)
    with pytest.raises(SchemaError, match="alexa_rank"):
        load_csv(p)


def test_nan_cell_cites_row(tmp_path):
    p = tmp_path / "n.csv"
    rows = [[f"d{i}.com", *range(16), "benign"] for i in range(10)]
    rows[6][3] = "NaN"
    _csv(p, rows)
    with pytest.raises(ParseError, match="row 7"):
        load_csv(p)


@pytest.mark.parametrize("column,expected", [([2, 4, 6], [0.0, 0.5, 1.0]),
                                             ([5, 5, 5], [0.0, 0.0, 0.0]),
                                             ([0, 1], [0.0, 1.0])])
def test_scaling_columns(column, expected):
    X = np.tile(np.asarray(column, float)[:, None], (1, 16))
    d = Dataset(FEATURE_NAMES, X, [i % 2 for i in range(len(column))])
    assert min_max_scale(d).X[:, 0].tolist() == expected


def test_balanced_folds_are_exact():
    d = generate_synthetic(1000, 3.0, 7)
    assert len(d) == 2000 and d.class_counts() == (1000, 1000)
    for _, test in stratified_k_folds(d, 10, 0):
        assert int(d.y[test].sum()) == 100 and len(test) == 200


def test_too_few_records_for_k():
    d = Dataset(FEATURE_NAMES, np.zeros((20, 16)), [1] * 10 + [0] * 10)
    with pytest.raises(ConfigurationError):
        stratified_k_folds(d, 11, 0)


def test_identity_and_projection_masks():
    d = generate_synthetic(5, 1.0, 0)
    full = apply_mask(d, "1" * 16)
    assert np.array_equal(full.X, d.X) and full.feature_names == d.feature_names
    one = apply_mask(d, "1" + "0" * 15)
    assert one.n_features == 1 and np.array_equal(one.X[:, 0], d.X[:, 0])


def test_zero_separation_makes_classes_indistinguishable():
    from scipy.stats import ks_2samp

    d = generate_synthetic(1000, 0.0, 4)
    for j in range(16):
        assert ks_2samp(d.X[d.y == 1, j], d.X[d.y == 0, j]).pvalue > 1e-4
