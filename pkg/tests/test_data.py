import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_dataset
from gcompml.data import (BINARY, CONTINUOUS, DesignConfig, SplineKnots, TrialDataset,
                          apply_transform, bspline_basis, build_design, design_from_dict,
                          design_to_dict, quantile_knots, read_csv, write_csv, write_schema)
from gcompml.errors import DataError


def cox_de_boor_scalar(i, k, t, x):
    """Textbook recursion for one basis function, with 0/0 := 0."""
    if k == 0:
        if t[i] <= x < t[i + 1]:
            return 1.0
        # closed right end on the last non-empty span
        if x == t[-1] and t[i] < t[i + 1] and t[i + 1] == t[-1]:
            return 1.0
        return 0.0
    left = 0.0 if t[i + k] == t[i] else (x - t[i]) / (t[i + k] - t[i]) * cox_de_boor_scalar(i, k - 1, t, x)
    right = 0.0 if t[i + k + 1] == t[i + 1] else \
        (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * cox_de_boor_scalar(i + 1, k - 1, t, x)
    return left + right


def oracle_basis(v, degree, lower, upper, interior):
    t = [lower] * (degree + 1) + list(interior) + [upper] * (degree + 1)
    nb = degree + 1 + len(interior)
    return np.array([[cox_de_boor_scalar(i, degree, t, min(max(x, lower), upper))
                      for i in range(nb)] for x in v])


# ---------------------------------------------------------------- datasets


def test_dataset_validates_binary_values():
    with pytest.raises(DataError):
        TrialDataset([0, 2], [0, 1], np.zeros((2, 0)), (), ())
    with pytest.raises(DataError):
        TrialDataset([0, 1], [0, 0.5], np.zeros((2, 0)), (), ())
    with pytest.raises(DataError):
        TrialDataset([0, 1], [0, 1], [[0.5], [1.0]], (BINARY,), ("b",))


def test_dataset_rejects_length_mismatch_and_tiny_n():
    with pytest.raises(DataError):
        TrialDataset([0, 1, 1], [0, 1], np.zeros((3, 0)), (), ())
    with pytest.raises(DataError):
        TrialDataset([1], [1], np.zeros((1, 0)), (), ())


def test_dataset_arrays_are_read_only(small_data):
    with pytest.raises(ValueError):
        small_data.y[0] = 1.0


def test_csv_roundtrip(tmp_path, small_data):
    path = tmp_path / "d.csv"
    write_csv(small_data, path)
    back = read_csv(path)
    np.testing.assert_array_equal(back.x, small_data.x)
    np.testing.assert_array_equal(back.y, small_data.y)
    assert back.column_kinds == small_data.column_kinds


def test_csv_missing_value_is_data_error(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,a,x1\n1,0,0.5\n0,1,NA\n")
    with pytest.raises(DataError, match="complete cases"):
        read_csv(path)


def test_schema_overrides_inferred_kind(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,a,x1\n1,0,0\n0,1,1\n1,1,0\n")
    assert read_csv(path).column_kinds == (BINARY,)
    assert read_csv(path, {"x1": CONTINUOUS}).column_kinds == (CONTINUOUS,)
    data = read_csv(path, {"x1": CONTINUOUS})
    write_schema(data, tmp_path / "s.json")
    assert read_csv(path, tmp_path / "s.json").column_kinds == (CONTINUOUS,)


# ---------------------------------------------------------------- splines


def test_linear_hat_functions_at_midpoint():
    knots = SplineKnots(1, 0.0, 1.0, ())
    np.testing.assert_allclose(knots.evaluate([0.5]), [[0.5, 0.5]])


def test_cubic_basis_matches_recursive_oracle():
    v = np.linspace(0.0, 1.0, 20)
    interior = quantile_knots(v, 3)
    b, knots = bspline_basis(v, 3, interior)
    assert b.shape == (20, 7)
    np.testing.assert_allclose(b, oracle_basis(v, 3, 0.0, 1.0, interior), atol=1e-14)


def test_out_of_range_values_clamp_to_boundary():
    v = np.linspace(-1.0, 2.0, 15)
    _, knots = bspline_basis(v, 3, (0.0, 0.5, 1.0))
    out = knots.evaluate([-5.0, 7.0])
    np.testing.assert_array_equal(out[0], knots.evaluate([-1.0])[0])
    np.testing.assert_array_equal(out[1], knots.evaluate([2.0])[0])
    assert np.all(np.isfinite(out))


def test_spline_errors():
    with pytest.raises(ValueError):
        bspline_basis([0.0, 1.0], 0)
    with pytest.raises(ValueError):
        bspline_basis([0.0, np.nan], 2)
    with pytest.raises(ValueError):
        bspline_basis(np.linspace(0, 1, 5), 2, (0.6, 0.4))


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=30, unique=True),
       st.integers(1, 4), st.integers(0, 4))
def test_partition_of_unity(values, degree, n_knots):
    v = np.asarray(values)
    interior = quantile_knots(v, n_knots)
    if len(set(interior)) < len(interior) or (interior and (interior[0] <= v.min()
                                                            or interior[-1] >= v.max())):
        interior = ()
    b, knots = bspline_basis(v, degree, interior)
    np.testing.assert_allclose(b.sum(axis=1), 1.0, atol=1e-12)
    assert b.min() >= -1e-15 and b.max() <= 1 + 1e-12
    probe = np.linspace(v.min() - 10, v.max() + 10, 11)
    np.testing.assert_allclose(knots.evaluate(probe).sum(axis=1), 1.0, atol=1e-12)


# ---------------------------------------------------------------- design


def _binary_data(n=12, seed=3):
    rng = np.random.default_rng(seed)
    x = (rng.random((n, 2)) < 0.5).astype(float)
    a = np.tile([0.0, 1.0], n // 2)
    y = np.tile([0.0, 0.0, 1.0], n // 3)
    return TrialDataset(y, a, x, (BINARY, BINARY), ("b1", "b2"))


def test_column_counts():
    data = _binary_data()
    assert build_design(data, DesignConfig()).z.shape[1] == 5
    assert build_design(data, DesignConfig(use_splines=False,
                                           use_treatment_interactions=False)).z.shape[1] == 3


def test_column_order(small_data):
    t = build_design(small_data, DesignConfig()).transform
    names = t.column_names
    assert names[:7] == tuple(f"bs(x0){k}" for k in range(1, 8))
    assert names[t.arm_column] == "a"
    assert all(nm.startswith("a:") for nm in names[t.arm_column + 1:])
    assert len(names) == 2 * (7 + 7 + 1) + 1


@given(st.integers(0, 10_000), st.booleans(), st.booleans(), st.booleans(),
       st.integers(1, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 2))
def test_design_properties(seed, splines, inter, std, degree, n_knots, p_cont, p_bin):
    data = make_dataset(n=30, p_cont=p_cont, p_bin=p_bin, seed=seed)
    cfg = DesignConfig(use_splines=splines, spline_degree=degree, n_interior_knots=n_knots,
                       use_treatment_interactions=inter, standardize=std)
    dm = build_design(data, cfg)
    assert dm.z.shape == (30, cfg.n_columns(data.column_kinds))
    # the frozen transform reproduces the training rows bit for bit
    assert np.array_equal(dm.transform.apply(data.a, data.x), dm.z)
    assert np.array_equal(build_design(data, cfg).z, dm.z)
    for i in (0, 7):
        assert np.array_equal(apply_transform(dm.transform, data.a[i], data.x[i]), dm.z[i])
    if std:
        ok = [j for j in range(dm.z.shape[1]) if j not in dm.constant_columns]
        np.testing.assert_allclose(dm.z[:, ok].mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(dm.z[:, ok].std(axis=0), 1.0, atol=1e-10)


def test_raw_spline_blocks_sum_to_one(small_data):
    t = build_design(small_data, DesignConfig()).transform
    raw = t.raw(small_data.a, small_data.x)
    np.testing.assert_allclose(raw[:, :7].sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(raw[:, 7:14].sum(axis=1), 1.0, atol=1e-12)


def test_flipping_arm_changes_only_arm_columns(small_data):
    t = build_design(small_data, DesignConfig()).transform
    z1 = apply_transform(t, 1.0, small_data.x[:5])
    z0 = apply_transform(t, 0.0, small_data.x[:5])
    changed = np.flatnonzero(np.any(z1 != z0, axis=0))
    assert changed.min() == t.arm_column
    # a=0 zeroes interactions before standardization
    np.testing.assert_allclose(z0[:, t.arm_column + 1:],
                               np.broadcast_to(-t.center[t.arm_column + 1:] / t.scale[t.arm_column + 1:],
                                               z0[:, t.arm_column + 1:].shape))


def test_held_out_row_beyond_range_is_finite(small_data):
    t = build_design(small_data, DesignConfig()).transform
    row = small_data.x[0].copy()
    row[0] = small_data.x[:, 0].max() + 50.0
    z = apply_transform(t, 1.0, row)
    assert np.all(np.isfinite(z))
    edge = row.copy()
    edge[0] = small_data.x[:, 0].max()
    np.testing.assert_array_equal(z, apply_transform(t, 1.0, edge))


def test_constant_column_is_flagged_not_fatal():
    data = TrialDataset([0, 1, 0, 1], [0, 0, 1, 1], [[1.0], [1.0], [1.0], [1.0]],
                        (BINARY,), ("c",))
    dm = build_design(data, DesignConfig(use_splines=False))
    assert 0 in dm.constant_columns
    assert np.all(np.isfinite(dm.z))


def test_dimension_mismatch(small_data):
    t = build_design(small_data, DesignConfig()).transform
    with pytest.raises(DataError):
        apply_transform(t, 1.0, np.zeros(5))


def test_transform_serialization_roundtrip(small_data):
    t = build_design(small_data, DesignConfig()).transform
    back = design_from_dict(design_to_dict(t))
    assert np.array_equal(back.apply(small_data.a, small_data.x), t.apply(small_data.a, small_data.x))
