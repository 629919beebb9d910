import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from phimax.conditions import normalizer_spec
from phimax.maxima import (
    argmax_locations,
    deviations,
    distinct_argmax_locations,
    geometric_windows,
    normalizer,
    normalizer_grid,
    prefix_max,
    window_series,
)
from phimax.orlicz import make_gaussian_family, make_power_family, make_weibull_conjugate_family
from phimax.simulate import DoubleArray, sample_gaussian

GAUSS_SPEC = normalizer_spec(make_gaussian_family())
WEIB_SPEC = normalizer_spec(make_weibull_conjugate_family(9, 1.25))


def brute_max(v):
    m, j = v.shape
    return np.array([[v[: a + 1, : b + 1].max() for b in range(j)] for a in range(m)])


def brute_argmax(v):
    m, j = v.shape
    out = np.empty((m, j, 2), dtype=int)
    for a in range(m):
        for b in range(j):
            best = (0, 0)
            for k in range(a + 1):
                for n in range(b + 1):
                    if v[k, n] > v[best]:
                        best = (k, n)
            out[a, b] = (best[0] + 1, best[1] + 1)
    return out


# ---------------------------------------------------------------- prefix max and argmax

def test_prefix_max_single_cell():
    assert prefix_max([[1.0]]).tolist() == [[1.0]]


def test_prefix_max_small_example():
    assert prefix_max([[1, 3], [2, 0]]).tolist() == [[1, 3], [2, 3]]


def test_argmax_dominant_corner():
    arg = argmax_locations([[5, 1], [1, 1]])
    assert {tuple(p) for p in arg.reshape(-1, 2)} == {(1, 1)}


def test_argmax_small_example():
    assert argmax_locations([[1, 3], [2, 0]]).tolist() == [[[1, 1], [1, 2]], [[2, 1], [1, 2]]]


def test_random_grid_matches_brute_force():
    v = np.random.default_rng(0).normal(size=(20, 20))
    assert np.array_equal(prefix_max(v), brute_max(v))
    assert np.array_equal(argmax_locations(v), brute_argmax(v))


@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.integers(0, 3).map(float)))
@settings(max_examples=60)
def test_ties_resolve_lexicographically(v):
    assert np.array_equal(prefix_max(v), brute_max(v))
    assert np.array_equal(argmax_locations(v), brute_argmax(v))


@given(arrays(np.float64, st.tuples(st.integers(1, 15), st.integers(1, 15)),
              elements=st.floats(-5, 5, allow_nan=False)))
def test_argmax_points_at_window_maximum(v):
    M = prefix_max(v)
    arg = argmax_locations(v)
    assert np.array_equal(v[arg[..., 0] - 1, arg[..., 1] - 1], M)
    assert np.all(arg[..., 0] <= np.arange(1, v.shape[0] + 1)[:, None])
    assert np.all(arg[..., 1] <= np.arange(1, v.shape[1] + 1)[None, :])


@given(arrays(np.float64, st.tuples(st.integers(1, 15), st.integers(1, 15)),
              elements=st.floats(-5, 5, allow_nan=False)))
def test_prefix_max_monotone(v):
    M = prefix_max(v)
    assert np.all(np.diff(M, axis=0) >= 0) and np.all(np.diff(M, axis=1) >= 0)


def test_argmax_locations_are_sparse():
    v = sample_gaussian(1, 50, 50).values
    arg = argmax_locations(v)
    brute = brute_argmax(v)
    assert np.array_equal(arg, brute)
    distinct = distinct_argmax_locations(arg)
    assert len(distinct) < 0.05 * v.size


def test_prefix_max_accepts_double_array():
    arr = DoubleArray(np.array([[2.0, 1.0]]))
    assert prefix_max(arr).tolist() == [[2.0, 2.0]]


def test_empty_grid_rejected():
    with pytest.raises(ValueError):
        prefix_max(np.zeros((0, 2)))


# ---------------------------------------------------------------- normalizer

def test_normalizer_origin():
    assert normalizer(GAUSS_SPEC, 1, 1) == 0.0


def test_normalizer_gaussian_closed_form():
    for m, j in [(2, 3), (10, 7), (1000, 1000)]:
        assert normalizer(GAUSS_SPEC, m, j) == pytest.approx(math.sqrt(2 * math.log(m * j)), rel=1e-14)
    # ln(mj) = 2 gives a = 2
    assert float(GAUSS_SPEC.g(2.0)) * float(GAUSS_SPEC.family.psi_inverse(2.0)) == pytest.approx(2.0)


def test_normalizer_weibull_closed_form():
    assert normalizer(WEIB_SPEC, 1000, 1000) == pytest.approx(1.25 * math.log(1e6) ** (1 / 9), rel=1e-14)


def test_normalizer_rejects_bad_extent():
    with pytest.raises(ValueError):
        normalizer(GAUSS_SPEC, 0, 3)


@pytest.mark.parametrize("spec", [GAUSS_SPEC, WEIB_SPEC, normalizer_spec(make_power_family(3), "exp:0.5"),
                                  normalizer_spec(make_gaussian_family(), {"kind": "powerlog", "c": 1, "p": 0.5, "s": 1})])
def test_normalizer_grid_monotone_and_consistent(spec):
    a = normalizer_grid(spec, 17, 23)
    assert np.all(np.diff(a, axis=0) >= 0) and np.all(np.diff(a, axis=1) >= 0)
    assert a[16, 22] == pytest.approx(normalizer(spec, 17, 23), rel=1e-14)


# ---------------------------------------------------------------- deviations

def test_zero_field():
    v = np.zeros((6, 5))
    d = deviations(v, GAUSS_SPEC)
    a = normalizer_grid(GAUSS_SPEC, 6, 5)
    assert np.array_equal(d.y, -a)
    assert not d.y_plus.any()
    assert np.array_equal(d.y_minus, a)


def test_single_cell():
    d = deviations([[0.7]], WEIB_SPEC)
    assert d.y[0, 0] == 0.7 and d.z[0, 0] == 0.7


def test_deviations_match_brute_force():
    v = np.random.default_rng(3).normal(size=(20, 20))
    d = deviations(v, GAUSS_SPEC)
    for m in range(1, 21):
        for j in range(1, 21):
            expected = v[:m, :j].max() - normalizer(GAUSS_SPEC, m, j)
            assert d.y[m - 1, j - 1] == pytest.approx(expected, abs=1e-14)


@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)),
              elements=st.floats(-4, 4, allow_nan=False)), st.floats(0, 2))
def test_decomposition_and_lemma_shadow(v, eps):
    d = deviations(v, GAUSS_SPEC)
    assert np.array_equal(d.y_plus - d.y_minus, d.y)
    assert np.all(np.minimum(d.y_plus, d.y_minus) == 0)
    assert np.all(d.y[d.z > eps] > eps)


def test_precomputed_normalizer_shape_checked():
    with pytest.raises(ValueError):
        deviations(np.zeros((3, 3)), GAUSS_SPEC, a=np.zeros((2, 2)))


def test_deviations_without_argmax():
    assert deviations(np.ones((2, 2)), GAUSS_SPEC, with_argmax=False).argmax is None


# ---------------------------------------------------------------- window series

def test_window_series_single():
    d = deviations(np.array([[0.3, 1.0], [2.0, -1.0]]), GAUSS_SPEC)
    assert window_series(d, [(1, 1)]).tolist() == [d.y[0, 0]]


def test_window_series_diagonal_matches_recomputation():
    v = sample_gaussian(4, 20, 20).values
    d = deviations(v, GAUSS_SPEC)
    path = [(i, i) for i in range(1, 21)]
    ys = window_series(d, path)
    for (m, j), y in zip(path, ys):
        assert y == v[:m, :j].max() - normalizer(GAUSS_SPEC, m, j)


def test_window_series_preserves_order():
    d = deviations(sample_gaussian(4, 10, 10).values, GAUSS_SPEC)
    ws = [(5, 5), (1, 1), (10, 3)]
    assert window_series(d, ws).tolist() == [d.y[4, 4], d.y[0, 0], d.y[9, 2]]


@pytest.mark.parametrize("bad", [(0, 1), (11, 1), (1, 11)])
def test_window_series_rejects_out_of_range(bad):
    d = deviations(np.zeros((10, 10)), GAUSS_SPEC)
    with pytest.raises(ValueError):
        window_series(d, [bad])


def test_geometric_windows():
    assert geometric_windows(8, 31, 3) == [(8, 31), (16, 62), (32, 124)]
    assert geometric_windows(8, 8, 10, limit=(40, 40)) == [(8, 8), (16, 16), (32, 32)]
