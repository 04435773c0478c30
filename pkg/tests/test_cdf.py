"""Tests for the interpolated conditional CDF and its level-set machinery."""

import numpy as np
import pytest
from scipy import optimize, stats

from streamcqr.cdf import (
    InterpolatedCDF,
    build_cdf,
    cdf_density,
    refine_levels,
    support_preimage,
)
from streamcqr.config import Config
from streamcqr.errors import DataError, DensityTooSmall, LevelSetEmpty
from streamcqr.interpolation import Interpolant
from streamcqr.state import Chunk, init_state, update_chunk


def _analytic_cdf(nodes, values, degree=3, mesh=40):
    return InterpolatedCDF(Interpolant(nodes, values, degree), 0, mesh, 0)


def _gaussian_cdf():
    nodes = np.linspace(-4.0, 4.0, 99)
    return _analytic_cdf(nodes, stats.norm.cdf(nodes))


def _identity_cdf():
    nodes = np.linspace(0.0, 1.0, 21)
    return _analytic_cdf(nodes, nodes)


# -- build_cdf ----------------------------------------------------------


def test_build_cdf_saturated_when_all_y_below_nodes():
    cfg = Config(interval=(-1.0, 1.0))
    st = init_state([0.0], [np.array([2.0, 3.0, 4.0, 5.0])], cfg)
    update_chunk(st, Chunk([0.0, 0.2, -0.1], [0.0, 1.0, -1.0]), h=1.0)
    cdf = build_cdf(st, 0)
    ys = np.linspace(2.0, 5.0, 31)
    np.testing.assert_array_equal(cdf.evaluate(ys), np.ones(31))
    assert cdf.clamped_nodes == 0


def test_build_cdf_requires_data():
    cfg = Config(interval=(-1.0, 1.0))
    st = init_state([0.0], [np.array([0.0, 1.0, 2.0, 3.0])], cfg)
    with pytest.raises(DataError):
        build_cdf(st, 0)


def test_build_cdf_density_floor():
    cfg = Config(interval=(-1.0, 1.0))
    st = init_state([-1.0, 0.0], [np.array([0.0, 1.0, 2.0, 3.0])] * 2, cfg)
    # all samples near x=0 with a small bandwidth: no mass reaches x=-1
    update_chunk(st, Chunk([0.0, 0.05, -0.05], [1.0, 2.0, 0.5]), h=0.1)
    with pytest.raises(DensityTooSmall) as err:
        build_cdf(st, 0)
    assert err.value.grid_index == 0
    assert err.value.value < err.value.floor
    build_cdf(st, 1)  # the populated grid point still works


def test_build_cdf_counts_clamped_nodes():
    cfg = Config(interval=(-1.0, 1.0))
    st = init_state([0.0], [np.array([0.0, 1.0, 2.0, 3.0])], cfg)
    update_chunk(st, Chunk([0.0, 0.1], [0.5, 1.5]), h=1.0)
    st.S[0, 0] = st.fX[0] * 1.5  # force a node ratio above 1
    cdf = build_cdf(st, 0)
    assert cdf.clamped_nodes >= 1
    assert np.all(cdf.evaluate(np.linspace(0.0, 3.0, 50)) <= 1.0)


def test_build_cdf_median_matches_gaussian():
    rng = np.random.default_rng(123)
    N = 10_000
    x = rng.uniform(-1.0, 1.0, N)
    y = rng.normal(size=N)
    cfg = Config(interval=(-1.0, 1.0))
    st = init_state([0.0], [np.linspace(-3.0, 3.0, 99)], cfg)
    update_chunk(st, Chunk(x, y), h=0.3)
    cdf = build_cdf(st, 0)
    assert abs(float(cdf.evaluate(np.asarray([0.0]))[0]) - 0.5) < 0.03


# -- evaluation and density --------------------------------------------


def test_evaluate_clamped_and_density_floored_on_random_states():
    rng = np.random.default_rng(7)
    cfg = Config(interval=(-1.0, 1.0))
    for _ in range(5):
        st = init_state([0.0], [np.sort(rng.uniform(-3, 3, 12))], cfg)
        n = 200
        update_chunk(st, Chunk(rng.uniform(-1, 1, n), rng.normal(size=n)), 0.4)
        cdf = build_cdf(st, 0)
        ys = np.linspace(*cdf.y_range, 301)
        F = cdf.evaluate(ys)
        assert np.all(F >= 0.0) and np.all(F <= 1.0)
        assert np.all(cdf.density(ys) >= 0.0)


def test_density_of_linear_interpolant_is_slope():
    cdf = _analytic_cdf(np.array([0.0, 1.0]), np.array([0.0, 1.0]), degree=1)
    ys = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(cdf_density(cdf, ys), np.ones(11), atol=1e-14)


def test_density_of_flat_interpolant_is_zero():
    cdf = _analytic_cdf(np.array([0.0, 1.0]), np.array([0.5, 0.5]), degree=1)
    np.testing.assert_array_equal(cdf_density(cdf, np.linspace(0, 1, 11)), 0.0)


def test_density_floored_on_decreasing_segment():
    # non-monotone node values produce a locally decreasing cubic fit
    nodes = np.array([0.0, 1.0, 2.0, 3.0])
    cdf = _analytic_cdf(nodes, np.array([0.0, 0.9, 0.2, 1.0]))
    ys = np.linspace(0.0, 3.0, 601)
    _, slope = cdf.value_and_slope(ys)
    assert np.any(slope < 0.0)
    assert np.all(cdf.density(ys) >= 0.0)
    assert np.all(cdf.density(ys[slope < 0.0]) == 0.0)
    assert cdf.nonmonotone_cells > 0


def test_value_and_density_consistency():
    cdf = _gaussian_cdf()
    ys = np.linspace(-3.5, 3.5, 101)
    val, den = cdf.value_and_density(ys)
    np.testing.assert_array_equal(val, cdf.evaluate(ys))
    np.testing.assert_array_equal(den, cdf.density(ys))
    val2, slope = cdf.value_and_slope(ys)
    np.testing.assert_array_equal(val2, val)
    np.testing.assert_array_equal(np.maximum(slope, 0.0), den)


def test_eval_clamped_matches_evaluate_off_nodes():
    cdf = _gaussian_cdf()
    rng = np.random.default_rng(3)
    ys = rng.uniform(-3.9, 3.9, 200)
    np.testing.assert_array_equal(cdf.eval_clamped(ys), cdf.evaluate(ys))


# -- fine mesh -----------------------------------------------------------


def test_mesh_layout_and_caching():
    cdf = _identity_cdf()
    n_nodes = cdf.interpolant.nodes.size
    mesh = cdf.mesh
    assert mesh.size == (n_nodes - 1) * 40 + 1
    assert mesh[0] == cdf.interpolant.nodes[0]
    assert mesh[-1] == cdf.interpolant.nodes[-1]
    assert np.all(np.diff(mesh) > 0)
    assert cdf.mesh is mesh  # cached
    F = cdf.mesh_F
    np.testing.assert_array_equal(
        F, np.clip(cdf.interpolant.eval_raw(mesh), 0.0, 1.0)
    )
    assert cdf.mesh_F is F  # cached
    assert cdf.mesh_density_raw is cdf.mesh_density_raw


# -- support_preimage -----------------------------------------------------


def test_support_preimage_identity():
    lo, hi = support_preimage(_identity_cdf(), 0.1, 0.9)
    assert abs(lo - 0.1) < 1e-12
    assert abs(hi - 0.9) < 1e-12


def test_support_preimage_gaussian_quantiles():
    lo, hi = support_preimage(_gaussian_cdf(), 0.1, 0.9)
    q = stats.norm.ppf(0.9)
    assert abs(lo + q) < 1e-5
    assert abs(hi - q) < 1e-5


def test_support_preimage_empty_level_set():
    nodes = np.array([0.0, 1.0, 2.0, 3.0])
    cdf = _analytic_cdf(nodes, np.ones(4))
    with pytest.raises(LevelSetEmpty):
        support_preimage(cdf, 0.1, 0.9)


def test_support_preimage_validation():
    cdf = _identity_cdf()
    with pytest.raises(DataError):
        support_preimage(cdf, 0.9, 0.1)
    with pytest.raises(DataError):
        support_preimage(cdf, -0.1, 0.9)
    with pytest.raises(DataError):
        support_preimage(cdf, 0.1, 1.1)


def test_support_preimage_touching_range_edge():
    lo, hi = support_preimage(_identity_cdf(), 0.0, 0.9)
    assert lo == 0.0
    assert abs(hi - 0.9) < 1e-12


# -- refine_levels ---------------------------------------------------------


def _bracket_cells(cdf, targets):
    mesh, F = cdf.mesh, cdf.mesh_F
    idx = np.searchsorted(F, targets) - 1
    return mesh[idx], mesh[idx + 1], F[idx], F[idx + 1]


def test_refine_levels_matches_brentq_both_lanes():
    cdf = _gaussian_cdf()
    rng = np.random.default_rng(0)
    targets = rng.uniform(0.05, 0.95, 40)
    a, b, fa, fb = _bracket_cells(cdf, targets)

    batched = refine_levels(cdf, a, b, fa, fb, targets)  # > 16: vector lane
    single = np.array(
        [
            refine_levels(cdf, [ai], [bi], [fai], [fbi], [t])[0]
            for ai, bi, fai, fbi, t in zip(a, b, fa, fb, targets)
        ]
    )  # <= 16 elements: scalar lane
    ref = np.array(
        [
            optimize.brentq(
                lambda y, t=t: float(cdf.eval_clamped(np.asarray([y]))[0]) - t,
                ai,
                bi,
                xtol=1e-14,
            )
            for ai, bi, t in zip(a, b, targets)
        ]
    )
    np.testing.assert_allclose(batched, ref, rtol=0, atol=1e-12)
    np.testing.assert_allclose(single, ref, rtol=0, atol=1e-12)
    np.testing.assert_allclose(batched, single, rtol=0, atol=1e-13)


def test_refine_levels_roots_hit_targets():
    cdf = _gaussian_cdf()
    rng = np.random.default_rng(1)
    targets = rng.uniform(0.05, 0.95, 24)
    a, b, fa, fb = _bracket_cells(cdf, targets)
    roots = refine_levels(cdf, a, b, fa, fb, targets)
    assert np.all(roots >= a) and np.all(roots <= b)
    hit = cdf.eval_clamped(roots)
    np.testing.assert_allclose(hit, targets, rtol=0, atol=1e-10)


def test_refine_levels_empty_input():
    cdf = _identity_cdf()
    out = refine_levels(cdf, [], [], [], [], [])
    assert out.size == 0


def test_refine_levels_flat_cell_stays_in_bracket():
    # on a plateau at the target every point is a root; the result must
    # stay inside the original bracket and hit the target exactly
    cdf = _analytic_cdf(np.array([0.0, 1.0]), np.array([0.5, 0.5]), degree=1)
    root = refine_levels(cdf, [0.2], [0.4], [0.5], [0.5], [0.5])[0]
    assert 0.2 <= root <= 0.4
    assert float(cdf.eval_clamped(np.asarray([root]))[0]) == 0.5
