import numpy as np
import pytest

from streamcqr.errors import ConfigError
from streamcqr.interpolation import (
    Interpolant,
    basis,
    error_bound,
    nearest_nodes,
)


# ---------------------------------------------------------------------
# Nearest-node selection and the tie rule.


def test_nearest_nodes_plain():
    got = nearest_nodes(2.4, [1.0, 2.0, 3.0, 4.0], 2)
    assert np.array_equal(got, [2.0, 3.0])


def test_nearest_nodes_tie_prefers_smaller():
    got = nearest_nodes(2.5, [1.0, 2.0, 3.0, 4.0], 1)
    assert np.array_equal(got, [2.0])


def test_nearest_nodes_whole_grid():
    got = nearest_nodes(0.0, [1.0, 2.0, 3.0], 3)
    assert np.array_equal(got, [1.0, 2.0, 3.0])


def test_nearest_nodes_count_validation():
    with pytest.raises(ConfigError):
        nearest_nodes(0.0, [1.0, 2.0], 3)
    with pytest.raises(ConfigError):
        nearest_nodes(0.0, [1.0, 2.0], 0)


def test_nearest_nodes_brute_force_equivalence():
    # Including at exact tie points: stable sort keeps the smaller node.
    rng = np.random.default_rng(42)
    for _ in range(50):
        nodes = np.sort(rng.choice(np.arange(40.0), size=9, replace=False))
        count = int(rng.integers(1, 10))
        y = float(rng.choice(0.5 * (nodes[:-1] + nodes[1:])))
        dist = np.abs(y - nodes)
        order = np.argsort(dist, kind="stable")
        want = np.sort(nodes[order[:count]])
        got = nearest_nodes(y, nodes, count)
        assert np.array_equal(got, want)


# ---------------------------------------------------------------------
# Basis functions.


def test_basis_linear_hat():
    assert basis(0.5, 0, [0.0, 1.0], 1) == 0.5


def test_basis_quadratic_value():
    assert basis(0.5, 1, [0.0, 1.0, 2.0], 2) == pytest.approx(0.75, abs=1e-15)


def test_basis_kronecker_delta():
    rng = np.random.default_rng(3)
    nodes = np.sort(rng.uniform(-5, 5, size=9))
    for l in (1, 2, 3):
        for i, yi in enumerate(nodes):
            for j in range(nodes.size):
                want = 1.0 if i == j else 0.0
                assert basis(yi, j, nodes, l) == pytest.approx(want, abs=1e-9)


def test_basis_zero_outside_stencil():
    nodes = np.arange(8.0)
    # y = 0.4 with degree 1 uses nodes {0, 1}; all others give zero.
    for j in range(2, 8):
        assert basis(0.4, j, nodes, 1) == 0.0


# ---------------------------------------------------------------------
# Interpolant construction and evaluation.


def test_kronecker_property_bitwise():
    rng = np.random.default_rng(7)
    nodes = np.sort(rng.uniform(-3, 3, size=15))
    values = rng.standard_normal(15)
    for l in (1, 2, 3):
        interp = Interpolant(nodes, values, l)
        got = interp.evaluate(nodes)
        assert np.array_equal(got, values)


def test_polynomial_reproduction_examples():
    interp = Interpolant([0.0, 1.0, 2.0, 3.0], np.array([0.0, 1.0, 4.0, 9.0]), 2)
    assert interp.evaluate(1.5) == pytest.approx(2.25, abs=1e-12)
    const = Interpolant([0.0, 1.0, 2.0, 3.0], np.full(4, 5.5), 3)
    y = np.linspace(0.0, 3.0, 37)
    assert np.allclose(const.evaluate(y), 5.5, atol=1e-12)


def test_degree_l_exactness_random():
    rng = np.random.default_rng(11)
    for _ in range(50):
        l = int(rng.integers(1, 4))
        q = int(rng.integers(l + 1, 14))
        nodes = np.sort(rng.uniform(-4, 4, size=q))
        while np.min(np.diff(nodes)) < 1e-3 if q > 1 else False:
            nodes = np.sort(rng.uniform(-4, 4, size=q))
        coeffs = rng.standard_normal(l + 1)
        poly = np.polynomial.Polynomial(coeffs)
        interp = Interpolant(nodes, poly(nodes), l)
        y = np.linspace(nodes[0], nodes[-1], 101)
        scale = np.max(np.abs(poly(y))) + 1.0
        err = np.max(np.abs(interp.evaluate(y) - poly(y))) / scale
        assert err < 1e-9


def test_locality():
    # Changing a node value far from y must not change the evaluation.
    nodes = np.arange(10.0)
    values = np.sin(nodes)
    l = 3
    a = Interpolant(nodes, values, l)
    bumped = values.copy()
    bumped[-1] += 100.0
    b = Interpolant(nodes, bumped, l)
    y = np.linspace(0.0, 3.0, 50)
    assert np.array_equal(a.evaluate(y), b.evaluate(y))


def test_smooth_function_error_bound():
    # Lemma-style bound: interpolation error of sin on a uniform grid is
    # below ||f''''|| * spacing^4 / 4! for cubic stencils.
    nodes = np.linspace(-3.0, 3.0, 99)
    interp = Interpolant(nodes, np.sin(nodes), 3)
    y = np.linspace(-3.0, 3.0, 1501)
    err = np.max(np.abs(interp.evaluate(y) - np.sin(y)))
    spacing = nodes[1] - nodes[0]
    assert err <= error_bound(1.0, spacing, 3) / 24.0


def test_stencil_jump_bounded_for_smooth_input():
    nodes = np.linspace(-3.0, 3.0, 41)
    interp = Interpolant(nodes, np.sin(nodes), 3)
    spacing = nodes[1] - nodes[0]
    bound = error_bound(1.0, spacing, 3)
    for s in interp.stencil_breaks:
        left = interp.evaluate(s - 1e-12)
        right = interp.evaluate(s + 1e-12)
        assert abs(left - right) <= bound


def test_error_bound_examples():
    assert error_bound(1.0, 0.1, 3) == pytest.approx(1e-4)
    assert error_bound(0.0, 0.5, 3) == 0.0
    assert error_bound(24.0, 0.5, 3) == pytest.approx(1.5)


def test_construction_validation():
    with pytest.raises(ConfigError):
        Interpolant([0.0, 0.0, 1.0], [1.0, 2.0, 3.0], 1)
    with pytest.raises(ConfigError):
        Interpolant([0.0, 1.0, 2.0], [1.0, 2.0, 3.0], 3)
    with pytest.raises(ConfigError):
        Interpolant([0.0, np.inf], [1.0, 2.0], 1)


def test_within_flags_extrapolation():
    interp = Interpolant([0.0, 1.0, 2.0, 3.0], np.zeros(4), 3)
    assert bool(interp.within(1.5))
    assert not bool(interp.within(-0.1))
    assert not bool(interp.within(3.1))


# ---------------------------------------------------------------------
# Piecewise structure used by the quantile integration walk.


def test_eval_raw_matches_evaluate_off_nodes():
    rng = np.random.default_rng(5)
    nodes = np.sort(rng.uniform(0, 1, size=12))
    interp = Interpolant(nodes, rng.standard_normal(12), 3)
    y = rng.uniform(nodes[0], nodes[-1], size=200)
    y = y[~np.isin(y, nodes)]
    assert np.array_equal(interp.eval_raw(y), interp.evaluate(y))


def test_window_eval_one_sided_limits():
    rng = np.random.default_rng(9)
    nodes = np.sort(rng.uniform(0, 4, size=10))
    interp = Interpolant(nodes, rng.standard_normal(10), 3)
    for k, s in enumerate(interp.stencil_breaks):
        # window k is active just below the switch, window k+1 just above
        below, _ = interp.window_eval(np.asarray(k), np.asarray(s - 1e-11))
        above, _ = interp.window_eval(np.asarray(k + 1), np.asarray(s + 1e-11))
        assert below == pytest.approx(interp.evaluate(s - 1e-11), abs=1e-9)
        assert above == pytest.approx(interp.evaluate(s + 1e-11), abs=1e-9)


def test_segment_windows_match_starts():
    rng = np.random.default_rng(13)
    nodes = np.sort(rng.uniform(0, 4, size=10))
    interp = Interpolant(nodes, rng.standard_normal(10), 3)
    cuts = np.unique(
        np.concatenate([nodes, interp.stencil_breaks, rng.uniform(0, 4, 20)])
    )
    a, b = cuts[:-1], cuts[1:]
    w = interp.segment_windows(a, b)
    mids = interp.stencil_breaks
    lo = np.concatenate(([-np.inf], mids))
    hi = np.concatenate((mids, [np.inf]))
    # each segment's window region must contain the open segment
    assert np.all(lo[w] <= a + 1e-12)
    assert np.all(b - 1e-12 <= hi[w])


def test_extrema_are_critical_points():
    rng = np.random.default_rng(21)
    nodes = np.sort(rng.uniform(0, 1, size=25))
    values = np.cumsum(np.abs(rng.standard_normal(25))) * 0.05
    values += 0.3 * rng.standard_normal(25)  # force wiggles
    interp = Interpolant(nodes, values, 3)
    ext = interp.extrema()
    if ext.size:
        der = interp.derivative(ext)
        assert np.max(np.abs(der)) < 1e-8
    # between consecutive cut points the interpolant is strictly monotone
    cuts = np.unique(
        np.concatenate([nodes, interp.stencil_breaks, ext])
    )
    for a, b in zip(cuts[:-1], cuts[1:]):
        t = np.linspace(a + 1e-9, b - 1e-9, 9)
        if t[0] >= t[-1]:
            continue
        d = interp.derivative(t)
        assert np.all(d >= -1e-8) or np.all(d <= 1e-8)


def test_value_and_derivative_consistent():
    rng = np.random.default_rng(2)
    nodes = np.sort(rng.uniform(0, 1, size=9))
    interp = Interpolant(nodes, rng.standard_normal(9), 3)
    y = np.linspace(nodes[0], nodes[-1], 57)
    v, d = interp.value_and_derivative(y)
    assert np.array_equal(v, interp.evaluate(y))
    assert np.array_equal(d, interp.derivative(y))
    step = 1e-7
    inner = y[(y > nodes[0] + step) & (y < nodes[-1] - step)]
    inner = inner[
        np.min(np.abs(inner[:, None] - interp.stencil_breaks[None, :]), axis=1)
        > 1e-4
    ]
    fd = (interp.eval_raw(inner + step) - interp.eval_raw(inner - step)) / (2 * step)
    assert np.allclose(interp.derivative(inner), fd, atol=1e-5, rtol=1e-4)
