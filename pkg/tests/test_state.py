"""Tests for the renewable accumulators and their chunk updates."""

import numpy as np
import pytest

from streamcqr.config import Config
from streamcqr.errors import ConfigError, DataError
from streamcqr.state import Chunk, init_state, update_chunk


def _config(**kw):
    kw.setdefault("interval", (-2.0, 2.0))
    return Config(**kw)


def _simple_state(grid=(0.0,), nodes=((-1.0, 0.0, 1.0, 2.0),), **kw):
    cfg = _config(**kw)
    return init_state(np.asarray(grid, dtype=float), [np.asarray(n) for n in nodes], cfg)


def _epanechnikov(u):
    return np.maximum(0.0, 0.75 * (1.0 - np.asarray(u, dtype=float) ** 2))


def _batch_reference(state_proto, xs, ys, hs, sizes):
    """Single-pass weighted means with per-chunk bandwidths."""
    grid = state_proto.grid
    nodes = state_proto._nodes
    N = sum(sizes)
    fX = np.zeros(grid.size)
    S = np.zeros_like(nodes)
    start = 0
    for h, n in zip(hs, sizes):
        xb, yb = xs[start : start + n], ys[start : start + n]
        start += n
        wk = _epanechnikov((xb[None, :] - grid[:, None]) / h) / h
        fX += wk.sum(axis=1)
        below = yb[None, None, :] < nodes[:, :, None]
        S += (wk[:, None, :] * below).sum(axis=2)
    w = state_proto.config.weight_fn(xs)
    return fX / N, S / N, float(np.sum(w * ys)) / N, float(np.sum(w * ys * ys)) / N


# -- documented single-sample updates ---------------------------------


def test_single_sample_density_value():
    st = _simple_state()
    update_chunk(st, Chunk([0.5], [1.0]), h=1.0)
    assert st.N == 1
    assert st.chunks_applied == 1
    assert st.fX[0] == 0.5625


def test_second_sample_symmetric_average():
    st = _simple_state()
    update_chunk(st, Chunk([0.5], [1.0]), h=1.0)
    update_chunk(st, Chunk([-0.5], [2.0]), h=1.0)
    assert st.N == 2
    assert st.fX[0] == 0.5625


def test_sub_cdf_uses_strict_inequality():
    # one sample with y exactly on a node: I(y < node) excludes it
    st = _simple_state(nodes=((0.5, 1.0, 1.5, 2.0),))
    update_chunk(st, Chunk([0.0], [1.0]), h=1.0)
    np.testing.assert_array_equal(st.sub_cdf(0), [0.0, 0.0, 0.75, 0.75])


def test_empty_chunk_is_noop():
    st = _simple_state()
    update_chunk(st, Chunk([0.3], [0.7]), h=0.8)
    before = (st.N, st.chunks_applied, st.fX.copy(), st.S.copy(), st.E_WY, st.E_WY2)
    update_chunk(st, Chunk(np.empty(0), np.empty(0)), h=0.8)
    assert st.N == before[0]
    assert st.chunks_applied == before[1]
    np.testing.assert_array_equal(st.fX, before[2])
    np.testing.assert_array_equal(st.S, before[3])
    assert st.E_WY == before[4]
    assert st.E_WY2 == before[5]


def test_moment_accumulators_match_weighted_means():
    st = _simple_state()
    x = np.array([0.1, -0.5, 3.0])  # last point is outside the interval
    y = np.array([1.0, 2.0, 100.0])
    update_chunk(st, Chunk(x, y), h=1.0)
    w = ((x >= -2.0) & (x <= 2.0)).astype(float)
    assert st.E_WY == pytest.approx(np.sum(w * y) / 3.0, rel=1e-14)
    assert st.E_WY2 == pytest.approx(np.sum(w * y * y) / 3.0, rel=1e-14)


# -- streaming equals batch --------------------------------------------


def test_streaming_matches_batch_over_random_partitions():
    rng = np.random.default_rng(42)
    N = 400
    xs = rng.uniform(-1.5, 1.5, N)
    ys = np.sin(xs) + rng.normal(size=N)
    grid = np.linspace(-1.0, 1.0, 7)
    nodes = [np.linspace(-3.0, 3.0, 11) + 0.1 * i for i in range(grid.size)]
    cfg = _config()

    for trial in range(25):
        cuts = np.sort(rng.choice(np.arange(1, N), size=rng.integers(1, 8), replace=False))
        sizes = np.diff(np.concatenate([[0], cuts, [N]]))
        hs = rng.uniform(0.2, 1.0, sizes.size)

        st = init_state(grid, nodes, cfg)
        start = 0
        for h, n in zip(hs, sizes):
            update_chunk(st, Chunk(xs[start : start + n], ys[start : start + n]), h)
            start += n

        fX, S, ewy, ewy2 = _batch_reference(st, xs, ys, hs, sizes)
        np.testing.assert_allclose(st.fX, fX, rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose(st.S, S, rtol=1e-10, atol=1e-13)
        assert st.E_WY == pytest.approx(ewy, rel=1e-10)
        assert st.E_WY2 == pytest.approx(ewy2, rel=1e-10)


def test_order_invariance_within_chunk():
    rng = np.random.default_rng(9)
    xs = rng.uniform(-1.0, 1.0, 200)
    ys = rng.normal(size=200)
    grid = np.linspace(-0.5, 0.5, 5)
    nodes = [np.linspace(-3.0, 3.0, 9)] * 5
    cfg = _config()

    st1 = init_state(grid, nodes, cfg)
    update_chunk(st1, Chunk(xs, ys), h=0.4)
    perm = rng.permutation(200)
    st2 = init_state(grid, nodes, cfg)
    update_chunk(st2, Chunk(xs[perm], ys[perm]), h=0.4)

    np.testing.assert_allclose(st1.fX, st2.fX, rtol=1e-12)
    np.testing.assert_allclose(st1.S, st2.S, rtol=1e-12, atol=1e-15)
    assert st1.E_WY == pytest.approx(st2.E_WY, rel=1e-12)
    assert st1.E_WY2 == pytest.approx(st2.E_WY2, rel=1e-12)


def test_sub_cdf_monotone_and_mass_bounded_after_every_update():
    rng = np.random.default_rng(11)
    grid = np.linspace(-1.0, 1.0, 6)
    nodes = [np.sort(rng.uniform(-3.0, 3.0, 9)) for _ in range(6)]
    st = init_state(grid, nodes, _config())
    for _ in range(12):
        n = int(rng.integers(1, 60))
        update_chunk(st, Chunk(rng.uniform(-1.5, 1.5, n), rng.normal(size=n)), rng.uniform(0.1, 0.9))
        for i in range(grid.size):
            s = st.sub_cdf(i)
            assert np.all(np.diff(s) >= -1e-12 * max(st.fX[i], 1.0))
            assert s[-1] <= st.fX[i] + 1e-12 * max(st.fX[i], 1.0)


# -- construction and validation ---------------------------------------


def test_init_state_starts_at_zero_with_fingerprint():
    st = _simple_state(grid=(-0.5, 0.5), nodes=((-1.0, 0.0, 1.0, 2.0),) * 2)
    assert st.N == 0
    assert st.chunks_applied == 0
    assert np.all(st.fX == 0.0) and np.all(st.S == 0.0)
    assert st.E_WY == 0.0 and st.E_WY2 == 0.0
    assert isinstance(st.fingerprint, str) and len(st.fingerprint) == 64


def test_minimal_state_four_nodes_degree_three():
    st = _simple_state(nodes=((0.0, 1.0, 2.0, 3.0),), degree=3)
    assert st.node_count(0) == 4


def test_too_few_nodes_for_degree_rejected():
    with pytest.raises(ConfigError):
        _simple_state(nodes=((0.0, 1.0, 2.0),), degree=3)


def test_init_state_validation():
    cfg = _config()
    nodes4 = [np.array([0.0, 1.0, 2.0, 3.0])]
    with pytest.raises(ConfigError):
        init_state(np.array([0.5, 0.4]), nodes4 * 2, cfg)  # unsorted grid
    with pytest.raises(ConfigError):
        init_state(np.array([0.0, 0.0]), nodes4 * 2, cfg)  # duplicate grid
    with pytest.raises(ConfigError):
        init_state(np.array([3.0]), nodes4, cfg)  # outside interval
    with pytest.raises(ConfigError):
        init_state(np.array([0.0]), nodes4 * 2, cfg)  # node-set count mismatch
    with pytest.raises(ConfigError):
        init_state(np.array([0.0]), [np.array([0.0, 0.0, 1.0, 2.0])], cfg)  # dup nodes
    with pytest.raises(ConfigError):
        init_state(np.array([0.0]), [np.array([0.0, 1.0, np.inf, 2.0])], cfg)
    with pytest.raises(ConfigError):
        init_state(np.empty(0), [], cfg)  # empty grid
    with pytest.raises(ConfigError):
        init_state(np.array([0.0]), nodes4, object())  # not a Config


def test_update_rejects_bad_bandwidth_and_data():
    st = _simple_state()
    with pytest.raises(DataError):
        update_chunk(st, Chunk([0.0], [1.0]), h=0.0)
    with pytest.raises(DataError):
        update_chunk(st, Chunk([0.0], [1.0]), h=-1.0)
    with pytest.raises(DataError):
        update_chunk(st, Chunk([0.0], [1.0]), h=np.nan)
    with pytest.raises(DataError):
        update_chunk(st, Chunk([np.nan], [1.0]), h=1.0)
    with pytest.raises(DataError):
        update_chunk(st, Chunk([0.0], [np.inf]), h=1.0)
    # failed updates leave the state untouched
    assert st.N == 0 and np.all(st.fX == 0.0)


def test_chunk_validation_and_from_pairs():
    with pytest.raises(DataError):
        Chunk(np.zeros(3), np.zeros(4))
    with pytest.raises(DataError):
        Chunk(np.zeros((2, 2)), np.zeros((2, 2)))
    ch = Chunk.from_pairs([(0.1, 1.0), (0.2, 2.0)])
    assert len(ch) == 2
    np.testing.assert_array_equal(ch.x, [0.1, 0.2])
    np.testing.assert_array_equal(ch.y, [1.0, 2.0])
    assert len(Chunk.from_pairs([])) == 0


def test_reset_restores_fresh_state():
    st = _simple_state()
    update_chunk(st, Chunk([0.2, -0.3], [1.0, 2.0]), h=0.7)
    fp = st.fingerprint
    st.reset()
    assert st.N == 0 and st.chunks_applied == 0
    assert np.all(st.fX == 0.0) and np.all(st.S == 0.0)
    assert st.E_WY == 0.0 and st.E_WY2 == 0.0
    assert st.fingerprint == fp


def test_snapshot_is_isolated():
    st = _simple_state()
    update_chunk(st, Chunk([0.2], [1.0]), h=0.7)
    snap = st.snapshot()
    update_chunk(st, Chunk([0.4], [2.0]), h=0.7)
    assert snap.N == 1 and st.N == 2
    assert snap.fX[0] != st.fX[0]


def test_large_chunk_blocked_fold_matches_single_pass():
    # inputs longer than the internal block size fold in pieces;
    # the result must match an unblocked reference
    rng = np.random.default_rng(5)
    N = 120_000
    xs = rng.uniform(-1.0, 1.0, N)
    ys = rng.normal(size=N)
    grid = np.array([-0.3, 0.4])
    nodes = [np.linspace(-3, 3, 5)] * 2
    st = init_state(grid, nodes, _config())
    update_chunk(st, Chunk(xs, ys), h=0.5)
    fX, S, ewy, ewy2 = _batch_reference(st, xs, ys, [0.5], [N])
    np.testing.assert_allclose(st.fX, fX, rtol=1e-10)
    np.testing.assert_allclose(st.S, S, rtol=1e-10)
    assert st.E_WY == pytest.approx(ewy, rel=1e-10)
    assert st.E_WY2 == pytest.approx(ewy2, rel=1e-10)
