import time

import numpy as np
import pytest

from tvnet.admm import solve
from tvnet.data import (EmpiricalCovSequence, InputError, Penalty, PenaltySpec,
                        SolverConfig, ThetaSequence)
from tvnet.extensions import (StreamState, async_weights, infer_intermediate,
                              interpolate_sequence, newest_deviation, stream_append)

CFG = SolverConfig(eps_abs=1e-7, eps_rel=1e-7, max_iter=20000)


def _spd(rng, p):
    X = rng.normal(size=(2 * p, p))
    return X.T @ X / (2 * p) + 0.1 * np.eye(p)


def test_async_weights_examples():
    np.testing.assert_array_equal(async_weights([1.0, 1.0], PenaltySpec("laplacian", 1, 1)), [1, 1])
    assert async_weights([2.0], "laplacian")[0] == 0.5
    for kind in ("l1", "l2", "linf", "perturbed-node"):
        np.testing.assert_array_equal(async_weights([0.3, 7.0], kind), [1, 1])
    with pytest.raises(InputError):
        async_weights([1.0, -1.0], "l1")


def test_intermediate_equal_endpoints():
    M = _spd(np.random.default_rng(0), 3)
    for kind in Penalty:
        np.testing.assert_allclose(infer_intermediate(M, M, 0.0, 1.0, 0.3, kind), M)


def test_intermediate_laplacian():
    rng = np.random.default_rng(1)
    L, R = _spd(rng, 3), _spd(rng, 3)
    np.testing.assert_allclose(infer_intermediate(L, R, 0, 2, 1, "laplacian"), (L + R) / 2)
    np.testing.assert_allclose(infer_intermediate(L, R, 0, 3, 1, "laplacian"), 2 / 3 * L + 1 / 3 * R)


def test_intermediate_laplacian_calculus_oracle():
    # minimize w1 (x - l)^2 + w2 (r - x)^2 on a fine grid
    l, r, s = 1.0, 4.0, 0.7
    w1, w2 = 1 / s, 1 / (2.0 - s)
    grid = np.linspace(l, r, 300001)
    x = grid[np.argmin(w1 * (grid - l) ** 2 + w2 * (r - grid) ** 2)]
    out = infer_intermediate(np.array([[l]]), np.array([[r]]), 0.0, 2.0, s, "laplacian")
    assert out[0, 0] == pytest.approx(x, abs=1e-4)


@pytest.mark.parametrize("kind", ["l1", "l2", "linf", "perturbed-node"])
def test_intermediate_degree_one(kind):
    rng = np.random.default_rng(2)
    L, R = _spd(rng, 3), _spd(rng, 3)
    np.testing.assert_allclose(infer_intermediate(L, R, 0, 4, 1, kind), L)
    np.testing.assert_allclose(infer_intermediate(L, R, 0, 4, 3, kind), R)
    np.testing.assert_allclose(infer_intermediate(L, R, 0, 4, 2, kind), (L + R) / 2)


@pytest.mark.parametrize("kind", ["l1", "l2", "linf"])
def test_intermediate_degree_one_is_optimal(kind):
    # compare against a dense scan along random directions from the returned point
    from tvnet.prox import psi_value
    rng = np.random.default_rng(3)
    L, R = _spd(rng, 3), _spd(rng, 3)
    s = 1.0
    w1, w2 = 1 / s, 1 / (4 - s)

    def f(X):
        return w1 * psi_value(X - L, kind) + w2 * psi_value(R - X, kind)

    X = infer_intermediate(L, R, 0, 4, s, kind)
    for _ in range(200):
        D = rng.normal(size=(3, 3))
        D = D + D.T
        assert f(X) <= f(X + 1e-2 * D) + 1e-12


def test_intermediate_monotone_sweep():
    rng = np.random.default_rng(4)
    L, R = _spd(rng, 3), _spd(rng, 3)
    vals = np.array([infer_intermediate(L, R, 0, 1, s, "laplacian") for s in np.linspace(0.1, 0.9, 5)])
    diffs = np.diff(vals, axis=0) * np.sign(R - L)
    assert np.all(diffs >= -1e-12)


def test_intermediate_bad_time():
    with pytest.raises(InputError):
        infer_intermediate(np.eye(2), np.eye(2), 0, 1, 1.0, "l1")


def test_interpolate_sequence():
    th = ThetaSequence(np.stack([np.eye(2), 3 * np.eye(2)]), np.array([0.0, 2.0]))
    np.testing.assert_array_equal(interpolate_sequence(th, 2.0, "l1"), 3 * np.eye(2))
    np.testing.assert_allclose(interpolate_sequence(th, 1.0, "laplacian"), 2 * np.eye(2))
    with pytest.raises(InputError):
        interpolate_sequence(th, 2.5, "l1")


def test_first_append_equals_single_solve():
    rng = np.random.default_rng(5)
    S = _spd(rng, 3)
    pen = PenaltySpec("l2", 0.2, 1.0)
    state, delta = stream_append(StreamState(window=3), S, 5, 1.0, pen, CFG)
    ref, _, _ = solve(EmpiricalCovSequence(S[None], [5]), pen, CFG)
    np.testing.assert_allclose(delta.thetas, ref.thetas, atol=1e-6)
    assert newest_deviation(state) is None


def test_identical_stream_matches_batch():
    rng = np.random.default_rng(6)
    S = _spd(rng, 3)
    pen = PenaltySpec("l2", 0.2, 1.0)
    state = StreamState(window=3)
    for _ in range(6):
        state, delta = stream_append(state, S, 4, 1.0, pen, CFG)
    batch, _, _ = solve(EmpiricalCovSequence(np.stack([S] * 6), [4] * 6), pen, CFG)
    assert len(delta) == 3 and len(state.frozen) == 3
    for k in range(3):
        assert np.linalg.norm(delta.thetas[k] - batch.thetas[3 + k]) <= 1e-3
    assert len(state.history()) == 6
    np.testing.assert_array_equal(state.anchor, state.frozen[-1])


def _shift_stream(kind, window, cfg):
    rng = np.random.default_rng(7)
    A, B = _spd(rng, 3), _spd(rng, 3)
    seq = [A] * 4 + [B] * 8
    pen = PenaltySpec(kind, 0.1, 0.5)
    state = StreamState(window=window)
    for S in seq:
        state, delta = stream_append(state, S, 10, 1.0, pen, cfg)
    return seq, pen, state, delta


def test_stream_after_old_change_matches_batch_laplacian():
    seq, pen, state, delta = _shift_stream("laplacian", 4, CFG)
    batch, _, _ = solve(EmpiricalCovSequence(np.stack(seq), [10] * len(seq)), pen, CFG)
    for k in range(4):
        assert np.linalg.norm(delta.thetas[k] - batch.thetas[len(seq) - 4 + k]) <= 1e-2


@pytest.mark.parametrize("kind", ["l1", "perturbed-node"])
def test_stream_window_solves_anchored_problem(kind):
    cfg = SolverConfig(rho=5.0, eps_abs=1e-6, eps_rel=1e-6, max_iter=20000)
    seq, pen, state, delta = _shift_stream(kind, 4, cfg)
    ref, _, _ = solve(EmpiricalCovSequence(np.stack(seq[-4:]), [10] * 4), pen, cfg,
                      anchor=state.anchor)
    np.testing.assert_allclose(delta.thetas, ref.thetas, atol=1e-4)


def test_stream_times_and_gaps():
    rng = np.random.default_rng(8)
    pen = PenaltySpec("laplacian", 0.1, 1.0, asynchronous=True)
    state = StreamState(window=2)
    for gap in [0.0, 1.0, 3.0, 0.5]:
        state, delta = stream_append(state, _spd(rng, 2), 5, gap, pen, CFG)
    np.testing.assert_array_equal(state.history().timestamps, [0.0, 1.0, 4.0, 4.5])
    np.testing.assert_array_equal(delta.timestamps, [4.0, 4.5])


def test_stream_dimension_mismatch():
    state, _ = stream_append(StreamState(window=2), np.eye(2), 1, 1.0, PenaltySpec("l1", 0.1, 0.1))
    with pytest.raises(InputError):
        stream_append(state, np.eye(3), 1, 1.0, PenaltySpec("l1", 0.1, 0.1))
    with pytest.raises(InputError):
        StreamState(window=0)


def test_stream_append_time_is_bounded():
    rng = np.random.default_rng(9)
    A = _spd(rng, 5)
    pen = PenaltySpec("l2", 0.2, 1.0)
    cfg = SolverConfig(max_iter=2000)
    state = StreamState(window=4)
    times = []
    for k in range(20):
        X = rng.multivariate_normal(np.zeros(5), np.linalg.inv(A), size=20)
        t = time.perf_counter()
        state, _ = stream_append(state, X.T @ X / 20, 20, 1.0, pen, cfg)
        times.append(time.perf_counter() - t)
    assert times[19] <= 3 * np.median(times[4:15])
