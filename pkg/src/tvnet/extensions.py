"""Irregular sampling, intermediate-time inference and streaming updates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .admm import AdmmState, pair_scales, solve
from .data import (EmpiricalCovSequence, InputError, Penalty, PenaltySpec,
                   SolverConfig, ThetaSequence)


def async_weights(gaps, penalty):
    """Multiplier on ``beta`` for each consecutive pair given the time gaps.

    ``h * psi(X / h)`` equals ``psi(X)`` for degree-1 penalties and
    ``psi(X) / h`` for the Laplacian.
    """
    kind = penalty.kind if isinstance(penalty, PenaltySpec) else Penalty(penalty)
    return pair_scales(gaps, kind, asynchronous=True)


def infer_intermediate(theta_left, theta_right, t_left, t_right, s, penalty):
    """Network estimate at an unobserved time ``t_left < s < t_right``.

    Minimizes ``w(s - t_left) psi(X - left) + w(t_right - s) psi(right - X)``
    with ``w(d) = 1/d``.  The Laplacian gives the linear interpolation.  For
    the degree-1 penalties the triangle inequality makes the nearer
    endpoint optimal (any point on the segment on a tie; the midpoint is
    returned).
    """
    if not t_left < s < t_right:
        raise InputError(f"s={s} must lie strictly inside ({t_left}, {t_right})")
    kind = penalty.kind if isinstance(penalty, PenaltySpec) else Penalty(penalty)
    left = np.asarray(theta_left, dtype=float)
    right = np.asarray(theta_right, dtype=float)
    w_left, w_right = 1.0 / (s - t_left), 1.0 / (t_right - s)
    if kind is Penalty.LAPLACIAN:
        return (w_left * left + w_right * right) / (w_left + w_right)
    if np.isclose(w_left, w_right, rtol=1e-12, atol=0.0):
        return 0.5 * (left + right)
    return left.copy() if w_left > w_right else right.copy()


def interpolate_sequence(thetas: ThetaSequence, s, penalty):
    """Estimate at time ``s`` from a solved sequence; exact on observed times."""
    ts = thetas.timestamps
    if not ts[0] <= s <= ts[-1]:
        raise InputError(f"time {s} is outside the solved range [{ts[0]}, {ts[-1]}]")
    hit = np.nonzero(ts == s)[0]
    if len(hit):
        return thetas.thetas[hit[0]].copy()
    j = int(np.searchsorted(ts, s))
    return infer_intermediate(thetas.thetas[j - 1], thetas.thetas[j], ts[j - 1], ts[j], s, penalty)


@dataclass
class StreamState:
    """Fixed-window streaming estimator.

    The ``window`` most recent timestamps are re-solved on every append;
    older estimates are frozen and the most recent frozen one (the anchor)
    couples to the window only through the temporal penalty.
    """

    window: int = 10
    frozen: list = field(default_factory=list)
    frozen_times: list = field(default_factory=list)
    covs: list = field(default_factory=list)
    counts: list = field(default_factory=list)
    times: list = field(default_factory=list)
    estimates: np.ndarray = None
    admm: AdmmState = None
    n_appended: int = 0
    last_report: object = None

    def __post_init__(self):
        if self.window < 1:
            raise InputError("window must be >= 1")

    @property
    def anchor(self):
        return self.frozen[-1] if self.frozen else None

    @property
    def p(self):
        return self.covs[0].shape[0] if self.covs else None

    def history(self, edge_threshold=1e-4):
        """Every estimate so far: frozen prefix followed by the live window."""
        mats = list(self.frozen)
        if self.estimates is not None:
            mats.extend(self.estimates)
        return ThetaSequence(np.array(mats), np.array(self.frozen_times + self.times), edge_threshold)


def _warm_start(old: AdmmState, old_nodes, new_nodes, anchor, p, rho):
    """Re-index a previous window state onto the new window layout."""
    T = len(new_nodes)
    st = AdmmState.identity(T, p, rho)
    pos = {g: k for k, g in enumerate(old_nodes)}
    last = old_nodes[-1]
    for k, g in enumerate(new_nodes):
        src = pos.get(g, pos[last])
        st.theta[k], st.Z0[k] = old.theta[src], old.Z0[src]
        st.U0[k] = old.U0[src] if g in pos else 0.0
    if anchor is not None:
        st.theta[0] = st.Z0[0] = anchor
        st.U0[0] = 0.0
    for k in range(T - 1):
        a, b = new_nodes[k], new_nodes[k + 1]
        if a in pos and b in pos and pos[b] == pos[a] + 1:
            j = pos[a]
            st.Z1[k], st.Z2[k], st.U1[k], st.U2[k] = old.Z1[j], old.Z2[j], old.U1[j], old.U2[j]
        else:
            st.Z1[k], st.Z2[k] = st.theta[k], st.theta[k + 1]
    return st


def stream_append(state: StreamState, new_cov, n_new, gap, penalty: PenaltySpec,
                  cfg: SolverConfig = None, time=None, edge_threshold=1e-4):
    """Incorporate one new timestamp and re-solve the window.

    Parameters
    ----------
    state : StreamState
        Updated in place and returned.
    new_cov : (p, p) array
        Empirical covariance of the new timestamp.
    n_new : int
        Number of samples behind ``new_cov``.
    gap : float
        Time since the previous timestamp (ignored for the first one).
    time : float, optional
        Absolute time of the new timestamp; defaults to previous time + gap.

    Returns
    -------
    state : StreamState
    delta : ThetaSequence
        Updated estimates of every timestamp in the window.
    """
    cfg = cfg or SolverConfig()
    new_cov = np.asarray(new_cov, dtype=float)
    if new_cov.ndim != 2 or new_cov.shape[0] != new_cov.shape[1]:
        raise InputError("new covariance must be square")
    if state.p is not None and new_cov.shape[0] != state.p:
        raise InputError(f"dimension mismatch: expected {state.p}, got {new_cov.shape[0]}")
    if state.p is None and state.frozen and state.frozen[-1].shape != new_cov.shape:
        raise InputError("dimension mismatch with frozen history")
    if time is None:
        prev = state.times[-1] if state.times else (state.frozen_times[-1] if state.frozen_times else None)
        time = 0.0 if prev is None else prev + gap
    p = new_cov.shape[0]

    g_new = state.n_appended
    old_nodes = _layout(state, g_new - 1) if state.admm is not None else None
    state.covs.append(new_cov)
    state.counts.append(n_new)
    state.times.append(float(time))
    prev_estimates = state.estimates
    if len(state.covs) > state.window:
        state.frozen.append(prev_estimates[0].copy())
        state.frozen_times.append(state.times.pop(0))
        state.covs.pop(0)
        state.counts.pop(0)
    state.n_appended += 1

    anchor = state.anchor
    new_nodes = _layout(state, g_new)
    init = None
    if state.admm is not None:
        init = _warm_start(state.admm, old_nodes, new_nodes, anchor, p, cfg.rho)
    covs = EmpiricalCovSequence(np.array(state.covs), state.counts, state.times)
    anchor_gap = state.times[0] - state.frozen_times[-1] if anchor is not None else None
    result, report, admm = solve(covs, penalty, cfg, init=init, anchor=anchor,
                                 anchor_gap=anchor_gap, edge_threshold=edge_threshold)
    state.admm = admm
    state.estimates = result.thetas
    state.last_report = report
    return state, result


def _layout(state, newest):
    """Global node indices of the solver slots (anchor first when present)."""
    n_live = len(state.covs)
    nodes = list(range(newest - n_live + 1, newest + 1))
    if state.frozen:
        nodes.insert(0, nodes[0] - 1)
    return nodes


def newest_deviation(state: StreamState):
    """Frobenius change between the newest estimate and its predecessor."""
    hist = state.estimates
    if hist is None:
        return None
    if len(hist) >= 2:
        return float(np.linalg.norm(hist[-1] - hist[-2]))
    if state.anchor is not None:
        return float(np.linalg.norm(hist[-1] - state.anchor))
    return None
