"""Proximal operators used by the ADMM solver.

Every operator accepts stacked inputs: matrices may carry leading batch
axes (one slot per timestamp or per consecutive pair) and scalar
parameters broadcast against those axes.  Column operators act on the
columns of the trailing two axes, i.e. along ``axis=-2``; a 1-D input is
treated as a single column.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import NumericError, Penalty

LINF_BISECT_TOL = 1e-10
LINF_BISECT_MAX_ITER = 200


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _batch_param(x, ndim):
    """Reshape a scalar or per-batch parameter so it broadcasts over matrices."""
    x = np.asarray(x, dtype=float)
    return x.reshape(x.shape + (1,) * (ndim - x.ndim)) if x.ndim else x


def _eigh(M, threads=1):
    if threads <= 1 or M.ndim < 3 or M.shape[0] < 2:
        return np.linalg.eigh(M)
    chunks = np.array_split(np.arange(M.shape[0]), min(threads, M.shape[0]))
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda idx: np.linalg.eigh(M[idx]), chunks))
    return np.concatenate([d for d, _ in parts]), np.concatenate([q for _, q in parts])


def prox_logdet_trace(A, S, eta, threads=1):
    """Prox of ``eta * (-log det X + tr(S X))`` evaluated at ``(A + A^T)/2``.

    With ``Q D Q^T = (A + A^T)/(2 eta) - S`` the minimizer is
    ``(eta/2) Q (D + sqrt(D^2 + 4/eta)) Q^T``, always positive definite.
    """
    A = np.asarray(A, dtype=float)
    eta = _batch_param(eta, A.ndim)
    M = _sym(A) / eta - S
    if not np.all(np.isfinite(M)):
        raise NumericError("non-finite input to the log-det proximal operator")
    D, Q = _eigh(M, threads)
    eta_v = eta[..., 0] if np.ndim(eta) else eta
    r = np.sqrt(D * D + 4.0 / eta_v)
    # cancellation-free form of (eta/2)(D + r) for negative D
    lam = np.where(D >= 0, 0.5 * eta_v * (D + r), 2.0 / (r - D))
    return _sym((Q * lam[..., None, :]) @ np.swapaxes(Q, -1, -2))


def soft_threshold(a, thresh):
    return np.sign(a) * np.maximum(np.abs(a) - thresh, 0.0)


def soft_threshold_offdiag(A, thresh):
    """Element-wise soft threshold of the off-diagonal entries; diagonal kept."""
    A = np.asarray(A, dtype=float)
    thresh = _batch_param(thresh, A.ndim)
    out = soft_threshold(A, thresh)
    idx = np.arange(A.shape[-1])
    out[..., idx, idx] = A[..., idx, idx]
    return out


def _columns(a):
    a = np.asarray(a, dtype=float)
    return (a[:, None], True) if a.ndim == 1 else (a, False)


def _finish(out, squeeze):
    return out[:, 0] if squeeze else out


def prox_col_l1(a, eta):
    a, sq = _columns(a)
    return _finish(soft_threshold(a, _batch_param(eta, a.ndim)), sq)


def prox_col_l2(a, eta):
    """Block soft threshold of each column: ``max(0, 1 - eta/||a||) a``."""
    a, sq = _columns(a)
    eta = _batch_param(eta, a.ndim)
    norms = np.linalg.norm(a, axis=-2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > eta, 1.0 - eta / norms, 0.0)
    return _finish(scale * a, sq)


def prox_col_laplacian(a, eta):
    a, sq = _columns(a)
    return _finish(a / (1.0 + 2.0 * _batch_param(eta, a.ndim)), sq)


def prox_col_linf(a, eta, tol=LINF_BISECT_TOL, max_iter=LINF_BISECT_MAX_ITER):
    """Prox of ``eta * max_i |a_i|`` per column, via Moreau decomposition.

    The column is zeroed when ``||a||_1 <= eta``; otherwise
    ``a - eta * P(a/eta)`` where ``P`` projects onto the unit l1 ball.  The
    projection threshold ``sigma`` solves ``sum_i max(|a_i|/eta - sigma, 0) = 1``
    and is found by bisection, then polished exactly on the active set.
    """
    a, sq = _columns(a)
    eta = np.broadcast_to(_batch_param(eta, a.ndim), a.shape[:-2] + (1, a.shape[-1]))
    absa = np.abs(a)
    l1 = absa.sum(axis=-2, keepdims=True)
    outside = (l1 > eta) & (eta > 0)
    safe_eta = np.where(eta > 0, eta, 1.0)
    y = np.where(outside, absa / safe_eta, 0.0)

    lo = np.zeros_like(l1)
    hi = y.max(axis=-2, keepdims=True)
    sigma = 0.5 * (lo + hi)
    for _ in range(max_iter):
        sigma = 0.5 * (lo + hi)
        resid = np.maximum(y - sigma, 0.0).sum(axis=-2, keepdims=True) - 1.0
        # bracket collapsed to float spacing counts as converged for huge y
        done = (np.abs(resid) < tol) | (hi - lo <= 4 * np.finfo(float).eps * hi)
        if np.all(done[outside]):
            break
        lo = np.where(resid > 0, sigma, lo)
        hi = np.where(resid > 0, hi, sigma)
    else:
        raise NumericError("l-infinity prox bisection did not converge")

    active = y > sigma
    n_act = np.maximum(active.sum(axis=-2, keepdims=True), 1)
    sigma = np.where(outside, ((y * active).sum(axis=-2, keepdims=True) - 1.0) / n_act, 0.0)
    clipped = np.sign(a) * np.minimum(absa, eta * sigma)
    out = np.where(outside, clipped, np.where(eta > 0, 0.0, a))
    return _finish(out, sq)


COLUMN_PROX = {
    Penalty.L1: prox_col_l1,
    Penalty.L2: prox_col_l2,
    Penalty.LAPLACIAN: prox_col_laplacian,
    Penalty.LINF: prox_col_linf,
}


@dataclass
class ProxWorkspace:
    """Inner-ADMM variables for the perturbed-node prox, kept for warm starts.

    All arrays share the shape of the (possibly stacked) target matrices.
    """

    V: np.ndarray = None
    W: np.ndarray = None
    Y1: np.ndarray = None
    Y2: np.ndarray = None
    U1: np.ndarray = None
    U2: np.ndarray = None
    converged: bool = True
    iterations: int = 0

    def matches(self, shape):
        return self.V is not None and self.V.shape == shape

    def reset(self, shape):
        for name in ("V", "W", "U1", "U2"):
            setattr(self, name, np.zeros(shape))
        self.Y1 = self.Y2 = None


def prox_perturbed_node(theta_prev, theta_cur, u_prev, u_cur, beta, rho,
                        max_iter=500, eps=1e-8, workspace=None):
    """Joint prox of ``(beta/rho) * psi(Y2 - Y1)`` for the row-column overlap norm.

    Solves ``min_Y beta*psi(Y2 - Y1) + (rho/2)||Y - (Theta + U)||^2`` with
    ``psi(X) = min_{V + V^T = X} sum_j ||V_j||_2`` by an inner ADMM on
    the splitting ``V + W = Y1 - Y2``, ``V = W^T`` (penalty ``rho``).
    ``beta`` may be a per-pair array.  Inner variables are read from and
    written back to ``workspace`` so consecutive calls warm-start.

    Returns
    -------
    (Y1, Y2) : the updated pair, shaped like ``theta_prev``.
    """
    t1 = np.asarray(theta_prev, dtype=float) + u_prev
    t2 = np.asarray(theta_cur, dtype=float) + u_cur
    ws = workspace if workspace is not None else ProxWorkspace()
    w = _batch_param(np.asarray(beta, dtype=float) / rho, t1.ndim)
    if np.all(w == 0):
        ws.converged, ws.iterations = True, 0
        return t1.copy(), t2.copy()
    if not ws.matches(t1.shape):
        ws.reset(t1.shape)
    V, W, U1, U2 = ws.V, ws.W, ws.U1, ws.U2
    Y1 = t1.copy() if ws.Y1 is None else ws.Y1
    Y2 = t2.copy() if ws.Y2 is None else ws.Y2
    thresh = 0.5 * w
    size = np.sqrt(t1.size)
    T = lambda X: np.swapaxes(X, -1, -2)  # noqa: E731

    converged = False
    for it in range(1, max_iter + 1):
        A = 0.5 * ((Y1 - Y2 - W - U1) + (T(W) - U2))
        V = prox_col_l2(A, thresh)
        # (W, Y1, Y2) = (I + c c^T)^{-1} (b - C^T D), c = (1, -1, 1), C = c^T (x) I
        D = V + U1
        rW, r1, r2 = T(V + U2) - D, t1 + D, t2 - D
        s = 0.25 * (rW - r1 + r2)
        W_new, Y1_new, Y2_new = rW - s, r1 + s, r2 - s
        dual = np.sqrt(np.sum((W_new - W - (Y1_new - Y1) + (Y2_new - Y2)) ** 2)
                       + np.sum((W_new - W) ** 2))
        W, Y1, Y2 = W_new, Y1_new, Y2_new
        r_a = V + W - (Y1 - Y2)
        r_b = V - T(W)
        U1 = U1 + r_a
        U2 = U2 + r_b
        primal = np.sqrt(np.sum(r_a ** 2) + np.sum(r_b ** 2))
        scale = max(np.linalg.norm(Y1 - Y2), np.linalg.norm(V), 1.0)
        if primal <= eps * (size + scale) and dual <= eps * (size + max(np.linalg.norm(U1), 1.0)):
            converged = True
            break
    if not (np.all(np.isfinite(Y1)) and np.all(np.isfinite(Y2))):
        raise NumericError("non-finite iterate in the perturbed-node prox")
    ws.V, ws.W, ws.Y1, ws.Y2, ws.U1, ws.U2 = V, W, Y1, Y2, U1, U2
    ws.converged, ws.iterations = converged, it
    return Y1, Y2


def prox_psi(A, kind, eta):
    """Column-separable prox ``prox_{eta psi}(A)`` for l1, l2, Laplacian, linf."""
    kind = Penalty(kind)
    if kind is Penalty.PERTURBED_NODE:
        raise ValueError("the perturbed-node penalty is not column separable")
    return COLUMN_PROX[kind](A, eta)


def prox_pair_psi(theta_prev, theta_cur, u_prev, u_cur, kind, eta, rho=1.0,
                  workspace=None, max_iter=500, eps=1e-8):
    """Joint update of the consensus pair ``(Z_prev, Z_cur)``.

    Evaluates ``prox_{(eta/2) psi(Z_cur - Z_prev)}`` at
    ``(theta_prev + u_prev, theta_cur + u_cur)`` where ``eta = 2 beta / rho``.
    Column-separable penalties reduce to ``E = prox_{eta psi}(difference)``
    followed by ``mean -/+ E/2``.
    """
    kind = Penalty(kind)
    a = np.asarray(theta_prev, dtype=float) + u_prev
    b = np.asarray(theta_cur, dtype=float) + u_cur
    if kind is Penalty.PERTURBED_NODE:
        beta = 0.5 * np.asarray(eta, dtype=float) * rho
        return prox_perturbed_node(theta_prev, theta_cur, u_prev, u_cur, beta, rho,
                                   max_iter=max_iter, eps=eps, workspace=workspace)
    E = COLUMN_PROX[kind](b - a, eta)
    mid = 0.5 * (a + b)
    return mid - 0.5 * E, mid + 0.5 * E


def perturbed_node_norm(X, tol=1e-10, max_iter=20000):
    """Row-column overlap norm ``min_{V + V^T = X} sum_j ||V_j||_2``.

    Douglas-Rachford on ``f(V) = sum_j ||V_j||`` and the indicator of the
    affine set ``{V : V + V^T = X}`` whose projection is
    ``X/2 + (M - M^T)/2``.  Works on stacked ``X`` and returns one value per
    matrix.
    """
    X = _sym(np.asarray(X, dtype=float))

    def project(M):
        return 0.5 * X + 0.5 * (M - np.swapaxes(M, -1, -2))

    G = 0.5 * X
    U = np.zeros_like(X)
    step = max(np.abs(X).max(), 1e-12)
    prev = None
    for k in range(max_iter):
        V = prox_col_l2(G - U, step)
        G = project(V + U)
        U = U + V - G
        if k % 20 == 19:
            val = np.linalg.norm(G, axis=-2).sum(axis=-1)
            if prev is not None and np.all(np.abs(val - prev) <= tol * np.maximum(1.0, val)) \
                    and np.abs(V - G).max() <= tol * step * 10:
                break
            prev = val
    return np.linalg.norm(G, axis=-2).sum(axis=-1)


def psi_value(X, kind):
    """Penalty ``psi`` for each matrix in a (possibly stacked) difference array."""
    kind = Penalty(kind)
    X = np.asarray(X, dtype=float)
    if kind is Penalty.L1:
        return np.abs(X).sum(axis=(-2, -1))
    if kind is Penalty.L2:
        return np.linalg.norm(X, axis=-2).sum(axis=-1)
    if kind is Penalty.LAPLACIAN:
        return (X * X).sum(axis=(-2, -1))
    if kind is Penalty.LINF:
        return np.abs(X).max(axis=-2).sum(axis=-1)
    return perturbed_node_norm(X)
