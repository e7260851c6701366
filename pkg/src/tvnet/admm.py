"""Outer ADMM loop for the time-varying graphical lasso.

Variables are stored stacked: ``theta``, ``Z0``, ``U0`` have shape
``(T, p, p)``; the pair copies ``Z1, U1`` (of ``Theta_1..Theta_{T-1}``) and
``Z2, U2`` (of ``Theta_2..Theta_T``) have shape ``(T-1, p, p)``, so slot
``k`` of both belongs to the consecutive pair ``(k, k+1)``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .data import (EmpiricalCovSequence, InputError, NumericError, Penalty,
                   PenaltySpec, SolverConfig, ThetaSequence)
from .prox import (ProxWorkspace, prox_logdet_trace, prox_pair_psi, psi_value,
                   soft_threshold_offdiag)

logger = logging.getLogger(__name__)


@dataclass
class AdmmState:
    theta: np.ndarray
    Z0: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray
    U0: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    rho: float = 1.0
    iter: int = 0
    primal_res: float = np.inf
    dual_res: float = np.inf
    workspace: ProxWorkspace = field(default_factory=ProxWorkspace)

    @classmethod
    def identity(cls, T, p, rho=1.0):
        eye = np.broadcast_to(np.eye(p), (T, p, p))
        pair = np.broadcast_to(np.eye(p), (T - 1, p, p))
        return cls(eye.copy(), eye.copy(), pair.copy(), pair.copy(),
                   np.zeros((T, p, p)), np.zeros((T - 1, p, p)), np.zeros((T - 1, p, p)), rho)

    @property
    def T(self):
        return self.theta.shape[0]

    def copy(self):
        arrays = {k: getattr(self, k).copy() for k in ("theta", "Z0", "Z1", "Z2", "U0", "U1", "U2")}
        return AdmmState(**arrays, rho=self.rho, iter=self.iter, primal_res=self.primal_res,
                         dual_res=self.dual_res, workspace=ProxWorkspace())


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    primal_res: float
    dual_res: float
    objective_trace: list
    wall_time: float
    inner_nonconverged: int = 0

    def to_dict(self):
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "primal_residual": self.primal_res,
            "dual_residual": self.dual_res,
            "objective_trace": list(self.objective_trace),
            "wall_time": self.wall_time,
            "inner_nonconverged": self.inner_nonconverged,
        }


def pair_scales(gaps, kind, asynchronous):
    """Per-pair multiplier on beta from the gap-weighted penalty ``h psi(X/h)``.

    Degree-1 penalties are gap independent; the Laplacian term scales by ``1/h``.
    """
    gaps = np.asarray(gaps, dtype=float)
    if np.any(gaps <= 0):
        raise InputError("time gaps must be positive")
    if not asynchronous:
        return np.ones_like(gaps)
    if Penalty(kind).homogeneity == 2:
        return 1.0 / gaps
    return np.ones_like(gaps)


class _Problem:
    """Fixed problem data shared by the update steps."""

    def __init__(self, covs, penalty, cfg, anchor=None, anchor_gap=None):
        self.penalty = penalty
        self.cfg = cfg
        self.rho = cfg.rho
        S, n, gaps = covs.covs, covs.counts, covs.gaps
        self.fixed_first = anchor is not None
        if anchor is not None:
            p = covs.p
            anchor = np.asarray(anchor, dtype=float)
            if anchor.shape != (p, p):
                raise InputError(f"anchor must be ({p}, {p})")
            S = np.concatenate([np.zeros((1, p, p)), S])
            n = np.concatenate([[1.0], n])
            gaps = np.concatenate([[1.0 if anchor_gap is None else anchor_gap], gaps])
            self.anchor = anchor
        self.S = S
        self.n = np.asarray(n, dtype=float)
        self.T = S.shape[0]
        self.beta_pairs = penalty.beta * pair_scales(gaps, penalty.kind, penalty.asynchronous)
        copies = np.ones(self.T)
        copies[:-1] += 1
        copies[1:] += 1
        self.copies = copies


def theta_step(state: AdmmState, prob: _Problem):
    """Theta_i = prox of the scaled negative log-likelihood at the consensus average."""
    acc = state.Z0 - state.U0
    acc[:-1] += state.Z1 - state.U1
    acc[1:] += state.Z2 - state.U2
    A = acc / prob.copies[:, None, None]
    eta = prob.n / (prob.copies * prob.rho)
    theta = prox_logdet_trace(A, prob.S, eta, threads=prob.cfg.threads)
    if prob.fixed_first:
        theta[0] = prob.anchor
    state.theta = theta
    return theta


def z_step(state: AdmmState, prob: _Problem):
    """Sparsity copies by off-diagonal soft threshold; pair copies by the psi prox."""
    pen, rho = prob.penalty, prob.rho
    state.Z0 = soft_threshold_offdiag(state.theta + state.U0, pen.lam / rho)
    if prob.fixed_first:
        state.Z0[0] = prob.anchor
    if prob.T > 1:
        eta = 2.0 * prob.beta_pairs / rho
        state.Z1, state.Z2 = prox_pair_psi(
            state.theta[:-1], state.theta[1:], state.U1, state.U2, pen.kind, eta, rho=rho,
            workspace=state.workspace, max_iter=prob.cfg.inner_max_iter, eps=prob.cfg.inner_eps)
    return state


def u_step(state: AdmmState, prob: _Problem):
    state.U0 = state.U0 + state.theta - state.Z0
    if prob.fixed_first:
        state.U0[0] = 0.0
    state.U1 = state.U1 + state.theta[:-1] - state.Z1
    state.U2 = state.U2 + state.theta[1:] - state.Z2
    return state


def residuals(state: AdmmState, prev_Z):
    """Stacked consensus violation and ``rho`` times the change in ``Z``."""
    th = state.theta
    primal = np.sqrt(np.sum((th - state.Z0) ** 2)
                     + np.sum((th[:-1] - state.Z1) ** 2)
                     + np.sum((th[1:] - state.Z2) ** 2))
    Z0p, Z1p, Z2p = prev_Z
    dual = state.rho * np.sqrt(np.sum((state.Z0 - Z0p) ** 2)
                               + np.sum((state.Z1 - Z1p) ** 2)
                               + np.sum((state.Z2 - Z2p) ** 2))
    return float(primal), float(dual)


def _tolerances(state: AdmmState, cfg: SolverConfig):
    th = state.theta
    n_entries = th.size + state.Z1.size + state.Z2.size
    theta_norm = np.sqrt(np.sum(th ** 2) + np.sum(th[:-1] ** 2) + np.sum(th[1:] ** 2))
    z_norm = np.sqrt(np.sum(state.Z0 ** 2) + np.sum(state.Z1 ** 2) + np.sum(state.Z2 ** 2))
    u_norm = np.sqrt(np.sum(state.U0 ** 2) + np.sum(state.U1 ** 2) + np.sum(state.U2 ** 2))
    root = np.sqrt(n_entries)
    eps_pri = cfg.eps_abs * root + cfg.eps_rel * max(theta_norm, z_norm)
    eps_dual = cfg.eps_abs * root + cfg.eps_rel * state.rho * u_norm
    return eps_pri, eps_dual


def spd_logdet(th):
    """``log det`` of each stacked symmetric matrix; InputError unless all are SPD."""
    eig = np.linalg.eigvalsh(0.5 * (th + np.swapaxes(th, -1, -2)))
    if not np.all(eig > 0):
        raise InputError("log det needs positive definite matrices")
    return np.log(eig).sum(axis=-1)


def objective(thetas, covs: EmpiricalCovSequence, penalty: PenaltySpec):
    """Value of the penalized negative log-likelihood.

    ``sum_i -n_i (log det Theta_i - tr(S_i Theta_i)) + lambda ||Theta_i||_od,1
    + beta sum_i w_i psi(Theta_i - Theta_{i-1})`` where ``w_i`` is the
    asynchronous gap weight (1 in synchronous mode).
    """
    th = np.asarray(getattr(thetas, "thetas", thetas), dtype=float)
    if th.ndim == 2:
        th = th[None]
    logdet = spd_logdet(th)
    loglik = covs.counts * (logdet - np.einsum("tij,tji->t", covs.covs, th))
    offdiag = np.abs(th).sum(axis=(1, 2)) - np.abs(np.diagonal(th, axis1=1, axis2=2)).sum(axis=1)
    total = -loglik.sum() + penalty.lam * offdiag.sum()
    if len(th) > 1 and penalty.beta > 0:
        scales = pair_scales(covs.gaps, penalty.kind, penalty.asynchronous)
        total += penalty.beta * np.dot(scales, psi_value(np.diff(th, axis=0), penalty.kind))
    return float(total)


def solve(covs: EmpiricalCovSequence, penalty: PenaltySpec, cfg: SolverConfig = None,
          init: AdmmState = None, anchor=None, anchor_gap=None, edge_threshold=1e-4,
          track_objective=False):
    """Solve the time-varying graphical lasso by ADMM.

    Parameters
    ----------
    covs : EmpiricalCovSequence
    penalty : PenaltySpec
    cfg : SolverConfig, optional
    init : AdmmState, optional
        Warm start; identity/zero initialization otherwise.
    anchor : (p, p) array, optional
        A fixed matrix placed before the first timestamp.  It contributes
        only its temporal coupling to the first estimate; used by the
        streaming window.
    anchor_gap : float, optional
        Time between the anchor and the first timestamp (asynchronous mode).
    track_objective : bool
        Record the objective of the sparse iterate at every iteration.

    Returns
    -------
    ThetaSequence
        The sparse consensus iterate ``Z0``.
    SolveReport
    AdmmState
        Final state (including the anchor slot when one was given), usable
        as a warm start.
    """
    cfg = cfg or SolverConfig()
    if covs.T == 0:
        raise InputError("no timestamps to solve for")
    prob = _Problem(covs, penalty, cfg, anchor, anchor_gap)
    if init is None:
        state = AdmmState.identity(prob.T, covs.p, cfg.rho)
        if prob.fixed_first:
            state.theta[0] = state.Z0[0] = prob.anchor
    else:
        if init.theta.shape != (prob.T, covs.p, covs.p):
            raise InputError("warm start does not match the problem size")
        state = init
        state.rho = cfg.rho
    start = time.perf_counter()
    trace = []
    converged = False
    inner_bad = 0
    for k in range(1, cfg.max_iter + 1):
        prev_Z = (state.Z0, state.Z1, state.Z2)
        theta_step(state, prob)
        z_step(state, prob)
        u_step(state, prob)
        if not state.workspace.converged:
            inner_bad += 1
        state.iter += 1
        state.primal_res, state.dual_res = residuals(state, prev_Z)
        if not (np.isfinite(state.primal_res) and np.isfinite(state.dual_res)):
            raise NumericError(f"non-finite iterate at ADMM iteration {k}")
        if track_objective:
            trace.append(_safe_objective(state.Z0, prob, covs, penalty))
        eps_pri, eps_dual = _tolerances(state, cfg)
        if state.primal_res <= eps_pri and state.dual_res <= eps_dual:
            converged = True
            break
    if inner_bad:
        logger.warning("perturbed-node inner ADMM hit its cap in %d outer iterations", inner_bad)
    if not converged:
        logger.warning("ADMM stopped at max_iter=%d without converging", cfg.max_iter)
    Z = state.Z0[1:] if prob.fixed_first else state.Z0
    result = ThetaSequence(0.5 * (Z + np.swapaxes(Z, 1, 2)), covs.timestamps, edge_threshold)
    report = SolveReport(converged, k, state.primal_res, state.dual_res, trace,
                         time.perf_counter() - start, inner_bad)
    return result, report, state


def _safe_objective(Z, prob, covs, penalty):
    Z = Z[1:] if prob.fixed_first else Z
    try:
        return objective(Z, covs, penalty)
    except InputError:
        return float("nan")
