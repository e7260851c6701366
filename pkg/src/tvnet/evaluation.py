"""Synthetic ground truth, accuracy metrics and AIC parameter selection."""
from __future__ import annotations

import enum
import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .admm import solve, spd_logdet
from .data import (InputError, ObservationSet, PenaltySpec, SolverConfig,
                   ThetaSequence, empirical_covariances)

logger = logging.getLogger(__name__)

EDGE_PROB = 0.2
WEIGHT_RANGE = (0.2, 0.6)
DIAG_MARGIN = 0.5


class ShiftKind(str, enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"


@dataclass
class GroundTruthScenario:
    kind: ShiftKind
    p: int
    T: int
    shift_time: int
    samples_per_t: int
    seed: int
    true_inverse_covs: np.ndarray
    perturbed_node: int = None

    def truth(self):
        return ThetaSequence(self.true_inverse_covs, np.arange(self.T, dtype=float), 0.0)


def random_sparse_precision(p, rng, edge_prob=EDGE_PROB):
    """Erdos-Renyi support with weights uniform on +-[0.2, 0.6], made SPD via the diagonal."""
    upper = np.triu(rng.random((p, p)) < edge_prob, 1)
    weights = rng.uniform(*WEIGHT_RANGE, size=(p, p)) * rng.choice([-1.0, 1.0], size=(p, p))
    A = np.where(upper, weights, 0.0)
    A = A + A.T
    A[np.diag_indices(p)] = abs(np.linalg.eigvalsh(A)[0]) + DIAG_MARGIN
    return A


def perturb_node(theta, node, rng, edge_prob=EDGE_PROB):
    """Resample one node's edges; only that row/column and its diagonal entry change."""
    p = theta.shape[0]
    others = np.delete(np.arange(p), node)
    old = theta[node, others]
    for _ in range(1000):
        mask = rng.random(p - 1) < edge_prob
        new = np.where(mask, rng.uniform(*WEIGHT_RANGE, p - 1) * rng.choice([-1.0, 1.0], p - 1), 0.0)
        if not np.array_equal(mask, old != 0):
            break
    out = theta.copy()
    out[node, others] = new
    out[others, node] = new
    rest = theta[np.ix_(others, others)]
    schur = new @ np.linalg.solve(rest, new)
    out[node, node] = max(theta[node, node], schur + DIAG_MARGIN)
    return out


def generate_scenario(kind, p=10, T=100, samples_per_t=10, seed=0, shift_time=None):
    """Piecewise-constant ground truth with one shift and Gaussian samples.

    Timestamps are ``0, 1, ..., T-1``; the second regime starts at index
    ``shift_time`` (default ``T // 2``).
    """
    kind = ShiftKind(kind)
    if p < 2 or T < 2:
        raise InputError("need p >= 2 and T >= 2")
    shift_time = T // 2 if shift_time is None else int(shift_time)
    if not 0 < shift_time < T:
        raise InputError("shift_time must be inside (0, T)")
    rng = np.random.default_rng(seed)
    before = random_sparse_precision(p, rng)
    node = None
    if kind is ShiftKind.GLOBAL:
        after = random_sparse_precision(p, rng)
    else:
        node = int(rng.integers(p))
        after = perturb_node(before, node, rng)
    truth = np.array([before if t < shift_time else after for t in range(T)])
    chol_before = np.linalg.cholesky(np.linalg.inv(before))
    chol_after = np.linalg.cholesky(np.linalg.inv(after))
    samples = []
    for t in range(T):
        L = chol_before if t < shift_time else chol_after
        samples.append(rng.standard_normal((samples_per_t, p)) @ L.T)
    scenario = GroundTruthScenario(kind, p, T, shift_time, samples_per_t, seed, truth, node)
    return scenario, ObservationSet(np.arange(T, dtype=float), tuple(samples))


def _offdiag_support(mats, threshold):
    mats = np.asarray(mats)
    p = mats.shape[-1]
    iu = np.triu_indices(p, 1)
    return np.abs(mats[:, iu[0], iu[1]]) > threshold


def f1_score(estimated, truth):
    """Harmonic mean of precision and recall of the off-diagonal support.

    ``truth`` may be a scenario, a ThetaSequence or a stacked array; the
    estimate is thresholded at its ``edge_threshold``.
    """
    if isinstance(truth, GroundTruthScenario):
        truth = truth.true_inverse_covs
    true_mats = getattr(truth, "thetas", truth)
    true_thr = getattr(truth, "edge_threshold", 0.0)
    est = getattr(estimated, "thetas", estimated)
    est_thr = getattr(estimated, "edge_threshold", 1e-4)
    if np.shape(est) != np.shape(true_mats):
        raise InputError("estimate and truth shapes differ")
    pred = _offdiag_support(est, est_thr)
    real = _offdiag_support(true_mats, true_thr)
    tp = np.sum(pred & real)
    n_pred, n_real = pred.sum(), real.sum()
    if n_pred == 0 and n_real == 0:
        return 1.0
    if n_pred == 0 or n_real == 0 or tp == 0:
        return 0.0
    precision, recall = tp / n_pred, tp / n_real
    return float(2 * precision * recall / (precision + recall))


def temporal_deviation(thetas):
    """``||Theta_i - Theta_{i-1}||_F`` for every consecutive pair."""
    th = np.asarray(getattr(thetas, "thetas", thetas), dtype=float)
    return np.linalg.norm(np.diff(th, axis=0), axis=(1, 2))


@dataclass
class TDRatio:
    ratio: float
    argmax_index: int
    degenerate: bool = False


def td_ratio_from_deviations(dev, shift_index):
    """Deviation entering timestamp ``shift_index`` over the mean deviation.

    ``dev[k]`` is the change from timestamp ``k`` to ``k + 1``; the returned
    ``argmax_index`` is the timestamp where the largest change lands.
    """
    dev = np.asarray(dev, dtype=float)
    if not 1 <= shift_index <= len(dev):
        raise InputError("shift index must name a timestamp after the first")
    mean = dev.mean()
    argmax = int(np.argmax(dev)) + 1
    if mean == 0:
        return TDRatio(0.0, argmax, True)
    return TDRatio(float(dev[shift_index - 1] / mean), argmax)


def td_ratio(thetas, shift_index):
    return td_ratio_from_deviations(temporal_deviation(thetas), shift_index)


def log_likelihood(thetas, covs):
    """Per-timestamp ``n_i (log det Theta_i - tr(S_i Theta_i))``."""
    th = np.asarray(getattr(thetas, "thetas", thetas), dtype=float)
    logdet = spd_logdet(th)
    return covs.counts * (logdet - np.einsum("tij,tji->t", covs.covs, th))


def effective_parameters(thetas):
    """Distinct off-diagonal values in a piecewise-constant fit.

    Counts the support of the first matrix plus every upper-triangle entry
    that changes between consecutive timestamps (each above the sequence's
    ``edge_threshold``).  An entry held fixed over a run of timestamps is one
    parameter, not one per timestamp.
    """
    th = np.asarray(thetas.thetas, dtype=float)
    thr = thetas.edge_threshold
    k = int(_offdiag_support(th[:1], thr).sum())
    if len(th) > 1:
        k += int(_offdiag_support(np.diff(th, axis=0), thr).sum())
    return k


def aic(thetas, covs):
    """``2 K - 2 sum_i l_i`` with ``K`` from :func:`effective_parameters`."""
    k = effective_parameters(thetas)
    return 2.0 * k - 2.0 * float(log_likelihood(thetas, covs).sum())


def aic_select(train: ObservationSet, grid, penalty_kind, cfg: SolverConfig = None,
               asynchronous=False, return_scores=False):
    """Grid point ``(lambda, beta)`` minimizing AIC on the training data.

    Ties go to the larger lambda, then the larger beta.  Points whose solve
    fails are skipped with a warning.
    """
    cfg = cfg or SolverConfig()
    grid = [(float(l), float(b)) for l, b in grid]
    if not grid:
        raise InputError("empty parameter grid")
    covs = empirical_covariances(train)

    def score(point):
        lam, beta = point
        try:
            thetas, _, _ = solve(covs, PenaltySpec(penalty_kind, lam, beta, asynchronous), cfg)
            return aic(thetas, covs)
        except (ArithmeticError, InputError) as exc:
            warnings.warn(f"skipping grid point lambda={lam}, beta={beta}: {exc}")
            return None

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            scores = list(pool.map(score, grid))
    else:
        scores = [score(g) for g in grid]
    valid = [(s, g) for s, g in zip(scores, grid) if s is not None]
    if not valid:
        raise InputError("every grid point failed to solve")
    best = min(valid, key=lambda sg: (sg[0], -sg[1][0], -sg[1][1]))[1]
    return (best, dict(zip(grid, scores))) if return_scores else best


def scenario_to_dict(scenario: GroundTruthScenario, obs: ObservationSet):
    return {
        "kind": scenario.kind.value,
        "p": scenario.p,
        "T": scenario.T,
        "shift_time": scenario.shift_time,
        "samples_per_t": scenario.samples_per_t,
        "seed": scenario.seed,
        "perturbed_node": scenario.perturbed_node,
        "true_inverse_covs": scenario.true_inverse_covs.tolist(),
        "timestamps": obs.timestamps.tolist(),
        "samples": [s.tolist() for s in obs.samples],
    }


def scenario_from_dict(d):
    """Inverse of :func:`scenario_to_dict`; the truth is optional."""
    obs = ObservationSet(np.array(d["timestamps"], dtype=float),
                         tuple(np.array(s, dtype=float) for s in d["samples"]))
    if d.get("true_inverse_covs") is None:
        return None, obs
    scenario = GroundTruthScenario(
        ShiftKind(d["kind"]), int(d["p"]), int(d["T"]), int(d["shift_time"]),
        int(d["samples_per_t"]), d.get("seed"), np.array(d["true_inverse_covs"], dtype=float),
        d.get("perturbed_node"))
    return scenario, obs


def save_scenario(path, scenario, obs):
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scenario, obs), fh)


def load_scenario(path):
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))
