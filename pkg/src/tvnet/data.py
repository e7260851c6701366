"""Domain types, time-series ingestion and empirical covariances."""
from __future__ import annotations

import csv
import enum
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class InputError(ValueError):
    """Invalid user input (bad shapes, parameters out of range, ...)."""


class ParseError(InputError):
    """Malformed time-series file."""

    def __init__(self, message, row=None):
        self.row = row
        super().__init__(message)


class NumericError(ArithmeticError):
    """Non-finite values or a numerical routine that failed to converge."""


class Penalty(str, enum.Enum):
    """Temporal evolution penalties on consecutive precision differences."""

    L1 = "l1"
    L2 = "l2"
    LAPLACIAN = "laplacian"
    LINF = "linf"
    PERTURBED_NODE = "perturbed-node"

    @property
    def homogeneity(self):
        """Degree of positive homogeneity of the penalty."""
        return 2 if self is Penalty.LAPLACIAN else 1


@dataclass(frozen=True)
class ObservationSet:
    """Samples grouped per timestamp.

    ``samples[i]`` is an ``(n_i, p)`` array of the observations made at
    ``timestamps[i]``.
    """

    timestamps: np.ndarray
    samples: tuple

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float)
        samples = tuple(np.atleast_2d(np.asarray(s, dtype=float)) for s in self.samples)
        if len(ts) != len(samples):
            raise InputError("timestamps and sample groups differ in length")
        if len(ts) == 0:
            raise InputError("no observations")
        if np.any(np.diff(ts) <= 0):
            raise InputError("timestamps must be strictly increasing")
        p = samples[0].shape[1]
        for i, s in enumerate(samples):
            if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] != p:
                raise InputError(f"sample group {i} has shape {s.shape}, expected (n>=1, {p})")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "samples", samples)

    @property
    def p(self):
        return self.samples[0].shape[1]

    @property
    def T(self):
        return len(self.timestamps)

    @property
    def counts(self):
        return np.array([s.shape[0] for s in self.samples], dtype=int)

    @classmethod
    def from_rows(cls, times, values):
        """Group rows ``(time, vector)`` into sorted timestamp buckets."""
        times = np.asarray(times, dtype=float)
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if len(times) == 0:
            raise InputError("no observations")
        order = np.argsort(times, kind="stable")
        times, values = times[order], values[order]
        uniq, starts = np.unique(times, return_index=True)
        groups = np.split(values, starts[1:])
        return cls(uniq, tuple(groups))


@dataclass(frozen=True)
class EmpiricalCovSequence:
    """Per-timestamp empirical covariances ``S_i`` with their sample counts."""

    covs: np.ndarray
    counts: np.ndarray
    timestamps: np.ndarray = None

    def __post_init__(self):
        covs = np.asarray(self.covs, dtype=float)
        if covs.ndim == 2:
            covs = covs[None]
        if covs.ndim != 3 or covs.shape[1] != covs.shape[2]:
            raise InputError(f"covariances must be (T, p, p), got {covs.shape}")
        counts = np.broadcast_to(np.asarray(self.counts, dtype=float), (covs.shape[0],)).copy()
        if np.any(counts <= 0):
            raise InputError("sample counts must be positive")
        ts = self.timestamps
        ts = np.arange(covs.shape[0], dtype=float) if ts is None else np.asarray(ts, dtype=float)
        if ts.shape != (covs.shape[0],) or np.any(np.diff(ts) <= 0):
            raise InputError("timestamps must be strictly increasing, one per covariance")
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "timestamps", ts)

    @property
    def T(self):
        return self.covs.shape[0]

    @property
    def p(self):
        return self.covs.shape[1]

    @property
    def gaps(self):
        return np.diff(self.timestamps)

    def pooled(self):
        """Single-timestamp sequence with the count-weighted average covariance."""
        n = self.counts.sum()
        S = np.einsum("t,tij->ij", self.counts, self.covs) / n
        return EmpiricalCovSequence(S[None], [n], self.timestamps[:1])


@dataclass(frozen=True)
class PenaltySpec:
    kind: Penalty
    lam: float
    beta: float
    asynchronous: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Penalty(self.kind))
        if not (self.lam >= 0 and self.beta >= 0):
            raise InputError("lambda and beta must be nonnegative")


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 1.0
    eps_abs: float = 1e-5
    eps_rel: float = 1e-4
    max_iter: int = 1000
    inner_max_iter: int = 500
    inner_eps: float = 1e-8
    threads: int = 1

    def __post_init__(self):
        if not self.rho > 0:
            raise InputError("rho must be positive")
        if not (self.eps_abs > 0 and self.eps_rel > 0 and self.inner_eps > 0):
            raise InputError("tolerances must be positive")
        if self.max_iter < 1 or self.inner_max_iter < 1 or self.threads < 1:
            raise InputError("iteration caps and thread count must be >= 1")

    @classmethod
    def from_env(cls, **kwargs):
        """Config whose thread count falls back to ``TVNET_THREADS``."""
        if kwargs.get("threads") is None:
            kwargs["threads"] = int(os.environ.get("TVNET_THREADS", "1"))
        return cls(**kwargs)


@dataclass
class ThetaSequence:
    """Estimated precision matrices, one per timestamp."""

    thetas: np.ndarray
    timestamps: np.ndarray = None
    edge_threshold: float = 1e-4

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        if self.thetas.ndim == 2:
            self.thetas = self.thetas[None]
        if self.timestamps is None:
            self.timestamps = np.arange(len(self.thetas), dtype=float)
        self.timestamps = np.asarray(self.timestamps, dtype=float)

    def __len__(self):
        return len(self.thetas)

    def __getitem__(self, i):
        return self.thetas[i]

    @property
    def p(self):
        return self.thetas.shape[1]

    def support(self):
        """Boolean ``(T, p, p)`` mask of off-diagonal edges."""
        mask = np.abs(self.thetas) > self.edge_threshold
        mask[:, np.arange(self.p), np.arange(self.p)] = False
        return mask

    def edges(self, i):
        """Edge list ``[(a, b, weight), ...]`` with ``a < b`` at timestamp ``i``."""
        rows, cols = np.nonzero(np.triu(self.support()[i], 1))
        return [(int(a), int(b), float(self.thetas[i, a, b])) for a, b in zip(rows, cols)]

    def is_positive_definite(self):
        return bool(np.all(np.linalg.eigvalsh(_sym(self.thetas))[:, 0] > 0))


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _parse_float(cell, row):
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"non-numeric value {cell!r} in row {row}", row) from None


def parse_rows(lines: Iterable[str], delimiter=",", has_header=False):
    """Parse ``time, v1, ..., vp`` lines into (times, values).

    Row numbers in error messages are 1-based file line numbers.
    """
    times, values = [], []
    p = None
    reader = csv.reader(lines, delimiter=delimiter)
    for lineno, cells in enumerate(reader, start=1):
        if has_header and lineno == 1:
            continue
        cells = [c.strip() for c in cells]
        if not cells or all(c == "" for c in cells):
            continue
        if len(cells) < 2:
            raise ParseError(f"row {lineno} has no sensor values", lineno)
        if p is None:
            p = len(cells) - 1
        elif len(cells) - 1 != p:
            raise ParseError(f"ragged row {lineno}: expected {p} values, found {len(cells) - 1}", lineno)
        row = [_parse_float(c, lineno) for c in cells]
        times.append(row[0])
        values.append(row[1:])
    if not times:
        raise ParseError("empty input: no observation rows")
    return np.array(times), np.array(values)


def load_timeseries(path, delimiter=None, has_header=False, bucket=None) -> ObservationSet:
    """Read a CSV/TSV time series and group rows by timestamp.

    Parameters
    ----------
    path : str or path-like
        File whose rows are ``time, v1, ..., vp``.
    delimiter : str, optional
        Column separator; inferred from the extension (``.tsv`` -> tab) when
        omitted.
    has_header : bool
        Skip the first line.
    bucket : float, optional
        Re-bin times to ``floor(t / bucket) * bucket`` before grouping.
    """
    path = os.fspath(path)
    if delimiter is None:
        delimiter = "\t" if path.endswith((".tsv", ".tab")) else ","
    with open(path, newline="") as fh:
        times, values = parse_rows(fh, delimiter=delimiter, has_header=has_header)
    if bucket is not None:
        times = bucket_times(times, bucket)
    return ObservationSet.from_rows(times, values)


def bucket_times(times, width):
    if not width > 0:
        raise InputError("bucket width must be positive")
    return np.floor(np.asarray(times, dtype=float) / width) * width


def center_columns(obs: ObservationSet) -> ObservationSet:
    """Subtract the global per-dimension mean over every sample."""
    mean = np.concatenate(obs.samples).mean(axis=0)
    return ObservationSet(obs.timestamps, tuple(s - mean for s in obs.samples))


def empirical_covariances(obs: ObservationSet) -> EmpiricalCovSequence:
    """``S_i = (1/n_i) sum_k x_k x_k^T`` for each timestamp (no centering)."""
    covs = np.stack([s.T @ s / s.shape[0] for s in obs.samples])
    return EmpiricalCovSequence(_sym(covs), obs.counts, obs.timestamps)
