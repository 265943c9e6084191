"""Estimating partition weights p_o from outcome counts.

The observed distribution is linear in the weights: ``P = M p`` where
column ``o`` of ``M`` is partition ``o``'s distribution with blanks filled
uniformly. Weights are recovered by EM on the mixture weights, with
simplex-constrained least squares as an independent cross-check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .engine import BLANK, exact_distribution, full_support, visible
from .scenario import PartitionPrior, Scenario, check_partition, format_partition, n_fill

RANK_TOL = 1e-10


class DataModelMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ModelMatrix:
    rows: list  # outcome tuples
    partitions: list
    matrix: np.ndarray  # (len(rows), len(partitions))
    rank: int
    scenario: Scenario = field(repr=False)

    @property
    def identifiable(self) -> bool:
        return self.rank == len(self.partitions)

    def column(self, p) -> np.ndarray:
        return self.matrix[:, self.partitions.index(frozenset(p))]


@dataclass(frozen=True)
class EstimationResult:
    p_hat: PartitionPrior
    log_likelihood: float
    iterations: int
    converged: bool
    identifiable: bool
    method: str = "em"
    trace: list = field(default_factory=list, repr=False)

    def weights(self, partitions) -> np.ndarray:
        return np.array([self.p_hat.weights.get(frozenset(p), 0.0) for p in partitions])

    def to_json(self, scenario: Scenario, partitions) -> str:
        out = {
            "pHat": {format_partition(p, scenario): self.p_hat.weights.get(frozenset(p), 0.0) for p in partitions},
            "logLikelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "identifiable": self.identifiable,
        }
        return json.dumps(out)


def matrix_rank(a: np.ndarray, tol: float = RANK_TOL) -> int:
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def build_model_matrix(s: Scenario, partitions) -> ModelMatrix:
    parts = [check_partition(p, s) for p in partitions]
    rows = full_support(s)
    cols = []
    for p in parts:
        comp = exact_distribution(s, p)
        n = n_fill(s, p)
        cols.append([comp.entries[visible(t, p, s)] / n for t in rows])
    m = np.array(cols, dtype=float).T
    return ModelMatrix(rows, parts, m, matrix_rank(m), s)


def count_vector(m: ModelMatrix, counts: dict) -> np.ndarray:
    index = {t: i for i, t in enumerate(m.rows)}
    c = np.zeros(len(m.rows))
    for t, n in counts.items():
        t = tuple(t)
        if n < 0:
            raise ValueError(f"negative count for {t}")
        if n == 0:
            continue
        if t not in index:
            raise DataModelMismatch(f"outcome {'/'.join(t)} is not in the scenario's support")
        c[index[t]] += n
    if c.sum() < 1:
        raise ValueError("no observations")
    dead = (c > 0) & (m.matrix.sum(axis=1) <= 0)
    if dead.any():
        t = m.rows[int(np.flatnonzero(dead)[0])]
        raise DataModelMismatch(f"outcome {'/'.join(t)} was observed but has probability 0 under every partition")
    return c


def _prior(m: ModelMatrix, p: np.ndarray) -> PartitionPrior:
    return PartitionPrior({part: float(w) for part, w in zip(m.partitions, p)})


def log_likelihood(m: ModelMatrix, c: np.ndarray, p: np.ndarray) -> float:
    seen = c > 0
    mix = m.matrix[seen] @ p
    with np.errstate(divide="ignore"):
        return float(np.sum(c[seen] * np.log(mix)))


def estimate_em(m: ModelMatrix, counts: dict, tol: float = 1e-10, max_iter: int = 100_000) -> EstimationResult:
    c = count_vector(m, counts)
    seen = c > 0
    a, w = m.matrix[seen], c[seen]
    total = w.sum()
    k = len(m.partitions)
    p = np.full(k, 1.0 / k)
    trace = [log_likelihood(m, c, p)]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        mix = a @ p
        resp = a * p / mix[:, None]
        new = (w @ resp) / total
        new /= new.sum()
        delta = np.max(np.abs(new - p))
        p = new
        trace.append(log_likelihood(m, c, p))
        if delta < tol:
            converged = True
            break
    return EstimationResult(_prior(m, p), trace[-1], it, converged, m.identifiable, "em", trace)


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1} by sorting."""
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, y.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(y - theta, 0.0)


def estimate_ls(
    m: ModelMatrix, counts: dict, tol: float = 1e-12, max_iter: int = 100_000, ptol: float = 1e-12
) -> EstimationResult:
    """Projected gradient on 0.5*||M p - f||^2 over the simplex, step 1/L.

    Stops once the objective changes by less than ``tol`` and no weight moves
    by more than ``ptol``; the objective alone flattens out long before the
    weights settle. Starts from the uniform weights; with a rank-deficient
    ``M`` the result is one of the minimizers and is flagged non-identifiable.
    """
    c = count_vector(m, counts)
    f = c / c.sum()
    a = m.matrix
    lip = np.linalg.norm(a, 2) ** 2
    k = len(m.partitions)
    p = np.full(k, 1.0 / k)

    def objective(x):
        r = a @ x - f
        return 0.5 * float(r @ r)

    obj = objective(p)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        new_p = project_simplex(p - (a.T @ (a @ p - f)) / lip)
        step = np.max(np.abs(new_p - p))
        p = new_p
        new = objective(p)
        change = abs(obj - new)
        obj = new
        if change < tol and step < ptol:
            converged = True
            break
    return EstimationResult(_prior(m, p), log_likelihood(m, c, p), it, converged, m.identifiable, "ls")


def counts_from_records(s: Scenario, records) -> dict:
    """Tally BLANK-free outcome tuples from records or JSON-decoded dicts."""
    counts: dict = {}
    for rec in records:
        if isinstance(rec, dict):
            outs = rec["outcomes"]
            t = tuple(outs.get(sid, BLANK) for sid in s.step_ids)
        else:
            t = tuple(rec.outcomes)
        if BLANK in t:
            raise DataModelMismatch(f"outcome {'/'.join(t)} has blanks; fill them before inference")
        counts[t] = counts.get(t, 0) + 1
    return counts
