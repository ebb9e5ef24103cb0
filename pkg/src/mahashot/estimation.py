"""Class-parameter estimation, plain and responsibility-weighted.

The plain path estimates per-class means and shrinkage-regularized
covariances from the labelled support set alone. The weighted path
generalizes every sum to run over the disjoint union of support and query
rows with soft weights, and reduces exactly to the plain path when the
query set is empty. Covariance divisors are population-style (n, not
n - 1) throughout.

The shrinkage blend for class k with (soft) count c is
``Q_k = lam * Sigma_k + (1 - lam) * Sigma + beta * I`` with
``lam = c / (c + 1)``: singleton classes lean on the task covariance,
example-rich classes on their own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Task
from .errors import DegenerateClass, DimensionMismatch, EmptyQuery
from .numerics import DEFAULT_JITTER, SpdFactor, spd_factorize

# Soft class counts below this are useless as divisors; estimation raises
# DegenerateClass and the refinement loop treats it as a stop signal.
EPS_COUNT = 1e-8


@dataclass(frozen=True)
class ClassParams:
    """Per-class mean, regularized covariance, its SPD factor, and the
    (possibly soft) example count behind them.

    ``sigma_k`` is the class-conditional sample covariance before the
    shrinkage blend; kept for inspection and oracle comparison.
    """

    mu: np.ndarray  # (d,)
    q: np.ndarray  # (d, d)
    q_factor: SpdFactor
    count: float
    sigma_k: np.ndarray  # (d, d)


@dataclass(frozen=True)
class TaskStats:
    """Task-level mean and covariance that the shrinkage blend pulls toward."""

    mu: np.ndarray  # (d,)
    sigma: np.ndarray  # (d, d)


@dataclass(frozen=True)
class TaskEmbedding:
    """Pooled task statistics: class-balanced support mean and query mean.

    Exposed for logging and inspection; nothing in the classifier path
    consumes them.
    """

    e_s: np.ndarray
    e_q: np.ndarray


@dataclass(frozen=True)
class Responsibilities:
    """Row-stochastic (n + m) x K weight matrix over support then query rows.

    Rows 0..n-1 are support examples in task order and are one-hot on the
    true label; rows n..n+m-1 are query examples in task order. Build
    instances through :meth:`build` so the support one-hot invariant holds
    by construction.
    """

    w: np.ndarray  # (n + m, K)
    n_support: int

    def __post_init__(self):
        w = np.ascontiguousarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        if w.ndim != 2:
            raise DimensionMismatch("responsibilities must be a 2-d matrix")
        if not 0 <= self.n_support <= w.shape[0]:
            raise DimensionMismatch("n_support out of range")
        if w.size:
            if w.min() < 0.0 or w.max() > 1.0:
                raise ValueError("responsibilities must lie in [0, 1]")
            if np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-9:
                raise ValueError("responsibility rows must sum to 1 within 1e-9")

    @classmethod
    def build(cls, task: Task, query_probs: np.ndarray) -> "Responsibilities":
        """One-hot support rows from the task labels, given query rows."""
        query_probs = np.asarray(query_probs, dtype=np.float64)
        if query_probs.shape != (task.n_query, task.way):
            raise DimensionMismatch(
                f"query_probs shape {query_probs.shape} != ({task.n_query}, {task.way})"
            )
        support = np.zeros((task.n_support, task.way))
        support[np.arange(task.n_support), task.support_y] = 1.0
        return cls(w=np.vstack([support, query_probs]), n_support=task.n_support)

    @property
    def n_rows(self) -> int:
        return self.w.shape[0]

    @property
    def way(self) -> int:
        return self.w.shape[1]

    @property
    def support(self) -> np.ndarray:
        return self.w[: self.n_support]

    @property
    def query(self) -> np.ndarray:
        return self.w[self.n_support :]

    @property
    def row_kind(self) -> tuple[str, ...]:
        return ("support",) * self.n_support + ("query",) * (self.n_rows - self.n_support)


def _blend(
    sigma_k: np.ndarray, sigma: np.ndarray, count: float, beta: float
) -> np.ndarray:
    lam = count / (count + 1.0)
    q = lam * sigma_k + (1.0 - lam) * sigma + beta * np.eye(sigma.shape[0])
    return 0.5 * (q + q.T)  # kill rounding asymmetry from the matmuls


def estimate_unweighted(
    task: Task, beta: float = 1.0, jitter_schedule=DEFAULT_JITTER
) -> tuple[list[ClassParams], TaskStats]:
    """Support-only estimates of class means and regularized covariances.

    Returns one :class:`ClassParams` per class (in label order) and the
    task-level :class:`TaskStats` the shrinkage pulled toward.
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    z = task.support_z
    n = task.n_support

    mu_task = z.mean(axis=0)
    centered = z - mu_task
    sigma = centered.T @ centered / n
    sigma = 0.5 * (sigma + sigma.T)

    params = []
    for k in range(task.way):
        rows = z[task.support_y == k]
        n_k = rows.shape[0]
        mu_k = rows.mean(axis=0)
        centered_k = rows - mu_k
        sigma_k = centered_k.T @ centered_k / n_k
        q = _blend(sigma_k, sigma, float(n_k), beta)
        params.append(
            ClassParams(
                mu=mu_k,
                q=q,
                q_factor=spd_factorize(q, jitter_schedule),
                count=float(n_k),
                sigma_k=sigma_k,
            )
        )
    return params, TaskStats(mu=mu_task, sigma=sigma)


def estimate_weighted(
    task: Task,
    resp: Responsibilities,
    beta: float = 1.0,
    jitter_schedule=DEFAULT_JITTER,
) -> tuple[list[ClassParams], TaskStats]:
    """Responsibility-weighted estimates over support and query rows jointly.

    Every sum runs over the stacked rows (support then query); soft counts
    are column sums of the responsibility matrix. With an empty query set
    and one-hot support rows this reproduces :func:`estimate_unweighted`.

    Raises
    ------
    DegenerateClass
        If any soft count falls below ``EPS_COUNT``.
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    n_rows = task.n_support + task.n_query
    if resp.w.shape != (n_rows, task.way):
        raise DimensionMismatch(
            f"responsibilities shape {resp.w.shape} != ({n_rows}, {task.way})"
        )
    if resp.n_support != task.n_support:
        raise DimensionMismatch(
            f"responsibilities split at {resp.n_support} rows, task has {task.n_support} support"
        )
    z = np.vstack([task.support_z, task.query_z])
    w = resp.w

    counts = w.sum(axis=0)  # soft count per class
    low = np.flatnonzero(counts < EPS_COUNT)
    if low.size:
        raise DegenerateClass(int(low[0]), float(counts[low[0]]))
    total = counts.sum()

    # Task mean and covariance, weighted by each row's total responsibility
    # (1 for stochastic rows, but the literal double sum is kept).
    row_weight = w.sum(axis=1)
    mu_task = (row_weight @ z) / total
    centered = z - mu_task
    sigma = (centered * row_weight[:, None]).T @ centered / total
    sigma = 0.5 * (sigma + sigma.T)

    params = []
    for k in range(task.way):
        wk = w[:, k]
        mu_k = (wk @ z) / counts[k]
        centered_k = z - mu_k
        sigma_k = (centered_k * wk[:, None]).T @ centered_k / counts[k]
        q = _blend(sigma_k, sigma, float(counts[k]), beta)
        params.append(
            ClassParams(
                mu=mu_k,
                q=q,
                q_factor=spd_factorize(q, jitter_schedule),
                count=float(counts[k]),
                sigma_k=sigma_k,
            )
        )
    return params, TaskStats(mu=mu_task, sigma=sigma)


def pool_task_embedding(task: Task) -> TaskEmbedding:
    """Class-balanced support mean and plain query mean.

    The support side averages per-class means so a 100-shot class counts
    no more than a 1-shot one; the query side is a plain mean.
    """
    if task.n_query == 0:
        raise EmptyQuery("query mean is undefined for an empty query set")
    class_means = np.stack(
        [task.support_z[task.support_y == k].mean(axis=0) for k in range(task.way)]
    )
    return TaskEmbedding(e_s=class_means.mean(axis=0), e_q=task.query_z.mean(axis=0))
