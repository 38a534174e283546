"""Query-round machinery: two-component 1-D Gaussian mixture, the RD/CP/MM
selection strategies, the label store, and the oracle abstraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, LabelConflictError

INLIER = "inlier"
OUTLIER = "outlier"

RD = "rd"
CP = "cp"
MM = "mm"
STRATEGIES = (RD, CP, MM)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class Gmm1d:
    """Two-component univariate Gaussian mixture; component 0 is the
    smaller-mean (inlier) component."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    loglik: float
    loglik_history: list = field(default_factory=list, repr=False)
    n_iter: int = 0


def _gmm_log_components(values, weights, means, variances):
    # (n, 2) log of weight_j * N(x; mu_j, var_j)
    v = values[:, None]
    return (np.log(weights)[None, :]
            - 0.5 * (_LOG_2PI + np.log(variances))[None, :]
            - 0.5 * (v - means[None, :]) ** 2 / variances[None, :])


def fit_gmm2(values, tol: float = 1e-8, max_iter: int = 200) -> Gmm1d:
    """EM fit with deterministic quantile initialization (means at the 25th
    and 75th percentiles, equal weights, pooled variance)."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size < 2 or np.ptp(values) == 0.0:
        raise DegenerateDataError("need at least two distinct values to fit a mixture")

    data_var = float(np.var(values))
    var_floor = 1e-12 * (data_var + 1e-12)

    weights = np.array([0.5, 0.5])
    means = np.percentile(values, [25.0, 75.0]).astype(np.float64)
    if means[0] == means[1]:
        means = np.array([values.min(), values.max()], dtype=np.float64)
    variances = np.full(2, max(data_var, var_floor))

    history = []
    prev_ll = -np.inf
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        log_comp = _gmm_log_components(values, weights, means, variances)
        m = log_comp.max(axis=1, keepdims=True)
        log_norm = m[:, 0] + np.log(np.exp(log_comp - m).sum(axis=1))
        loglik = float(log_norm.sum())
        history.append(loglik)

        resp = np.exp(log_comp - log_norm[:, None])
        nk = resp.sum(axis=0)
        weights = nk / values.size
        means = (resp * values[:, None]).sum(axis=0) / nk
        variances = (resp * (values[:, None] - means[None, :]) ** 2).sum(axis=0) / nk
        variances = np.maximum(variances, var_floor)

        if abs(loglik - prev_ll) < tol:
            break
        prev_ll = loglik

    order = np.argsort(means, kind="stable")
    return Gmm1d(weights[order], means[order], variances[order],
                 history[-1], history, n_iter)


def posterior_inlier(gmm: Gmm1d, value) -> np.ndarray | float:
    """Responsibility of the smaller-mean component at `value` (scalar or array)."""
    arr = np.atleast_1d(np.asarray(value, dtype=np.float64))
    log_comp = _gmm_log_components(arr, gmm.weights, gmm.means, gmm.variances)
    m = log_comp.max(axis=1, keepdims=True)
    resp = np.exp(log_comp - m)
    post = resp[:, 0] / resp.sum(axis=1)
    return float(post[0]) if np.isscalar(value) or np.ndim(value) == 0 else post


@dataclass
class LabelStore:
    """Disjoint, append-only labeled index sets, plus indices queried but not
    yet answered (reserved so they are never re-queried)."""

    inliers: list = field(default_factory=list)
    outliers: list = field(default_factory=list)
    reserved: list = field(default_factory=list)

    def labeled(self) -> set:
        return set(self.inliers) | set(self.outliers)

    def excluded(self) -> set:
        return self.labeled() | set(self.reserved)

    def reserve(self, indices) -> None:
        known = self.excluded()
        self.reserved.extend(i for i in indices if i not in known)

    def copy(self) -> "LabelStore":
        return LabelStore(list(self.inliers), list(self.outliers), list(self.reserved))


def apply_answers(store: LabelStore, answers) -> LabelStore:
    """Append oracle answers to the store. Any duplicate or conflicting answer
    rejects the whole batch and leaves the store unchanged.

    answers: iterable of (index, label) with label in {"inlier", "outlier"}.
    """
    answers = list(answers)
    seen = store.labeled()
    batch_seen = set()
    for index, label in answers:
        if label not in (INLIER, OUTLIER):
            raise LabelConflictError(f"unknown label {label!r} for index {index}")
        if index in seen or index in batch_seen:
            raise LabelConflictError(f"index {index} already labeled")
        batch_seen.add(index)
    for index, label in answers:
        (store.inliers if label == INLIER else store.outliers).append(index)
        if index in store.reserved:
            store.reserved.remove(index)
    return store


def per_round_budget(n_train: int, fraction: float = 0.01,
                     small_cutoff: int = 500, small_budget: int = 6) -> int:
    """1% of the training set per round, with a floor of 6 for small datasets."""
    if n_train < small_cutoff:
        return small_budget
    return math.ceil(fraction * n_train)


def select_queries(strategy: str, scores, exclude, budget: int,
                   rng: np.random.Generator | None = None,
                   alpha: float = 0.4, gmm: Gmm1d | None = None) -> list[int]:
    """Pick up to `budget` unlabeled indices to query.

    RD: uniform without replacement (needs rng).
    CP: ceil(b/2) lowest-score plus floor(b/2) highest-score indices.
    MM: indices whose GMM inlier posterior is closest to alpha; ties broken
        by lower index. Falls back to RD when the mixture fit is degenerate.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    exclude = set(exclude)
    pool = np.array([i for i in range(scores.size) if i not in exclude], dtype=np.int64)
    if pool.size == 0:
        return []
    b = min(budget, pool.size)

    if strategy == RD:
        if rng is None:
            raise ValueError("RD selection requires an rng")
        return [int(i) for i in rng.choice(pool, size=b, replace=False)]

    if strategy == CP:
        order = pool[np.argsort(scores[pool], kind="stable")]
        n_low = math.ceil(b / 2)
        n_high = b - n_low
        picked = list(order[:n_low])
        if n_high:
            picked += list(order[-n_high:][::-1])
        return [int(i) for i in picked]

    if strategy == MM:
        if gmm is None:
            try:
                gmm = fit_gmm2(scores[pool])
            except DegenerateDataError:
                return select_queries(RD, scores, exclude, budget, rng=rng)
        post = posterior_inlier(gmm, scores[pool])
        dist = np.abs(post - alpha)
        order = np.lexsort((pool, dist))  # distance first, then lower index
        return [int(pool[i]) for i in order[:b]]

    raise ValueError(f"unknown strategy {strategy!r}")


class SimulatedOracle:
    """Answers queries from ground-truth 0/1 labels (1 = outlier)."""

    def __init__(self, labels):
        self.labels = np.asarray(labels).astype(int)

    def answer(self, indices):
        return [(int(i), OUTLIER if self.labels[i] == 1 else INLIER) for i in indices]


class DeferredOracle:
    """Human-in-the-loop placeholder: never answers inline; the trainer parks
    in AWAITING_LABELS and is resumed once labels are delivered."""

    def answer(self, indices):
        return None
