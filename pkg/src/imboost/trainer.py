"""Two-phase training state machine: warm-up (plain mean loss, then trimmed
loss with growing batches) and polarization (labeled-set composite loss with
query rounds), plus snapshot buffering, risk tracing, scoring, and
checkpointing.

Iteration indexing: the plain-loss loop runs its own counter 1..T0; the
trimmed-loss loop runs t = 1..T1; polarization continues t = T1+1..T1+T2 so
the batch-size schedule grows uninterrupted across the two.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from . import query as q
from .data import Dataset
from .errors import ImboostError, NumericError
from .losses import LossConfig, adaptive_threshold, quantile
from .model import ModelSpec, ParamStore, forward_losses, backward_losses, init_params
from .optim import AdamState, adam_step

CHECKPOINT_VERSION = 1

WARMUP = "WARMUP"
POLARIZING = "POLARIZING"
AWAITING_LABELS = "AWAITING_LABELS"
DONE = "DONE"
FAILED = "FAILED"


@dataclass(frozen=True)
class TrainerConfig:
    n0: int = 128
    gamma: float = 1.03
    T0: int = 10
    T1: int = 40
    T2: int = 50
    Ta: int = 5
    lr: float = 1e-3
    seed: int = 0
    score_mc: int = 16
    strategy: str = q.MM
    alpha: float = 0.4
    budget_mode: str = "per-round"   # or "total"
    budget_override: int | None = None
    diagnostics: bool = False

    def __post_init__(self):
        if self.T2 % self.Ta != 0:
            raise ValueError("Ta must divide T2")
        if self.gamma <= 1.0:
            raise ValueError("gamma must exceed 1")
        if self.strategy not in q.STRATEGIES:
            raise ValueError(f"strategy must be one of {q.STRATEGIES}")
        if self.budget_mode not in ("per-round", "total"):
            raise ValueError("budget_mode must be 'per-round' or 'total'")


@dataclass(frozen=True)
class BatchSchedule:
    n0: int
    gamma: float
    n_train: int


def batch_size(schedule: BatchSchedule, t: int) -> int:
    """min(round(n0 * gamma^(t-1)), n_train); round-to-nearest, half up."""
    if t < 1:
        raise ValueError("t must be >= 1")
    raw = schedule.n0 * schedule.gamma ** (t - 1)
    return min(int(math.floor(raw + 0.5)), schedule.n_train)


class SnapshotBuffer:
    """Ring of the last `t_e` full-training-set per-sample loss vectors."""

    def __init__(self, t_e: int):
        self.t_e = t_e
        self._ring: deque = deque(maxlen=t_e)

    def push(self, t: int, losses: np.ndarray) -> None:
        self._ring.append((t, np.asarray(losses, dtype=np.float64)))

    def tags(self) -> list[int]:
        return [t for t, _ in self._ring]

    def __len__(self) -> int:
        return len(self._ring)

    def snapshots(self) -> list[np.ndarray]:
        return [v for _, v in self._ring]


def ensemble_scores(buffer: SnapshotBuffer) -> np.ndarray:
    """Elementwise mean of the buffered loss snapshots."""
    if len(buffer) == 0:
        raise ImboostError("ensemble_scores on an empty snapshot buffer")
    return np.mean(buffer.snapshots(), axis=0)


@dataclass
class RiskTrace:
    """Per-iteration mean losses split by ground-truth label (diagnostics)."""

    steps: list = field(default_factory=list)
    inlier_mean: list = field(default_factory=list)
    outlier_mean: list = field(default_factory=list)
    enabled: bool = True

    def append(self, t: int, inlier: float, outlier: float) -> None:
        self.steps.append(t)
        self.inlier_mean.append(inlier)
        self.outlier_mean.append(outlier)

    def at(self, t: int) -> tuple[float, float]:
        i = self.steps.index(t)
        return self.inlier_mean[i], self.outlier_mean[i]


def final_scores(params: ParamStore, data, score_mc: int, seed) -> np.ndarray:
    """Per-sample IWAE loss averaged over `score_mc` independent noise draws;
    deterministic given the seed."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    n = data.shape[0]
    spec = params.spec
    rng = np.random.default_rng(seed)
    total = np.zeros(n)
    for _ in range(score_mc):
        noise = rng.standard_normal((n, spec.iwae_samples, spec.latent_dim))
        total += forward_losses(params, data, noise).iwae
    return total / score_mc


class TrainingSession:
    """One training run over a split dataset. Drives warm-up and polarization,
    parks in AWAITING_LABELS when the oracle defers, and can be checkpointed
    and resumed bit-identically."""

    def __init__(self, dataset: Dataset, config: TrainerConfig,
                 loss_config: LossConfig | None = None,
                 model_spec: ModelSpec | None = None,
                 oracle=None):
        if dataset.train_idx is None:
            raise ValueError("dataset must be split before training")
        self.dataset = dataset
        self.config = config
        self.loss_config = loss_config or LossConfig()
        self.model_spec = model_spec or ModelSpec.for_data(dataset.n_features)
        self.oracle = oracle
        self.x_train = dataset.train_features()
        self.schedule = BatchSchedule(config.n0, config.gamma, self.x_train.shape[0])

        self.rng = np.random.default_rng(config.seed)
        self.params = init_params(self.model_spec, self.rng)
        self.adam = AdamState.init(self.params.size, lr=config.lr)
        self.labels = q.LabelStore()
        self.buffer = SnapshotBuffer(config.T2 // config.Ta)
        self.trace = RiskTrace(enabled=dataset.train_labels() is not None)
        self.phase = WARMUP
        self.t = 0                      # shared axis of trimmed + polarization loops
        self.round_index = 0
        self.per_round_metrics: list = []
        self.pending_queries: list | None = None
        self._resume_batch: np.ndarray | None = None
        self.failure: dict | None = None
        self.last_tau: float | None = None

    # -- budget ---------------------------------------------------------

    def round_budget(self) -> int:
        cfg = self.config
        if cfg.budget_override is not None:
            return cfg.budget_override
        n_train = self.x_train.shape[0]
        if cfg.budget_mode == "total":
            return max(1, math.ceil(q.per_round_budget(n_train) / cfg.Ta))
        return q.per_round_budget(n_train)

    # -- loss evaluation --------------------------------------------------

    def _draw_noise(self, n: int, rng=None) -> np.ndarray:
        rng = rng or self.rng
        return rng.standard_normal((n, self.model_spec.iwae_samples,
                                    self.model_spec.latent_dim))

    def _gradient_step(self, t: int, batch_idx: np.ndarray, polarization: bool) -> None:
        lc = self.loss_config
        inl = np.asarray(self.labels.inliers, dtype=np.int64)
        out = np.asarray(self.labels.outliers, dtype=np.int64)
        if not polarization:
            inl = out = np.empty(0, dtype=np.int64)
        rows = np.concatenate([batch_idx, inl, out])
        nb, ni, no = len(batch_idx), len(inl), len(out)

        noise = self._draw_noise(len(rows))
        try:
            fwd = forward_losses(self.params, self.x_train[rows], noise)
        except NumericError as err:
            self._fail(t, batch_idx, str(err))
            raise

        batch_losses = fwd.iwae[:nb]
        q_rho = quantile(batch_losses, lc.rho)
        r_hat_i = float(fwd.iwae[nb : nb + ni].mean()) if ni else None
        tau = adaptive_threshold(q_rho, r_hat_i, lc.xi) if polarization else q_rho
        self.last_tau = float(tau)
        kept = batch_losses <= tau

        wi = np.zeros(len(rows))
        wo = np.zeros(len(rows))
        if kept.any():
            wi[:nb][kept] = 1.0 / kept.sum()
        if polarization:
            lam1, lam2 = lc.lambdas_at(t - self.config.T1)
            if ni:
                wi[nb : nb + ni] = lam1 / ni
            if no:
                wo[nb + ni :] = -lam2 / no
        try:
            grad = backward_losses(self.params, fwd, wi, wo)
            adam_step(self.adam, self.params, grad)
        except NumericError as err:
            self._fail(t, batch_idx, str(err))
            raise

    def _fail(self, t, batch_idx, message):
        self.phase = FAILED
        self.failure = {"t": int(t), "batch": [int(i) for i in batch_idx],
                        "message": message,
                        "params_finite": bool(np.all(np.isfinite(self.params.values)))}

    def _snapshot(self, t: int, rng=None) -> np.ndarray:
        losses = forward_losses(self.params, self.x_train,
                                self._draw_noise(self.x_train.shape[0], rng)).iwae
        self.buffer.push(t, losses)
        self._trace_from(t, losses)
        return losses

    def _trace_from(self, t: int, losses: np.ndarray) -> None:
        y = self.dataset.train_labels()
        if y is None:
            return
        inl, out = losses[y == 0], losses[y == 1]
        self.trace.append(t, float(inl.mean()) if inl.size else math.nan,
                          float(out.mean()) if out.size else math.nan)

    def _diag_trace(self, t: int) -> None:
        # Diagnostics-only evaluation on a separate stream so enabling it
        # never perturbs the training trajectory.
        if not self.config.diagnostics:
            return
        rng = np.random.default_rng([self.config.seed, 13, t + 10_000])
        losses = forward_losses(self.params, self.x_train,
                                self._draw_noise(self.x_train.shape[0], rng)).iwae
        self._trace_from(t, losses)

    # -- phases -----------------------------------------------------------

    def run_warmup(self) -> str:
        """T0 plain-mean steps at fixed batch n0, then T1 trimmed steps with
        the growing batch schedule (t restarting at 1)."""
        cfg = self.config
        n_train = self.x_train.shape[0]
        n0 = min(cfg.n0, n_train)
        for i in range(1, cfg.T0 + 1):
            batch_idx = self.rng.choice(n_train, size=n0, replace=False)
            self._plain_step(batch_idx)
            self._diag_trace(i - cfg.T0)
        for t in range(1, cfg.T1 + 1):
            batch_idx = self.rng.choice(n_train, size=batch_size(self.schedule, t),
                                        replace=False)
            self._gradient_step(t, batch_idx, polarization=False)
            self.t = t
            if t < cfg.T1:
                self._diag_trace(t)
        self.t = cfg.T1
        self._snapshot(cfg.T1)  # anchors the first ensemble window
        self.phase = POLARIZING
        return self.phase

    def _plain_step(self, batch_idx: np.ndarray) -> None:
        noise = self._draw_noise(len(batch_idx))
        try:
            fwd = forward_losses(self.params, self.x_train[batch_idx], noise)
            grad = backward_losses(self.params, fwd,
                                   np.full(len(batch_idx), 1.0 / len(batch_idx)),
                                   np.zeros(len(batch_idx)))
            adam_step(self.adam, self.params, grad)
        except NumericError as err:
            self._fail(0, batch_idx, str(err))
            raise

    def _select_round_queries(self) -> list[int]:
        cfg = self.config
        budget = self.round_budget()
        if budget < 1:
            return []
        scores = ensemble_scores(self.buffer)
        exclude = self.labels.excluded()
        return q.select_queries(cfg.strategy, scores, exclude, budget,
                                rng=self.rng, alpha=cfg.alpha)

    def run_polarization(self) -> str:
        """Advance t = T1+1 .. T1+T2, querying every T2/Ta steps. Returns the
        resulting phase: DONE, or AWAITING_LABELS when the oracle defers."""
        cfg = self.config
        if self.phase == AWAITING_LABELS:
            return self.phase
        if self.phase not in (POLARIZING,):
            raise ImboostError(f"cannot run polarization from phase {self.phase}")
        n_train = self.x_train.shape[0]
        step = cfg.T2 // cfg.Ta

        while self.t < cfg.T1 + cfg.T2:
            t = self.t + 1
            if self._resume_batch is not None:
                batch_idx = self._resume_batch
                self._resume_batch = None
            else:
                batch_idx = self.rng.choice(n_train, size=batch_size(self.schedule, t),
                                            replace=False)
                if (t - cfg.T1) % step == 0:
                    queries = self._select_round_queries()
                    if queries:
                        self.labels.reserve(queries)
                        answers = None if self.oracle is None else self.oracle.answer(queries)
                        if answers is None:
                            self.pending_queries = list(queries)
                            self._resume_batch = batch_idx
                            self.phase = AWAITING_LABELS
                            return self.phase
                        q.apply_answers(self.labels, answers)
                    self.round_index += 1
                    self._record_round_metrics()
            self._gradient_step(t, batch_idx, polarization=True)
            self.t = t
            self._snapshot(t)
        self.phase = DONE
        return self.phase

    def provide_labels(self, answers) -> None:
        """Deliver oracle answers for the pending query round and resume
        eligibility. `answers` must cover exactly the pending indices; an
        index answered with None is skipped — it stays reserved (never
        re-queried) but contributes no label."""
        if self.phase != AWAITING_LABELS:
            raise ImboostError("no pending query round")
        pending = set(self.pending_queries)
        answered = {i for i, _ in answers}
        if answered != pending:
            raise q.LabelConflictError(
                f"answers must cover exactly the pending indices {sorted(pending)}")
        q.apply_answers(self.labels, [(i, lab) for i, lab in answers if lab is not None])
        self.pending_queries = None
        self.round_index += 1
        self._record_round_metrics()
        self.phase = POLARIZING

    def _record_round_metrics(self) -> None:
        from .metrics import auc, average_precision  # local import avoids a cycle
        y = self.dataset.test_labels()
        if y is None or len(np.unique(y)) < 2:
            return
        scores = final_scores(self.params, self.dataset.test_features(),
                              self.config.score_mc,
                              [self.config.seed, 7, self.round_index])
        self.per_round_metrics.append((self.round_index, auc(scores, y),
                                       average_precision(scores, y)))

    # -- outputs ----------------------------------------------------------

    def score(self, data) -> np.ndarray:
        return final_scores(self.params, data, self.config.score_mc,
                            [self.config.seed, 11])

    def train_scores(self) -> np.ndarray:
        return self.score(self.x_train)

    def test_scores(self) -> np.ndarray:
        return self.score(self.dataset.test_features())

    def risk_trace(self) -> RiskTrace:
        return self.trace

    # -- checkpointing ----------------------------------------------------

    def save(self, path) -> None:
        ds = self.dataset
        meta = {
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "loss_config": asdict(self.loss_config),
            "model_spec": self.model_spec.to_dict(),
            "phase": self.phase,
            "t": self.t,
            "round_index": self.round_index,
            "adam_step_count": self.adam.step_count,
            "rng_state": self.rng.bit_generator.state,
            "pending_queries": self.pending_queries,
            "has_resume_batch": self._resume_batch is not None,
            "buffer_tags": self.buffer.tags(),
            "trace": {"steps": self.trace.steps, "inlier": self.trace.inlier_mean,
                      "outlier": self.trace.outlier_mean, "enabled": self.trace.enabled},
            "per_round_metrics": self.per_round_metrics,
            "has_labels": ds.labels is not None,
            "last_tau": self.last_tau,
        }
        arrays = {
            "params": self.params.values,
            "adam_m": self.adam.m,
            "adam_v": self.adam.v,
            "features": ds.features,
            "labels": ds.labels if ds.labels is not None else np.empty(0, dtype=np.int64),
            "train_idx": ds.train_idx,
            "test_idx": ds.test_idx,
            "inliers": np.asarray(self.labels.inliers, dtype=np.int64),
            "outliers": np.asarray(self.labels.outliers, dtype=np.int64),
            "reserved": np.asarray(self.labels.reserved, dtype=np.int64),
            "buffer": (np.stack(self.buffer.snapshots())
                       if len(self.buffer) else np.empty((0, 0))),
            "resume_batch": (self._resume_batch if self._resume_batch is not None
                             else np.empty(0, dtype=np.int64)),
        }
        np.savez(path, meta=json.dumps(meta), **arrays)

    @classmethod
    def restore(cls, path, oracle=None) -> "TrainingSession":
        with np.load(path, allow_pickle=False) as zf:
            meta = json.loads(str(zf["meta"]))
            if meta["version"] != CHECKPOINT_VERSION:
                raise ImboostError(f"unsupported checkpoint version {meta['version']}")
            dataset = Dataset(
                features=zf["features"],
                labels=zf["labels"] if meta["has_labels"] else None,
                train_idx=zf["train_idx"], test_idx=zf["test_idx"])
            session = cls(dataset, TrainerConfig(**meta["config"]),
                          LossConfig(**meta["loss_config"]),
                          ModelSpec.from_dict(meta["model_spec"]), oracle=oracle)
            session.params.values[...] = zf["params"]
            session.adam.m = zf["adam_m"].copy()
            session.adam.v = zf["adam_v"].copy()
            session.adam.step_count = meta["adam_step_count"]
            session.rng.bit_generator.state = meta["rng_state"]
            session.phase = meta["phase"]
            session.t = meta["t"]
            session.round_index = meta["round_index"]
            session.labels = q.LabelStore([int(i) for i in zf["inliers"]],
                                          [int(i) for i in zf["outliers"]],
                                          [int(i) for i in zf["reserved"]])
            buf = zf["buffer"]
            for tag, vec in zip(meta["buffer_tags"], buf):
                session.buffer.push(tag, vec)
            tr = meta["trace"]
            session.trace = RiskTrace(tr["steps"], tr["inlier"], tr["outlier"], tr["enabled"])
            session.per_round_metrics = [tuple(row) for row in meta["per_round_metrics"]]
            session.pending_queries = meta["pending_queries"]
            session.last_tau = meta.get("last_tau")
            if meta["has_resume_batch"]:
                session._resume_batch = zf["resume_batch"].copy()
        return session


def run_session(dataset: Dataset, config: TrainerConfig,
                loss_config: LossConfig | None = None,
                model_spec: ModelSpec | None = None,
                oracle=None) -> TrainingSession:
    """Convenience wrapper: warm-up then polarization with a blocking oracle.
    Raises if the oracle defers (use TrainingSession directly for that)."""
    session = TrainingSession(dataset, config, loss_config, model_spec, oracle=oracle)
    session.run_warmup()
    status = session.run_polarization()
    if status == AWAITING_LABELS:
        raise ImboostError("oracle deferred; run_session requires a synchronous oracle")
    return session
