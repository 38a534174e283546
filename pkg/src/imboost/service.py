"""HTTP session layer: a human acts as the labeling oracle over a JSON API.

One background trainer thread per session. The thread parks when a query
round needs answers and publishes read-only snapshots (state, queries,
scores) under a lock, so API reads never wait on a training step.
"""

from __future__ import annotations

import threading
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException, Request

from .data import Dataset, SyntheticSpec, make_synthetic, split_and_normalize
from .errors import DegenerateDataError, UndefinedMetricError
from .losses import LossConfig
from .metrics import auc, average_precision
from .query import INLIER, OUTLIER, fit_gmm2, posterior_inlier
from .trainer import (AWAITING_LABELS, FAILED, TrainerConfig, TrainingSession,
                      ensemble_scores)

HISTOGRAM_BINS = 20
VALID_LABELS = (INLIER, OUTLIER, "skip")


class SessionRunner:
    """Owns one TrainingSession and its trainer thread."""

    def __init__(self, session_id: str, dataset: Dataset, config: TrainerConfig,
                 loss_config: LossConfig):
        self.id = session_id
        self.session = TrainingSession(dataset, config, loss_config, oracle=None)
        self.lock = threading.Lock()
        self.resume = threading.Event()
        self.answers: dict[int, str | None] = {}
        self.round_closed = False
        self.queries_payload: list | None = None
        self.scores_payload: dict | None = None
        self.histogram: dict | None = None
        self.error: str | None = None
        self.thread = threading.Thread(target=self._run, daemon=True)
        self.thread.start()

    # -- trainer thread ---------------------------------------------------

    def _run(self) -> None:
        s = self.session
        try:
            s.run_warmup()
            while True:
                status = s.run_polarization()
                if status != AWAITING_LABELS:
                    break
                with self.lock:
                    self._publish_queries()
                    self._publish_scores()
                self.resume.wait()
                self.resume.clear()
                with self.lock:
                    # trainer-visible order must match the query order so a
                    # human session replays a simulated one bit-for-bit
                    answers = [(i, self.answers[i]) for i in s.pending_queries]
                    self.answers = {}
                    self.queries_payload = None
                s.provide_labels(answers)
            with self.lock:
                self._publish_scores()
        except Exception as exc:  # surfaced via get_state as phase FAILED
            self.error = str(exc)
            if s.phase != FAILED:
                s.phase = FAILED

    def _publish_queries(self) -> None:
        s = self.session
        scores = ensemble_scores(s.buffer)
        try:
            gmm = fit_gmm2(scores)
        except DegenerateDataError:
            gmm = None
        ds = s.dataset
        raw = ds.raw_features if ds.raw_features is not None else ds.features
        payload = []
        for i in s.pending_queries:
            row = int(ds.train_idx[i])
            payload.append({
                "index": int(i),
                "row_index": row,
                "features": [float(v) for v in raw[row]],
                "features_normalized": [float(v) for v in ds.features[row]],
                "ensemble_loss": float(scores[i]),
                "posterior_inlier": (float(posterior_inlier(gmm, scores[i]))
                                     if gmm is not None else None),
            })
        self.queries_payload = payload
        self.round_closed = False
        counts, edges = np.histogram(scores, bins=HISTOGRAM_BINS)
        self.histogram = {"counts": counts.tolist(), "edges": edges.tolist(),
                          "tau": s.last_tau}

    def _publish_scores(self) -> None:
        s, ds = self.session, self.session.dataset
        rows = []
        for split, idx, scores in (("train", ds.train_idx, s.train_scores()),
                                   ("test", ds.test_idx, s.test_scores())):
            for i, v in zip(idx, scores):
                rows.append({"row_index": int(i), "split": split, "score": float(v)})
        metrics = None
        if ds.test_labels() is not None:
            try:
                metrics = {"auc_test": auc(s.test_scores(), ds.test_labels()),
                           "ap_test": average_precision(s.test_scores(), ds.test_labels())}
            except UndefinedMetricError:
                metrics = None
        self.scores_payload = {"scores": rows, "metrics": metrics}

    # -- handler side -------------------------------------------------------

    def state(self) -> dict:
        s = self.session
        with self.lock:
            pending = list(s.pending_queries or [])
            answered = sorted(self.answers)
            histogram = self.histogram
        per_round = [{"round": r, "auc_test": a, "ap_test": p}
                     for r, a, p in s.per_round_metrics]
        return {
            "id": self.id,
            "phase": s.phase,
            "t": s.t,
            "round": s.round_index,
            "rounds_total": s.config.Ta,
            "pending": pending,
            "answered": answered,
            "n_train": int(len(s.dataset.train_idx)),
            "n_test": int(len(s.dataset.test_idx)),
            "loss_histogram": histogram,
            "per_round_metrics": per_round,
            "error": self.error,
        }

    def queries(self) -> list | None:
        with self.lock:
            if self.session.phase != AWAITING_LABELS or self.queries_payload is None:
                return None
            done = set(self.answers)
            return [q for q in self.queries_payload if q["index"] not in done]

    def post_labels(self, items: list) -> dict:
        parsed = []
        for item in items:
            if (not isinstance(item, dict) or not isinstance(item.get("index"), int)
                    or item.get("label") not in VALID_LABELS):
                raise HTTPException(400, "each item needs an integer 'index' and a "
                                         f"'label' in {VALID_LABELS}")
            parsed.append((item["index"], item["label"]))
        with self.lock:
            if self.session.phase != AWAITING_LABELS or self.round_closed:
                raise HTTPException(409, "no query round is awaiting labels")
            pending = set(self.session.pending_queries)
            batch = set()
            for index, _ in parsed:
                if index not in pending:
                    raise HTTPException(409, f"index {index} was not queried")
                if index in self.answers or index in batch:
                    raise HTTPException(409, f"index {index} already labeled")
                batch.add(index)
            for index, label in parsed:   # atomic: validated above
                self.answers[index] = None if label == "skip" else label
            remaining = len(pending) - len(self.answers)
            if remaining == 0:
                self.round_closed = True
                self.resume.set()
        return {"accepted": len(parsed), "remaining": remaining,
                "phase": self.session.phase}

    def scores(self) -> dict | None:
        with self.lock:
            return self.scores_payload


def _build_dataset(body: dict) -> Dataset:
    if ("synthetic" in body) == ("csv" in body):
        raise HTTPException(400, "provide exactly one of 'synthetic' and 'csv'")
    seed = int(body.get("config", {}).get("seed", 0))
    if "synthetic" in body:
        spec_args = body["synthetic"] if isinstance(body["synthetic"], dict) else {}
        try:
            spec = SyntheticSpec(**{**{"seed": seed}, **spec_args})
            raw = make_synthetic(spec)
        except (TypeError, ValueError) as exc:
            raise HTTPException(400, f"bad synthetic spec: {exc}")
    else:
        from .data import load_csv
        import tempfile, os
        text = body["csv"]
        if not isinstance(text, str):
            raise HTTPException(400, "'csv' must be the file contents as a string")
        fd, path = tempfile.mkstemp(suffix=".csv")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            raw = load_csv(path, label_column=body.get("label_column"))
        except Exception as exc:
            raise HTTPException(400, f"bad csv: {exc}")
        finally:
            os.unlink(path)
    return split_and_normalize(raw, seed=seed)


def create_app() -> FastAPI:
    app = FastAPI(title="imboost", version="1")
    runners: dict[str, SessionRunner] = {}

    def runner_or_404(session_id: str) -> SessionRunner:
        runner = runners.get(session_id)
        if runner is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return runner

    @app.post("/v1/sessions", status_code=201)
    async def create_session(request: Request):
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(400, "request body must be JSON")
        if not isinstance(body, dict):
            raise HTTPException(400, "request body must be a JSON object")
        dataset = _build_dataset(body)
        try:
            config = TrainerConfig(**body.get("config", {}))
            loss_config = LossConfig(**body.get("loss_config", {}))
        except (TypeError, ValueError) as exc:
            raise HTTPException(400, f"bad config: {exc}")
        session_id = uuid.uuid4().hex
        runners[session_id] = SessionRunner(session_id, dataset, config, loss_config)
        return {"id": session_id}

    @app.get("/v1/sessions/{session_id}")
    def get_state(session_id: str):
        return runner_or_404(session_id).state()

    @app.get("/v1/sessions/{session_id}/queries")
    def get_queries(session_id: str):
        runner = runner_or_404(session_id)
        queries = runner.queries()
        if queries is None:
            raise HTTPException(404, "no pending query round")
        return {"round": runner.session.round_index + 1, "queries": queries}

    @app.post("/v1/sessions/{session_id}/labels")
    async def post_labels(session_id: str, request: Request):
        runner = runner_or_404(session_id)
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(400, "request body must be JSON")
        items = body.get("labels") if isinstance(body, dict) else None
        if not isinstance(items, list) or not items:
            raise HTTPException(400, "body must be {'labels': [{'index', 'label'}, ...]}")
        return runner.post_labels(items)

    @app.get("/v1/sessions/{session_id}/scores")
    def get_scores(session_id: str):
        scores = runner_or_404(session_id).scores()
        if scores is None:
            raise HTTPException(404, "no scores published yet (still warming up)")
        return scores

    return app
