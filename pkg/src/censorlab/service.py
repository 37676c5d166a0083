"""HTTP annotation service connecting labeling clients to imitation runs.

The service hosts imitation runs.  A labeling session walks one feedback
round: the client fetches sample batches, posts label decisions
(idempotent per sample id), and completes the round, which trains that
round's reward model and returns its metrics.  Batches come from the same
seeded sample streams as the in-process oracle loop, so a server-side
oracle replay produces a byte-identical feedback buffer to the CLI run.

Label posts for one session are serialized by a per-session lock; round
training runs on a worker thread while the session status reads
"training" (the complete request waits on it and returns the metrics).
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .rewards import BalancedCollector, OracleAnnotator
from .runs import ImitationDriver, RunConfig, RunRecord, RunContext, build_context


class LabelItem(BaseModel):
    sample_id: str
    y: int
    elapsed_ms: float = 0.0


class LabelPost(BaseModel):
    labels: list[LabelItem]


class SessionPost(BaseModel):
    run_id: str
    round: int


@dataclass
class Session:
    id: str
    run_id: str
    round: int
    collector: BalancedCollector
    pending_ids: list[str] = field(default_factory=list)
    pending_points: dict[str, np.ndarray] = field(default_factory=dict)
    pending_labels: dict[str, tuple[int, float]] = field(default_factory=dict)
    acknowledged: set = field(default_factory=set)
    status: str = "labeling"  # labeling | training | complete
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class HostedRun:
    id: str
    ctx: RunContext
    driver: ImitationDriver
    record: RunRecord | None
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def status(self) -> str:
        return "complete" if self.driver.done else f"round_{self.driver.current_round}"


def _world_context(ctx: RunContext) -> dict:
    comps = []
    for c in ctx.world.components:
        comps.append(
            {
                "mean": [float(c.mean[0]), float(c.mean[1])],
                "sigma": float(np.sqrt(max(c.cov[0, 0], c.cov[1, 1]))),
            }
        )
    lo = ctx.world.means.min(axis=0) - 3.0
    hi = ctx.world.means.max(axis=0) + 3.0
    return {
        "components": comps,
        "bounds": {"lo": [float(lo[0]), float(lo[1])], "hi": [float(hi[0]), float(hi[1])]},
    }


def create_app(run_configs: dict[str, RunConfig], persist: bool = True) -> FastAPI:
    """Build the service over named run configs (usually one)."""
    app = FastAPI(title="censorlab annotation service")
    runs: dict[str, HostedRun] = {}
    sessions: dict[str, Session] = {}

    for run_id, cfg in run_configs.items():
        ctx = build_context(cfg)
        record = RunRecord(cfg.out_dir, cfg) if persist and cfg.out_dir else None
        rounds = int(cfg.feedback.get("rounds", ctx.experiment.get("rounds", 3)))
        quota = cfg.feedback.get("quota", ctx.experiment.get("quota", [10, 10]))
        driver = ImitationDriver(
            ctx, rounds, (int(quota[0]), int(quota[1])), cfg.seed, record=record,
            eval_n=int(cfg.eval.get("n", 0)),
            batch_size=int(cfg.feedback.get("batch_size", 16)),
        )
        runs[run_id] = HostedRun(id=run_id, ctx=ctx, driver=driver, record=record)

    def _run_or_404(run_id: str) -> HostedRun:
        if run_id not in runs:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        return runs[run_id]

    def _session_or_404(session_id: str) -> Session:
        if session_id not in sessions:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return sessions[session_id]

    @app.get("/api/runs")
    def list_runs():
        return [
            {
                "run_id": r.id,
                "status": r.status,
                "round": min(r.driver.current_round, r.driver.rounds),
                "rounds": r.driver.rounds,
                "quota": {"malign": r.driver.quota[0], "benign": r.driver.quota[1]},
                "buffer_size": len(r.driver.buffer),
            }
            for r in runs.values()
        ]

    @app.get("/api/runs/{run_id}/metrics")
    def run_metrics(run_id: str):
        run = _run_or_404(run_id)
        return {
            "run_id": run_id,
            "status": run.status,
            "rounds": [m.to_dict() for m in run.driver.round_metrics],
            "labels_count": len(run.driver.buffer),
            "total_label_seconds": run.driver.buffer.label_seconds(),
        }

    @app.post("/api/runs/{run_id}/oracle-round")
    def oracle_round(run_id: str):
        """Server-side oracle labeling of the current round (replay twin)."""
        run = _run_or_404(run_id)
        with run.lock:
            if run.driver.done:
                raise HTTPException(status_code=409, detail="run already complete")
            annotator = OracleAnnotator(run.ctx.world)
            c = run.driver.begin_round()
            while not c.done:
                pts = c.next_batch()
                labels, elapsed = annotator.label(pts)
                c.submit(pts, labels, elapsed, annotator.source)
            m = run.driver.finish_round()
        return {"round": m.round, "metrics": m.to_dict()}

    @app.post("/api/sessions")
    def create_session(body: SessionPost):
        run = _run_or_404(body.run_id)
        with run.lock:
            if run.driver.done:
                raise HTTPException(status_code=409, detail="run already complete")
            if body.round != run.driver.current_round:
                raise HTTPException(
                    status_code=409,
                    detail=f"run is at round {run.driver.current_round}, not {body.round}",
                )
            collector = run.driver.begin_round()
            sid = uuid.uuid4().hex[:12]
            sessions[sid] = Session(
                id=sid, run_id=body.run_id, round=body.round, collector=collector
            )
        return {
            "session_id": sid,
            "round": body.round,
            "quota": {"malign": run.driver.quota[0], "benign": run.driver.quota[1]},
            "world": _world_context(run.ctx),
        }

    def _progress(s: Session) -> dict:
        return {
            "malign_labeled": s.collector.kept_malign,
            "benign_labeled": s.collector.kept_benign,
            "quota_malign": s.collector.quota_malign,
            "quota_benign": s.collector.quota_benign,
            "presented": s.collector.presented,
            "quota_met": s.collector.done,
        }

    @app.get("/api/sessions/{session_id}/batch")
    def get_batch(session_id: str):
        s = _session_or_404(session_id)
        run = runs[s.run_id]
        with s.lock:
            if s.status != "labeling":
                raise HTTPException(status_code=409, detail=f"session is {s.status}")
            if not s.pending_ids and not s.collector.done:
                pts = s.collector.next_batch()
                for i, p in enumerate(pts):
                    sid = f"r{s.round}b{s.collector.presented}i{i}"
                    s.pending_ids.append(sid)
                    s.pending_points[sid] = np.asarray(p, dtype=float)
            items = [
                {
                    "sample_id": sid,
                    "point": [float(s.pending_points[sid][0]), float(s.pending_points[sid][1])],
                    "labeled": sid in s.pending_labels,
                }
                for sid in s.pending_ids
            ]
            return {
                "items": items,
                "quota_met": s.collector.done,
                "progress": _progress(s),
                "world": _world_context(run.ctx),
            }

    @app.post("/api/sessions/{session_id}/labels")
    def post_labels(session_id: str, body: LabelPost):
        s = _session_or_404(session_id)
        with s.lock:
            if s.status != "labeling":
                raise HTTPException(status_code=409, detail=f"session is {s.status}")
            new_items = []
            for item in body.labels:
                if item.sample_id in s.acknowledged:
                    continue  # idempotent resubmission
                if item.sample_id not in s.pending_points:
                    raise HTTPException(
                        status_code=422, detail=f"unknown sample {item.sample_id!r}"
                    )
                if item.y not in (0, 1):
                    raise HTTPException(status_code=422, detail="label must be 0 or 1")
                new_items.append(item)
            for item in new_items:
                s.pending_labels[item.sample_id] = (item.y, item.elapsed_ms / 1000.0)
            stored = len(new_items)
            if s.pending_ids and all(sid in s.pending_labels for sid in s.pending_ids):
                pts = np.stack([s.pending_points[sid] for sid in s.pending_ids])
                labels = [s.pending_labels[sid][0] for sid in s.pending_ids]
                elapsed = [s.pending_labels[sid][1] for sid in s.pending_ids]
                s.collector.submit(pts, labels, elapsed, "human")
                s.acknowledged.update(s.pending_ids)
                s.pending_ids = []
                s.pending_labels = {}
            return {"stored": stored, "progress": _progress(s)}

    @app.post("/api/sessions/{session_id}/complete")
    def complete(session_id: str):
        s = _session_or_404(session_id)
        run = runs[s.run_id]
        with s.lock:
            if s.status == "complete":
                raise HTTPException(status_code=409, detail="session already completed")
            if s.status == "training":
                raise HTTPException(status_code=409, detail="training in progress")
            if not s.collector.done:
                raise HTTPException(
                    status_code=409,
                    detail={"error": "quota unmet", "progress": _progress(s)},
                )
            s.status = "training"
        result: dict = {}
        error: list[BaseException] = []

        def work():
            try:
                with run.lock:
                    m = run.driver.finish_round()
                result["metrics"] = m.to_dict()
            except BaseException as exc:  # surfaced to the caller below
                error.append(exc)

        worker = threading.Thread(target=work)
        worker.start()
        worker.join()
        with s.lock:
            s.status = "complete"
        if error:
            raise HTTPException(status_code=500, detail=str(error[0]))
        return {
            "round": s.round,
            "metrics": result["metrics"],
            "run_status": run.status,
        }

    @app.get("/api/sessions/{session_id}/status")
    def session_status(session_id: str):
        s = _session_or_404(session_id)
        with s.lock:
            return {"status": s.status, "round": s.round, "progress": _progress(s)}

    return app
