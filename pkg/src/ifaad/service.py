"""Session-oriented HTTP API for interactive analyst labeling.

One session drives one feedback loop: the service holds the forest, the
node-feature matrix, and the committed loop state, and exposes exactly one
pending query at a time. Labels are accepted only for the pending
instance, so replayed or out-of-order submissions are rejected without
touching state. Every accepted label is persisted to the session file
format, and a restarted service resumes a session to the same pending
query it had before the crash.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field
from scipy import sparse

from .aad import (
    AadConfig,
    FeedbackState,
    LabeledSet,
    compute_quantile_anchor,
    load_session,
    next_query,
    rebuild_state,
    session_to_dict,
    update_weights,
)
from .data import CsvSchema, LabeledDataset, load_csv, make_synthetic_2d
from .forest import (
    Forest,
    SparseNodeVector,
    build_forest,
    feature_matrix,
    score_all,
    uniform_weights,
)

SYNTHETIC_DATASET_ID = "synthetic"
SYNTHETIC_SEED = 7

STATUS_ACTIVE = "active"
STATUS_EXHAUSTED = "exhausted"


class ApiError(Exception):
    """An error with a wire shape: JSON {code, message} plus HTTP status."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def not_found(message: str) -> ApiError:
    return ApiError(404, "not_found", message)


def conflict(code: str, message: str) -> ApiError:
    return ApiError(409, code, message)


def bad_request(message: str) -> ApiError:
    return ApiError(400, "bad_request", message)


class SessionCreate(BaseModel):
    dataset_id: str
    seed: int = Field(default=0, ge=0)
    budget: int = Field(default=60, ge=1)
    tau: float = Field(default=0.03, gt=0.0, lt=1.0)
    c_a: float = Field(default=100.0, ge=1.0)
    c_xi: float = Field(default=0.001, ge=0.0)
    learning_rate: float = Field(default=0.01, gt=0.0)
    max_steps: int = Field(default=1000, ge=1)
    convergence_tol: float = Field(default=1e-6, gt=0.0)
    num_trees: int = Field(default=100, ge=1)
    subsample_size: int = Field(default=256, ge=1)
    scheme: Literal["if", "if-leaf"] = "if"

    def aad_config(self) -> AadConfig:
        return AadConfig(
            tau=self.tau,
            c_a=self.c_a,
            c_xi=self.c_xi,
            learning_rate=self.learning_rate,
            max_steps=self.max_steps,
            convergence_tol=self.convergence_tol,
            budget=self.budget,
        )


class LabelSubmit(BaseModel):
    instance_id: int = Field(ge=0)
    label: Literal["anomaly", "nominal"]


@dataclass
class SessionRuntime:
    """One live session: loop state plus everything needed to advance it."""

    session_id: str
    dataset_id: str
    dataset: LabeledDataset
    forest: Forest
    Z: sparse.csr_matrix
    cfg: AadConfig
    seed: int
    forest_params: dict
    state: FeedbackState
    curve: list[int]
    pending: int | None
    created_at: float
    updated_at: float
    lock: threading.Lock = field(default_factory=threading.Lock)
    snapshot: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return STATUS_ACTIVE if self.pending is not None else STATUS_EXHAUSTED

    def pending_payload(self) -> dict | None:
        if self.pending is None:
            return None
        i = self.pending
        scores = score_all(self.Z, self.state.weights)
        return {
            "instance_id": int(i),
            "features": {
                name: float(v)
                for name, v in zip(self.dataset.feature_names, self.dataset.X[i])
            },
            "score": float(scores[i]),
            "iteration": self.state.iteration,
            "budget_remaining": self.cfg.budget - self.state.iteration,
        }

    def feature_medians(self) -> dict[str, float]:
        med = np.median(self.dataset.X, axis=0)
        return {name: float(v) for name, v in zip(self.dataset.feature_names, med)}

    def rebuild_snapshot(self) -> None:
        self.snapshot = {
            "session_id": self.session_id,
            "dataset_id": self.dataset_id,
            "status": self.status,
            "iteration": self.state.iteration,
            "budget": self.cfg.budget,
            "anomalies_found": self.state.anomalies_found(),
            "config": self.cfg.to_dict(),
            "forest": dict(self.forest_params),
            "seed": self.seed,
            "query_history": [
                {"instance_id": int(i), "label": label}
                for i, label in self.state.query_history
            ],
            "curve": [
                {"iteration": i + 1, "cumulative": c} for i, c in enumerate(self.curve)
            ],
            "weight_norm": float(np.linalg.norm(self.state.weights)),
            "feature_medians": self.feature_medians(),
            "pending": self.pending_payload(),
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }


class ServiceState:
    """Datasets and sessions shared across requests."""

    def __init__(self, data_dir: Path, session_dir: Path):
        self.data_dir = data_dir
        self.session_dir = session_dir
        self.datasets: dict[str, LabeledDataset] = {}
        self.sessions: dict[str, SessionRuntime] = {}
        self.registry_lock = threading.Lock()

        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.session_dir.mkdir(parents=True, exist_ok=True)

        self.datasets[SYNTHETIC_DATASET_ID] = make_synthetic_2d(500, 15, seed=SYNTHETIC_SEED)
        for csv_path in sorted(self.data_dir.glob("*.csv")):
            try:
                self.datasets[csv_path.stem] = load_csv(csv_path, CsvSchema())
            except ValueError:
                continue

    # -- datasets ------------------------------------------------------------

    def register_dataset(self, name: str | None, csv_bytes: bytes) -> LabeledDataset:
        dataset_id = name or uuid.uuid4().hex[:12]
        if not dataset_id.replace("-", "").replace("_", "").isalnum():
            raise bad_request(f"invalid dataset name {dataset_id!r}")
        with self.registry_lock:
            if dataset_id in self.datasets:
                raise conflict("dataset_exists", f"dataset {dataset_id!r} already registered")
            path = self.data_dir / f"{dataset_id}.csv"
            path.write_bytes(csv_bytes)
            try:
                ds = load_csv(path, CsvSchema(), name=dataset_id)
            except ValueError as e:
                path.unlink(missing_ok=True)
                raise bad_request(f"unusable CSV: {e}") from e
            self.datasets[dataset_id] = ds
            return ds

    def get_dataset(self, dataset_id: str) -> LabeledDataset:
        ds = self.datasets.get(dataset_id)
        if ds is None:
            raise not_found(f"unknown dataset {dataset_id!r}")
        return ds

    # -- sessions ------------------------------------------------------------

    def session_path(self, session_id: str) -> Path:
        return self.session_dir / f"{session_id}.json"

    def persist(self, rt: SessionRuntime) -> None:
        doc = session_to_dict(
            rt.state, rt.cfg, rt.seed, rt.dataset_id, forest_params=rt.forest_params
        )
        doc["service"] = {
            "session_id": rt.session_id,
            "created_at": rt.created_at,
            "updated_at": rt.updated_at,
        }
        path = self.session_path(rt.session_id)
        path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")

    def create_session(self, req: SessionCreate) -> SessionRuntime:
        ds = self.get_dataset(req.dataset_id)
        if req.budget > ds.n:
            raise bad_request(f"budget {req.budget} exceeds dataset size {ds.n}")
        cfg = req.aad_config()
        forest_params = {
            "num_trees": req.num_trees,
            "subsample_size": req.subsample_size,
            "scheme": req.scheme,
        }
        forest = build_forest(
            ds.X,
            subsample_size=req.subsample_size,
            num_trees=req.num_trees,
            scheme=req.scheme,
            seed=req.seed,
        )
        Z = feature_matrix(forest, ds.X)
        w = uniform_weights(forest.m)
        state = FeedbackState(weights=w, labeled=LabeledSet(), iteration=0, query_history=[])
        now = time.time()
        rt = SessionRuntime(
            session_id=uuid.uuid4().hex[:16],
            dataset_id=req.dataset_id,
            dataset=ds,
            forest=forest,
            Z=Z,
            cfg=cfg,
            seed=req.seed,
            forest_params=forest_params,
            state=state,
            curve=[],
            pending=int(next_query(Z, w, set())),
            created_at=now,
            updated_at=now,
        )
        rt.rebuild_snapshot()
        with self.registry_lock:
            self.sessions[rt.session_id] = rt
        self.persist(rt)
        return rt

    def get_session(self, session_id: str) -> SessionRuntime:
        rt = self.sessions.get(session_id)
        if rt is not None:
            return rt
        return self.resume_session(session_id)

    def resume_session(self, session_id: str) -> SessionRuntime:
        path = self.session_path(session_id)
        if not path.exists():
            raise not_found(f"unknown session {session_id!r}")
        snap = load_session(path)
        ds = self.get_dataset(snap.dataset_ref)
        params = snap.forest_params or {}
        forest = build_forest(
            ds.X,
            subsample_size=int(params.get("subsample_size", 256)),
            num_trees=int(params.get("num_trees", 100)),
            scheme=str(params.get("scheme", "if")),
            seed=snap.seed,
        )
        Z = feature_matrix(forest, ds.X)
        state = rebuild_state(snap, Z)
        curve = [int(c) for c in np.cumsum([label == "anomaly" for _, label in snap.query_history])]
        doc = json.loads(path.read_text(encoding="utf-8"))
        meta = doc.get("service", {})
        pending = None
        if state.iteration < snap.config.budget and len(state.labeled) < ds.n:
            pending = int(next_query(Z, state.weights, state.labeled.ids()))
        rt = SessionRuntime(
            session_id=session_id,
            dataset_id=snap.dataset_ref,
            dataset=ds,
            forest=forest,
            Z=Z,
            cfg=snap.config,
            seed=snap.seed,
            forest_params={
                "num_trees": forest.num_trees,
                "subsample_size": forest.subsample_size,
                "scheme": forest.scheme,
            },
            state=state,
            curve=curve,
            pending=pending,
            created_at=float(meta.get("created_at", time.time())),
            updated_at=float(meta.get("updated_at", time.time())),
        )
        rt.rebuild_snapshot()
        with self.registry_lock:
            return self.sessions.setdefault(session_id, rt)

    def submit_label(self, session_id: str, req: LabelSubmit) -> dict:
        rt = self.get_session(session_id)
        with rt.lock:
            if rt.pending is None:
                raise conflict("budget_exhausted", "budget exhausted: session is complete")
            if req.instance_id != rt.pending:
                raise conflict(
                    "stale_instance",
                    f"label for instance {req.instance_id} does not match the "
                    f"pending query {rt.pending}; state unchanged",
                )
            qid = rt.pending
            state = rt.state
            anchor = compute_quantile_anchor(rt.Z, state.weights, rt.cfg.tau)
            state.labeled.add(qid, SparseNodeVector.from_csr_row(rt.Z, qid), req.label)
            state.query_history.append((qid, req.label))
            state.iteration += 1
            state.weights = update_weights(state, anchor, rt.cfg)
            rt.curve.append(state.anomalies_found())
            if state.iteration < rt.cfg.budget and len(state.labeled) < rt.dataset.n:
                rt.pending = int(next_query(rt.Z, state.weights, state.labeled.ids()))
            else:
                rt.pending = None
            rt.updated_at = time.time()
            rt.rebuild_snapshot()
            self.persist(rt)
            return {
                "accepted": True,
                "iteration": state.iteration,
                "anomalies_found": state.anomalies_found(),
                "curve_point": {
                    "iteration": state.iteration,
                    "cumulative": rt.curve[-1],
                },
                "status": rt.status,
                "next": rt.pending_payload(),
            }


def create_app(data_dir=None, session_dir=None, ui_dir=None) -> FastAPI:
    """Build the service app rooted at the given storage directories.

    ``ui_dir``, when given, is served statically under ``/ui`` so the
    browser console can ship from the same origin as the API. CORS is
    open regardless, for consoles served elsewhere.
    """
    data_dir = Path(data_dir) if data_dir else Path("service-data") / "datasets"
    session_dir = Path(session_dir) if session_dir else Path("service-data") / "sessions"
    app = FastAPI(title="ifaad service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    if ui_dir:
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    svc = ServiceState(data_dir, session_dir)
    app.state.svc = svc

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        detail = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        return JSONResponse(status_code=422, content={"code": "validation_error", "message": detail})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/datasets", status_code=201)
    async def upload_dataset(request: Request, name: str | None = None):
        body = await request.body()
        if not body:
            raise bad_request("empty request body; send CSV bytes")
        ds = svc.register_dataset(name, body)
        return {
            "dataset_id": ds.name,
            "total": ds.n,
            "dims": ds.dim,
            "anomaly_count": ds.anomaly_count,
        }

    @app.get("/datasets")
    def list_datasets():
        return {
            "datasets": [
                {"dataset_id": k, "total": v.n, "dims": v.dim, "anomaly_count": v.anomaly_count}
                for k, v in sorted(svc.datasets.items())
            ]
        }

    @app.post("/sessions", status_code=201)
    def create_session(req: SessionCreate):
        rt = svc.create_session(req)
        return rt.snapshot

    @app.get("/sessions/{session_id}/next")
    def get_next(session_id: str):
        rt = svc.get_session(session_id)
        payload = rt.snapshot.get("pending")
        if payload is None:
            raise conflict("budget_exhausted", "budget exhausted: session is complete")
        return payload

    @app.post("/sessions/{session_id}/label")
    def submit_label(session_id: str, req: LabelSubmit):
        return svc.submit_label(session_id, req)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        return svc.get_session(session_id).snapshot

    return app
