"""HTTP facade: queue plan and auction runs, persist results as JSON.

Runs execute on a small worker pool behind a bounded queue (full queue =>
429). Each finished run is written to ``<data_dir>/runs/<run_id>.json``;
a restarted service reloads those documents and never re-executes a done
run. The data directory comes from the ``TRANSFEROPT_DATA`` environment
variable (default ``./transferopt-data``).
"""

from __future__ import annotations

import hashlib
import json
import os
import queue
import tempfile
import threading
import uuid
from contextlib import asynccontextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, ValidationError

from .auction import RoundLookup, build_lookup, setup_from_dict, solve_equilibrium
from .model_io import IngestError, scenario_from_dict
from .planner import load_planning_data, plan_transfers
from .simulate import simulate

__all__ = ["create_app", "app"]

_FIXTURES = Path(__file__).parent / "fixtures"
_QUEUE_SIZE = 16
_N_WORKERS = 2


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class PlanRequest(BaseModel):
    dataset: str = "synthetic-league"
    config: dict


class AuctionRequest(BaseModel):
    setup: Optional[dict] = None
    fixture: Optional[str] = None  # bundled setup name, e.g. "almiron"
    n_sim: int = Field(default=2000, gt=0)
    rounds: int = Field(default=1, gt=0)
    seed: int = 0


class RunStore:
    """In-memory registry backed by one JSON document per run."""

    def __init__(self, data_dir: Path):
        self.dir = data_dir / "runs"
        self.dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._runs: dict[str, dict] = {}
        for path in self.dir.glob("*.json"):
            try:
                doc = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError):
                continue
            if doc.get("status") in ("queued", "running"):
                # interrupted by a previous shutdown; will not be re-queued
                doc["status"] = "failed"
                doc["error"] = "service restarted before the run finished"
            self._runs[doc["run_id"]] = doc

    def create(self, kind: str, config: dict) -> str:
        run_id = uuid.uuid4().hex
        doc = {
            "run_id": run_id,
            "kind": kind,
            "status": "queued",
            "config": config,
            "result": None,
            "error": None,
            "progress": None,
            "created_at": _now(),
            "completed_at": None,
        }
        with self._lock:
            self._runs[run_id] = doc
        self._persist(doc)
        return run_id

    def get(self, run_id: str) -> Optional[dict]:
        with self._lock:
            doc = self._runs.get(run_id)
            return dict(doc) if doc else None

    def update(self, run_id: str, persist: bool = False, **fields) -> None:
        with self._lock:
            doc = self._runs[run_id]
            doc.update(fields)
            snapshot = dict(doc)
        if persist:
            self._persist(snapshot)

    def _persist(self, doc: dict) -> None:
        target = self.dir / f"{doc['run_id']}.json"
        fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, indent=2)
        os.replace(tmp, target)


class Datasets:
    """Named (players, clubs, coefficients) triples plus auction setups."""

    def __init__(self, data_dir: Path):
        self.dir = data_dir / "datasets"
        self.dir.mkdir(parents=True, exist_ok=True)
        self._uploaded: dict[str, Path] = {
            p.stem: p for p in self.dir.glob("*.csv")
        }
        self._lock = threading.Lock()

    def list(self) -> dict:
        with self._lock:
            uploaded = sorted(self._uploaded)
        return {
            "bundled": ["synthetic-league"],
            "uploaded": uploaded,
            "auction_fixtures": ["almiron", "traore"],
        }

    def paths(self, name: str) -> tuple[Path, Path, Path]:
        if name == "synthetic-league":
            players = _FIXTURES / "players.csv"
        else:
            with self._lock:
                players = self._uploaded.get(name)
            if players is None:
                raise KeyError(name)
        return players, _FIXTURES / "clubs.json", _FIXTURES / "coefficients.json"

    def upload(self, name: str, csv_text: str) -> None:
        path = self.dir / f"{name}.csv"
        path.write_text(csv_text)
        with self._lock:
            self._uploaded[name] = path


def _auction_setup_dict(req: AuctionRequest) -> dict:
    if req.setup is not None:
        return req.setup
    if req.fixture is not None:
        path = _FIXTURES / f"auction_{req.fixture}.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown fixture {req.fixture}")
        return json.loads(path.read_text())
    raise HTTPException(status_code=400, detail="provide either setup or fixture")


class Engine:
    """Worker pool executing queued runs at most once each."""

    def __init__(self, store: RunStore, datasets: Datasets):
        self.store = store
        self.datasets = datasets
        self.tasks: queue.Queue = queue.Queue(maxsize=_QUEUE_SIZE)
        self._lookup_cache: dict[str, RoundLookup] = {}
        self._cache_lock = threading.Lock()
        self._threads: list[threading.Thread] = []

    def start(self) -> None:
        for i in range(_N_WORKERS):
            t = threading.Thread(target=self._worker, daemon=True, name=f"run-worker-{i}")
            t.start()
            self._threads.append(t)

    def submit(self, run_id: str) -> None:
        try:
            self.tasks.put_nowait(run_id)
        except queue.Full:
            self.store.update(run_id, status="failed", error="queue full", persist=True)
            raise HTTPException(status_code=429, detail="run queue is full")

    def _worker(self) -> None:
        while True:
            run_id = self.tasks.get()
            doc = self.store.get(run_id)
            if doc is None or doc["status"] != "queued":
                continue  # at-most-once: only queued runs execute
            self.store.update(run_id, status="running")
            try:
                result = self._execute(run_id, doc)
            except Exception as exc:  # surfaced verbatim to the client
                self.store.update(
                    run_id, status="failed", error=f"{type(exc).__name__}: {exc}",
                    completed_at=_now(), persist=True,
                )
            else:
                self.store.update(
                    run_id, status="done", result=result,
                    completed_at=_now(), persist=True,
                )

    def _execute(self, run_id: str, doc: dict) -> dict:
        if doc["kind"] == "plan":
            return self._run_plan(run_id, doc["config"])
        return self._run_auction(run_id, doc["config"])

    def _run_plan(self, run_id: str, config: dict) -> dict:
        players, clubs, coeffs = self.datasets.paths(config["dataset"])
        self.store.update(run_id, progress={"phase": "loading"})
        data = load_planning_data(players, clubs, coeffs)
        scenario = scenario_from_dict(config["config"])
        self.store.update(run_id, progress={"phase": "searching"})
        plan = plan_transfers(data, scenario)
        return plan.to_dict()

    def _run_auction(self, run_id: str, config: dict) -> dict:
        setup = setup_from_dict(config["setup"])
        rounds = config["rounds"]
        key = hashlib.sha256(
            json.dumps(config["setup"], sort_keys=True).encode()
        ).hexdigest()
        with self._cache_lock:
            lookup = self._lookup_cache.get(key)
        if lookup is None:
            self.store.update(run_id, progress={"phase": "equilibrium"})
            if rounds > 1 and len(setup.bidders) >= 2:
                lookup = build_lookup(setup)
            else:
                sol = solve_equilibrium(setup)
                lookup = RoundLookup(((0.0, sol),))
            with self._cache_lock:
                self._lookup_cache[key] = lookup
        if rounds == 1:
            lookup = RoundLookup(lookup.entries[:1])
        self.store.update(run_id, progress={"phase": "simulating", "paths_done": 0})
        stats = simulate(
            setup, lookup, n_sim=config["n_sim"], seed=config["seed"],
            max_rounds=rounds,
            on_progress=lambda n: self.store.update(
                run_id, progress={"phase": "simulating", "paths_done": n}
            ),
        )
        return stats.to_dict()


def create_app(data_dir: str | Path | None = None) -> FastAPI:
    root = Path(
        data_dir
        or os.environ.get("TRANSFEROPT_DATA", Path.cwd() / "transferopt-data")
    )
    store = RunStore(root)
    datasets = Datasets(root)
    engine = Engine(store, datasets)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        engine.start()
        yield

    app = FastAPI(title="transferopt", lifespan=lifespan)

    @app.exception_handler(RequestValidationError)
    async def _invalid(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.post("/api/plans", status_code=202)
    def create_plan_run(req: PlanRequest):
        try:
            datasets.paths(req.dataset)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown dataset {req.dataset}")
        try:
            scenario_from_dict(req.config)  # validate before queueing
        except (IngestError, ValidationError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        run_id = store.create("plan", {"dataset": req.dataset, "config": req.config})
        engine.submit(run_id)
        return {"run_id": run_id}

    @app.post("/api/auctions", status_code=202)
    def create_auction_run(req: AuctionRequest):
        setup_dict = _auction_setup_dict(req)
        try:
            setup_from_dict(setup_dict)  # validate before queueing
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        run_id = store.create(
            "auction",
            {
                "setup": setup_dict,
                "n_sim": req.n_sim,
                "rounds": req.rounds,
                "seed": req.seed,
            },
        )
        engine.submit(run_id)
        return {"run_id": run_id}

    @app.get("/api/runs/{run_id}")
    def get_run(run_id: str):
        doc = store.get(run_id)
        if doc is None:
            raise HTTPException(status_code=404, detail="unknown run id")
        return doc

    @app.get("/api/datasets")
    def list_datasets():
        return datasets.list()

    @app.post("/api/datasets", status_code=201)
    async def upload_dataset(request: Request, name: str):
        body = await request.body()
        if not body:
            raise HTTPException(status_code=400, detail="empty upload")
        datasets.upload(name, body.decode("utf-8"))
        return {"name": name}

    return app


app = None  # built lazily by the CLI / ASGI entry point


def get_app() -> FastAPI:
    global app
    if app is None:
        app = create_app()
    return app
