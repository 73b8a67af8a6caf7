"""HTTP API for interactive loop editing.

A session wraps one fitted model plus its baseline loop. Edits run the
localized-control solve and bump the session version; playback clients fetch
the lifted frames of the latest solution as one JSON preamble line followed
by little-endian float32 data (full precision stays on the CLI path).
Sessions live in memory; one writer per session, reads are snapshots.
"""

from __future__ import annotations

import json
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import datagen
from .control_basis import (
    DegenerateRegionError,
    FourierBasis,
    LocalBasisColumn,
    LocalBasisSet,
    build_local_basis,
    make_profile,
    region_from_box,
)
from .cyclic_solver import CyclicSolution, CyclicSolveError, SolverWeights, solve_cyclic
from .interactive import EditSession, EditSolveError, EditWeights
from .trajectory import Trajectory, TrajectoryFormatError, load_trajectory, save_trajectory

BUILTIN_FRAME_COUNTS = {"nbody": 401, "sheet": 201, "water": 101}
_builtin_cache: dict[str, Trajectory] = {}
_builtin_lock = threading.Lock()


def builtin_trajectory(name: str) -> Trajectory:
    """Deterministic sample datasets, generated once per process."""
    with _builtin_lock:
        cached = _builtin_cache.get(name)
        if cached is not None:
            return cached
        steps = BUILTIN_FRAME_COUNTS[name] - 1
        if name == "nbody":
            traj = datagen.gen_nbody(datagen.default_nbody_config(steps=steps))
        elif name == "sheet":
            traj = datagen.gen_pinned_sheet(datagen.default_sheet_config(steps=steps))
        else:
            traj = datagen.gen_shallow_water(datagen.default_water_config(steps=steps))
        _builtin_cache[name] = traj
        return traj


class SessionRequest(BaseModel):
    dataset: str | None = None
    trajectory_path: str | None = None
    rank: int | None = None
    harmonics: int = 8
    w_red: float = 1e-2
    w_u: float = 3.0
    control_penalty: str = "energy"


class BoxSelection(BaseModel):
    lo: list[float]
    hi: list[float]


class EditRequest(BaseModel):
    # omit region/box/direction entirely for a full-authority edit (the
    # spatial basis becomes the identity on the reduced space)
    region: list[int] | None = None
    box: BoxSelection | None = None
    block: str = "positions"
    direction: list[float] | None = None
    frame: int
    strength: float
    width: float | None = None
    w_red: float | None = None
    w_u: float | None = None
    w_profile: float | None = None


def _identity_basis_set(rank: int) -> LocalBasisSet:
    """Full-authority spatial basis: one canonical reduced direction per column."""
    eye = np.eye(rank)
    entries = tuple(
        LocalBasisColumn(column=eye[:, i], label=f"reduced-axis-{i}",
                         block="", region=(i,), direction=np.array([1.0]))
        for i in range(rank)
    )
    return LocalBasisSet(entries=entries)


@dataclass
class Session:
    """One fitted model plus its evolving edit state."""

    id: str
    traj: Trajectory
    baseline: CyclicSolution
    editor: EditSession
    version: int = 0
    columns: list[LocalBasisColumn] = field(default_factory=list)
    column_keys: dict = field(default_factory=dict)
    latest_frames: np.ndarray | None = None
    latest_metrics: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def period(self) -> int:
        return self.baseline.period


def create_app(data_dir: str = ".", snapshot_dir: str | None = None) -> FastAPI:
    """Build the service; `data_dir` anchors trajectory_path references.

    With `snapshot_dir` set, each session's latest loop is written there as a
    .traj file on shutdown (sessions themselves stay in memory only).
    """
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    root = Path(data_dir)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        if snapshot_dir is None:
            return
        out = Path(snapshot_dir)
        out.mkdir(parents=True, exist_ok=True)
        with sessions_lock:
            snapshot = list(sessions.values())
        for session in snapshot:
            if session.latest_frames is None:
                continue
            loop = Trajectory(frames=session.latest_frames,
                              dt=session.traj.dt, layout=session.traj.layout)
            save_trajectory(loop, out / f"{session.id}.traj")

    app = FastAPI(title="kooploop edit service", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def get_session(session_id: str) -> Session:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(req: SessionRequest):
        if (req.dataset is None) == (req.trajectory_path is None):
            raise HTTPException(
                status_code=400,
                detail="specify exactly one of dataset or trajectory_path",
            )
        defaults = {"nbody": 3, "sheet": 8, "water": 16}
        if req.dataset is not None:
            if req.dataset not in BUILTIN_FRAME_COUNTS:
                raise HTTPException(
                    status_code=400,
                    detail=f"unknown dataset {req.dataset!r}; "
                           f"have {sorted(BUILTIN_FRAME_COUNTS)}",
                )
            traj = builtin_trajectory(req.dataset)
            rank = req.rank or defaults[req.dataset]
        else:
            try:
                traj = load_trajectory(root / req.trajectory_path)
            except (OSError, TrajectoryFormatError) as exc:
                raise HTTPException(status_code=400, detail=f"cannot load trajectory: {exc}")
            rank = req.rank
        try:
            weights = SolverWeights(w_red=req.w_red, w_u=req.w_u)
            baseline = solve_cyclic(traj, rank=rank, harmonics=req.harmonics,
                                    weights=weights,
                                    control_penalty=req.control_penalty)
        except (CyclicSolveError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"fit failed: {exc}")

        basis = FourierBasis(period=baseline.period, harmonics=req.harmonics)
        editor = EditSession(
            model=baseline.model,
            basis=basis,
            observed=baseline.observed_reduced,
            dt=traj.dt,
            layout=traj.layout,
        )
        session = Session(
            id=uuid.uuid4().hex,
            traj=traj,
            baseline=baseline,
            editor=editor,
            latest_frames=baseline.full_cycle.frames,
            latest_metrics=baseline.metrics.to_json(),
        )
        with sessions_lock:
            sessions[session.id] = session
        return {
            "session_id": session.id,
            "summary": {
                "n": traj.n,
                "frames": traj.frame_count,
                "fit_frames": baseline.period,
                "r": baseline.rank,
                "m": int(baseline.gamma.shape[1]),
                "closure_residual": baseline.metrics.closure_residual,
                "blocks": [b.name for b in traj.layout.blocks],
                "dt": traj.dt,
            },
            "version": session.version,
        }

    @app.post("/sessions/{session_id}/edits")
    def apply_edit(session_id: str, req: EditRequest):
        session = get_session(session_id)
        traj = session.traj
        full_authority = req.region is None and req.box is None and req.direction is None
        if not full_authority:
            if req.direction is None:
                raise HTTPException(status_code=422,
                                    detail="direction is required with a region")
            if req.box is not None:
                region = region_from_box(traj.layout, traj.frames[0],
                                         req.box.lo, req.box.hi, block=req.block)
            else:
                region = tuple(req.region or ())
            if not region:
                raise HTTPException(status_code=422, detail="region is empty")

        with session.lock:
            try:
                if full_authority:
                    local_bases = _identity_basis_set(session.editor.model.rank)
                    index = 0
                else:
                    key = (req.block, tuple(region),
                           tuple(np.round(req.direction, 12)))
                    index = session.column_keys.get(key)
                    if index is None:
                        column = build_local_basis(
                            session.editor.model, traj.layout, region, req.block,
                            req.direction,
                        )
                        session.columns.append(column)
                        index = len(session.columns) - 1
                        session.column_keys[key] = index
                    local_bases = LocalBasisSet(entries=tuple(session.columns))
                profile = make_profile(session.period, req.frame,
                                       width=req.width, strength=req.strength)
                weights = EditWeights(
                    w_red=req.w_red if req.w_red is not None else session.baseline.weights.w_red,
                    w_u=req.w_u if req.w_u is not None else session.baseline.weights.w_u,
                    w_profile=req.w_profile if req.w_profile is not None else 10.0,
                )
                solution = session.editor.solve(local_bases, index, profile, weights)
            except (DegenerateRegionError,) as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            except (EditSolveError, ValueError) as exc:
                raise HTTPException(status_code=422, detail=f"edit solve failed: {exc}")
            session.version += 1
            session.latest_frames = solution.full_cycle.frames
            session.latest_metrics = dict(solution.metrics)
            return {
                "version": session.version,
                "metrics": solution.metrics,
                "basis_index": index,
                "basis_count": len(session.columns),
            }

    @app.get("/sessions/{session_id}/frames")
    def stream_frames(session_id: str, stride: int = 1, block: str | None = None,
                      version: int | None = None):
        session = get_session(session_id)
        with session.lock:
            frames = session.latest_frames
            current = session.version
        if frames is None:
            raise HTTPException(status_code=404, detail="session has no solution yet")
        if version is not None and version != current:
            raise HTTPException(
                status_code=409,
                detail=f"version changed: requested {version}, current {current}",
            )
        if stride < 1:
            raise HTTPException(status_code=422, detail="stride must be >= 1")
        layout = session.traj.layout
        name = block or layout.blocks[0].name
        try:
            sl = layout.block_slice(name)
        except KeyError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        # loop frames 1..T+1 inclusive; the final row equals the first by closure
        selected = frames[::stride, sl].astype("<f4")
        preamble = json.dumps({
            "n_block": int(sl.stop - sl.start),
            "frames": int(selected.shape[0]),
            "version": current,
        }).encode("utf-8") + b"\n"
        return Response(content=preamble + selected.tobytes(),
                        media_type="application/octet-stream")

    return app
