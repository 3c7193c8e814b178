"""Persistence: scenes, sessions, trajectory logs, jobs, human records.

Session state is stored losslessly (float64 npz) so a reloaded session
reproduces ``current_view`` bit-identically; PNG stays the interchange format
for exports and wire transport.
"""

from __future__ import annotations

import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import StoreError
from .explore import (ExplorationConfig, ExplorationSession, NoisyOracleGenerator,
                      OracleGenerator, WorldGenerator)
from .world import Pose, Scene


def make_generator(spec: dict, scene: Scene) -> WorldGenerator:
    """Build a generator from its persisted description."""
    kind = spec.get("kind", "oracle")
    if kind == "oracle":
        return OracleGenerator(scene)
    if kind == "noisy-oracle":
        return NoisyOracleGenerator(scene, float(spec.get("sigma", 0.05)),
                                    int(spec.get("seed", 0)))
    if kind == "external":
        from .external import ExternalGenerator

        return ExternalGenerator(spec.get("host", "127.0.0.1"), int(spec["port"]))
    raise StoreError(f"unknown generator kind {kind!r}")


class SessionStore:
    """Directory-backed persistence for scenes and exploration sessions."""

    def __init__(self, root):
        self.root = Path(root)
        (self.root / "scenes").mkdir(parents=True, exist_ok=True)
        (self.root / "sessions").mkdir(parents=True, exist_ok=True)

    # -- scenes --

    def save_scene(self, scene: Scene, scene_id: str | None = None) -> str:
        scene_id = scene_id or f"scene-{scene.seed}-{uuid.uuid4().hex[:8]}"
        (self.root / "scenes" / f"{scene_id}.json").write_text(scene.dumps())
        return scene_id

    def load_scene(self, scene_id: str) -> Scene:
        path = self.root / "scenes" / f"{scene_id}.json"
        if not path.exists():
            raise StoreError(f"unknown scene {scene_id!r}")
        return Scene.load(path)

    def list_scenes(self):
        return sorted(p.stem for p in (self.root / "scenes").glob("*.json"))

    # -- sessions --

    def _session_dir(self, session_id: str) -> Path:
        return self.root / "sessions" / session_id

    def save_session(self, session: ExplorationSession, scene: Scene,
                     generator_spec: dict, session_id: str | None = None) -> str:
        session_id = session_id or f"sess-{uuid.uuid4().hex[:12]}"
        d = self._session_dir(session_id)
        d.mkdir(parents=True, exist_ok=True)
        meta = {
            "schema": "session/1",
            "scene": scene.to_json(),
            "generator": generator_spec,
            "origin_pose": session.origin_pose.to_json(),
            "pose": session.imagined_pose.to_json(),
            "meters_per_frame": session.meters_per_frame,
            "width": session.width,
            "height": session.height,
            "history": [{"config": rec.config.to_json(),
                         "poses": [p.to_json() for p in rec.poses]}
                        for rec in session.history],
        }
        (d / "meta.json").write_text(json.dumps(meta, indent=2))
        np.savez_compressed(d / "state.npz", origin_view=session.origin_view,
                            current_view=session.current_view)
        return session_id

    def load_session(self, session_id: str):
        """Rebuild (session, scene, generator_spec); views restore bit-identically."""
        d = self._session_dir(session_id)
        meta_path = d / "meta.json"
        if not meta_path.exists():
            raise StoreError(f"unknown session {session_id!r}")
        meta = json.loads(meta_path.read_text())
        scene = Scene.from_json(meta["scene"])
        generator = make_generator(meta["generator"], scene)
        state = np.load(d / "state.npz")
        session = ExplorationSession(generator, state["origin_view"],
                                     Pose.from_json(meta["origin_pose"]),
                                     meta["meters_per_frame"])
        session.current_view = state["current_view"]
        session.imagined_pose = Pose.from_json(meta["pose"])
        from .explore import StepRecord

        session.history = [StepRecord(ExplorationConfig.from_json(h["config"]),
                                      [Pose.from_json(p) for p in h["poses"]], [])
                           for h in meta["history"]]
        return session, scene, meta["generator"]

    def list_sessions(self):
        return sorted(p.name for p in (self.root / "sessions").iterdir() if p.is_dir())


# --- trajectory logs ---------------------------------------------------------

def append_trajectory(path, step_index: int, config: ExplorationConfig, pose: Pose,
                      frame_refs=(), **extra) -> None:
    """Append one line-delimited trajectory record."""
    rec = {"step": step_index, "config": config.to_json(), "pose": pose.to_json(),
           "frames": list(frame_refs), **extra}
    with open(path, "a") as fh:
        fh.write(json.dumps(rec) + "\n")


def read_trajectory(path):
    records = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            records.append(json.loads(line))
    return records


def replay_trajectory(records, scene: Scene, generator_spec: dict, origin_pose: Pose,
                      width: int, height: int):
    """Re-execute a trajectory log; returns (views per step, final session).

    With the same seed/scene/generator this reproduces every view
    bit-identically.
    """
    generator = make_generator(generator_spec, scene)
    session = ExplorationSession.from_scene(scene, origin_pose, generator, width, height)
    views = []
    for rec in records:
        frames = session.step(ExplorationConfig.from_json(rec["config"]))
        views.append(frames[-1])
    return views, session


# --- jobs ---------------------------------------------------------------------

TERMINAL_STATES = ("done", "failed")


@dataclass
class JobRecord:
    job_id: str
    kind: str
    status: str = "pending"  # pending | running | done | failed
    progress: float = 0.0
    result: dict | None = None
    error: str | None = None

    def to_json(self) -> dict:
        return {"job_id": self.job_id, "kind": self.kind, "status": self.status,
                "progress": self.progress, "result": self.result, "error": self.error}


class JobManager:
    """Bounded worker pool with terminal-state immutability."""

    def __init__(self, workers: int = 2):
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self._jobs: dict[str, JobRecord] = {}
        self._lock = threading.Lock()

    def submit(self, kind: str, fn) -> JobRecord:
        """fn(progress_callback) -> result dict."""
        job = JobRecord(job_id=f"job-{uuid.uuid4().hex[:12]}", kind=kind)
        with self._lock:
            self._jobs[job.job_id] = job

        def progress(frac: float):
            with self._lock:
                if job.status not in TERMINAL_STATES:
                    job.progress = min(max(float(frac), 0.0), 1.0)

        def run():
            with self._lock:
                if job.status in TERMINAL_STATES:
                    return
                job.status = "running"
            try:
                result = fn(progress)
                with self._lock:
                    if job.status not in TERMINAL_STATES:
                        job.status = "done"
                        job.progress = 1.0
                        job.result = result
            except Exception as exc:
                with self._lock:
                    if job.status not in TERMINAL_STATES:
                        job.status = "failed"
                        job.error = str(exc)

        self._pool.submit(run)
        return job

    def get(self, job_id: str) -> JobRecord:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise StoreError(f"unknown job {job_id!r}")
        return job
