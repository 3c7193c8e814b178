"""HTTP service exposing exploration, rendering, belief and EQA.

Every capability routes through the same library calls as the CLI, so the two
surfaces stay result-identical.  Per-session mutations are serialised with a
non-blocking lock (concurrent steps get 409); mutations accept a client
request token and replay the cached response on duplicates.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response
from pydantic import BaseModel

from . import metrics as metrics_mod
from .belief import Belief, HypothesisSpace, Models, PixelPerception, physical_update
from .eqa import (BeliefAgent, EvalReport, OmniscientAgent, RandomAgent, RuleAgent,
                  StubJudge, run_suite, sanitize_scene)
from .errors import PanoExploreError, StoreError
from .explore import (ExplorationConfig, ExplorationSession, ScriptedPilot,
                      run_goal_driven)
from .geometry import panorama_to_cubemap, perspective_view
from .imageio import encode_png
from .store import JobManager, SessionStore, make_generator
from .suite import builtin_suite
from .world import CAMERA_HEIGHT, Pose, Scene, SceneParams, generate_scene

AGENTS = {"random": RandomAgent, "rule": RuleAgent, "omniscient": OmniscientAgent,
          "belief": BeliefAgent}


class SceneSpec(BaseModel):
    scene_id: str | None = None
    seed: int | None = None
    density: float = 2.0
    extent: float = 40.0
    inline: dict | None = None


class GeneratorSpec(BaseModel):
    kind: str = "oracle"
    sigma: float = 0.05
    seed: int = 0
    host: str = "127.0.0.1"
    port: int | None = None


class CreateSession(BaseModel):
    scene: SceneSpec | None = None
    scenario_id: str | None = None
    pose: list | None = None  # [x, y, z, yaw]
    yaw: float = 0.0
    width: int = 512
    height: int = 256
    generator: GeneratorSpec = GeneratorSpec()
    request_token: str | None = None


class StepRequest(BaseModel):
    heading_change: float = 0.0
    distance: float = 0.0
    frame_count: int | None = None
    vertical: float = 0.0
    request_token: str | None = None


class GoalRequest(BaseModel):
    goal: str
    configs: list  # scripted pilot: list of config dicts
    budget: int = 16
    request_token: str | None = None


class IelcRequest(BaseModel):
    scene: SceneSpec = SceneSpec(seed=0)
    generator: GeneratorSpec = GeneratorSpec()
    n_loops: int = 100
    max_rotations: int = 9
    max_distance: float = 20.0
    width: int = 256
    height: int = 128
    seed: int = 0


class EqaRequest(BaseModel):
    agent: str = "random"
    mode: str = "unimodal"
    seed: int = 0
    category: str | None = None
    with_judge: bool = True


class HumanRecord(BaseModel):
    scenario_id: str
    choice: str
    rationale: str = ""


@dataclass
class SessionEntry:
    session: ExplorationSession
    scene: Scene
    generator_spec: dict
    lock: threading.Lock = field(default_factory=threading.Lock)
    tokens: dict = field(default_factory=dict)
    version: int = 0
    belief: Belief | None = None
    models: Models | None = None
    parent: str | None = None


def _resolve_scene(spec: SceneSpec | None, store: SessionStore) -> Scene:
    spec = spec or SceneSpec(seed=0)
    if spec.inline is not None:
        return Scene.from_json(spec.inline)
    if spec.scene_id is not None:
        return store.load_scene(spec.scene_id)
    return generate_scene(spec.seed or 0, SceneParams(density=spec.density, extent=spec.extent))


def create_app(store_root) -> FastAPI:
    store = SessionStore(store_root)
    jobs = JobManager(workers=2)
    sessions: dict[str, SessionEntry] = {}
    registry_lock = threading.Lock()
    token_sessions: dict[str, str] = {}
    scenarios = {s.id: s for s in builtin_suite()}
    app = FastAPI(title="panoexplore", version="0.1.0")

    def entry_of(session_id: str) -> SessionEntry:
        with registry_lock:
            entry = sessions.get(session_id)
        if entry is None:
            raise HTTPException(404, f"unknown session {session_id}")
        return entry

    @app.exception_handler(PanoExploreError)
    async def domain_error_handler(request, exc):
        from fastapi.responses import JSONResponse

        status = 404 if isinstance(exc, StoreError) else 422
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "detail": str(exc)})

    # -- scenes --

    @app.post("/scenes")
    def create_scene(spec: SceneSpec):
        scene = _resolve_scene(spec, store)
        scene_id = store.save_scene(scene)
        return {"scene_id": scene_id, "primitives": len(scene.primitives)}

    @app.get("/scenes/{scene_id}")
    def get_scene(scene_id: str):
        return store.load_scene(scene_id).to_json()

    # -- sessions --

    @app.post("/sessions")
    def create_session(req: CreateSession):
        if req.request_token:
            with registry_lock:
                known = token_sessions.get(req.request_token)
            if known:
                entry = entry_of(known)
                return {"session_id": known, "pose": entry.session.imagined_pose.to_json(),
                        "width": entry.session.width, "height": entry.session.height}
        belief = models = None
        if req.scenario_id:
            scenario = scenarios.get(req.scenario_id)
            if scenario is None:
                raise HTTPException(404, f"unknown scenario {req.scenario_id}")
            scene = scenario.scene
            pose = scenario.self_pose
            map_scene = sanitize_scene(scene)
            space = HypothesisSpace.from_scene(map_scene)
            belief = Belief.uniform(space)
            models = Models(PixelPerception(map_scene))
        else:
            scene = _resolve_scene(req.scene, store)
            if req.pose is not None:
                x, y, z, yaw = req.pose
                pose = Pose((x, y, z), yaw)
            else:
                pose = Pose((0.0, scene.ground_height + CAMERA_HEIGHT, 0.0), req.yaw)
        gen_spec = req.generator.model_dump()
        if gen_spec.get("port") is None:
            gen_spec.pop("port", None)
        generator = make_generator({"kind": gen_spec["kind"], **gen_spec}, scene)
        session = ExplorationSession.from_scene(scene, pose, generator, req.width, req.height)
        session_id = f"sess-{uuid.uuid4().hex[:12]}"
        entry = SessionEntry(session, scene, gen_spec, belief=belief, models=models)
        with registry_lock:
            sessions[session_id] = entry
            if req.request_token:
                token_sessions[req.request_token] = session_id
        return {"session_id": session_id, "pose": session.imagined_pose.to_json(),
                "width": session.width, "height": session.height}

    def _step_payload(entry: SessionEntry, session_id: str) -> dict:
        out = {
            "session_id": session_id,
            "step_index": len(entry.session.history) - 1,
            "pose": entry.session.imagined_pose.to_json(),
            "version": entry.version,
            "view_url": f"/sessions/{session_id}/view?format=pano",
        }
        if entry.belief is not None:
            out["belief"] = entry.belief.dump()
        return out

    @app.post("/sessions/{session_id}/step")
    def step_session(session_id: str, req: StepRequest):
        entry = entry_of(session_id)
        if req.request_token and req.request_token in entry.tokens:
            return entry.tokens[req.request_token]
        if not entry.lock.acquire(blocking=False):
            raise HTTPException(409, "a step is already in progress on this session")
        try:
            if req.request_token and req.request_token in entry.tokens:
                return entry.tokens[req.request_token]
            config = ExplorationConfig(req.heading_change, req.distance,
                                       req.frame_count, req.vertical)
            frames = entry.session.step(config)
            entry.version += 1
            if entry.belief is not None and entry.models is not None:
                obs = entry.models.observation.observe(entry.session.imagined_pose,
                                                       frames[-1])
                if obs.judgments:
                    entry.belief = physical_update(entry.belief, None, obs, entry.models)
            payload = _step_payload(entry, session_id)
            if req.request_token:
                entry.tokens[req.request_token] = payload
            return payload
        finally:
            entry.lock.release()

    @app.post("/sessions/{session_id}/fork")
    def fork_session(session_id: str):
        entry = entry_of(session_id)
        child = entry.session.fork()
        child_id = f"sess-{uuid.uuid4().hex[:12]}"
        with registry_lock:
            sessions[child_id] = SessionEntry(child, entry.scene, entry.generator_spec,
                                              belief=entry.belief, models=entry.models,
                                              parent=session_id)
        return {"session_id": child_id, "parent": session_id,
                "pose": child.imagined_pose.to_json()}

    @app.get("/sessions/{session_id}/view")
    def get_view(session_id: str, format: str = Query("pano"), face: str = "front",
                 heading_phi: float = 0.0, heading_theta: float = 0.0,
                 fov: float = float(np.pi / 2), out_w: int = 512, out_h: int = 384):
        entry = entry_of(session_id)
        view = entry.session.current_view
        if format == "pano":
            img = view
        elif format == "cube":
            img = panorama_to_cubemap(view, entry.session.height // 2).faces[face]
        elif format == "perspective":
            img = perspective_view(view, heading_phi, heading_theta, fov, out_w, out_h)
        else:
            raise HTTPException(422, f"unknown format {format!r}")
        return Response(content=encode_png(img), media_type="image/png",
                        headers={"X-Session-Version": str(entry.version)})

    @app.get("/sessions/{session_id}/belief")
    def get_belief(session_id: str):
        entry = entry_of(session_id)
        if entry.belief is None:
            raise HTTPException(404, "session has no belief tracking (create from a scenario)")
        return entry.belief.dump()

    @app.get("/sessions/{session_id}/trajectory")
    def get_trajectory(session_id: str):
        entry = entry_of(session_id)
        return {"origin_pose": entry.session.origin_pose.to_json(),
                "generator": entry.generator_spec,
                "width": entry.session.width, "height": entry.session.height,
                "scene": entry.scene.to_json(),
                "steps": [{"step": i, "config": rec.config.to_json(),
                           "pose": rec.poses[-1].to_json()}
                          for i, rec in enumerate(entry.session.history)]}

    @app.post("/sessions/{session_id}/goal")
    def run_goal(session_id: str, req: GoalRequest):
        entry = entry_of(session_id)
        if not entry.lock.acquire(blocking=False):
            raise HTTPException(409, "a step is already in progress on this session")
        try:
            pilot = ScriptedPilot([ExplorationConfig.from_json(c) for c in req.configs])
            result = run_goal_driven(entry.session, req.goal, pilot, req.budget)
            entry.version += len(result.configs)
            return {"outcome": result.outcome,
                    "configs": [c.to_json() for c in result.configs],
                    "pose": entry.session.imagined_pose.to_json(),
                    "view_url": f"/sessions/{session_id}/view?format=pano"}
        finally:
            entry.lock.release()

    @app.post("/sessions/{session_id}/save")
    def save_session(session_id: str):
        entry = entry_of(session_id)
        sid = store.save_session(entry.session, entry.scene, entry.generator_spec)
        return {"stored_id": sid}

    # -- jobs --

    @app.post("/ielc")
    def run_ielc(req: IelcRequest):
        scene = _resolve_scene(req.scene, store)

        def work(progress):
            gen_spec = req.generator.model_dump()

            def factory(loop_seed):
                spec = dict(gen_spec)
                if spec["kind"] == "noisy-oracle":
                    spec["seed"] = int(spec.get("seed", 0)) + loop_seed
                return make_generator(spec, scene)

            report = metrics_mod.ielc(
                scene, factory, n_loops=req.n_loops,
                bounds=metrics_mod.LoopBounds(req.max_rotations, req.max_distance),
                width=req.width, height=req.height, seed=req.seed,
                progress=progress)
            return report.to_json()

        job = jobs.submit("ielc-run", work)
        return {"job_id": job.job_id}

    @app.post("/eqa")
    def run_eqa(req: EqaRequest):
        if req.agent not in AGENTS:
            raise HTTPException(422, f"unknown agent {req.agent!r}")

        def work(progress):
            suite = [s for s in scenarios.values()
                     if req.category in (None, s.category)]
            suite = sorted(suite, key=lambda s: s.id)
            agent = AGENTS[req.agent](req.seed) if req.agent == "random" else AGENTS[req.agent]()
            records = run_suite(suite, agent, req.mode)
            judge = StubJudge() if req.with_judge else None
            return EvalReport.build(records, req.mode, req.agent, judge).to_json()

        job = jobs.submit("eqa-run", work)
        return {"job_id": job.job_id}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return jobs.get(job_id).to_json()

    # -- scenarios / human records --

    @app.get("/eqa/scenarios")
    def list_scenarios(category: str | None = None):
        out = []
        for s in sorted(scenarios.values(), key=lambda s: s.id):
            if category and s.category != category:
                continue
            out.append({"id": s.id, "category": s.category, "context": s.context,
                        "choices": [c.to_json() for c in s.choices],
                        "control_pair": s.control_pair})
        return out

    @app.get("/eqa/scenarios/{scenario_id}")
    def get_scenario(scenario_id: str):
        s = scenarios.get(scenario_id)
        if s is None:
            raise HTTPException(404, f"unknown scenario {scenario_id}")
        return s.to_json()

    @app.post("/eqa/human")
    def post_human_record(rec: HumanRecord):
        s = scenarios.get(rec.scenario_id)
        if s is None:
            raise HTTPException(404, f"unknown scenario {rec.scenario_id}")
        if rec.choice not in s.labels:
            raise HTTPException(422, f"choice must be one of {s.labels}")
        import json as _json

        record = {"scenario_id": rec.scenario_id, "category": s.category,
                  "mode": "human", "valid": True,
                  "distribution": {l: 1.0 if l == rec.choice else 0.0 for l in s.labels},
                  "chosen": rec.choice, "correct": rec.choice == s.gold_choice,
                  "gold_choice": s.gold_choice,
                  "gold_mass": 1.0 if rec.choice == s.gold_choice else 0.0,
                  "rationale": rec.rationale, "gold_rationale": s.gold_rationale,
                  "error": None}
        path = store.root / "human_records.jsonl"
        with open(path, "a") as fh:
            fh.write(_json.dumps(record) + "\n")
        return {"recorded": True, "correct": record["correct"]}

    app.state.store = store
    app.state.sessions = sessions
    return app
