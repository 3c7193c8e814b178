"""The imaginative-exploration loop.

A session holds the current panorama and a dead-reckoned pose.  One step =
turn (panorama rotation) + forward generation through a pluggable world
generator.  The exact ``OracleGenerator`` re-renders the true scene at the
dead-reckoned poses, which is what makes loop closure and belief equivalence
exactly testable; ``NoisyOracleGenerator`` degrades it controllably, and
:mod:`panoexplore.external` plugs in an out-of-process generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DomainError, FilteredPathError, GeneratorError, NoFreePathError,
                     PilotError)
from .geometry import RotationSpec, check_panorama, rotate_panorama, wrap_angle
from .world import (DEFAULT_CLEARANCE, Pose, Scene, _bounding_radius, check_collision,
                    render_panorama)

#: navigation semantics: one generated frame corresponds to 0.4 m of travel
METERS_PER_FRAME = 0.4


@dataclass(frozen=True)
class ExplorationConfig:
    """One imaginative action: turn by heading_change, advance distance.

    ``frame_count`` defaults to the 0.4 m/frame convention.  ``vertical``
    lifts the camera (used for bird's-eye-view exploration); it adds a
    straight-up component to the displacement and leaves heading math alone.
    """

    heading_change: float
    distance: float
    frame_count: int | None = None
    vertical: float = 0.0

    def __post_init__(self):
        if self.distance < 0:
            raise DomainError("distance must be >= 0")
        if self.frame_count is None:
            travel = float(np.hypot(self.distance, self.vertical))
            object.__setattr__(self, "frame_count", max(1, round(travel / METERS_PER_FRAME)))
        if self.frame_count < 1:
            raise DomainError("frame_count must be >= 1")

    def to_json(self) -> dict:
        doc = {"heading_change": self.heading_change, "distance": self.distance,
               "frame_count": self.frame_count}
        if self.vertical:
            doc["vertical"] = self.vertical
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ExplorationConfig":
        return cls(float(doc["heading_change"]), float(doc["distance"]),
                   doc.get("frame_count"), float(doc.get("vertical", 0.0)))


class WorldGenerator:
    """Contract: produce forward-motion frames after the turn was applied.

    ``poses`` are the dead-reckoned frame poses computed by the engine, one
    per requested frame, ending at the action's end pose.  Implementations
    must return ``len(poses)`` panoramas with the input's dimensions.
    """

    #: generators that keep per-call state should declare themselves exclusive
    exclusive = False
    #: pose-driven generators that never read the view pixels set this False,
    #: letting the engine skip the (pure-overhead) turn resampling
    consumes_view = True

    def generate(self, view: np.ndarray, config: ExplorationConfig, poses) -> list:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": type(self).__name__}


class OracleGenerator(WorldGenerator):
    """Exact world model: frames are ground-truth renders at the frame poses."""

    consumes_view = False

    def __init__(self, scene: Scene):
        self.scene = scene

    def generate(self, view, config, poses):
        h, w = view.shape[:2]
        return [render_panorama(self.scene, p, w, h) for p in poses]

    def describe(self):
        return {"kind": "oracle", "scene_seed": self.scene.seed}


class NoisyOracleGenerator(WorldGenerator):
    """Oracle renders plus i.i.d. Gaussian pixel noise of scale sigma.

    Noise is drawn from a per-instance counter-keyed stream, so a given
    instance replays deterministically; use one instance per session when
    determinism across parallel runs matters.
    """

    exclusive = True
    consumes_view = False

    def __init__(self, scene: Scene, sigma: float, seed: int = 0):
        if sigma < 0:
            raise DomainError("sigma must be >= 0")
        self.scene = scene
        self.sigma = float(sigma)
        self.seed = int(seed)
        self._counter = 0

    def generate(self, view, config, poses):
        h, w = view.shape[:2]
        out = []
        for p in poses:
            clean = render_panorama(self.scene, p, w, h)
            rng = np.random.default_rng(np.random.SeedSequence((self.seed, self._counter)))
            self._counter += 1
            noisy = clean + rng.normal(0.0, self.sigma, clean.shape)
            out.append(np.clip(noisy, 0.0, 1.0))
        return out

    def describe(self):
        return {"kind": "noisy-oracle", "scene_seed": self.scene.seed,
                "sigma": self.sigma, "seed": self.seed}


@dataclass
class StepRecord:
    config: ExplorationConfig
    poses: list
    frames: list


class ExplorationSession:
    """Single-writer imaginative exploration state.

    The imagined pose is the exact integral of the applied configs; history is
    append-only.  ``fork`` snapshots the current state into an independent
    child session (used for goal-agnostic branching).
    """

    def __init__(self, generator: WorldGenerator, origin_view: np.ndarray,
                 origin_pose: Pose, meters_per_frame: float = METERS_PER_FRAME):
        self.generator = generator
        self.origin_view = check_panorama(origin_view)
        self.origin_pose = origin_pose
        self.current_view = origin_view
        self.imagined_pose = origin_pose
        self.meters_per_frame = meters_per_frame
        self.history: list[StepRecord] = []

    @classmethod
    def from_scene(cls, scene: Scene, pose: Pose, generator: WorldGenerator | None = None,
                   width: int = 1024, height: int = 512) -> "ExplorationSession":
        view = render_panorama(scene, pose, width, height)
        return cls(generator or OracleGenerator(scene), view, pose)

    @property
    def width(self) -> int:
        return self.current_view.shape[1]

    @property
    def height(self) -> int:
        return self.current_view.shape[0]

    def frame_poses(self, config: ExplorationConfig) -> list:
        """Dead-reckoned poses for each generated frame of a step."""
        yaw = wrap_angle(self.imagined_pose.yaw + config.heading_change)
        base = Pose(self.imagined_pose.position, yaw)
        n = config.frame_count
        # k/n first so the final frame sits exactly at the leg end (k/n == 1.0)
        return [base.moved(config.distance * (k / n), config.vertical * (k / n))
                for k in range(1, n + 1)]

    def step(self, config: ExplorationConfig) -> list:
        """Turn, generate forward frames, advance the imagined pose."""
        return self._step_with_poses(config, self.frame_poses(config))

    def _step_with_poses(self, config: ExplorationConfig, poses: list) -> list:
        if self.generator.consumes_view:
            turned = rotate_panorama(self.current_view, RotationSpec(-config.heading_change))
        else:
            turned = self.current_view
        try:
            frames = self.generator.generate(turned, config, poses)
        except Exception as exc:  # attach the step index for diagnosis
            raise GeneratorError(f"generator failed at step {len(self.history)}: {exc}",
                                 step_index=len(self.history)) from exc
        if len(frames) != config.frame_count:
            raise GeneratorError(
                f"generator returned {len(frames)} frames, wanted {config.frame_count}",
                step_index=len(self.history))
        for f in frames:
            if f.shape != self.current_view.shape:
                raise GeneratorError("generator changed frame dimensions",
                                     step_index=len(self.history))
        self.current_view = frames[-1]
        self.imagined_pose = poses[-1]
        self.history.append(StepRecord(config, poses, frames))
        return frames

    def fork(self) -> "ExplorationSession":
        """Child session starting from the current state (parent untouched)."""
        return ExplorationSession(self.generator, self.current_view.copy(),
                                  self.imagined_pose, self.meters_per_frame)


@dataclass
class Branch:
    heading: float
    frames: list | None
    error: Exception | None = None


def run_goal_agnostic(session: ExplorationSession, headings, distance: float,
                      frame_count: int | None = None) -> dict:
    """Explore each heading from the same origin on a forked session.

    Returns {heading: Branch}; a failing branch records its error and leaves
    the other branches (and the parent session) unaffected.
    """
    results = {}
    for heading in headings:
        child = session.fork()
        try:
            frames = child.step(ExplorationConfig(heading, distance, frame_count))
            results[heading] = Branch(heading, frames)
        except GeneratorError as exc:
            results[heading] = Branch(heading, None, exc)
    return results


# --- closed loops ----------------------------------------------------------

@dataclass(frozen=True)
class LoopPath:
    """A closed polygon of exploration legs.

    ``legs`` includes a final zero-distance closing rotation so the net
    heading change is congruent to 0 (mod 2pi); ``rotation_count`` counts the
    polygon vertices (= number of moving legs).
    """

    legs: tuple
    rotation_count: int
    total_distance: float

    def displacement(self) -> np.ndarray:
        """Vector sum of the leg displacements (should be ~0)."""
        yaw = 0.0
        total = np.zeros(2)
        for leg in self.legs:
            yaw = wrap_angle(yaw + leg.heading_change)
            total += leg.distance * np.array([np.cos(yaw), np.sin(yaw)])
        return total

    def net_heading(self) -> float:
        return float(wrap_angle(sum(l.heading_change for l in self.legs)))


def sample_loop_path(rng, max_rotations: int = 9, max_distance: float = 20.0,
                     min_leg: float = 0.5, frame_count: int | None = 1,
                     max_retries: int = 200) -> LoopPath:
    """Random closed polygon within the rotation/distance budget.

    The final moving leg is computed to close the loop exactly; a closing
    rotation restores the initial orientation.  ``frame_count`` applies to
    every moving leg (1 = jump to each vertex, the cheap setting for exact
    generators; None = the 0.4 m/frame default).
    """
    if max_rotations < 2:
        raise DomainError("need at least 2 rotations for a closed loop")
    if max_distance <= 2 * min_leg:
        raise DomainError("max_distance too small for the minimum leg length")
    n = int(rng.integers(2, max_rotations + 1))
    if n == 2:
        # out-and-back: second leg exactly reverses the first
        length = float(rng.uniform(min_leg, max_distance / 2.0))
        first = float(rng.uniform(-np.pi, np.pi))
        legs = [ExplorationConfig(first, length, frame_count),
                ExplorationConfig(np.pi, length, frame_count)]
        return LoopPath(_with_closing(legs), 2, 2 * length)
    for _ in range(max_retries):
        headings = rng.uniform(-np.pi, np.pi, n - 1)
        lengths = rng.uniform(min_leg, max_distance / n, n - 1)
        vecs = lengths[:, None] * np.stack([np.cos(headings), np.sin(headings)], axis=1)
        closing = -vecs.sum(axis=0)
        close_len = float(np.linalg.norm(closing))
        total = float(lengths.sum() + close_len)
        if close_len < min_leg or total > max_distance:
            continue
        close_heading = float(np.arctan2(closing[1], closing[0]))
        abs_headings = list(headings) + [close_heading]
        legs = []
        prev = 0.0
        for alpha, dist in zip(abs_headings, list(lengths) + [close_len]):
            legs.append(ExplorationConfig(float(wrap_angle(alpha - prev)), float(dist), frame_count))
            prev = alpha
        return LoopPath(_with_closing(legs), n, total)
    raise DomainError(f"could not sample a loop within bounds after {max_retries} tries")


def _with_closing(legs) -> tuple:
    """Append the zero-distance rotation that restores the initial heading."""
    yaw = 0.0
    for leg in legs:
        yaw = wrap_angle(yaw + leg.heading_change)
    return tuple(legs) + (ExplorationConfig(float(wrap_angle(-yaw)), 0.0, 1),)


def execute_loop(session_factory, path: LoopPath, scene: Scene | None = None,
                 clearance: float = DEFAULT_CLEARANCE):
    """Run a closed loop; returns (origin_view, final_view).

    When a reference scene is available the legs are obstacle-filtered first
    (a purely imaginative deployment cannot apply this filter).  The closing
    rotation's frame is generated at the exact origin pose: the path is closed
    by construction (residual checked below), so the ~1e-15 m dead-reckoning
    float dust is snapped away and an exact generator reproduces the origin
    view bit-identically.
    """
    residual = float(np.linalg.norm(path.displacement()))
    if residual > 1e-6 or abs(path.net_heading()) > 1e-6:
        raise DomainError(f"loop path is not closed (residual {residual:.2e} m)")
    session = session_factory()
    if scene is not None:
        pose = session.imagined_pose
        for leg in path.legs:
            nxt = Pose(pose.position, pose.yaw + leg.heading_change).moved(leg.distance, leg.vertical)
            if leg.distance > 0 and check_collision(scene, Pose(pose.position, nxt.yaw), nxt, clearance):
                raise FilteredPathError("loop path blocked by an obstacle")
            pose = nxt
    origin = session.current_view
    origin_pose = session.imagined_pose
    for leg in path.legs[:-1]:
        session.step(leg)
    closing = path.legs[-1]
    if closing.distance != 0.0:
        raise DomainError("loop path must end with a zero-distance closing rotation")
    session._step_with_poses(closing, [Pose(origin_pose.position, origin_pose.yaw)])
    return origin, session.current_view


def waypoints_around(scene: Scene, start: Pose, goal_position, clearance: float = DEFAULT_CLEARANCE):
    """Collision-free waypoint chain from start to goal (positions only).

    Breadth-first search over ring points around each primitive; returns a
    list of intermediate positions (possibly empty for a clear straight shot).
    """
    a = start.xyz
    b = np.asarray(goal_position, dtype=np.float64)

    def free(p, q):
        return not check_collision(scene, Pose(tuple(p), 0.0), Pose(tuple(q), 0.0), clearance)

    if free(a, b):
        return []
    nodes = []
    for prim in scene.primitives:
        c = np.array(prim.center)
        ring = _bounding_radius(prim) + clearance + 0.75
        for k in range(8):
            ang = 2.0 * np.pi * k / 8
            p = np.array([c[0] + ring * np.cos(ang), a[1], c[2] + ring * np.sin(ang)])
            if free(p, p):
                nodes.append(p)
    # BFS from start over {nodes, goal}
    frontier = [(a, [])]
    visited = [a]
    while frontier:
        pos, trail = frontier.pop(0)
        if free(pos, b):
            return trail
        for cand in nodes:
            if any(np.allclose(cand, v) for v in visited):
                continue
            if len(trail) >= 4:
                continue
            if free(pos, cand):
                visited.append(cand)
                frontier.append((cand, trail + [cand]))
    raise NoFreePathError("no collision-free waypoint route found")


def plan_route_around(scene: Scene, start: Pose, goal: Pose,
                      frame_count: int | None = None,
                      clearance: float = DEFAULT_CLEARANCE) -> list:
    """Configs for a collision-free route start -> goal, ending at goal's yaw."""
    pts = [start.xyz] + waypoints_around(scene, start, goal.xyz, clearance) + [goal.xyz]
    configs = []
    yaw = start.yaw
    for p, q in zip(pts[:-1], pts[1:]):
        delta = q - p
        dist = float(np.hypot(delta[0], delta[2]))
        if dist <= 1e-12:
            continue
        bearing = float(np.arctan2(delta[2], delta[0]))
        configs.append(ExplorationConfig(float(wrap_angle(bearing - yaw)), dist, frame_count))
        yaw = bearing
    configs.append(ExplorationConfig(float(wrap_angle(goal.yaw - yaw)), 0.0, 1))
    return configs


# --- goal-driven exploration ------------------------------------------------

STOP = None


class Pilot:
    """High-level planner: emits the next config or STOP (None)."""

    def plan(self, goal: str, views: dict, step_index: int, budget_left: int):
        raise NotImplementedError


class ScriptedPilot(Pilot):
    """Replays a recorded config list, then stops."""

    def __init__(self, configs):
        self.configs = list(configs)

    def plan(self, goal, views, step_index, budget_left):
        if step_index >= len(self.configs):
            return STOP
        return self.configs[step_index]


class SeekPilot(Pilot):
    """Oracle-aware scripted pilot: walks toward a tagged entity and stops
    within ``stop_within`` metres.  Stands in for the LMM planner in tests."""

    def __init__(self, session: ExplorationSession, scene: Scene, target_tag: str,
                 step_distance: float = 4.0, stop_within: float = 2.0):
        self.session = session
        self.scene = scene
        self.target_tag = target_tag
        self.step_distance = step_distance
        self.stop_within = stop_within

    def _target(self) -> np.ndarray:
        for prim in self.scene.primitives:
            if prim.entity_tag == self.target_tag:
                return np.array(prim.center)
        raise PilotError(f"no entity tagged {self.target_tag!r} in scene")

    def plan(self, goal, views, step_index, budget_left):
        pose = self.session.imagined_pose
        target = self._target()
        delta = target - pose.xyz
        dist = float(np.hypot(delta[0], delta[2]))
        if dist <= self.stop_within:
            return STOP
        bearing = float(np.arctan2(delta[2], delta[0]))
        travel = min(self.step_distance, max(dist - self.stop_within, 0.0))
        return ExplorationConfig(float(wrap_angle(bearing - pose.yaw)), travel)


@dataclass
class GoalRunResult:
    goal: str
    configs: list
    final_view: np.ndarray
    outcome: str  # "stopped" | "budget_exceeded"


def run_goal_driven(session: ExplorationSession, goal: str, pilot: Pilot,
                    budget: int = 16) -> GoalRunResult:
    """Iterate pilot -> step until STOP or the step budget runs out."""
    from .geometry import panorama_to_cubemap

    configs = []
    for i in range(budget):
        views = panorama_to_cubemap(session.current_view, session.height // 2).faces
        decision = pilot.plan(goal, views, i, budget - i)
        if decision is STOP:
            return GoalRunResult(goal, configs, session.current_view, "stopped")
        if not isinstance(decision, ExplorationConfig):
            raise PilotError(f"pilot returned {type(decision).__name__}, not a config",
                             raw_response=decision)
        session.step(decision)
        configs.append(decision)
    return GoalRunResult(goal, configs, session.current_view, "budget_exceeded")
