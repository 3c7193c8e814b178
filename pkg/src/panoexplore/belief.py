"""Imagination-driven belief revision over finite factored hypothesis spaces.

A hypothesis assigns one candidate (or "empty") to every tagged scene slot;
beliefs are normalised weight vectors over the hypothesis list.  Physical
updates score real observations, imaginative updates score observations taken
from generated views along a frozen-time exploration - with an exact
generator and deterministic perception the two walks produce identical
likelihood sequences, hence identical posteriors.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import ContradictionError, DomainError
from .explore import ExplorationConfig, ExplorationSession
from .geometry import sphere_to_pixel, wrap_angle
from .world import (ENTITY_COLORS, Pose, Scene, render_panorama, segment_blocked,
                    shaded_color)


@dataclass(frozen=True)
class HypothesisSpace:
    """All assignments of candidates to slots: mutually exclusive, exhaustive."""

    slots: tuple  # ((slot_id, (candidate, ...)), ...)

    @classmethod
    def from_scene(cls, scene: Scene) -> "HypothesisSpace":
        return cls(tuple((sid, tuple(slot.candidates)) for sid, slot in sorted(scene.slots.items())))

    @property
    def slot_ids(self) -> tuple:
        return tuple(sid for sid, _ in self.slots)

    @property
    def hypotheses(self) -> tuple:
        """Tuple of dicts slot_id -> value, in deterministic product order."""
        ids = [sid for sid, _ in self.slots]
        values = [cands for _, cands in self.slots]
        return tuple(dict(zip(ids, combo)) for combo in itertools.product(*values))

    def index_of(self, assignment: dict) -> int:
        for i, h in enumerate(self.hypotheses):
            if h == assignment:
                return i
        raise DomainError(f"assignment {assignment} not in hypothesis space")


@dataclass(frozen=True)
class Belief:
    """Normalised distribution over the hypothesis list; immutable."""

    space: HypothesisSpace
    weights: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if len(w) != len(self.space.hypotheses):
            raise DomainError("weight count does not match hypothesis count")
        if np.any(w < 0):
            raise DomainError("belief weights must be non-negative")
        total = float(w.sum())
        if total <= 0:
            raise DomainError("belief weights must not all be zero")
        object.__setattr__(self, "weights", tuple(float(x) for x in w / total))

    @classmethod
    def uniform(cls, space: HypothesisSpace) -> "Belief":
        n = len(space.hypotheses)
        return cls(space, tuple(1.0 / n for _ in range(n)))

    def prob(self, slot_id: str, value: str) -> float:
        """Marginal probability that the slot holds the value."""
        return sum(w for w, h in zip(self.weights, self.space.hypotheses)
                   if h.get(slot_id) == value)

    def entropy(self) -> float:
        w = np.array(self.weights)
        nz = w[w > 0]
        return float(-(nz * np.log(nz)).sum())

    def map_hypothesis(self) -> dict:
        return self.space.hypotheses[int(np.argmax(self.weights))]

    def dump(self) -> dict:
        """Structured text form: hypothesis id -> weight."""
        return {
            "schema": "belief/1",
            "slots": {sid: list(c) for sid, c in self.space.slots},
            "weights": {"|".join(f"{k}={v}" for k, v in sorted(h.items())): w
                        for h, w in zip(self.space.hypotheses, self.weights)},
        }

    def dumps(self) -> str:
        return json.dumps(self.dump(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class Observation:
    """Per-slot value judgments at a pose; only readable slots appear."""

    judgments: tuple  # ((slot_id, value), ...)
    pose: Pose

    @property
    def as_dict(self) -> dict:
        return dict(self.judgments)


class ObservationModel:
    """Contract: produce observations and score their likelihoods.

    ``observe`` turns a (pose, view) into an Observation; ``likelihood`` is
    O(o | hypothesis, pose) in [0, 1].
    """

    def observe(self, pose: Pose, view: np.ndarray | None = None) -> Observation:
        raise NotImplementedError

    def likelihood(self, obs: Observation, hypothesis: dict, pose: Pose) -> float:
        raise NotImplementedError


def slot_visible(scene: Scene, pose: Pose, slot_id: str) -> bool:
    """Line of sight from the eye to the slot anchor against static occluders."""
    anchor = np.array(scene.slots[slot_id].anchor)
    return not segment_blocked(scene, pose.xyz, anchor, ignore_tagged=True)


class OraclePerception(ObservationModel):
    """Exact semantic perception: visibility test against the scene geometry,
    slot values read from the scene's ground truth.  Likelihoods are 0/1."""

    def __init__(self, scene: Scene):
        self.scene = scene

    def visible_slots(self, pose: Pose):
        return [sid for sid in sorted(self.scene.slots) if slot_visible(self.scene, pose, sid)]

    def observe(self, pose: Pose, view=None) -> Observation:
        judg = tuple((sid, self.scene.slots[sid].actual) for sid in self.visible_slots(pose))
        return Observation(judg, pose)

    def likelihood(self, obs: Observation, hypothesis: dict, pose: Pose) -> float:
        for sid, value in obs.judgments:
            if hypothesis.get(sid) != value:
                return 0.0
        return 1.0


class PixelPerception(ObservationModel):
    """Perception that actually reads the panorama pixels.

    For each slot whose anchor has line of sight (static occluders are the
    known map), the patch around the anchor's projection is classified against
    the shaded entity palette, ground and sky.  ``error_rate`` softens the
    likelihood for noisy views: P(read v | true t) = 1-e if v == t else
    e/(k-1) over the k-1 other readable values.
    """

    def __init__(self, scene: Scene, error_rate: float = 0.0, patch: int = 3):
        if not 0.0 <= error_rate < 1.0:
            raise DomainError("error_rate must be in [0, 1)")
        self.scene = scene
        self.error_rate = error_rate
        self.patch = patch

    def _reference_colors(self, slot_id: str):
        """Candidate value -> list of plausible rendered colours."""
        refs = {}
        normals = [np.array(n) for n in
                   ([1, 0, 0], [-1, 0, 0], [0, 0, 1], [0, 0, -1], [0, 1, 0])]
        light = self.scene.light_dir
        for cand in self.scene.slots[slot_id].candidates:
            if cand == "empty":
                refs[cand] = [shaded_color(self.scene.ground_color, [0, 1, 0], light),
                              np.array(self.scene.sky_color)]
            else:
                albedo = ENTITY_COLORS.get(cand, (0.5, 0.5, 0.5))
                refs[cand] = [shaded_color(albedo, n, light) for n in normals]
        return refs

    def _classify(self, view: np.ndarray, pose: Pose, slot_id: str) -> str:
        anchor = np.array(self.scene.slots[slot_id].anchor)
        rel = anchor - pose.xyz
        dist = float(np.linalg.norm(rel))
        lat = float(np.arcsin(np.clip(rel[1] / dist, -1, 1)))
        lon = float(wrap_angle(np.arctan2(rel[2], rel[0]) - pose.yaw))
        h, w = view.shape[:2]
        u, v = sphere_to_pixel(lon, lat, w, h)
        ci = int(u) % w
        ri = min(int(v), h - 1)
        r = self.patch // 2
        rows = np.clip(np.arange(ri - r, ri + r + 1), 0, h - 1)
        cols = np.arange(ci - r, ci + r + 1) % w
        patch = view[np.ix_(rows, cols)].reshape(-1, 3).mean(axis=0)
        best, best_d = None, np.inf
        for cand, colors in self._reference_colors(slot_id).items():
            for c in colors:
                d = float(np.sum((patch - np.asarray(c)) ** 2))
                if d < best_d:
                    best, best_d = cand, d
        return best

    def observe(self, pose: Pose, view=None) -> Observation:
        if view is None:
            raise DomainError("pixel perception needs a view to read")
        judg = []
        for sid in sorted(self.scene.slots):
            if slot_visible(self.scene, pose, sid):
                judg.append((sid, self._classify(view, pose, sid)))
        return Observation(tuple(judg), pose)

    def likelihood(self, obs: Observation, hypothesis: dict, pose: Pose) -> float:
        like = 1.0
        for sid, value in obs.judgments:
            k = len(self.scene.slots[sid].candidates)
            truth = hypothesis.get(sid)
            if self.error_rate == 0.0:
                if truth != value:
                    return 0.0
            elif truth == value:
                like *= 1.0 - self.error_rate
            else:
                like *= self.error_rate / max(k - 1, 1)
        return like


@dataclass
class Models:
    """Bundle handed to updates: perception plus (identity) transition."""

    observation: ObservationModel
    # transition defaults to identity over hypotheses (static scene per decision)
    transition: object | None = None


def physical_update(belief: Belief, action, observation: Observation, models: Models) -> Belief:
    """Bayes step: b'(h) prop O(o | h) * b(h); static-scene transition is identity."""
    if models.transition is not None:
        raise DomainError("dynamic transition models are a contract point, not implemented")
    likes = np.array([models.observation.likelihood(observation, h, observation.pose)
                      for h in belief.space.hypotheses])
    post = likes * np.array(belief.weights)
    total = float(post.sum())
    if total <= 0.0:
        raise ContradictionError(
            "observation has zero likelihood under every hypothesis")
    return Belief(belief.space, tuple(post / total))


def imaginative_update(belief: Belief, session: ExplorationSession, configs,
                       models: Models) -> Belief:
    """Belief revision from imagined observations; the physical session state
    is untouched (time is frozen: all stepping happens on a fork)."""
    child = session.fork()
    current = belief
    for config in configs:
        frames = child.step(config)
        obs = models.observation.observe(child.imagined_pose, frames[-1])
        current = physical_update(current, None, obs, models)
    return current


def physical_walk_update(belief: Belief, scene: Scene, start_pose: Pose, configs,
                         models: Models, width: int = 512, height: int = 256) -> Belief:
    """The physical-exploration counterpart: actually move, render, observe.

    Returns (posterior, final_pose); used to check imagined walks against
    real ones.
    """
    pose = start_pose
    current = belief
    for config in configs:
        yaw = wrap_angle(pose.yaw + config.heading_change)
        pose = Pose(pose.position, yaw).moved(config.distance, config.vertical)
        view = render_panorama(scene, pose, width, height)
        obs = models.observation.observe(pose, view)
        current = physical_update(current, None, obs, models)
    return current, pose


def plan_route(from_pose: Pose, to_pose: Pose, frame_count: int | None = None):
    """Configs: turn to the bearing, travel, then turn to the target heading."""
    delta = to_pose.xyz - from_pose.xyz
    dist = float(np.hypot(delta[0], delta[2]))
    configs = []
    if dist > 1e-12:
        bearing = float(np.arctan2(delta[2], delta[0]))
        configs.append(ExplorationConfig(float(wrap_angle(bearing - from_pose.yaw)), dist, frame_count))
        configs.append(ExplorationConfig(float(wrap_angle(to_pose.yaw - bearing)), 0.0, 1))
    else:
        configs.append(ExplorationConfig(float(wrap_angle(to_pose.yaw - from_pose.yaw)), 0.0, 1))
    return configs


@dataclass
class OtherAgentInference:
    view: np.ndarray
    observation: Observation
    belief: Belief


def infer_other_agent(belief: Belief, session: ExplorationSession, other_pose: Pose,
                      models: Models, prior: Belief | None = None) -> OtherAgentInference:
    """Imagine standing at another agent's pose and infer its belief.

    The route is turn/travel/turn; the final frame is generated at the exact
    target pose (the route lands there by construction, so the dead-reckoning
    float dust is snapped away as in the loop executor).
    """
    child = session.fork()
    route = plan_route(child.imagined_pose, other_pose, frame_count=1)
    for config in route[:-1]:
        child.step(config)
    child._step_with_poses(route[-1], [Pose(other_pose.position, other_pose.yaw)])
    view = child.current_view
    obs = models.observation.observe(child.imagined_pose, view)
    other_prior = prior or Belief.uniform(belief.space)
    inferred = physical_update(other_prior, None, obs, models)
    return OtherAgentInference(view, obs, inferred)


class Policy:
    """Contract: (belief list, goal) -> normalised distribution over actions."""

    def decide(self, beliefs, goal: str) -> dict:
        raise NotImplementedError


class YieldPolicy(Policy):
    """Scripted traffic rule: yield iff any agent's belief makes a hazard
    (default: an ambulance in any slot) strictly more likely than not; an
    uninformed uniform belief therefore proceeds."""

    def __init__(self, hazard_value: str = "ambulance", threshold: float = 0.5,
                 yield_action: str = "yield", proceed_action: str = "proceed"):
        self.hazard_value = hazard_value
        self.threshold = threshold
        self.yield_action = yield_action
        self.proceed_action = proceed_action

    def decide(self, beliefs, goal: str) -> dict:
        worst = 0.0
        for b in beliefs:
            for sid in b.space.slot_ids:
                worst = max(worst, b.prob(sid, self.hazard_value))
        action = self.yield_action if worst > self.threshold else self.proceed_action
        return {action: 1.0}


def multi_agent_decide(beliefs, goal: str, policy: Policy) -> str:
    """Aggregated decision: the policy sees the full belief vector (self +
    imagined others); returns the argmax action (ties broken by label)."""
    if not beliefs:
        raise DomainError("need at least one belief")
    dist = policy.decide(list(beliefs), goal)
    total = sum(dist.values())
    if not np.isclose(total, 1.0, atol=1e-9):
        raise DomainError(f"policy distribution sums to {total}, not 1")
    return max(sorted(dist), key=lambda k: dist[k])
