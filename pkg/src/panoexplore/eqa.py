"""Embodied-QA harness: scenario format, agent clients, evaluation metrics.

A scenario bundles a scene, agent poses, a question with labelled choices and
a gold choice/rationale.  Agents answer under three modes: text only
(unimodal), text + six egocentric cube faces (multimodal), or additionally a
scripted imaginative exploration (imagination).  Records aggregate into
decision accuracy, gold-action confidence and (judge-dependent) logic
accuracy.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .belief import (Belief, HypothesisSpace, Models, PixelPerception, YieldPolicy,
                     imaginative_update, infer_other_agent, multi_agent_decide)
from .errors import AgentProtocolError, DomainError, UndefinedReportError
from .explore import ExplorationConfig, ExplorationSession, OracleGenerator
from .geometry import panorama_to_cubemap
from .world import Pose, Scene, render_panorama

MODES = ("unimodal", "multimodal", "imagination")


# --- scenario format --------------------------------------------------------

@dataclass(frozen=True)
class Choice:
    label: str
    text: str
    action: str  # semantic tag used by scripted agents and gold derivation

    def to_json(self):
        return {"label": self.label, "text": self.text, "action": self.action}

    @classmethod
    def from_json(cls, doc):
        return cls(doc["label"], doc["text"], doc["action"])


@dataclass(frozen=True)
class Scenario:
    id: str
    category: str  # "single-agent" | "multi-agent"
    scene: Scene
    agents: tuple  # ((name, Pose), ...); agents[0] is the deciding agent
    context: str
    choices: tuple
    gold_choice: str
    gold_rationale: str
    control_pair: str | None = None
    controlled_variable: str | None = None
    exploration_script: tuple = ()

    def __post_init__(self):
        if len(self.choices) < 2:
            raise DomainError("a scenario needs at least 2 choices")
        labels = [c.label for c in self.choices]
        if len(set(labels)) != len(labels):
            raise DomainError("duplicate choice labels")
        if self.gold_choice not in labels:
            raise DomainError("gold_choice must be one of the choice labels")
        if self.category not in ("single-agent", "multi-agent"):
            raise DomainError(f"unknown category {self.category!r}")

    @property
    def self_pose(self) -> Pose:
        return self.agents[0][1]

    @property
    def labels(self):
        return tuple(c.label for c in self.choices)

    def choice_by_action(self, action: str) -> str:
        for c in self.choices:
            if c.action == action:
                return c.label
        raise DomainError(f"no choice with action {action!r}")

    def to_json(self) -> dict:
        return {
            "schema": "scenario/1",
            "id": self.id,
            "category": self.category,
            "scene": self.scene.to_json(),
            "agents": [{"name": n, "pose": p.to_json()} for n, p in self.agents],
            "context": self.context,
            "choices": [c.to_json() for c in self.choices],
            "gold_choice": self.gold_choice,
            "gold_rationale": self.gold_rationale,
            "control_pair": self.control_pair,
            "controlled_variable": self.controlled_variable,
            "exploration_script": [c.to_json() for c in self.exploration_script],
        }

    @classmethod
    def from_json(cls, doc: dict, base_dir=None) -> "Scenario":
        if doc.get("schema") != "scenario/1":
            raise DomainError(f"unsupported scenario schema {doc.get('schema')!r}")
        scene_doc = doc["scene"]
        if isinstance(scene_doc, dict) and "file" in scene_doc:
            base = Path(base_dir) if base_dir is not None else Path(".")
            scene = Scene.load(base / scene_doc["file"])
        else:
            scene = Scene.from_json(scene_doc)
        return cls(
            id=doc["id"],
            category=doc["category"],
            scene=scene,
            agents=tuple((a["name"], Pose.from_json(a["pose"])) for a in doc["agents"]),
            context=doc["context"],
            choices=tuple(Choice.from_json(c) for c in doc["choices"]),
            gold_choice=doc["gold_choice"],
            gold_rationale=doc["gold_rationale"],
            control_pair=doc.get("control_pair"),
            controlled_variable=doc.get("controlled_variable"),
            exploration_script=tuple(ExplorationConfig.from_json(c)
                                     for c in doc.get("exploration_script", [])),
        )


def _slot_linked(scene: Scene, prim) -> bool:
    if prim.entity_tag is None:
        return False
    for slot in scene.slots.values():
        if np.allclose(prim.center, slot.anchor, atol=1e-6):
            return True
    return False


def sanitize_scene(scene: Scene) -> Scene:
    """The agent's map: slot-linked entities removed, slot truths redacted."""
    doc = scene.to_json()
    keep = [p.to_json() for p in scene.primitives if not _slot_linked(scene, p)]
    doc["primitives"] = keep
    for slot in doc["slots"].values():
        slot["actual"] = "empty"  # placeholder; agents must not read it
    return Scene.from_json(doc)


def scene_signature(scenario: Scenario) -> dict:
    """Structural signature for the control-pair discipline.

    A slot together with its linked entity primitive counts as one variable;
    everything else (static primitives, poses, context, choices) is listed
    separately so a control pair must differ in exactly one key.
    """
    sc = scenario.scene
    sig = {
        "statics": tuple(sorted(json.dumps(p.to_json(), sort_keys=True)
                                for p in sc.primitives if not _slot_linked(sc, p))),
        "world": (sc.extent, sc.sky_color, sc.ground_height, sc.ground_color),
        "agents": tuple((n, p.position, p.yaw) for n, p in scenario.agents),
        "context": scenario.context,
        "choices": tuple(c.to_json()["label"] + c.text + c.action for c in scenario.choices),
        "category": scenario.category,
    }
    for sid, slot in sorted(sc.slots.items()):
        sig[f"slot:{sid}"] = (slot.anchor, slot.candidates, slot.actual)
    return sig


def check_control_pairs(scenarios) -> None:
    """Verify each control pair differs in exactly one signature key."""
    by_id = {s.id: s for s in scenarios}
    for s in scenarios:
        if not s.control_pair:
            continue
        partner = by_id.get(s.control_pair)
        if partner is None:
            raise DomainError(f"{s.id}: control pair {s.control_pair} not in suite")
        a, b = scene_signature(s), scene_signature(partner)
        if set(a) != set(b):
            raise DomainError(f"{s.id}: control pair has different structure")
        diffs = [k for k in a if a[k] != b[k]]
        if len(diffs) != 1:
            raise DomainError(f"{s.id} vs {partner.id}: control pair differs in {diffs}")


def load_scenarios(path) -> list:
    """Read a scenario suite file (JSON list) and run the structural checks.

    Scenario documents may inline their scene or reference a scene file
    relative to the suite file: ``"scene": {"file": "scenes/foo.json"}``.
    """
    path = Path(path)
    docs = json.loads(path.read_text())
    scenarios = [Scenario.from_json(d, base_dir=path.parent) for d in docs]
    check_control_pairs(scenarios)
    return scenarios


def save_scenarios(path, scenarios) -> None:
    Path(path).write_text(json.dumps([s.to_json() for s in scenarios], indent=2))


# --- the shared traffic rule -------------------------------------------------

def rule_decision(judgments: dict) -> str:
    """Yield iff any judged slot holds an ambulance; otherwise proceed."""
    if any(v == "ambulance" for v in judgments.values()):
        return "yield"
    return "proceed"


def explain(judgments: dict, action: str) -> str:
    """Canonical rationale phrasing shared by gold text and informed agents."""
    if not judgments:
        return f"No hidden slot could be inspected; defaulting to {action}."
    parts = [f"the {sid} slot holds {val}" for sid, val in sorted(judgments.items())]
    return f"Observed that {' and '.join(parts)}; therefore the right action is {action}."


# --- agent clients -----------------------------------------------------------

PROMPT_TEMPLATE = (
    "You are an embodied agent.\n"
    "Context: {context}\n"
    "{extra}"
    "Choices:\n{choices}\n"
    "Answer with one choice label, a confidence in [0,1], and your reasoning."
)


def build_prompt(scenario: Scenario, mode: str) -> str:
    extra = ""
    if mode == "multimodal":
        extra = "You are given your egocentric view as six cube-face images.\n"
    elif mode == "imagination":
        extra = ("You are given your egocentric view as six cube-face images and "
                 "imagined views along an exploration path.\n")
    choices = "\n".join(f"  {c.label}) {c.text}" for c in scenario.choices)
    return PROMPT_TEMPLATE.format(context=scenario.context, extra=extra, choices=choices)


@dataclass
class AgentView:
    """Exactly what one agent sees for one scenario run."""

    scenario: Scenario
    mode: str
    prompt: str
    map_scene: Scene
    egocentric_faces: dict | None = None
    egocentric_pano: np.ndarray | None = None
    imagined: tuple = ()  # ((Pose, panorama), ...)
    true_scene: Scene | None = None  # only for privileged agents


class AgentClient:
    """Contract: decide(view) -> (choice distribution over labels, rationale)."""

    #: privileged agents are handed the ground-truth scene
    privileged = False

    def decide(self, view: AgentView):
        raise NotImplementedError


def _stable_seed(*parts) -> np.random.Generator:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


class RandomAgent(AgentClient):
    """Uniformly random choice (one-hot), deterministic per (seed, scenario)."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def decide(self, view):
        labels = view.scenario.labels
        rng = _stable_seed("random-agent", self.seed, view.scenario.id, view.mode)
        pick = labels[int(rng.integers(len(labels)))]
        dist = {l: (1.0 if l == pick else 0.0) for l in labels}
        return dist, f"Random guess: {pick}."


class OmniscientAgent(AgentClient):
    """Reads the true scene state directly; the upper-bound reference."""

    privileged = True

    def decide(self, view):
        scene = view.true_scene
        judgments = {sid: slot.actual for sid, slot in sorted(scene.slots.items())}
        action = rule_decision(judgments)
        label = view.scenario.choice_by_action(action)
        dist = {l: (1.0 if l == label else 0.0) for l in view.scenario.labels}
        return dist, explain(judgments, action)


class RuleAgent(AgentClient):
    """Scripted perceiving agent: reads whatever views its mode provides with
    pixel perception over its sanitized map, then applies the traffic rule.
    Defaults to proceeding when it cannot inspect the hidden slots."""

    def __init__(self, patch: int = 3):
        self.patch = patch

    def _judgments(self, view: AgentView) -> dict:
        perception = PixelPerception(view.map_scene, patch=self.patch)
        judgments: dict = {}
        readings = []
        if view.egocentric_pano is not None:
            readings.append((view.scenario.self_pose, view.egocentric_pano))
        readings.extend(view.imagined)
        for pose, pano in readings:
            obs = perception.observe(pose, pano)
            judgments.update(obs.as_dict)
        return judgments

    def decide(self, view):
        judgments = self._judgments(view)
        action = rule_decision(judgments)
        label = view.scenario.choice_by_action(action)
        dist = {l: (1.0 if l == label else 0.0) for l in view.scenario.labels}
        return dist, explain(judgments, action)


class BeliefAgent(AgentClient):
    """Imagination-enhanced POMDP agent: maintains a belief over the slot
    hypotheses, revises it imaginatively, infers other agents' beliefs at
    their poses, and decides through the yield policy."""

    def __init__(self, policy: YieldPolicy | None = None,
                 generator_factory=None, width: int = 256, height: int = 128):
        self.policy = policy or YieldPolicy()
        self.generator_factory = generator_factory
        self.width = width
        self.height = height

    def decide(self, view):
        scenario = view.scenario
        space = HypothesisSpace.from_scene(view.map_scene)
        belief = Belief.uniform(space)
        models = Models(PixelPerception(view.map_scene))
        beliefs = [belief]
        if view.mode == "imagination":
            scene = scenario.scene  # generator source; perception stays on the map
            generator = (self.generator_factory(scene) if self.generator_factory
                         else OracleGenerator(scene))
            session = ExplorationSession.from_scene(scene, scenario.self_pose,
                                                    generator, self.width, self.height)
            if scenario.category == "multi-agent" and len(scenario.agents) > 1:
                inferred = []
                for name, pose in scenario.agents[1:]:
                    other = infer_other_agent(belief, session, pose, models)
                    inferred.append(other.belief)
                beliefs = [belief] + inferred
            elif scenario.exploration_script:
                beliefs = [imaginative_update(belief, session, scenario.exploration_script, models)]
        elif view.mode == "multimodal" and view.egocentric_pano is not None:
            obs = models.observation.observe(scenario.self_pose, view.egocentric_pano)
            if obs.judgments:
                from .belief import physical_update

                beliefs = [physical_update(belief, None, obs, models)]
        action = multi_agent_decide(beliefs, scenario.context, self.policy)
        try:
            label = scenario.choice_by_action(action)
        except DomainError as exc:
            raise AgentProtocolError(str(exc), raw_response=action) from exc
        dist = {l: (1.0 if l == label else 0.0) for l in scenario.labels}
        judged = {sid: b.map_hypothesis().get(sid) for b in beliefs for sid in b.space.slot_ids
                  if max(b.prob(sid, v) for v in dict(b.space.slots)[sid]) > 0.99}
        return dist, explain(judged, action)


# --- running scenarios --------------------------------------------------------

@dataclass
class ScenarioRecord:
    scenario_id: str
    category: str
    mode: str
    valid: bool
    distribution: dict | None = None
    chosen: str | None = None
    correct: bool | None = None
    gold_choice: str | None = None
    gold_mass: float | None = None
    rationale: str | None = None
    gold_rationale: str | None = None
    error: str | None = None
    exchange: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in
                ("scenario_id", "category", "mode", "valid", "distribution", "chosen",
                 "correct", "gold_choice", "gold_mass", "rationale", "gold_rationale",
                 "error")}


def _validate_distribution(dist: dict, labels) -> dict:
    if not isinstance(dist, dict) or not dist:
        raise AgentProtocolError("agent must return a label->probability dict",
                                 raw_response=dist)
    unknown = set(dist) - set(labels)
    if unknown:
        raise AgentProtocolError(f"unknown labels {sorted(unknown)}", raw_response=dist)
    vals = np.array([float(dist.get(l, 0.0)) for l in labels])
    if np.any(vals < -1e-12):
        raise AgentProtocolError("negative probability", raw_response=dist)
    total = float(vals.sum())
    if not np.isclose(total, 1.0, atol=1e-6):
        raise AgentProtocolError(f"distribution sums to {total}", raw_response=dist)
    return {l: float(v) / total for l, v in zip(labels, vals)}


def run_scenario(scenario: Scenario, agent: AgentClient, mode: str = "unimodal",
                 generator=None, width: int = 256, height: int = 128) -> ScenarioRecord:
    """Run one scenario in one mode and record the full exchange.

    Protocol violations by the agent yield an invalid record (filtered out of
    the aggregates) rather than an exception.
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}")
    scene = scenario.scene
    prompt = build_prompt(scenario, mode)
    view = AgentView(scenario=scenario, mode=mode, prompt=prompt,
                     map_scene=sanitize_scene(scene))
    if mode in ("multimodal", "imagination"):
        pano = render_panorama(scene, scenario.self_pose, width, height)
        view.egocentric_pano = pano
        view.egocentric_faces = panorama_to_cubemap(pano, height // 2).faces
    if mode == "imagination":
        gen = generator if generator is not None else OracleGenerator(scene)
        session = ExplorationSession.from_scene(scene, scenario.self_pose, gen, width, height)
        imagined = []
        for config in scenario.exploration_script:
            frames = session.step(config)
            imagined.extend(zip(session.history[-1].poses, frames))
        view.imagined = tuple(imagined)
    if agent.privileged:
        view.true_scene = scene

    record = ScenarioRecord(scenario.id, scenario.category, mode, valid=False,
                            gold_choice=scenario.gold_choice,
                            gold_rationale=scenario.gold_rationale,
                            exchange={"prompt": prompt})
    try:
        dist, rationale = agent.decide(view)
        dist = _validate_distribution(dist, scenario.labels)
    except AgentProtocolError as exc:
        record.error = str(exc)
        record.exchange["response"] = repr(exc.raw_response)
        return record
    chosen = max(scenario.labels, key=lambda l: (dist[l], l))
    record.valid = True
    record.distribution = dist
    record.chosen = chosen
    record.correct = chosen == scenario.gold_choice
    record.gold_mass = dist[scenario.gold_choice]
    record.rationale = rationale
    record.exchange["response"] = {"distribution": dist, "rationale": rationale}
    return record


def run_suite(scenarios, agent: AgentClient, mode: str = "unimodal",
              generator=None, width: int = 256, height: int = 128,
              max_concurrency: int = 1) -> list:
    """Run every scenario; records sorted by scenario id (deterministic merge).

    Scenarios evaluate independently; ``max_concurrency`` > 1 runs them on a
    worker pool and doubles as the concurrent-request cap when the agent is an
    external endpoint.  Per-scenario randomness is keyed on the scenario id,
    so scheduling never changes the results.
    """
    if max_concurrency <= 1:
        records = [run_scenario(s, agent, mode, generator, width, height)
                   for s in scenarios]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
            records = list(pool.map(
                lambda s: run_scenario(s, agent, mode, generator, width, height),
                scenarios))
    return sorted(records, key=lambda r: r.scenario_id)


# --- metrics -------------------------------------------------------------------

def _valid(records):
    kept = [r for r in records if r.valid]
    if not kept:
        raise UndefinedReportError("no valid records after filtering")
    return kept


def decision_accuracy(records) -> float:
    """% of valid records whose argmax choice is the gold choice."""
    kept = _valid(records)
    return 100.0 * float(np.mean([1.0 if r.correct else 0.0 for r in kept]))


def gold_action_confidence(records) -> float:
    """% mean probability mass the agent put on the gold choice (valid records)."""
    kept = _valid(records)
    return 100.0 * float(np.mean([r.gold_mass for r in kept]))


class StubJudge:
    """Offline stand-in for the LMM judge: normalised containment match."""

    name = "stub-string-match"

    @staticmethod
    def _norm(text: str) -> str:
        return " ".join("".join(ch.lower() if ch.isalnum() else " " for ch in text).split())

    def judge(self, agent_rationale: str, gold_rationale: str, context: str = "") -> bool:
        a, g = self._norm(agent_rationale or ""), self._norm(gold_rationale or "")
        return bool(g) and g in a


def logic_accuracy(records, judge) -> float:
    """% of valid records whose reasoning the judge accepts."""
    kept = _valid(records)
    passes = [1.0 if judge.judge(r.rationale, r.gold_rationale) else 0.0 for r in kept]
    return 100.0 * float(np.mean(passes))


@dataclass
class EvalReport:
    """Aggregated evaluation over one suite run."""

    records: list
    mode: str
    agent: str
    decision_accuracy: float
    gold_action_confidence: float
    logic_accuracy: float | None = None
    logic_accuracy_error: str | None = None
    n_invalid: int = 0

    @classmethod
    def build(cls, records, mode: str, agent: str, judge=None) -> "EvalReport":
        rep = cls(records=records, mode=mode, agent=agent,
                  decision_accuracy=decision_accuracy(records),
                  gold_action_confidence=gold_action_confidence(records),
                  n_invalid=sum(1 for r in records if not r.valid))
        if judge is not None:
            try:
                rep.logic_accuracy = logic_accuracy(records, judge)
            except Exception as exc:  # transport/judge failure: metric absent
                rep.logic_accuracy_error = str(exc)
        else:
            rep.logic_accuracy_error = "no judge configured"
        return rep

    def to_json(self) -> dict:
        return {
            "schema": "eval-report/1",
            "mode": self.mode,
            "agent": self.agent,
            "decision_accuracy": self.decision_accuracy,
            "gold_action_confidence": self.gold_action_confidence,
            "logic_accuracy": self.logic_accuracy,
            "logic_accuracy_error": self.logic_accuracy_error,
            "n_records": len(self.records),
            "n_invalid": self.n_invalid,
            "records": [r.to_json() for r in self.records],
        }


def multi_agent_gold_check(scenario: Scenario, width: int = 256, height: int = 128) -> str:
    """The full multi-agent flow on one scenario: infer every other agent's
    belief by imagined traversal, then decide with the scripted yield policy
    over the aggregated belief vector.  Returns the chosen label."""
    scene = scenario.scene
    map_scene = sanitize_scene(scene)
    space = HypothesisSpace.from_scene(map_scene)
    belief = Belief.uniform(space)
    models = Models(PixelPerception(map_scene))
    session = ExplorationSession.from_scene(scene, scenario.self_pose,
                                            OracleGenerator(scene), width, height)
    beliefs = [belief]
    for name, pose in scenario.agents[1:]:
        beliefs.append(infer_other_agent(belief, session, pose, models).belief)
    action = multi_agent_decide(beliefs, scenario.context, YieldPolicy())
    return scenario.choice_by_action(action)
