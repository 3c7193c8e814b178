"""Procedurally generated built-in EQA suite with control pairs.

Two single-agent families (an occluder hides the east slot; a corner variant
where removing the occluder makes the slot directly visible) plus a
multi-agent family where only the other agent's position has line of sight.
Every scenario has a control partner differing in exactly one variable.
"""

from __future__ import annotations

import numpy as np

from .belief import slot_visible
from .eqa import Choice, Scenario, _stable_seed, check_control_pairs, explain, rule_decision
from .errors import DomainError
from .world import (CAMERA_HEIGHT, ENTITY_COLORS, Pose, Primitive, Scene, Slot,
                    build_scene, check_collision)

CHOICES = (
    Choice("A", "Proceed through the intersection at normal speed.", "proceed"),
    Choice("B", "Yield and clear a path before continuing.", "yield"),
    Choice("C", "Turn around and find another route.", "turn_around"),
    Choice("D", "Sound the horn and wait where you are.", "honk"),
)

SINGLE_CONTEXT = (
    "You are driving toward an intersection. A tall structure stands between "
    "you and the east approach, and emergency vehicles sometimes come from "
    "there. Decide how to continue."
)

MULTI_CONTEXT = (
    "You are driving behind another vehicle that has stopped unexpectedly "
    "before the intersection, even though its light is green. From where it "
    "stands it can see the east approach; you cannot. Decide how to continue."
)


def _entity_primitive(anchor, tag: str) -> Primitive:
    return Primitive("box", tuple(anchor), (2.4, 2.0, 2.0), ENTITY_COLORS[tag], entity_tag=tag)


def _vantage_script(scene: Scene, start: Pose, slot_id: str):
    """Route to a pose that can see the slot; deterministic candidate sweep."""
    from panoexplore.explore import plan_route_around

    anchor = np.array(scene.slots[slot_id].anchor)
    for radius in (8.0, 10.0, 6.0):
        for k in range(16):
            ang = 2.0 * np.pi * k / 16
            pos = anchor + radius * np.array([np.cos(ang), 0.0, np.sin(ang)])
            pos[1] = scene.ground_height + CAMERA_HEIGHT
            look = np.arctan2(anchor[2] - pos[2], anchor[0] - pos[0])
            pose = Pose(tuple(pos), float(look))
            if not slot_visible(scene, pose, slot_id):
                continue
            if check_collision(scene, pose, pose):
                continue
            try:
                return tuple(plan_route_around(scene, start, pose, frame_count=2))
            except Exception:
                continue
    raise DomainError("no vantage point with line of sight found")


def _single_agent_pair(index: int, with_corner_control: bool) -> list:
    rng = _stable_seed("eqa-suite-single", index)
    bearing = float(rng.uniform(-0.5, 0.5))
    dist = float(rng.uniform(14.0, 18.0))
    anchor = np.array([dist * np.cos(bearing), 1.0, dist * np.sin(bearing)])
    frac = float(rng.uniform(0.45, 0.6))
    occ_center = anchor * frac
    occ = Primitive("box", (occ_center[0], 2.6, occ_center[2]),
                    (float(rng.uniform(2.0, 3.0)), 5.2, float(rng.uniform(7.0, 10.0))),
                    (0.52, 0.52, 0.56))
    self_pose = Pose((0.0, CAMERA_HEIGHT, 0.0), 0.0)
    slot = Slot(anchor=tuple(anchor), candidates=("ambulance", "empty"), actual="ambulance")

    def make(actual: str, occluded: bool, suffix: str, control: str,
             variable: str) -> Scenario:
        prims = [occ] if occluded else []
        if actual != "empty":
            prims.append(_entity_primitive(anchor, actual))
        scene = build_scene(seed=9000 + index, primitives=prims,
                            slots={"east": Slot(tuple(anchor), ("ambulance", "empty"), actual)})
        if occluded and slot_visible(scene, self_pose, "east"):
            raise DomainError(f"pair {index}: occluder fails to hide the slot")
        if not occluded and not slot_visible(scene, self_pose, "east"):
            raise DomainError(f"pair {index}: slot unexpectedly hidden")
        action = rule_decision({"east": actual})
        kind = "blocked" if variable == "slot:east" else "corner"
        sid = f"sa-{kind}-{index:02d}{suffix}"
        script_scene = build_scene(seed=9000 + index, primitives=[occ],
                                   slots={"east": slot})
        return Scenario(
            id=sid,
            category="single-agent",
            scene=scene,
            agents=(("self", self_pose),),
            context=SINGLE_CONTEXT,
            choices=CHOICES,
            gold_choice=CHOICES[0].label if action == "proceed" else CHOICES[1].label,
            gold_rationale=explain({"east": actual}, action),
            control_pair=control,
            controlled_variable=variable,
            exploration_script=_vantage_script(script_scene, self_pose, "east"),
        )

    if not with_corner_control:
        kind = "blocked"
        a_id = f"sa-{kind}-{index:02d}a"
        b_id = f"sa-{kind}-{index:02d}b"
        return [make("ambulance", True, "a", b_id, "slot:east"),
                make("empty", True, "b", a_id, "slot:east")]
    kind = "corner"
    a_id = f"sa-{kind}-{index:02d}a"
    b_id = f"sa-{kind}-{index:02d}b"
    return [make("ambulance", True, "a", b_id, "statics"),
            make("ambulance", False, "b", a_id, "statics")]


def _multi_agent_pair(index: int) -> list:
    rng = _stable_seed("eqa-suite-multi", index)
    self_pose = Pose((0.0, CAMERA_HEIGHT, 0.0), 0.0)
    lateral = float(rng.uniform(2.0, 4.0))
    taxi_pose = Pose((float(rng.uniform(10.0, 13.0)), CAMERA_HEIGHT, lateral), 0.0)
    anchor = np.array([float(rng.uniform(17.0, 20.0)), 1.0, float(rng.uniform(-7.0, -5.0))])
    occ = Primitive("box", (float(rng.uniform(8.0, 10.0)), 2.6, float(rng.uniform(-3.5, -2.5))),
                    (2.4, 5.2, float(rng.uniform(6.0, 9.0))), (0.5, 0.5, 0.55))

    def make(actual: str, suffix: str, control: str) -> Scenario:
        from panoexplore.explore import plan_route_around

        prims = [occ]
        if actual != "empty":
            prims.append(_entity_primitive(anchor, actual))
        scene = build_scene(seed=9500 + index, primitives=prims,
                            slots={"east": Slot(tuple(anchor), ("ambulance", "empty"), actual)})
        if slot_visible(scene, self_pose, "east"):
            raise DomainError(f"multi pair {index}: slot visible from self")
        if not slot_visible(scene, taxi_pose, "east"):
            raise DomainError(f"multi pair {index}: slot hidden from the other agent")
        action = rule_decision({"east": actual})
        # route over the static geometry only, so both variants share a script
        route_scene = build_scene(seed=9500 + index, primitives=[occ])
        return Scenario(
            id=f"ma-intersection-{index:02d}{suffix}",
            category="multi-agent",
            scene=scene,
            agents=(("self", self_pose), ("taxi", taxi_pose)),
            context=MULTI_CONTEXT,
            choices=CHOICES,
            gold_choice=CHOICES[0].label if action == "proceed" else CHOICES[1].label,
            gold_rationale=explain({"east": actual}, action),
            control_pair=control,
            controlled_variable="slot:east",
            exploration_script=tuple(plan_route_around(route_scene, self_pose, taxi_pose,
                                                       frame_count=2)),
        )

    a_id = f"ma-intersection-{index:02d}a"
    b_id = f"ma-intersection-{index:02d}b"
    return [make("ambulance", "a", b_id), make("empty", "b", a_id)]


def builtin_suite() -> list:
    """The shipped suite: 24 single-agent + 10 multi-agent scenarios."""
    scenarios = []
    for k in range(8):
        scenarios.extend(_single_agent_pair(k, with_corner_control=False))
    for k in range(8, 12):
        scenarios.extend(_single_agent_pair(k, with_corner_control=True))
    for k in range(5):
        scenarios.extend(_multi_agent_pair(k))
    check_control_pairs(scenarios)
    return scenarios


def builtin_single_agent() -> list:
    return [s for s in builtin_suite() if s.category == "single-agent"]


def builtin_multi_agent() -> list:
    return [s for s in builtin_suite() if s.category == "multi-agent"]
