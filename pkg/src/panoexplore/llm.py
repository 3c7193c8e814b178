"""External LMM clients: agent, judge, pilot and perception over HTTP JSON.

Each client POSTs a JSON document with the prompt and base64 PNG image
attachments and expects a JSON reply; endpoints come from constructor args or
the PANOEXPLORE_AGENT_URL / PANOEXPLORE_JUDGE_URL / PANOEXPLORE_PILOT_URL /
PANOEXPLORE_PERCEPTION_URL environment variables.  Exact prompt wording is
configuration: pass custom templates with the documented placeholders.
Transcripts are persisted per run when a transcript path is configured.
"""

from __future__ import annotations

import base64
import json
import os
import time
from pathlib import Path

import httpx
import numpy as np

from .belief import Observation, ObservationModel, slot_visible
from .eqa import AgentClient, AgentProtocolError, AgentView
from .errors import PilotError
from .explore import STOP, ExplorationConfig, Pilot
from .imageio import encode_png

AGENT_PROMPT_TEMPLATE = (
    "{context}\n\nChoices:\n{choices}\n\n"
    "Reply as JSON: {{\"choice\": <label>, \"confidence\": <0..1>, "
    "\"rationale\": <text>}}."
)

JUDGE_PROMPT_TEMPLATE = (
    "You are grading an agent's reasoning.\n"
    "Reference reasoning: {gold_rationale}\n"
    "Agent reasoning: {agent_rationale}\n"
    "Does the agent's reasoning follow the same logical steps and reach the "
    "same conclusion? Reply as JSON: {{\"pass\": true|false}}."
)

PILOT_PROMPT_TEMPLATE = (
    "Goal: {goal}\n"
    "You see six cube faces of your current panorama (attached).\n"
    "Steps taken: {step_index}; budget left: {budget_left}.\n"
    "Reply as JSON: {{\"heading_degrees\": <float>, \"distance\": <meters>}} "
    "or {{\"stop\": true}}."
)

PERCEPTION_PROMPT_TEMPLATE = (
    "Inspect the attached view. For each slot, judge which candidate occupies "
    "it.\nSlots: {slots}\n"
    "Reply as JSON: {{\"judgments\": {{<slot>: {{\"value\": <candidate>, "
    "\"confidence\": <0..1>}}}}}}."
)


def _b64_png(img: np.ndarray) -> str:
    return base64.b64encode(encode_png(img)).decode("ascii")


class Transcript:
    """Append-only JSONL log of request/response exchanges."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None

    def log(self, kind: str, request: dict, response) -> None:
        if self.path is None:
            return
        entry = {"time": time.time(), "kind": kind,
                 "request": {k: v for k, v in request.items() if k != "images"},
                 "n_images": len(request.get("images", [])),
                 "response": response}
        with open(self.path, "a") as fh:
            fh.write(json.dumps(entry) + "\n")


class _HttpJsonClient:
    def __init__(self, url: str | None, env_var: str, timeout: float = 60.0,
                 transcript: Transcript | None = None):
        self.url = url or os.environ.get(env_var)
        if not self.url:
            raise ValueError(f"no endpoint: pass url= or set {env_var}")
        self.timeout = timeout
        self.transcript = transcript or Transcript()

    def call(self, kind: str, payload: dict) -> dict:
        resp = httpx.post(self.url, json=payload, timeout=self.timeout)
        resp.raise_for_status()
        doc = resp.json()
        self.transcript.log(kind, payload, doc)
        return doc


class ExternalAgentClient(AgentClient, _HttpJsonClient):
    """EQA agent backed by an external LMM endpoint.

    The endpoint receives the prompt plus cube-face and imagined-frame
    attachments and must reply with a choice, a confidence and a rationale; a
    full distribution may be supplied instead of the confidence.
    """

    def __init__(self, url: str | None = None, template: str = AGENT_PROMPT_TEMPLATE,
                 timeout: float = 60.0, transcript: Transcript | None = None):
        _HttpJsonClient.__init__(self, url, "PANOEXPLORE_AGENT_URL", timeout, transcript)
        self.template = template

    def decide(self, view: AgentView):
        choices = "\n".join(f"  {c.label}) {c.text}" for c in view.scenario.choices)
        prompt = self.template.format(context=view.scenario.context, choices=choices)
        images = []
        if view.egocentric_faces:
            images += [_b64_png(face) for face in view.egocentric_faces.values()]
        images += [_b64_png(frame) for _, frame in view.imagined]
        payload = {"prompt": prompt, "images": images,
                   "labels": list(view.scenario.labels), "mode": view.mode}
        try:
            doc = self.call("agent", payload)
        except httpx.HTTPError as exc:
            raise AgentProtocolError(f"agent endpoint failure: {exc}") from exc
        labels = view.scenario.labels
        if "distribution" in doc:
            dist = {l: float(doc["distribution"].get(l, 0.0)) for l in labels}
        else:
            try:
                choice = doc["choice"]
                confidence = float(doc.get("confidence", 1.0))
            except (KeyError, TypeError, ValueError) as exc:
                raise AgentProtocolError("agent reply missing choice/confidence",
                                         raw_response=doc) from exc
            if choice not in labels:
                raise AgentProtocolError(f"agent chose unknown label {choice!r}",
                                         raw_response=doc)
            confidence = min(max(confidence, 0.0), 1.0)
            rest = (1.0 - confidence) / max(len(labels) - 1, 1)
            dist = {l: (confidence if l == choice else rest) for l in labels}
        return dist, str(doc.get("rationale", ""))


class ExternalJudge(_HttpJsonClient):
    """LMM-as-a-judge for logic accuracy; failures mark the metric absent."""

    def __init__(self, url: str | None = None, template: str = JUDGE_PROMPT_TEMPLATE,
                 timeout: float = 60.0, transcript: Transcript | None = None):
        super().__init__(url, "PANOEXPLORE_JUDGE_URL", timeout, transcript)
        self.template = template
        self.name = "external-judge"

    def judge(self, agent_rationale: str, gold_rationale: str, context: str = "") -> bool:
        prompt = self.template.format(agent_rationale=agent_rationale or "",
                                      gold_rationale=gold_rationale or "")
        doc = self.call("judge", {"prompt": prompt, "context": context, "images": []})
        return bool(doc.get("pass"))


class ExternalPilot(Pilot, _HttpJsonClient):
    """High-level planner backed by an external LMM endpoint."""

    def __init__(self, url: str | None = None, template: str = PILOT_PROMPT_TEMPLATE,
                 timeout: float = 60.0, transcript: Transcript | None = None):
        _HttpJsonClient.__init__(self, url, "PANOEXPLORE_PILOT_URL", timeout, transcript)
        self.template = template

    def plan(self, goal, views, step_index, budget_left):
        prompt = self.template.format(goal=goal, step_index=step_index,
                                      budget_left=budget_left)
        payload = {"prompt": prompt,
                   "images": [_b64_png(face) for face in views.values()]}
        try:
            doc = self.call("pilot", payload)
        except httpx.HTTPError as exc:
            raise PilotError(f"pilot endpoint failure: {exc}") from exc
        if doc.get("stop"):
            return STOP
        try:
            heading = float(doc["heading_degrees"]) * np.pi / 180.0
            distance = float(doc["distance"])
            return ExplorationConfig(heading, distance)
        except (KeyError, TypeError, ValueError) as exc:
            raise PilotError("pilot reply is not a config or a stop",
                             raw_response=doc) from exc


class ExternalPerception(ObservationModel, _HttpJsonClient):
    """Perception client: images + slot list in, per-slot judgment with
    confidence out.  Judgment confidences become soft likelihoods."""

    def __init__(self, scene, url: str | None = None,
                 template: str = PERCEPTION_PROMPT_TEMPLATE, timeout: float = 60.0,
                 transcript: Transcript | None = None):
        _HttpJsonClient.__init__(self, url, "PANOEXPLORE_PERCEPTION_URL",
                                 timeout, transcript)
        self.scene = scene
        self.template = template
        self._confidences: dict = {}

    def observe(self, pose, view=None) -> Observation:
        visible = [sid for sid in sorted(self.scene.slots)
                   if slot_visible(self.scene, pose, sid)]
        if not visible or view is None:
            return Observation((), pose)
        slots_doc = {sid: list(self.scene.slots[sid].candidates) for sid in visible}
        prompt = self.template.format(slots=json.dumps(slots_doc))
        doc = self.call("perception", {"prompt": prompt, "slots": slots_doc,
                                       "images": [_b64_png(view)]})
        judgments = []
        for sid in visible:
            j = doc.get("judgments", {}).get(sid)
            if not j or j.get("value") not in self.scene.slots[sid].candidates:
                continue
            judgments.append((sid, j["value"]))
            self._confidences[(sid, j["value"])] = float(j.get("confidence", 1.0))
        return Observation(tuple(judgments), pose)

    def likelihood(self, obs: Observation, hypothesis: dict, pose) -> float:
        like = 1.0
        for sid, value in obs.judgments:
            conf = min(max(self._confidences.get((sid, value), 1.0), 0.0), 1.0)
            k = len(self.scene.slots[sid].candidates)
            if hypothesis.get(sid) == value:
                like *= conf
            else:
                like *= (1.0 - conf) / max(k - 1, 1)
        return like
