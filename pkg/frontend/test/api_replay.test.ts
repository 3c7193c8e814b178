import { describe, expect, it } from "vitest";

import { ApiError, ExplorerApi, type StepConfig } from "../src/api.js";
import { beliefBars, beliefEquals } from "../src/belief.js";
import { bytesEqual, recordFromConfigs, replayRecording } from "../src/replay.js";

/**
 * Deterministic in-memory stand-in for the service: sessions advance a
 * counter per step and the "view" bytes encode (scene seed, step count), so
 * a faithful replay reproduces the final view bytes exactly.
 */
function fakeService() {
  const sessions = new Map<string, { seed: number; steps: StepConfig[] }>();
  let nextId = 0;
  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const body = init?.body ? JSON.parse(String(init.body)) : {};
    const json = (doc: unknown, status = 200) =>
      new Response(JSON.stringify(doc), { status, headers: { "Content-Type": "application/json" } });
    if (url.endsWith("/sessions") && init?.method === "POST") {
      const id = `fake-${nextId++}`;
      sessions.set(id, { seed: body.scene?.seed ?? 0, steps: [] });
      return json({ session_id: id, pose: { position: [0, 1.6, 0], yaw: 0 } });
    }
    const stepMatch = url.match(/\/sessions\/([^/]+)\/step$/);
    if (stepMatch) {
      const sess = sessions.get(stepMatch[1]);
      if (!sess) return json({ detail: "unknown session" }, 404);
      sess.steps.push(body);
      return json({
        session_id: stepMatch[1],
        step_index: sess.steps.length - 1,
        pose: { position: [0, 1.6, 0], yaw: 0 },
        version: sess.steps.length,
        view_url: `/sessions/${stepMatch[1]}/view?format=pano`,
      });
    }
    const viewMatch = url.match(/\/sessions\/([^/]+)\/view/);
    if (viewMatch) {
      const sess = sessions.get(viewMatch[1]);
      if (!sess) return json({ detail: "unknown session" }, 404);
      // deterministic bytes: seed, step count, and a digest of the configs
      const digest = sess.steps.reduce(
        (acc, c) => (acc * 31 + Math.round(c.heading_change * 1000) + c.distance) % 65521,
        7,
      );
      const bytes = new Uint8Array([sess.seed, sess.steps.length, digest & 0xff, digest >> 8]);
      return new Response(bytes, {
        status: 200,
        headers: { "X-Session-Version": String(sess.steps.length) },
      });
    }
    return json({ detail: `no route ${url}` }, 404);
  }) as typeof fetch;
  return { fetchFn, sessions };
}

describe("ExplorerApi against the fake service", () => {
  it("creates sessions and steps them", async () => {
    const { fetchFn } = fakeService();
    const api = new ExplorerApi("", fetchFn);
    const sess = await api.createSession({ scene: { seed: 3 } });
    const resp = await api.step(sess.session_id, { heading_change: 0.5, distance: 4 });
    expect(resp.step_index).toBe(0);
    expect(resp.version).toBe(1);
  });

  it("raises ApiError with the status code", async () => {
    const { fetchFn } = fakeService();
    const api = new ExplorerApi("", fetchFn);
    await expect(api.step("ghost", { heading_change: 0, distance: 0 }))
      .rejects.toThrowError(ApiError);
  });

  it("view bytes carry the session version tag", async () => {
    const { fetchFn } = fakeService();
    const api = new ExplorerApi("", fetchFn);
    const sess = await api.createSession({ scene: { seed: 3 } });
    await api.step(sess.session_id, { heading_change: 0, distance: 1 });
    const view = await api.viewBytes(sess.session_id);
    expect(view.version).toBe(1);
  });
});

describe("trajectory record/replay", () => {
  it("replaying a recording reproduces the final view bytes", async () => {
    const { fetchFn } = fakeService();
    const api = new ExplorerApi("", fetchFn);
    const sess = await api.createSession({ scene: { seed: 5 } });
    const configs: StepConfig[] = [
      { heading_change: 0.3, distance: 4, request_token: "a" },
      { heading_change: -1.0, distance: 2, request_token: "b" },
    ];
    for (const c of configs) await api.step(sess.session_id, c);
    const live = await api.viewBytes(sess.session_id);

    const recording = recordFromConfigs({ seed: 5 }, { kind: "oracle" }, 512, 256, configs);
    expect(recording.configs.every((c) => !("request_token" in c && c.request_token))).toBe(true);
    const replay = await replayRecording(api, recording);
    expect(replay.stepCount).toBe(2);
    expect(bytesEqual(replay.finalViewBytes, live.bytes)).toBe(true);
  });

  it("a diverging recording produces different bytes", async () => {
    const { fetchFn } = fakeService();
    const api = new ExplorerApi("", fetchFn);
    const sess = await api.createSession({ scene: { seed: 5 } });
    await api.step(sess.session_id, { heading_change: 0.3, distance: 4 });
    const live = await api.viewBytes(sess.session_id);
    const recording = recordFromConfigs({ seed: 5 }, { kind: "oracle" }, 512, 256,
      [{ heading_change: 0.9, distance: 4 }]);
    const replay = await replayRecording(api, recording);
    expect(bytesEqual(replay.finalViewBytes, live.bytes)).toBe(false);
  });
});

describe("belief helpers", () => {
  const dump = {
    schema: "belief/1",
    slots: { east: ["ambulance", "empty"] },
    weights: { "east=ambulance": 0.75, "east=empty": 0.25 },
  };

  it("bars are sorted and carry exact weights", () => {
    const bars = beliefBars(dump);
    expect(bars.map((b) => b.hypothesis)).toEqual(["east=ambulance", "east=empty"]);
    expect(bars[0].weight).toBe(0.75);
  });

  it("equality is exact, not approximate", () => {
    expect(beliefEquals(dump, { ...dump })).toBe(true);
    const other = { ...dump, weights: { "east=ambulance": 0.7500000001, "east=empty": 0.25 } };
    expect(beliefEquals(dump, other)).toBe(false);
  });
});
