/**
 * Record/replay of human exploration trajectories.
 *
 * A recording is the ordered config list of the active branch plus the
 * session's creation parameters; replaying re-executes the configs on a
 * fresh session and compares the final view bytes, which must be identical
 * (the server is deterministic for a given scene/generator/seed).
 */

import type { ExplorerApi, StepConfig } from "./api.js";

export interface TrajectoryRecording {
  scene: { seed?: number; density?: number };
  generator: { kind: string; sigma?: number; seed?: number };
  width: number;
  height: number;
  configs: StepConfig[];
}

export function recordFromConfigs(
  scene: { seed?: number; density?: number },
  generator: { kind: string; sigma?: number; seed?: number },
  width: number,
  height: number,
  configs: StepConfig[],
): TrajectoryRecording {
  // strip client-side request tokens: they are idempotency keys, not actions
  const cleaned = configs.map(({ heading_change, distance, frame_count, vertical }) => ({
    heading_change,
    distance,
    frame_count,
    vertical,
  }));
  return { scene, generator, width, height, configs: cleaned };
}

export interface ReplayResult {
  sessionId: string;
  finalViewBytes: ArrayBuffer;
  stepCount: number;
}

/** Headless replay: run the recording on a brand-new session. */
export async function replayRecording(
  api: ExplorerApi,
  recording: TrajectoryRecording,
): Promise<ReplayResult> {
  const session = await api.createSession({
    scene: recording.scene,
    generator: recording.generator,
    width: recording.width,
    height: recording.height,
  });
  for (const config of recording.configs) {
    await api.step(session.session_id, config);
  }
  const view = await api.viewBytes(session.session_id);
  return {
    sessionId: session.session_id,
    finalViewBytes: view.bytes,
    stepCount: recording.configs.length,
  };
}

export function bytesEqual(a: ArrayBuffer, b: ArrayBuffer): boolean {
  if (a.byteLength !== b.byteLength) return false;
  const va = new Uint8Array(a);
  const vb = new Uint8Array(b);
  for (let i = 0; i < va.length; i++) if (va[i] !== vb[i]) return false;
  return true;
}
