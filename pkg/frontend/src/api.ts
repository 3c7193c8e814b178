/** Typed client for the exploration service; the UI talks to nothing else. */

export interface PoseJson {
  position: [number, number, number];
  yaw: number;
}

export interface StepConfig {
  heading_change: number;
  distance: number;
  frame_count?: number | null;
  vertical?: number;
  request_token?: string;
}

export interface StepResponse {
  session_id: string;
  step_index: number;
  pose: PoseJson;
  version: number;
  view_url: string;
  belief?: BeliefDump;
}

export interface BeliefDump {
  schema: string;
  slots: Record<string, string[]>;
  weights: Record<string, number>;
}

export interface SessionInfo {
  session_id: string;
  pose: PoseJson;
  width?: number;
  height?: number;
  parent?: string;
}

export interface ScenarioSummary {
  id: string;
  category: string;
  context: string;
  choices: { label: string; text: string; action: string }[];
  control_pair: string | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    const body = await resp.text();
    throw new ApiError(resp.status, `${resp.status}: ${body}`);
  }
  return (await resp.json()) as T;
}

export class ExplorerApi {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => asJson<T>(r));
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchFn(`${this.baseUrl}${path}`).then((r) => asJson<T>(r));
  }

  createSession(body: {
    scene?: { seed?: number; density?: number };
    scenario_id?: string;
    width?: number;
    height?: number;
    generator?: { kind: string; sigma?: number; seed?: number };
    request_token?: string;
  }): Promise<SessionInfo> {
    return this.post("/sessions", body);
  }

  step(sessionId: string, config: StepConfig): Promise<StepResponse> {
    return this.post(`/sessions/${sessionId}/step`, config);
  }

  fork(sessionId: string): Promise<SessionInfo> {
    return this.post(`/sessions/${sessionId}/fork`, {});
  }

  belief(sessionId: string): Promise<BeliefDump> {
    return this.get(`/sessions/${sessionId}/belief`);
  }

  scenarios(category?: string): Promise<ScenarioSummary[]> {
    const q = category ? `?category=${encodeURIComponent(category)}` : "";
    return this.get(`/eqa/scenarios${q}`);
  }

  submitHumanChoice(scenarioId: string, choice: string, rationale = ""): Promise<{ recorded: boolean; correct: boolean }> {
    return this.post("/eqa/human", { scenario_id: scenarioId, choice, rationale });
  }

  /** Panorama PNG for the session's current view, as raw bytes + version tag. */
  async viewBytes(sessionId: string, format = "pano"): Promise<{ bytes: ArrayBuffer; version: number }> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/view?format=${format}`);
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    const version = Number(resp.headers.get("X-Session-Version") ?? "-1");
    return { bytes: await resp.arrayBuffer(), version };
  }

  viewUrl(sessionId: string, format = "pano"): string {
    return `${this.baseUrl}/sessions/${sessionId}/view?format=${format}`;
  }

  trajectory(sessionId: string): Promise<{
    origin_pose: PoseJson;
    steps: { step: number; config: StepConfig; pose: PoseJson }[];
  }> {
    return this.get(`/sessions/${sessionId}/trajectory`);
  }
}
