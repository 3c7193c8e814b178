/**
 * Interactive explorer: steer imaginative exploration step by step, branch
 * what-ifs, and watch belief updates in EQA scenarios.
 *
 * The page is a pure client of the HTTP service. Viewport drags reproject
 * the already-fetched equirect image on the client; only Step/Fork/Goal
 * mutate the server session, and the version tag guards against stale views.
 */

import { ApiError, ExplorerApi, type BeliefDump, type StepConfig } from "./api.js";
import { beliefBars, formatWeight } from "./belief.js";
import { BranchTree } from "./branches.js";
import {
  FACE_HEADINGS,
  renderPerspective,
  dragHeading,
  type Heading,
  type RgbaImage,
} from "./projection.js";
import { recordFromConfigs, type TrajectoryRecording } from "./replay.js";

type RenderMode = "perspective" | "equirect" | "cubenet";

interface ViewState {
  heading: Heading;
  mode: RenderMode;
  pano: RgbaImage | null;
  version: number;
}

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

async function decodePng(bytes: ArrayBuffer): Promise<RgbaImage> {
  const blob = new Blob([bytes], { type: "image/png" });
  const bitmap = await createImageBitmap(blob);
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  return { width: data.width, height: data.height, data: data.data };
}

class ExplorerApp {
  api: ExplorerApi;
  tree: BranchTree | null = null;
  state: ViewState = { heading: { phi: 0, theta: 0 }, mode: "perspective", pano: null, version: -1 };
  sceneSeed = 7;
  generator = { kind: "oracle" };
  width = 512;
  height = 256;
  scenarioId: string | null = null;
  stepping = false;

  constructor(baseUrl: string) {
    this.api = new ExplorerApi(baseUrl);
  }

  get sessionId(): string {
    if (!this.tree) throw new Error("no session yet");
    return this.tree.active.sessionId;
  }

  async start(scenarioId?: string): Promise<void> {
    const body = scenarioId
      ? { scenario_id: scenarioId, width: this.width, height: this.height }
      : { scene: { seed: this.sceneSeed }, width: this.width, height: this.height };
    const session = await this.api.createSession(body);
    this.tree = new BranchTree(session.session_id);
    this.scenarioId = scenarioId ?? null;
    await this.refreshView();
    await this.refreshBelief();
    this.renderTree();
    this.setStatus(`session ${session.session_id}`);
  }

  async refreshView(): Promise<void> {
    const view = await this.api.viewBytes(this.sessionId);
    // never show a stale view: the server's version tag must be at least the
    // version recorded for the active branch's last step
    const expected = this.tree?.active.version ?? 0;
    if (view.version < expected) {
      this.showError(`stale view: server version ${view.version} < ${expected}`);
      return;
    }
    this.state.pano = await decodePng(view.bytes);
    this.state.version = view.version;
    this.draw();
  }

  draw(): void {
    const canvas = $("viewport") as HTMLCanvasElement;
    const ctx = canvas.getContext("2d")!;
    if (!this.state.pano) return;
    if (this.state.mode === "equirect") {
      this.blit(ctx, this.state.pano, canvas.width, canvas.height);
    } else if (this.state.mode === "perspective") {
      const out = renderPerspective(this.state.pano, this.state.heading, Math.PI / 2, canvas.width, canvas.height);
      ctx.putImageData(new ImageData(new Uint8ClampedArray(out.data), out.width, out.height), 0, 0);
    } else {
      this.drawCubeNet(ctx, canvas);
    }
    $("heading-readout").textContent =
      `${((this.state.heading.phi * 180) / Math.PI).toFixed(1)} deg / ` +
      `${((this.state.heading.theta * 180) / Math.PI).toFixed(1)} deg`;
  }

  private blit(ctx: CanvasRenderingContext2D, img: RgbaImage, w: number, h: number): void {
    const tmp = document.createElement("canvas");
    tmp.width = img.width;
    tmp.height = img.height;
    tmp.getContext("2d")!.putImageData(new ImageData(new Uint8ClampedArray(img.data), img.width, img.height), 0, 0);
    ctx.clearRect(0, 0, w, h);
    ctx.drawImage(tmp, 0, 0, w, h);
  }

  private drawCubeNet(ctx: CanvasRenderingContext2D, canvas: HTMLCanvasElement): void {
    // classic horizontal cross: top over front, bottom under front
    const cell = Math.floor(canvas.width / 4);
    const layout: Record<string, [number, number]> = {
      left: [0, 1], front: [1, 1], right: [2, 1], back: [3, 1], top: [1, 0], bottom: [1, 2],
    };
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    for (const [face, [cx, cy]] of Object.entries(layout)) {
      const img = renderPerspective(this.state.pano!, FACE_HEADINGS[face], Math.PI / 2, cell, cell);
      ctx.putImageData(new ImageData(new Uint8ClampedArray(img.data), cell, cell), cx * cell, cy * cell);
    }
  }

  async step(headingDeg: number, distance: number): Promise<void> {
    if (this.stepping || !this.tree) return;
    this.stepping = true;
    try {
      const config: StepConfig = {
        heading_change: (headingDeg * Math.PI) / 180,
        distance,
        request_token: crypto.randomUUID(),
      };
      const resp = await this.api.step(this.sessionId, config);
      this.tree.recordStep(config, resp.version);
      await this.refreshView();
      if (resp.belief) this.renderBelief(resp.belief);
      this.renderTree();
      this.setStatus(`step ${resp.step_index}: pose ${JSON.stringify(resp.pose)}`);
    } catch (err) {
      this.showError(err);
    } finally {
      this.stepping = false;
    }
  }

  async fork(): Promise<void> {
    if (!this.tree) return;
    try {
      const child = await this.api.fork(this.sessionId);
      this.tree.addFork(child.session_id);
      await this.refreshView();
      this.renderTree();
      this.setStatus(`forked ${child.session_id}`);
    } catch (err) {
      this.showError(err);
    }
  }

  async undoToBranch(): Promise<void> {
    if (!this.tree) return;
    this.tree.undoToBranch();
    await this.refreshView();
    await this.refreshBelief();
    this.renderTree();
  }

  async switchBranch(sessionId: string): Promise<void> {
    if (!this.tree) return;
    this.tree.switchTo(sessionId);
    await this.refreshView();
    await this.refreshBelief();
    this.renderTree();
  }

  async refreshBelief(): Promise<void> {
    if (!this.scenarioId) return;
    try {
      this.renderBelief(await this.api.belief(this.sessionId));
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 404)) this.showError(err);
    }
  }

  renderBelief(dump: BeliefDump): void {
    const host = $("belief-bars");
    host.innerHTML = "";
    for (const bar of beliefBars(dump)) {
      const row = document.createElement("div");
      row.className = "belief-row";
      const label = document.createElement("span");
      label.textContent = `${bar.hypothesis} ${formatWeight(bar.weight)}`;
      const fill = document.createElement("div");
      fill.className = "belief-fill";
      fill.style.width = `${Math.round(bar.weight * 100)}%`;
      row.append(label, fill);
      host.appendChild(row);
    }
  }

  renderTree(): void {
    if (!this.tree) return;
    const host = $("branch-tree");
    host.innerHTML = "";
    for (const { node, depth, active } of this.tree.rows()) {
      const row = document.createElement("div");
      row.textContent = `${"  ".repeat(depth)}${active ? ">" : " "} ${node.label} ` +
        `(${node.steps.length} steps)`;
      row.className = active ? "branch active" : "branch";
      row.onclick = () => void this.switchBranch(node.sessionId);
      host.appendChild(row);
    }
  }

  exportRecording(): TrajectoryRecording {
    if (!this.tree) throw new Error("no session");
    return recordFromConfigs({ seed: this.sceneSeed }, this.generator,
      this.width, this.height, this.tree.pathConfigs());
  }

  async submitChoice(label: string): Promise<void> {
    if (!this.scenarioId) return;
    try {
      const out = await this.api.submitHumanChoice(this.scenarioId, label);
      this.setStatus(out.correct ? "recorded: correct" : "recorded");
    } catch (err) {
      this.showError(err);
    }
  }

  setStatus(text: string): void {
    $("status").textContent = text;
    $("status").classList.remove("error");
  }

  showError(err: unknown): void {
    const el = $("status");
    el.textContent = err instanceof Error ? err.message : String(err);
    el.classList.add("error");
  }
}

export function boot(): void {
  const app = new ExplorerApp(
    (window as unknown as { PANOEXPLORE_URL?: string }).PANOEXPLORE_URL ?? "",
  );

  $("start").onclick = () => void app.start();
  $("step").onclick = () => {
    const deg = Number(($("heading-dial") as HTMLInputElement).value);
    const dist = Number(($("distance") as HTMLInputElement).value);
    void app.step(deg, dist);
  };
  $("fork").onclick = () => void app.fork();
  $("undo").onclick = () => void app.undoToBranch();
  for (const mode of ["perspective", "equirect", "cubenet"] as const) {
    $(`mode-${mode}`).onclick = () => {
      app.state.mode = mode;
      app.draw();
    };
  }
  $("export").onclick = () => {
    const rec = app.exportRecording();
    const blob = new Blob([JSON.stringify(rec, null, 2)], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "trajectory.json";
    a.click();
  };

  const canvas = $("viewport") as HTMLCanvasElement;
  let dragging: { x: number; y: number } | null = null;
  canvas.onmousedown = (ev) => (dragging = { x: ev.clientX, y: ev.clientY });
  window.onmouseup = () => (dragging = null);
  window.onmousemove = (ev) => {
    if (!dragging || app.state.mode !== "perspective") return;
    app.state.heading = dragHeading(app.state.heading, ev.clientX - dragging.x,
      ev.clientY - dragging.y, Math.PI / 2, canvas.width);
    dragging = { x: ev.clientX, y: ev.clientY };
    app.draw(); // pure client-side reprojection: the session is untouched
  };

  void app.api.scenarios().then((list) => {
    const select = $("scenario") as HTMLSelectElement;
    for (const s of list) {
      const opt = document.createElement("option");
      opt.value = s.id;
      opt.textContent = `${s.id} (${s.category})`;
      select.appendChild(opt);
    }
    $("start-scenario").onclick = () => {
      if (select.value) {
        void app.start(select.value).then(() => {
          const host = $("choices");
          host.innerHTML = "";
          const scenario = list.find((s) => s.id === select.value);
          for (const c of scenario?.choices ?? []) {
            const btn = document.createElement("button");
            btn.textContent = `${c.label}: ${c.text}`;
            btn.onclick = () => void app.submitChoice(c.label);
            host.appendChild(btn);
          }
        });
      }
    };
  }).catch(() => { /* service without scenarios is fine */ });
}

if (typeof document !== "undefined" && document.getElementById("viewport")) {
  boot();
}
