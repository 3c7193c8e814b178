/**
 * Branch tree for what-if exploration.
 *
 * Every Fork snapshots the current session into a child; Step extends the
 * active node's history. "Undo to branch" walks back to the parent node,
 * whose server session still holds the pre-fork state (sessions are never
 * mutated by viewport changes, so returning to a node is always safe).
 */

import type { StepConfig } from "./api.js";

export interface BranchNode {
  sessionId: string;
  parentId: string | null;
  label: string;
  steps: StepConfig[];
  children: string[];
  version: number;
}

export class BranchTree {
  nodes = new Map<string, BranchNode>();
  activeId: string;

  constructor(rootSessionId: string) {
    this.nodes.set(rootSessionId, {
      sessionId: rootSessionId,
      parentId: null,
      label: "origin",
      steps: [],
      children: [],
      version: 0,
    });
    this.activeId = rootSessionId;
  }

  get active(): BranchNode {
    const node = this.nodes.get(this.activeId);
    if (!node) throw new Error(`active branch ${this.activeId} missing`);
    return node;
  }

  recordStep(config: StepConfig, version: number): void {
    this.active.steps.push(config);
    this.active.version = version;
  }

  addFork(childSessionId: string, label?: string): BranchNode {
    const parent = this.active;
    const node: BranchNode = {
      sessionId: childSessionId,
      parentId: parent.sessionId,
      label: label ?? `branch ${parent.children.length + 1}`,
      steps: [],
      children: [],
      version: 0,
    };
    this.nodes.set(childSessionId, node);
    parent.children.push(childSessionId);
    this.activeId = childSessionId;
    return node;
  }

  /** Back to the branching point; returns the node now active. */
  undoToBranch(): BranchNode {
    const parent = this.active.parentId;
    if (parent !== null) this.activeId = parent;
    return this.active;
  }

  switchTo(sessionId: string): BranchNode {
    if (!this.nodes.has(sessionId)) throw new Error(`unknown branch ${sessionId}`);
    this.activeId = sessionId;
    return this.active;
  }

  /** Configs from the root to the active node, for record/replay export. */
  pathConfigs(): StepConfig[] {
    const chain: BranchNode[] = [];
    let node: BranchNode | undefined = this.active;
    while (node) {
      chain.unshift(node);
      node = node.parentId !== null ? this.nodes.get(node.parentId) : undefined;
    }
    return chain.flatMap((n) => n.steps);
  }

  /** Depth-first rows for rendering the tree as an indented list. */
  rows(): { node: BranchNode; depth: number; active: boolean }[] {
    const out: { node: BranchNode; depth: number; active: boolean }[] = [];
    const visit = (id: string, depth: number) => {
      const node = this.nodes.get(id);
      if (!node) return;
      out.push({ node, depth, active: id === this.activeId });
      for (const child of node.children) visit(child, depth + 1);
    };
    const root = [...this.nodes.values()].find((n) => n.parentId === null);
    if (root) visit(root.sessionId, 0);
    return out;
  }
}
