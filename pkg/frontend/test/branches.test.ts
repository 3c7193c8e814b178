import { describe, expect, it } from "vitest";

import { BranchTree } from "../src/branches.js";

const cfg = (deg: number, dist: number) => ({
  heading_change: (deg * Math.PI) / 180,
  distance: dist,
});

describe("BranchTree", () => {
  it("records steps on the active node", () => {
    const tree = new BranchTree("root");
    tree.recordStep(cfg(0, 4), 1);
    tree.recordStep(cfg(90, 2), 2);
    expect(tree.active.steps).toHaveLength(2);
    expect(tree.active.version).toBe(2);
  });

  it("fork switches to the child and undo returns to the parent", () => {
    const tree = new BranchTree("root");
    tree.recordStep(cfg(0, 4), 1);
    tree.addFork("child-1");
    expect(tree.activeId).toBe("child-1");
    tree.recordStep(cfg(45, 1), 1);
    tree.undoToBranch();
    expect(tree.activeId).toBe("root");
    // undo at the root is a no-op
    tree.undoToBranch();
    expect(tree.activeId).toBe("root");
  });

  it("four forks render a fan from one origin", () => {
    const tree = new BranchTree("root");
    for (let i = 0; i < 4; i++) {
      tree.addFork(`child-${i}`);
      tree.undoToBranch();
    }
    const rows = tree.rows();
    expect(rows).toHaveLength(5);
    expect(rows[0].node.children).toHaveLength(4);
    expect(rows.slice(1).every((r) => r.depth === 1)).toBe(true);
  });

  it("pathConfigs flattens root-to-active steps in order", () => {
    const tree = new BranchTree("root");
    tree.recordStep(cfg(0, 4), 1);
    tree.addFork("child");
    tree.recordStep(cfg(90, 2), 1);
    const path = tree.pathConfigs();
    expect(path).toHaveLength(2);
    expect(path[0].distance).toBe(4);
    expect(path[1].distance).toBe(2);
  });

  it("rejects switching to an unknown branch", () => {
    const tree = new BranchTree("root");
    expect(() => tree.switchTo("ghost")).toThrow();
  });
});
