import { beforeEach, describe, expect, it } from "vitest";
import { addNode, emptyDraft, resetIds } from "../src/graph.js";
import { canGenerate, toRequest, validateDraft } from "../src/validate.js";
import { ConstraintDraft } from "../src/types.js";

describe("draft validation", () => {
  let draft: ConstraintDraft;

  beforeEach(() => {
    resetIds();
    draft = emptyDraft("Storage");
  });

  it("empty draft cannot generate", () => {
    expect(canGenerate(draft)).toBe(false);
    expect(validateDraft(draft).some((i) => /no nodes/.test(i.message))).toBe(true);
  });

  it("valid small draft passes", () => {
    const base = addNode(draft, null, "base");
    addNode(draft, base.id, "door");
    expect(validateDraft(draft)).toEqual([]);
    expect(canGenerate(draft)).toBe(true);
  });

  it("locked bbox requires values in range", () => {
    const base = addNode(draft, null, "base");
    base.locks.add("bbox");
    expect(validateDraft(draft).some((i) => /bbox locked/.test(i.message))).toBe(true);
    base.bbox = { min: [-0.5, -0.5, -0.5], max: [0.5, 0.5, 0.5] };
    expect(validateDraft(draft)).toEqual([]);
    base.bbox = { min: [0.5, 0, 0], max: [-0.5, 1, 1] };
    expect(validateDraft(draft).some((i) => /min exceeds max/.test(i.message))).toBe(true);
    base.bbox = { min: [-2, 0, 0], max: [3, 1, 1] };
    expect(validateDraft(draft).some((i) => /outside/.test(i.message))).toBe(true);
  });

  it("locked range requires a locked joint type", () => {
    const base = addNode(draft, null, "base");
    const door = addNode(draft, base.id, "door");
    door.locks.add("joint_range");
    door.range = [0, 90];
    expect(validateDraft(draft).some((i) => /joint type/.test(i.message))).toBe(true);
    door.locks.add("joint_type");
    door.jointType = "revolute";
    expect(validateDraft(draft)).toEqual([]);
  });

  it("locked axis must be unit length", () => {
    const base = addNode(draft, null, "base");
    const door = addNode(draft, base.id, "door");
    door.locks.add("joint_axis");
    door.axis = { direction: [0, 0, 2], origin: [0, 0, 0] };
    expect(validateDraft(draft).some((i) => /unit length/.test(i.message))).toBe(true);
    door.axis.direction = [0, 0, 1];
    expect(validateDraft(draft)).toEqual([]);
  });

  it("count cap enforced", () => {
    addNode(draft, null, "base");
    draft.count = 99;
    expect(canGenerate(draft)).toBe(false);
  });

  it("serializes a full draft into the wire request", () => {
    const base = addNode(draft, null, "base");
    const drawer = addNode(draft, base.id, "drawer");
    const handle = addNode(draft, drawer.id, "handle");
    drawer.locks.add("joint_type");
    drawer.jointType = "prismatic";
    drawer.locks.add("bbox");
    drawer.bbox = { min: [-0.9, -0.4, -0.3], max: [0.9, 0.5, 0.3] };
    draft.seed = 7;
    draft.count = 2;

    const req = toRequest(draft);
    expect(req).toEqual({
      category: "Storage",
      graph: {
        nodes: [
          { parent: null, label: "base" },
          { parent: 0, label: "drawer" },
          { parent: 1, label: "handle" },
        ],
      },
      conditions: [
        {
          node: 1,
          bbox: { min: [-0.9, -0.4, -0.3], max: [0.9, 0.5, 0.3] },
          joint_type: "prismatic",
        },
      ],
      count: 2,
      seed: 7,
    });
    void handle;
  });

  it("toRequest throws on invalid drafts", () => {
    expect(() => toRequest(draft)).toThrow(/invalid/);
  });
});
