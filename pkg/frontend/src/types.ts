/** Wire formats shared with the generation service. */

export type Vec3 = [number, number, number];

export const CATEGORIES = [
  "Storage",
  "Table",
  "Refrigerator",
  "Dishwasher",
  "Safe",
  "Oven",
  "Washer",
  "Microwave",
] as const;
export type Category = (typeof CATEGORIES)[number];

export const JOINT_TYPES = ["fixed", "revolute", "prismatic", "continuous", "screw"] as const;
export type JointType = (typeof JOINT_TYPES)[number];

export const LABELS = [
  "base",
  "drawer",
  "door",
  "tray",
  "shelf",
  "knob",
  "wheel",
  "handle",
] as const;
export type SemanticLabel = (typeof LABELS)[number];

/** Part entry of an abstraction document as served by the API. */
export interface PartDoc {
  label: SemanticLabel;
  bbox_min: Vec3;
  bbox_max: Vec3;
  joint: {
    type: JointType;
    axis_dir: Vec3;
    axis_origin: Vec3;
    range: [number, number];
  };
  parent: number | null;
  mesh_ref?: string;
}

export interface ObjectDoc {
  id: string;
  category: Category;
  parts: PartDoc[];
}

export interface NodeConditionWire {
  node: number;
  bbox?: { min: Vec3; max: Vec3 };
  joint_type?: JointType;
  joint_axis?: { direction: Vec3; origin: Vec3 };
  joint_range?: [number, number];
}

export interface GenerateRequestWire {
  category: Category;
  graph: { nodes: { parent: number | null; label: SemanticLabel }[] };
  conditions: NodeConditionWire[];
  count: number;
  seed?: number;
  assemble?: boolean;
}

export interface GenerateResponseWire {
  seed: number;
  samples: {
    seed: number;
    object: ObjectDoc;
    assembled?: { base: string; parts: string[] };
  }[];
}

export interface ArticulateBoxWire {
  node: number;
  label: SemanticLabel;
  corners: Vec3[];
}

export interface ArticulateResponseWire {
  tau: number;
  boxes: ArticulateBoxWire[];
}

/** Attributes a designer can pin on a draft node. */
export type LockableAttribute = "bbox" | "joint_type" | "joint_axis" | "joint_range";

export interface DraftNode {
  id: number;
  parent: number | null;
  label: SemanticLabel;
  locks: Set<LockableAttribute>;
  bbox?: { min: Vec3; max: Vec3 };
  jointType?: JointType;
  axis?: { direction: Vec3; origin: Vec3 };
  range?: [number, number];
  /** editor canvas position, pure UI metadata */
  position: { x: number; y: number };
}

export interface ConstraintDraft {
  category: Category;
  nodes: DraftNode[];
  count: number;
  seed?: number;
}
