/** Client-side mirror of the service's request validation: the UI never
 * submits a request the server would reject. */

import {
  CATEGORIES,
  ConstraintDraft,
  GenerateRequestWire,
  JOINT_TYPES,
  LABELS,
  NodeConditionWire,
  Vec3,
} from "./types.js";
import { byId, nodeIndex } from "./graph.js";

export const MAX_NODES = 32;
export const COUNT_CAP = 16;

export interface Issue {
  nodeId?: number;
  message: string;
}

function norm(v: Vec3): number {
  return Math.hypot(v[0], v[1], v[2]);
}

export function validateDraft(draft: ConstraintDraft): Issue[] {
  const issues: Issue[] = [];
  if (draft.nodes.length === 0) issues.push({ message: "draft has no nodes" });
  if (draft.nodes.length > MAX_NODES) {
    issues.push({ message: `more than ${MAX_NODES} nodes` });
  }
  if (!CATEGORIES.includes(draft.category)) {
    issues.push({ message: `unknown category ${draft.category}` });
  }
  if (draft.count < 1 || draft.count > COUNT_CAP) {
    issues.push({ message: `count must be in 1..${COUNT_CAP}` });
  }
  const roots = draft.nodes.filter((n) => n.parent === null);
  if (draft.nodes.length > 0 && roots.length !== 1) {
    issues.push({ message: `expected exactly one root, found ${roots.length}` });
  }
  for (const node of draft.nodes) {
    if (!LABELS.includes(node.label)) {
      issues.push({ nodeId: node.id, message: `unknown label ${node.label}` });
    }
    if (node.parent !== null && !byId(draft, node.parent)) {
      issues.push({ nodeId: node.id, message: "dangling parent reference" });
    }
    if (node.locks.has("bbox")) {
      if (!node.bbox) {
        issues.push({ nodeId: node.id, message: "bbox locked but not set" });
      } else {
        for (let a = 0; a < 3; a++) {
          if (node.bbox.min[a] > node.bbox.max[a]) {
            issues.push({ nodeId: node.id, message: "bbox min exceeds max" });
            break;
          }
        }
        const all = [...node.bbox.min, ...node.bbox.max];
        if (all.some((v) => !Number.isFinite(v) || Math.abs(v) > 1)) {
          issues.push({ nodeId: node.id, message: "bbox outside [-1, 1]" });
        }
      }
    }
    if (node.locks.has("joint_type") && !node.jointType) {
      issues.push({ nodeId: node.id, message: "joint type locked but not set" });
    }
    if (node.locks.has("joint_type") && node.jointType && !JOINT_TYPES.includes(node.jointType)) {
      issues.push({ nodeId: node.id, message: `unknown joint type ${node.jointType}` });
    }
    if (node.locks.has("joint_axis")) {
      if (!node.axis) {
        issues.push({ nodeId: node.id, message: "axis locked but not set" });
      } else if (Math.abs(norm(node.axis.direction) - 1) > 1e-6) {
        issues.push({ nodeId: node.id, message: "axis direction must be unit length" });
      }
    }
    if (node.locks.has("joint_range")) {
      if (!node.range) {
        issues.push({ nodeId: node.id, message: "range locked but not set" });
      } else {
        if (node.range[0] > node.range[1]) {
          issues.push({ nodeId: node.id, message: "range lo exceeds hi" });
        }
        if (!node.locks.has("joint_type") || !node.jointType) {
          issues.push({ nodeId: node.id, message: "locked range requires locked joint type" });
        }
      }
    }
  }
  // cycles are unreachable through the editor API; check anyway for loaded drafts
  for (const node of draft.nodes) {
    let hops = 0;
    let cur = node;
    while (cur.parent !== null) {
      const next = byId(draft, cur.parent);
      if (!next || ++hops > draft.nodes.length) {
        issues.push({ nodeId: node.id, message: "parent chain does not reach the root" });
        break;
      }
      cur = next;
    }
  }
  return issues;
}

export function canGenerate(draft: ConstraintDraft): boolean {
  return validateDraft(draft).length === 0;
}

/** Lossless serialization of a valid draft into the wire request. */
export function toRequest(draft: ConstraintDraft): GenerateRequestWire {
  const issues = validateDraft(draft);
  if (issues.length > 0) {
    throw new Error(`draft invalid: ${issues.map((i) => i.message).join("; ")}`);
  }
  const conditions: NodeConditionWire[] = [];
  for (const node of draft.nodes) {
    const cond: NodeConditionWire = { node: nodeIndex(draft, node.id) };
    let any = false;
    if (node.locks.has("bbox") && node.bbox) {
      cond.bbox = { min: [...node.bbox.min], max: [...node.bbox.max] };
      any = true;
    }
    if (node.locks.has("joint_type") && node.jointType) {
      cond.joint_type = node.jointType;
      any = true;
    }
    if (node.locks.has("joint_axis") && node.axis) {
      cond.joint_axis = {
        direction: [...node.axis.direction],
        origin: [...node.axis.origin],
      };
      any = true;
    }
    if (node.locks.has("joint_range") && node.range) {
      cond.joint_range = [...node.range];
      any = true;
    }
    if (any) conditions.push(cond);
  }
  return {
    category: draft.category,
    graph: {
      nodes: draft.nodes.map((n) => ({
        parent: n.parent === null ? null : nodeIndex(draft, n.parent),
        label: n.label,
      })),
    },
    conditions,
    count: draft.count,
    ...(draft.seed !== undefined ? { seed: draft.seed } : {}),
  };
}
