/** Draft tree editing. Every operation preserves a valid single-root tree:
 * cycle-creating reparents are rejected and deleting a mid-tree node hands
 * its children to its parent. */

import { Category, ConstraintDraft, DraftNode, SemanticLabel } from "./types.js";

export function emptyDraft(category: Category = "Storage"): ConstraintDraft {
  return { category, nodes: [], count: 3 };
}

let nextId = 1;

/** Test hook: make node ids deterministic again. */
export function resetIds(start = 1): void {
  nextId = start;
}

export function addNode(
  draft: ConstraintDraft,
  parent: number | null,
  label: SemanticLabel,
): DraftNode {
  if (draft.nodes.length === 0) {
    if (parent !== null) throw new Error("first node must be the root");
  } else {
    if (parent === null) throw new Error("tree already has a root");
    if (!byId(draft, parent)) throw new Error(`unknown parent ${parent}`);
  }
  const node: DraftNode = {
    id: nextId++,
    parent,
    label,
    locks: new Set(),
    position: { x: 40 + 90 * draft.nodes.length, y: 80 },
  };
  draft.nodes.push(node);
  return node;
}

export function byId(draft: ConstraintDraft, id: number): DraftNode | undefined {
  return draft.nodes.find((n) => n.id === id);
}

export function childrenOf(draft: ConstraintDraft, id: number): DraftNode[] {
  return draft.nodes.filter((n) => n.parent === id);
}

export function rootOf(draft: ConstraintDraft): DraftNode | undefined {
  return draft.nodes.find((n) => n.parent === null);
}

function isDescendant(draft: ConstraintDraft, candidate: number, ancestor: number): boolean {
  let node = byId(draft, candidate);
  while (node && node.parent !== null) {
    if (node.parent === ancestor) return true;
    node = byId(draft, node.parent);
  }
  return false;
}

/** Reparent a node; throws when the move would create a cycle. */
export function setParent(draft: ConstraintDraft, id: number, parent: number): void {
  const node = byId(draft, id);
  if (!node) throw new Error(`unknown node ${id}`);
  if (node.parent === null) throw new Error("cannot reparent the root");
  if (!byId(draft, parent)) throw new Error(`unknown parent ${parent}`);
  if (parent === id || isDescendant(draft, parent, id)) {
    throw new Error("reparent would create a cycle");
  }
  node.parent = parent;
}

/** Remove a node; its children are reparented to the removed node's parent.
 * The root can only go when it has at most one child (which becomes root). */
export function removeNode(draft: ConstraintDraft, id: number): void {
  const node = byId(draft, id);
  if (!node) throw new Error(`unknown node ${id}`);
  const kids = childrenOf(draft, id);
  if (node.parent === null && kids.length > 1) {
    throw new Error("removing the root would split the tree");
  }
  for (const kid of kids) kid.parent = node.parent === null ? null : node.parent;
  draft.nodes.splice(draft.nodes.indexOf(node), 1);
}

export function setLabel(draft: ConstraintDraft, id: number, label: SemanticLabel): void {
  const node = byId(draft, id);
  if (!node) throw new Error(`unknown node ${id}`);
  node.label = label;
}

/** Node index in request order (insertion order). */
export function nodeIndex(draft: ConstraintDraft, id: number): number {
  return draft.nodes.findIndex((n) => n.id === id);
}
