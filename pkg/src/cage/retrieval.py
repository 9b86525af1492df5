"""Mesh retrieval and assembly for generated abstractions.

A Weisfeiler-Lehman hash of the unlabeled tree topology filters corpus
candidates, the best-AID candidate donates the base part, remaining labels are
filled preferring parts from the top-ranked candidates for style consistency,
and every pick is affinely resized into its generated box.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, CorpusEntry, object_to_doc
from .kinematics import read_obj, world_transforms, write_obj
from .metrics import abstract_instantiation_distance
from .schema import ArticulationGraph, PartAbstraction, SchemaError, SemanticLabel

Object = tuple[list[PartAbstraction], ArticulationGraph]


# --- tree topology hash -------------------------------------------------------


def _neighbor_lists(graph: ArticulationGraph) -> list[list[int]]:
    nbrs: list[list[int]] = [[] for _ in range(graph.num_parts)]
    for i in range(graph.num_parts):
        p = int(graph.parent[i])
        if p >= 0:
            nbrs[i].append(p)
            nbrs[p].append(i)
    return nbrs


def _tree_radius(nbrs: list[list[int]]) -> int:
    """Max distance from a center node: the height of a center-rooted tree."""

    def farthest(start: int) -> tuple[int, int, dict[int, int]]:
        dist = {start: 0}
        frontier = [start]
        far, far_d = start, 0
        while frontier:
            nxt = []
            for u in frontier:
                for v in nbrs[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        if dist[v] > far_d:
                            far, far_d = v, dist[v]
                        nxt.append(v)
            frontier = nxt
        return far, far_d, dist

    a, _, _ = farthest(0)
    _, diameter, _ = farthest(a)
    return (diameter + 1) // 2


def wl_hash(graph: ArticulationGraph) -> str:
    """Topology hash of the unlabeled undirected tree.

    Iterated neighborhood-label refinement run for (center-rooted tree depth
    + 1) rounds; isomorphic trees hash identically regardless of node order
    or which node carries the root pointer.
    """
    n = graph.num_parts
    nbrs = _neighbor_lists(graph)
    iterations = _tree_radius(nbrs) + 1

    labels = ["0"] * n
    histograms = []
    for _ in range(iterations):
        new_labels = []
        for v in range(n):
            signature = labels[v] + "|" + ",".join(sorted(labels[u] for u in nbrs[v]))
            new_labels.append(hashlib.sha256(signature.encode()).hexdigest()[:16])
        labels = new_labels
        histograms.append(",".join(sorted(labels)))
    return hashlib.sha256(";".join(histograms).encode()).hexdigest()[:32]


# --- mesh parts ----------------------------------------------------------------


@dataclass
class MeshPart:
    vertices: np.ndarray
    faces: np.ndarray
    semantic_label: SemanticLabel
    source_object_id: str
    bbox_min: np.ndarray
    bbox_max: np.ndarray

    def validate(self) -> None:
        if len(self.vertices) == 0 or len(self.faces) == 0:
            raise SchemaError(f"empty mesh from {self.source_object_id}")
        vmin, vmax = self.vertices.min(axis=0), self.vertices.max(axis=0)
        if np.abs(vmin - self.bbox_min).max() > 1e-6 or np.abs(vmax - self.bbox_max).max() > 1e-6:
            raise SchemaError(f"mesh bbox inconsistent for {self.source_object_id}")


def corpus_mesh_part(corpus: Corpus, entry: CorpusEntry, node: int) -> MeshPart:
    ref = entry.mesh_refs[node] if node < len(entry.mesh_refs) else None
    if ref is None:
        raise SchemaError(f"object {entry.object_id} node {node} has no mesh_ref")
    vertices, faces = read_obj(corpus.mesh_path(ref))
    part = entry.parts[node]
    mesh = MeshPart(
        vertices, faces, part.semantic_label, entry.object_id,
        part.bbox_min.copy(), part.bbox_max.copy(),
    )
    mesh.validate()
    return mesh


# --- retrieval -----------------------------------------------------------------


def _ranked_candidates(
    gen_obj: Object, corpus: Corpus, category: str | None, aid_seed: int = 0
) -> list[tuple[float, CorpusEntry]]:
    target_hash = wl_hash(gen_obj[1])
    pool = [
        e
        for e in corpus
        if wl_hash(e.graph) == target_hash and (category is None or e.category == category)
    ]
    if not pool:  # unseen topology: consider everything
        pool = list(corpus)
    scored = [
        (abstract_instantiation_distance(gen_obj, (e.parts, e.graph), seed=aid_seed), e)
        for e in pool
    ]
    scored.sort(key=lambda se: (se[0], se[1].object_id))
    return scored


def select_base(
    gen_obj: Object, corpus: Corpus, category: str | None = None
) -> tuple[MeshPart, list[str]]:
    """Best-matching base part plus the top-5 candidate object ids."""
    if len(corpus) == 0:
        raise SchemaError("corpus is empty")
    ranked = _ranked_candidates(gen_obj, corpus, category)
    top5 = [e.object_id for _, e in ranked[:5]]
    best = ranked[0][1]
    return corpus_mesh_part(corpus, best, best.graph.root), top5


def retrieve_parts(
    gen_obj: Object,
    top5: list[str],
    corpus: Corpus,
    category: str | None = None,
) -> dict[SemanticLabel, MeshPart]:
    """One mesh pick per non-base label; shared by all nodes with that label.

    Search order: top-5 candidates by rank, then the same-category corpus,
    then everything, each tier in object-id order.
    """
    needed = sorted(
        {p.semantic_label for p in gen_obj[0] if p.semantic_label != SemanticLabel.BASE}
    )
    tiers: list[list[CorpusEntry]] = [[corpus.by_id(oid) for oid in top5]]
    if category is not None:
        tiers.append(sorted((e for e in corpus if e.category == category), key=lambda e: e.object_id))
    tiers.append(sorted(corpus, key=lambda e: e.object_id))

    picks: dict[SemanticLabel, MeshPart] = {}
    for label in needed:
        for tier in tiers:
            found = _find_label(corpus, tier, label)
            if found is not None:
                picks[label] = found
                break
        else:
            raise SchemaError(f"label {label.name.lower()!r} not present in corpus")
    return picks


def _find_label(corpus: Corpus, entries: list[CorpusEntry], label: SemanticLabel) -> MeshPart | None:
    for entry in entries:
        for node, part in enumerate(entry.parts):
            if part.semantic_label == label and entry.mesh_refs[node] is not None:
                return corpus_mesh_part(corpus, entry, node)
    return None


# --- assembly --------------------------------------------------------------------


@dataclass
class AssembledPart:
    node: int
    vertices: np.ndarray
    faces: np.ndarray
    semantic_label: SemanticLabel
    source_object_id: str


@dataclass
class AssembledObject:
    parts: list[AssembledPart]
    abstraction: list[PartAbstraction]
    graph: ArticulationGraph

    def posed_vertices(self, tau: float) -> list[np.ndarray]:
        transforms = world_transforms(self.abstraction, self.graph, tau)
        return [transforms[p.node].apply(p.vertices) for p in self.parts]

    def export(self, out_dir: str | Path, object_id: str = "assembled") -> None:
        """One OBJ per part plus the joint-spec document."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        refs = []
        for p in self.parts:
            ref = f"{object_id}_p{p.node}.obj"
            write_obj(out_dir / ref, p.vertices, p.faces)
            refs.append(ref)
        doc = object_to_doc(self.abstraction, self.graph, object_id, refs)
        for part_doc, p in zip(doc["parts"], self.parts):
            part_doc["retrieved_from"] = p.source_object_id
        (out_dir / f"{object_id}.json").write_text(json.dumps(doc, indent=1), encoding="utf-8")


def _resize_to_box(mesh: MeshPart, bbox_min: np.ndarray, bbox_max: np.ndarray) -> np.ndarray:
    """Per-axis affine map from the mesh's resting box onto the target box."""
    gen_ext = bbox_max - bbox_min
    if np.any(gen_ext <= 1e-9):
        raise SchemaError("degenerate zero-extent generated box")
    mesh_ext = np.maximum(mesh.bbox_max - mesh.bbox_min, 1e-12)
    scale = gen_ext / mesh_ext
    mesh_center = 0.5 * (mesh.bbox_min + mesh.bbox_max)
    target_center = 0.5 * (bbox_min + bbox_max)
    return (mesh.vertices - mesh_center) * scale + target_center


def assemble(gen_obj: Object, picks: dict[SemanticLabel, MeshPart]) -> AssembledObject:
    """Duplicate and resize a pick into every node's generated box."""
    parts, graph = gen_obj
    assembled = []
    for node, part in enumerate(parts):
        pick = picks.get(part.semantic_label)
        if pick is None:
            raise SchemaError(f"no mesh pick for label {part.semantic_label.name.lower()!r}", node)
        vertices = _resize_to_box(pick, part.bbox_min, part.bbox_max)
        assembled.append(
            AssembledPart(node, vertices, pick.faces.copy(), part.semantic_label, pick.source_object_id)
        )
    return AssembledObject(assembled, [p.copy() for p in parts], graph.copy())


def retrieve_and_assemble(
    gen_obj: Object, corpus: Corpus, category: str | None = None
) -> AssembledObject:
    """Full pipeline: base selection, per-label retrieval, assembly."""
    base, top5 = select_base(gen_obj, corpus, category)
    picks = retrieve_parts(gen_obj, top5, corpus, category)
    picks[SemanticLabel.BASE] = base
    return assemble(gen_obj, picks)
