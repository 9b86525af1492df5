"""On-disk corpus format.

A corpus is a directory of one JSON document per object plus `manifest.json`
listing ids and the train/test split. Object document:

    {
      "id": "storage_0000",
      "category": "Storage",
      "parts": [
        {
          "label": "base",
          "bbox_min": [x, y, z],
          "bbox_max": [x, y, z],
          "joint": {"type": "fixed", "axis_dir": [0,0,1],
                    "axis_origin": [0,0,0], "range": [0, 0]},
          "parent": null,            // null (or -1) at the root
          "mesh_ref": "meshes/storage_0000_p0.obj"   // optional
        }, ...
      ]
    }

Manifest: {"ids": [...], "train": [...], "test": [...]}. All files UTF-8
JSON with decimal floats. `mesh_ref` paths are relative to the corpus root.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .schema import (
    ArticulationGraph,
    JointType,
    PartAbstraction,
    SchemaError,
    SemanticLabel,
    K,
)

MANIFEST_NAME = "manifest.json"

_JOINT_NAMES = {t.name.lower(): t for t in JointType}
_LABEL_NAMES = {l.name.lower(): l for l in SemanticLabel}


def part_to_doc(part: PartAbstraction, parent: int, mesh_ref: str | None = None) -> dict:
    doc = {
        "label": part.semantic_label.name.lower(),
        "bbox_min": [float(v) for v in part.bbox_min],
        "bbox_max": [float(v) for v in part.bbox_max],
        "joint": {
            "type": part.joint_type.name.lower(),
            "axis_dir": [float(v) for v in part.axis_direction],
            "axis_origin": [float(v) for v in part.axis_origin],
            "range": [float(part.joint_range[0]), float(part.joint_range[1])],
        },
        "parent": None if parent < 0 else int(parent),
    }
    if mesh_ref is not None:
        doc["mesh_ref"] = mesh_ref
    return doc


def part_from_doc(doc: dict, node: int) -> tuple[PartAbstraction, int, str | None]:
    label_name = str(doc.get("label", ""))
    if label_name not in _LABEL_NAMES:
        raise SchemaError(f"unknown semantic label {label_name!r}", node)
    joint = doc.get("joint", {})
    type_name = str(joint.get("type", ""))
    if type_name not in _JOINT_NAMES:
        raise SchemaError(f"unknown joint type {type_name!r}", node)
    part = PartAbstraction(
        bbox_min=np.asarray(doc["bbox_min"], dtype=np.float64),
        bbox_max=np.asarray(doc["bbox_max"], dtype=np.float64),
        joint_type=_JOINT_NAMES[type_name],
        axis_direction=np.asarray(joint["axis_dir"], dtype=np.float64),
        axis_origin=np.asarray(joint["axis_origin"], dtype=np.float64),
        joint_range=(float(joint["range"][0]), float(joint["range"][1])),
        semantic_label=_LABEL_NAMES[label_name],
    )
    parent = doc.get("parent", None)
    parent = -1 if parent is None else int(parent)
    mesh_ref = doc.get("mesh_ref")
    return part, parent, mesh_ref


def object_to_doc(
    parts: list[PartAbstraction],
    graph: ArticulationGraph,
    object_id: str,
    mesh_refs: list[str | None] | None = None,
) -> dict:
    refs = mesh_refs or [None] * len(parts)
    return {
        "id": object_id,
        "category": graph.category,
        "parts": [
            part_to_doc(p, int(graph.parent[i]), refs[i]) for i, p in enumerate(parts)
        ],
    }


def object_from_doc(doc: dict) -> tuple[list[PartAbstraction], ArticulationGraph, str, list[str | None]]:
    part_docs = doc.get("parts", [])
    if len(part_docs) > K:
        raise SchemaError(f"object has {len(part_docs)} parts, exceeds K={K}")
    if not part_docs:
        raise SchemaError("object has no parts")
    parts, parents, mesh_refs = [], [], []
    for i, pd in enumerate(part_docs):
        part, parent, mesh_ref = part_from_doc(pd, i)
        part.validate(i)
        parts.append(part)
        parents.append(parent)
        mesh_refs.append(mesh_ref)
    graph = ArticulationGraph(len(parts), np.asarray(parents), str(doc.get("category", "")))
    return parts, graph, str(doc.get("id", "")), mesh_refs


def save_object(
    parts: list[PartAbstraction],
    graph: ArticulationGraph,
    path: str | Path,
    object_id: str | None = None,
    mesh_refs: list[str | None] | None = None,
) -> None:
    path = Path(path)
    oid = object_id if object_id is not None else path.stem
    doc = object_to_doc(parts, graph, oid, mesh_refs)
    path.write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_object(path: str | Path) -> tuple[list[PartAbstraction], ArticulationGraph]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    parts, graph, _, _ = object_from_doc(doc)
    return parts, graph


@dataclass
class CorpusEntry:
    object_id: str
    parts: list[PartAbstraction]
    graph: ArticulationGraph
    mesh_refs: list[str | None] = field(default_factory=list)

    @property
    def category(self) -> str:
        return self.graph.category


@dataclass
class Corpus:
    root: Path
    entries: list[CorpusEntry]
    train_ids: list[str]
    test_ids: list[str]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def by_id(self, object_id: str) -> CorpusEntry:
        for e in self.entries:
            if e.object_id == object_id:
                return e
        raise KeyError(object_id)

    def split(self, name: str) -> list[CorpusEntry]:
        ids = {"train": self.train_ids, "test": self.test_ids}[name]
        wanted = set(ids)
        return [e for e in self.entries if e.object_id in wanted]

    def mesh_path(self, mesh_ref: str) -> Path:
        return self.root / mesh_ref

    @staticmethod
    def load(path: str | Path) -> "Corpus":
        root = Path(path)
        manifest_path = root / MANIFEST_NAME
        if not manifest_path.exists():
            raise SchemaError(f"no {MANIFEST_NAME} in {root}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        entries = []
        for oid in manifest["ids"]:
            doc = json.loads((root / f"{oid}.json").read_text(encoding="utf-8"))
            parts, graph, doc_id, mesh_refs = object_from_doc(doc)
            entries.append(CorpusEntry(doc_id or oid, parts, graph, mesh_refs))
        return Corpus(
            root=root,
            entries=entries,
            train_ids=list(manifest.get("train", [])),
            test_ids=list(manifest.get("test", [])),
        )

    def save(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        for e in self.entries:
            save_object(e.parts, e.graph, self.root / f"{e.object_id}.json", e.object_id, e.mesh_refs)
        manifest = {
            "ids": [e.object_id for e in self.entries],
            "train": self.train_ids,
            "test": self.test_ids,
        }
        (self.root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1), encoding="utf-8")


def load_corpus(path: str | Path) -> list[tuple[list[PartAbstraction], ArticulationGraph]]:
    """Corpus as plain (parts, graph) pairs; use Corpus.load for ids/meshes."""
    return [(e.parts, e.graph) for e in Corpus.load(path)]
