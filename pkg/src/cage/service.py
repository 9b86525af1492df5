"""HTTP service for the studio: generation, corpus browsing, articulation.

The app holds one checkpoint for its lifetime (swap by restarting). All
responses are synchronous; generation responses carry the seeds used so a
client can reproduce them exactly.
"""

from __future__ import annotations

import tempfile
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import diffusion
from .corpus import Corpus, _JOINT_NAMES, _LABEL_NAMES, object_to_doc
from .denoiser import load_checkpoint
from .diffusion import ConditionMask, build_schedule, sample
from .kinematics import instantiate
from .retrieval import retrieve_and_assemble
from .schema import (
    ArticulationGraph,
    CATEGORIES,
    JointType,
    NUM_ATTRIBUTES,
    SchemaError,
    M,
    decode,
    encode_bbox_row,
    encode_joint_axis_row,
    encode_joint_range_row,
    encode_joint_type_row,
    encode_label_row,
)
from .schema import ATTR_BBOX, ATTR_JOINT_AXIS, ATTR_JOINT_RANGE, ATTR_JOINT_TYPE, ATTR_LABEL

COUNT_CAP = 16


class NodeSpec(BaseModel):
    parent: int | None = None
    label: str


class GraphSpec(BaseModel):
    nodes: list[NodeSpec] = Field(min_length=1)


class BoxSpec(BaseModel):
    min: list[float] = Field(min_length=3, max_length=3)
    max: list[float] = Field(min_length=3, max_length=3)


class AxisSpec(BaseModel):
    direction: list[float] = Field(min_length=3, max_length=3)
    origin: list[float] = Field(min_length=3, max_length=3)


class NodeCondition(BaseModel):
    node: int
    bbox: BoxSpec | None = None
    joint_type: str | None = None
    joint_axis: AxisSpec | None = None
    joint_range: tuple[float, float] | None = None


class GenerateRequest(BaseModel):
    category: str
    graph: GraphSpec
    conditions: list[NodeCondition] = Field(default_factory=list)
    count: int = Field(default=1, ge=1)
    seed: int | None = None
    assemble: bool = False


class ArticulateRequest(BaseModel):
    tau: float
    id: str | None = None
    abstraction: dict | None = None


def request_to_graph(req: GenerateRequest) -> tuple[ArticulationGraph, list[str]]:
    """Graph plus per-node label names; labels are inpainted as conditions."""
    if req.category not in CATEGORIES:
        raise SchemaError(f"unknown category {req.category!r}")
    parents, labels = [], []
    for i, node in enumerate(req.graph.nodes):
        if node.label not in _LABEL_NAMES:
            raise SchemaError(f"unknown semantic label {node.label!r}", i)
        parents.append(-1 if node.parent is None else int(node.parent))
        labels.append(node.label)
    graph = ArticulationGraph(len(parents), np.asarray(parents), req.category)
    return graph, labels


def request_to_condition(req: GenerateRequest, graph: ArticulationGraph, labels: list[str]) -> ConditionMask:
    """Inpainting mask from the request's labels and per-node constraints."""
    mask = np.zeros((NUM_ATTRIBUTES, graph.max_nodes, M))
    known = np.zeros((NUM_ATTRIBUTES, graph.max_nodes, M))
    for i, label in enumerate(labels):
        known[ATTR_LABEL, i] = encode_label_row(_LABEL_NAMES[label])
        mask[ATTR_LABEL, i] = 1.0

    for cond in req.conditions:
        i = cond.node
        if not 0 <= i < graph.num_parts:
            raise SchemaError(f"condition references node {i} outside the graph")
        joint_type = None
        if cond.joint_type is not None:
            if cond.joint_type not in _JOINT_NAMES:
                raise SchemaError(f"unknown joint type {cond.joint_type!r}", i)
            joint_type = _JOINT_NAMES[cond.joint_type]
            known[ATTR_JOINT_TYPE, i] = encode_joint_type_row(joint_type)
            mask[ATTR_JOINT_TYPE, i] = 1.0
        if cond.bbox is not None:
            bmin, bmax = np.asarray(cond.bbox.min), np.asarray(cond.bbox.max)
            if np.any(bmin > bmax):
                raise SchemaError("bbox min exceeds max", i, "bbox")
            known[ATTR_BBOX, i] = encode_bbox_row(bmin, bmax)
            mask[ATTR_BBOX, i] = 1.0
        if cond.joint_axis is not None:
            d = np.asarray(cond.joint_axis.direction)
            nrm = float(np.linalg.norm(d))
            if abs(nrm - 1.0) > 1e-6:
                raise SchemaError(f"axis direction norm {nrm:.6f} != 1", i, "joint_axis")
            known[ATTR_JOINT_AXIS, i] = encode_joint_axis_row(d, cond.joint_axis.origin)
            mask[ATTR_JOINT_AXIS, i] = 1.0
        if cond.joint_range is not None:
            if joint_type is None:
                raise SchemaError("joint_range condition requires joint_type", i, "joint_range")
            lo, hi = cond.joint_range
            if lo > hi:
                raise SchemaError(f"joint range lo {lo} > hi {hi}", i, "joint_range")
            known[ATTR_JOINT_RANGE, i] = encode_joint_range_row(joint_type, lo, hi)
            mask[ATTR_JOINT_RANGE, i] = 1.0

    cm = ConditionMask(mask, known)
    cm.validate(graph)
    return cm


def run_generate(denoiser, schedule, req: GenerateRequest, steps: int = 100):
    """Samples for one request: list of (seed, parts, graph, tensor)."""
    graph, labels = request_to_graph(req)
    condition = request_to_condition(req, graph, labels)
    base_seed = req.seed if req.seed is not None else int(time.time_ns() % 2**31)
    out = []
    for k in range(req.count):
        seed = base_seed + k
        x = sample(denoiser, graph, req.category, steps=steps,
                   condition=condition, seed=seed, schedule=schedule)
        # keep served abstractions inside the data domain so any variant can
        # be fed back as a constraint; exact on conditioned entries
        x = np.clip(x, -1.0, 1.0)
        parts = decode(x, graph)
        for i, p in enumerate(parts):
            p.validate(i)
        out.append((seed, parts, graph, x))
    return out


def create_app(
    checkpoint_path: str | Path | None = None,
    corpus_dir: str | Path | None = None,
    workdir: str | Path | None = None,
    sample_steps: int = 100,
) -> FastAPI:
    app = FastAPI(title="cage studio service")
    app.state.denoiser = None
    app.state.schedule = build_schedule()
    app.state.corpus = None
    app.state.workdir = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="cage_"))
    app.state.workdir.mkdir(parents=True, exist_ok=True)

    if checkpoint_path is not None:
        denoiser, sched_params, _ = load_checkpoint(checkpoint_path)
        app.state.denoiser = denoiser
        app.state.schedule = build_schedule(
            sched_params["T"], sched_params["beta_min"], sched_params["beta_max"]
        )
    if corpus_dir is not None:
        app.state.corpus = Corpus.load(corpus_dir)
        app.mount("/meshes", StaticFiles(directory=str(corpus_dir)), name="meshes")
    app.mount("/assembled", StaticFiles(directory=str(app.state.workdir)), name="assembled")

    @app.exception_handler(SchemaError)
    async def schema_error_handler(request: Request, exc: SchemaError):
        return JSONResponse(status_code=400, content={"detail": str(exc), "node": exc.node})

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "checkpoint_loaded": app.state.denoiser is not None,
            "corpus_loaded": app.state.corpus is not None,
        }

    @app.get("/api/corpus")
    def corpus_listing():
        corpus = app.state.corpus
        if corpus is None:
            return {"objects": []}
        return {"objects": [{"id": e.object_id, "category": e.category} for e in corpus]}

    @app.get("/api/objects/{object_id}")
    def get_object(object_id: str):
        corpus = app.state.corpus
        if corpus is None:
            raise HTTPException(status_code=404, detail="no corpus loaded")
        try:
            entry = corpus.by_id(object_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown object {object_id!r}")
        doc = object_to_doc(entry.parts, entry.graph, entry.object_id, entry.mesh_refs)
        return {"object": doc, "mesh_base": "/meshes"}

    @app.post("/api/articulate")
    def articulate(req: ArticulateRequest):
        if not 0.0 <= req.tau <= 1.0:
            raise SchemaError(f"tau {req.tau} outside [0, 1]")
        if (req.id is None) == (req.abstraction is None):
            raise SchemaError("provide exactly one of id or abstraction")
        if req.id is not None:
            corpus = app.state.corpus
            if corpus is None:
                raise HTTPException(status_code=404, detail="no corpus loaded")
            try:
                entry = corpus.by_id(req.id)
            except KeyError:
                raise HTTPException(status_code=404, detail=f"unknown object {req.id!r}")
            parts, graph = entry.parts, entry.graph
        else:
            from .corpus import object_from_doc

            parts, graph, _, _ = object_from_doc(req.abstraction)
        boxes = instantiate(parts, graph, req.tau)
        return {
            "tau": req.tau,
            "boxes": [
                {
                    "node": b.part_index,
                    "label": parts[b.part_index].semantic_label.name.lower(),
                    "corners": b.corners.tolist(),
                }
                for b in boxes
            ],
        }

    @app.post("/api/generate")
    def generate(req: GenerateRequest):
        if app.state.denoiser is None:
            raise HTTPException(status_code=409, detail="no checkpoint loaded")
        if req.count > COUNT_CAP:
            raise SchemaError(f"count {req.count} exceeds cap {COUNT_CAP}")
        results = run_generate(app.state.denoiser, app.state.schedule, req, sample_steps)
        samples = []
        for seed, parts, graph, _ in results:
            doc = object_to_doc(parts, graph, f"generated_{seed}")
            item = {"seed": seed, "object": doc}
            if req.assemble:
                if app.state.corpus is None:
                    raise SchemaError("assembly requested but no corpus loaded")
                assembled = retrieve_and_assemble((parts, graph), app.state.corpus, req.category)
                out_id = f"gen_{seed}"
                assembled.export(app.state.workdir / out_id, out_id)
                item["assembled"] = {
                    "base": f"/assembled/{out_id}",
                    "parts": [f"{out_id}_p{p.node}.obj" for p in assembled.parts],
                }
            samples.append(item)
        return {"seed": results[0][0] if results else None, "samples": samples}

    return app
