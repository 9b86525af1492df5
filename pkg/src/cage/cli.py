"""Command-line workflows: corpus synthesis, training, generation, evaluation,
assembly, and the studio service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .config import denoiser_config_from, load_config, train_config_from
from .corpus import Corpus, load_corpus, load_object, save_object
from .denoiser import load_checkpoint
from .metrics import (
    aor_stats,
    cov_from_matrix,
    distance_matrix,
    evaluate_sets,
    instantiation_distance,
    abstract_instantiation_distance,
    mmd_from_matrix,
    one_nna,
    write_report,
)
from .retrieval import retrieve_and_assemble
from .schema import CATEGORIES, SchemaError
from .service import GenerateRequest, create_app, run_generate
from .synthetic import write_corpus
from .training import train


@click.group()
def main():
    """Articulated-object abstraction toolkit."""


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@main.command("synth-corpus")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--count", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--mix", default=None, help="e.g. 'Storage=0.4,Table=0.6' (default uniform)")
@click.option("--meshes/--no-meshes", default=True, show_default=True)
def cli_synth_corpus(out_dir: Path, count: int, seed: int, mix: str | None, meshes: bool):
    """Generate a synthetic corpus with manifest and per-part meshes."""
    category_mix = None
    if mix:
        category_mix = {}
        for token in mix.split(","):
            name, _, weight = token.partition("=")
            if name not in CATEGORIES:
                _fail(f"unknown category {name!r}")
            category_mix[name] = float(weight) if weight else 1.0
    corpus = write_corpus(out_dir, count, category_mix, seed, with_meshes=meshes)
    click.echo(f"wrote {len(corpus)} objects to {out_dir}")


@main.command("train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
def cli_train(config_path: Path):
    """Train a denoiser from a JSON config (env overrides: CAGE_*)."""
    cfg = load_config(config_path)
    try:
        tconf = train_config_from(cfg)
        dconf = denoiser_config_from(cfg)
        corpus = load_corpus(cfg["corpus"])
    except (SchemaError, TypeError, ValueError, FileNotFoundError) as e:
        _fail(str(e))
    ckpt, history = train(corpus, tconf, dconf, cfg["out_dir"])
    click.echo(f"final loss {history[-1]['loss']:.4f}; checkpoint at {ckpt}")


@main.command("generate")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--request", "request_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--corpus", "corpus_dir", default=None, type=click.Path(path_type=Path),
              help="corpus for mesh assembly (with --assemble)")
@click.option("--assemble", is_flag=True, default=False)
@click.option("--steps", default=100, show_default=True)
def cli_generate(checkpoint: Path, request_path: Path, out_dir: Path,
                 corpus_dir: Path | None, assemble: bool, steps: int):
    """Sample abstractions for a request file; optionally assemble meshes."""
    try:
        req = GenerateRequest.model_validate(json.loads(request_path.read_text(encoding="utf-8")))
    except Exception as e:
        _fail(f"invalid request: {e}")
    denoiser, sched_params, _ = load_checkpoint(checkpoint)
    from .diffusion import build_schedule

    schedule = build_schedule(sched_params["T"], sched_params["beta_min"], sched_params["beta_max"])
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        results = run_generate(denoiser, schedule, req, steps)
    except SchemaError as e:
        _fail(str(e))
    corpus = Corpus.load(corpus_dir) if (assemble and corpus_dir) else None
    for seed, parts, graph, _ in results:
        oid = f"generated_{seed}"
        save_object(parts, graph, out_dir / f"{oid}.json", oid)
        if corpus is not None:
            assembled = retrieve_and_assemble((parts, graph), corpus, req.category)
            assembled.export(out_dir / oid, oid)
    click.echo(f"wrote {len(results)} samples to {out_dir}")


@main.command("evaluate")
@click.option("--gen", "gen_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--gt", "gt_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_csv", required=True, type=click.Path(path_type=Path))
@click.option("--distance", type=click.Choice(["both", "id", "aid"]), default="both", show_default=True)
@click.option("--id-points", default=2048, show_default=True)
@click.option("--viou-samples", default=10000, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cli_evaluate(gen_dir: Path, gt_dir: Path, out_csv: Path, distance: str,
                 id_points: int, viou_samples: int, seed: int):
    """Set metrics between a generated corpus and a ground-truth corpus."""
    try:
        gen_set = load_corpus(gen_dir)
        gt_set = load_corpus(gt_dir)
    except SchemaError as e:
        _fail(str(e))
    summary = out_csv.with_suffix(".txt")
    if distance == "both":
        report = evaluate_sets(gen_set, gt_set, id_points, viou_samples, seed)
        write_report(report, out_csv, summary)
        rows = report.rows()
    else:
        if distance == "id":
            dist = lambda a, b: instantiation_distance(a, b, id_points, seed=seed)
        else:
            dist = lambda a, b: abstract_instantiation_distance(a, b, viou_samples, seed=seed)
        mat = distance_matrix(gen_set, gt_set, dist)
        aors = [aor_stats(o, n_samples=viou_samples, seed=seed) for o in gen_set]
        rows = [
            (f"mmd_{distance}", mmd_from_matrix(mat)),
            (f"cov_{distance}", cov_from_matrix(mat)),
            ("mean_aor", float(np.mean([m for m, _ in aors]))),
            ("max_aor", float(np.max([x for _, x in aors]))),
        ]
        if distance == "aid":
            rows.insert(2, ("one_nna_aid", one_nna(gen_set, gt_set, dist)))
        out_csv.write_text(
            "metric,value\n" + "".join(f"{k},{v:.6f}\n" for k, v in rows), encoding="utf-8"
        )
        summary.write_text("".join(f"{k:>12s}: {v:.4f}\n" for k, v in rows), encoding="utf-8")
    for name, value in rows:
        click.echo(f"{name:>12s}: {value:.4f}")


@main.command("assemble")
@click.option("--abstraction", "abstraction_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--category", default=None)
def cli_assemble(abstraction_path: Path, corpus_dir: Path, out_dir: Path, category: str | None):
    """Retrieve meshes for an abstraction document and export the assembly."""
    try:
        parts, graph = load_object(abstraction_path)
        corpus = Corpus.load(corpus_dir)
        assembled = retrieve_and_assemble((parts, graph), corpus, category)
    except SchemaError as e:
        _fail(str(e))
    assembled.export(out_dir, abstraction_path.stem)
    click.echo(f"assembled {len(assembled.parts)} parts into {out_dir}")


@main.command("serve")
@click.option("--checkpoint", default=None, type=click.Path(exists=True, path_type=Path))
@click.option("--corpus", "corpus_dir", default=None, type=click.Path(exists=True, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--steps", default=100, show_default=True)
def cli_serve(checkpoint: Path | None, corpus_dir: Path | None, host: str, port: int, steps: int):
    """Run the studio HTTP service."""
    import uvicorn

    app = create_app(checkpoint, corpus_dir, sample_steps=steps)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
