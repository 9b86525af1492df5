"""Training loop: permutation augmentation, LR schedule, optimization.

Each iteration draws a batch of objects, re-encodes them under a fresh node
permutation, and averages the denoising loss over several independent
(timestep, noise) draws per object. Epoch randomness is keyed on
(seed, epoch) so a resumed run reproduces the original losses exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch

from . import diffusion
from .denoiser import Denoiser, DenoiserConfig, save_checkpoint, load_checkpoint
from .diffusion import build_schedule, q_sample, valid_slot_mask
from .schema import ArticulationGraph, PartAbstraction, encode


@dataclass
class TrainConfig:
    epochs: int = 5000
    batch: int = 64
    timesteps_per_object: int = 10
    lr: float = 5e-4
    warmup_epochs: int = 20
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.01
    seed: int = 0
    grad_clip: float = 1.0
    checkpoint_every: int = 500
    stop_at_loss: float | None = None  # early exit once the epoch loss dips below

    def __post_init__(self):
        if min(self.epochs, self.batch, self.timesteps_per_object) < 1:
            raise ValueError("epochs, batch and timesteps_per_object must be positive")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lr must be positive and weight_decay nonnegative")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError("need 0 <= warmup_epochs < epochs")


def augment_permute(
    parts: list[PartAbstraction],
    graph: ArticulationGraph,
    rng: np.random.Generator,
) -> tuple[list[PartAbstraction], ArticulationGraph]:
    """Uniformly permute node order over the valid prefix.

    Part i moves to slot perm[i]; parent pointers follow, so the decoded
    object is set-equal to the original.
    """
    n = graph.num_parts
    perm = rng.permutation(n)
    new_parts: list[PartAbstraction | None] = [None] * n
    new_parent = np.empty(n, dtype=np.int64)
    for i in range(n):
        new_parts[perm[i]] = parts[i]
        p = int(graph.parent[i])
        new_parent[perm[i]] = -1 if p < 0 else int(perm[p])
    new_graph = ArticulationGraph(n, new_parent, graph.category, graph.max_nodes)
    return new_parts, new_graph  # type: ignore[return-value]


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Linear warmup from 0, then cosine decay hitting 0 at the last epoch."""
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"epoch {epoch} outside 0..{config.epochs - 1}")
    if epoch <= config.warmup_epochs:
        if config.warmup_epochs == 0:
            return config.lr
        return config.lr * epoch / config.warmup_epochs
    span = config.epochs - 1 - config.warmup_epochs
    progress = (epoch - config.warmup_epochs) / span if span > 0 else 1.0
    return config.lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def _epoch_generators(seed: int, epoch: int) -> tuple[np.random.Generator, torch.Generator]:
    """Per-epoch RNGs; resuming at any epoch replays the same draws."""
    mix = (seed * 1_000_003 + epoch) % (2**63 - 1)
    np_rng = np.random.default_rng(mix)
    torch_gen = torch.Generator().manual_seed(mix)
    return np_rng, torch_gen


def _batch_loss(
    denoiser: Denoiser,
    objects: list[tuple[list[PartAbstraction], ArticulationGraph]],
    schedule,
    draws: int,
    np_rng: np.random.Generator,
    torch_gen: torch.Generator,
) -> torch.Tensor:
    x0s, graphs, cats = [], [], []
    for parts, graph in objects:
        parts_p, graph_p = augment_permute(parts, graph, np_rng)
        x0s.append(torch.from_numpy(encode(parts_p, graph_p)).float())
        graphs.append(graph_p)
        cats.append(graph_p.category)

    x0 = torch.stack(x0s).repeat_interleave(draws, dim=0)
    graphs_rep = [g for g in graphs for _ in range(draws)]
    cats_rep = [c for c in cats for _ in range(draws)]
    B = x0.shape[0]

    t = torch.randint(1, schedule.T + 1, (B,), generator=torch_gen)
    eps = torch.randn(x0.shape, generator=torch_gen)
    x_t = q_sample(x0, t, eps, schedule)
    eps_hat = denoiser(x_t, t, cats_rep, graphs_rep)

    valid = torch.stack([valid_slot_mask(g, torch.float32) for g in graphs_rep])
    per_seq = ((eps_hat - eps) ** 2 * valid).sum(dim=(1, 2, 3)) / valid.sum(dim=(1, 2, 3))
    return per_seq.mean()


def train(
    corpus: list[tuple[list[PartAbstraction], ArticulationGraph]],
    config: TrainConfig,
    denoiser_config: DenoiserConfig,
    out_dir: str | Path,
    resume_from: str | Path | None = None,
) -> tuple[Path, list[dict]]:
    """Train a denoiser on the corpus; returns (checkpoint path, history).

    Writes `metrics.csv` (epoch, loss, lr), periodic checkpoints, and
    `checkpoint.pt` at the end. A NaN loss aborts with a diagnostic dump.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule = build_schedule()

    start_epoch = 0
    if resume_from is not None:
        denoiser, _, meta = load_checkpoint(resume_from)
        if denoiser.config != denoiser_config:
            raise ValueError("checkpoint config does not match requested config")
        optimizer = _make_optimizer(denoiser, config)
        optimizer.load_state_dict(meta["optimizer"])
        start_epoch = int(meta["epoch"]) + 1
    else:
        torch.manual_seed(config.seed)
        denoiser = Denoiser(denoiser_config)
        optimizer = _make_optimizer(denoiser, config)

    denoiser.train()
    history: list[dict] = []
    log_path = out_dir / "metrics.csv"
    log_mode = "a" if resume_from is not None and log_path.exists() else "w"
    schedule_params = {"T": schedule.T, "beta_min": 1e-4, "beta_max": 0.02}

    with open(log_path, log_mode, newline="", encoding="utf-8") as log_file:
        writer = csv.writer(log_file)
        if log_mode == "w":
            writer.writerow(["epoch", "loss", "lr"])

        for epoch in range(start_epoch, config.epochs):
            np_rng, torch_gen = _epoch_generators(config.seed, epoch)
            lr = lr_at(epoch, config)
            for group in optimizer.param_groups:
                group["lr"] = lr

            order = np_rng.permutation(len(corpus))
            losses = []
            for i in range(0, len(order), config.batch):
                batch = [corpus[j] for j in order[i : i + config.batch]]
                loss = _batch_loss(
                    denoiser, batch, schedule, config.timesteps_per_object, np_rng, torch_gen
                )
                if not torch.isfinite(loss):
                    dump = out_dir / f"nan_dump_epoch{epoch}.pt"
                    torch.save({"epoch": epoch, "batch_indices": order[i : i + config.batch]}, dump)
                    raise FloatingPointError(f"non-finite loss at epoch {epoch}; dump at {dump}")
                optimizer.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(denoiser.parameters(), config.grad_clip)
                optimizer.step()
                losses.append(float(loss.item()))

            epoch_loss = float(np.mean(losses))
            history.append({"epoch": epoch, "loss": epoch_loss, "lr": lr})
            writer.writerow([epoch, f"{epoch_loss:.6f}", f"{lr:.8g}"])

            save_needed = (epoch + 1) % config.checkpoint_every == 0
            if save_needed:
                _save(denoiser, optimizer, epoch, schedule_params, config,
                      out_dir / f"checkpoint_epoch{epoch + 1}.pt")
            if config.stop_at_loss is not None and epoch_loss < config.stop_at_loss:
                break

    final_path = out_dir / "checkpoint.pt"
    _save(denoiser, optimizer, history[-1]["epoch"] if history else start_epoch - 1,
          schedule_params, config, final_path)
    return final_path, history


def _make_optimizer(denoiser: Denoiser, config: TrainConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(
        denoiser.parameters(),
        lr=config.lr,
        betas=config.betas,
        weight_decay=config.weight_decay,
    )


def _save(denoiser, optimizer, epoch, schedule_params, config: TrainConfig, path: Path):
    meta = {
        "epoch": int(epoch),
        "optimizer": optimizer.state_dict(),
        "train_config": asdict(config),
    }
    save_checkpoint(denoiser, path, schedule_params, meta)
