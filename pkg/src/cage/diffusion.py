"""DDPM machinery over attribute tensors.

Linear-beta schedule (T=1000), closed-form forward corruption, the simplified
noise-prediction loss, ancestral reverse steps, and a strided 100-step sampler
with inpainting-style conditioning on known attribute entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import torch

from .schema import ArticulationGraph, K, M, NUM_ATTRIBUTES, SchemaError

T_DEFAULT = 1000
BETA_MIN_DEFAULT = 1e-4
BETA_MAX_DEFAULT = 0.02
SAMPLE_STEPS_DEFAULT = 100


@dataclass(frozen=True)
class NoiseSchedule:
    """Beta/alpha tables indexed by timestep t in 1..T (index 0 is t=0: clean)."""

    T: int
    betas: np.ndarray       # betas[0] = 0, betas[1..T] linear
    alphas: np.ndarray      # 1 - betas
    alpha_bars: np.ndarray  # cumulative product of alphas, alpha_bars[0] = 1

    def beta(self, t: int) -> float:
        return float(self.betas[t])

    def alpha(self, t: int) -> float:
        return float(self.alphas[t])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[t])


@lru_cache(maxsize=8)
def build_schedule(
    T: int = T_DEFAULT,
    beta_min: float = BETA_MIN_DEFAULT,
    beta_max: float = BETA_MAX_DEFAULT,
) -> NoiseSchedule:
    if not (0.0 < beta_min < beta_max < 1.0):
        raise ValueError(f"need 0 < beta_min < beta_max < 1, got ({beta_min}, {beta_max})")
    if T < 1:
        raise ValueError("T must be >= 1")
    betas = np.zeros(T + 1, dtype=np.float64)
    betas[1:] = np.linspace(beta_min, beta_max, T)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    betas.setflags(write=False)
    alphas.setflags(write=False)
    alpha_bars.setflags(write=False)
    return NoiseSchedule(T, betas, alphas, alpha_bars)


def _gather(values: np.ndarray, t, ref: torch.Tensor) -> torch.Tensor:
    """Schedule value(s) at t, broadcastable against (B, 5, K, M) `ref`."""
    t_idx = torch.as_tensor(t, dtype=torch.long).reshape(-1)
    out = torch.from_numpy(values[t_idx.numpy()]).to(ref.dtype)
    if ref.dim() == 4:
        return out.view(-1, 1, 1, 1)
    return out.squeeze()


def q_sample(
    x0: torch.Tensor, t, eps: torch.Tensor, schedule: NoiseSchedule | None = None
) -> torch.Tensor:
    """Closed-form corruption: sqrt(a_bar_t) x0 + sqrt(1 - a_bar_t) eps."""
    schedule = schedule or build_schedule()
    ab = _gather(schedule.alpha_bars, t, x0)
    return torch.sqrt(ab) * x0 + torch.sqrt(1.0 - ab) * eps


def valid_slot_mask(graph: ArticulationGraph, dtype=torch.float64) -> torch.Tensor:
    """(5, K, M) indicator of slots belonging to valid (non-padded) nodes."""
    mask = torch.zeros(NUM_ATTRIBUTES, graph.max_nodes, M, dtype=dtype)
    mask[:, : graph.num_parts, :] = 1.0
    return mask


def masked_mse(
    pred: torch.Tensor, target: torch.Tensor, valid: torch.Tensor
) -> torch.Tensor:
    """Mean squared error over valid-node entries only."""
    diff = (pred - target) ** 2 * valid
    return diff.sum() / valid.sum().clamp(min=1.0)


def training_loss(
    denoiser,
    x0: torch.Tensor,
    graph: ArticulationGraph,
    category: str,
    rng: torch.Generator | None = None,
    schedule: NoiseSchedule | None = None,
    t: int | None = None,
    eps: torch.Tensor | None = None,
) -> torch.Tensor:
    """Noise-prediction MSE for one object at a uniformly drawn timestep.

    `t` and `eps` may be pinned for deterministic checks; otherwise they are
    drawn from `rng`.
    """
    schedule = schedule or build_schedule()
    x0 = torch.as_tensor(x0)
    if t is None:
        t = int(torch.randint(1, schedule.T + 1, (1,), generator=rng).item())
    if eps is None:
        eps = torch.randn(x0.shape, generator=rng, dtype=x0.dtype)
    x_t = q_sample(x0.unsqueeze(0), t, eps.unsqueeze(0), schedule)
    eps_hat = denoiser(x_t, torch.tensor([t]), [category], [graph])
    valid = valid_slot_mask(graph, dtype=x0.dtype).unsqueeze(0)
    return masked_mse(eps_hat, eps.unsqueeze(0), valid)


def _reverse_step(
    x: torch.Tensor,
    eps_hat: torch.Tensor,
    alpha_eff: float,
    alpha_bar_t: float,
    noise: torch.Tensor | None,
    variance: float | None = None,
) -> torch.Tensor:
    """Posterior-mean step; noise scale defaults to beta_eff = 1 - alpha_eff."""
    beta_eff = 1.0 - alpha_eff
    mean = (x - beta_eff / np.sqrt(1.0 - alpha_bar_t) * eps_hat) / np.sqrt(alpha_eff)
    if noise is None:
        return mean
    sigma2 = beta_eff if variance is None else variance
    return mean + np.sqrt(sigma2) * noise


def ddpm_step(
    x_t: torch.Tensor,
    eps_hat: torch.Tensor,
    t: int,
    schedule: NoiseSchedule | None = None,
    rng: torch.Generator | None = None,
) -> torch.Tensor:
    """One ancestral step x_t -> x_{t-1}; deterministic (no noise) at t=1."""
    schedule = schedule or build_schedule()
    if t < 1:
        raise ValueError("t must be >= 1")
    noise = None
    if t > 1:
        noise = torch.randn(x_t.shape, generator=rng, dtype=x_t.dtype)
    return _reverse_step(x_t, eps_hat, schedule.alpha(t), schedule.alpha_bar(t), noise)


@dataclass
class ConditionMask:
    """Known attribute entries held at their clean values during sampling."""

    mask: np.ndarray      # (5, K, M) in {0, 1}
    x0_known: np.ndarray  # (5, K, M), valid normalized values where mask=1

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.float64)
        self.x0_known = np.asarray(self.x0_known, dtype=np.float64)
        if self.mask.shape != self.x0_known.shape:
            raise SchemaError("condition mask and x0_known shapes differ")

    def validate(self, graph: ArticulationGraph) -> None:
        if self.mask.shape != (NUM_ATTRIBUTES, graph.max_nodes, M):
            raise SchemaError(f"condition mask shape {self.mask.shape} invalid")
        if np.any(self.mask[:, graph.num_parts:, :] != 0):
            raise SchemaError("condition mask touches padded nodes")
        known = self.x0_known[self.mask > 0]
        if known.size and (not np.all(np.isfinite(known)) or np.abs(known).max() > 1.0 + 1e-9):
            raise SchemaError("conditioned entries outside [-1, 1]")


def sample_timesteps(T: int, steps: int) -> list[int]:
    """Descending uniform-stride subsequence of 1..T ending above 0."""
    if not 1 <= steps <= T:
        raise ValueError(f"steps must be in 1..{T}")
    stride = T // steps
    return list(range(T, 0, -stride))[:steps]


def sample_batch(
    denoiser,
    graphs: list[ArticulationGraph],
    categories: list[str],
    steps: int = SAMPLE_STEPS_DEFAULT,
    conditions: list[ConditionMask | None] | None = None,
    seed: int = 0,
    schedule: NoiseSchedule | None = None,
) -> np.ndarray:
    """Reverse-sample a batch of attribute tensors, one per graph.

    Runs `steps` strided timesteps of the trained schedule. Conditioned
    entries are overwritten with their forward-diffused clean values at every
    step and set exactly after the last one. Padded slots stay 0. Output is
    (B, 5, K, M) float64; a fixed seed gives a bit-identical result.
    """
    schedule = schedule or build_schedule()
    B = len(graphs)
    if conditions is None:
        conditions = [None] * B
    for g, cond in zip(graphs, conditions):
        if cond is not None:
            cond.validate(g)

    gen = torch.Generator().manual_seed(seed)
    dtype = torch.float32
    max_nodes = graphs[0].max_nodes
    valid = torch.stack([valid_slot_mask(g, dtype) for g in graphs])
    cmask = torch.zeros(B, NUM_ATTRIBUTES, max_nodes, M, dtype=dtype)
    cknown = torch.zeros(B, NUM_ATTRIBUTES, max_nodes, M, dtype=dtype)
    for b, cond in enumerate(conditions):
        if cond is not None:
            cmask[b] = torch.from_numpy(cond.mask).to(dtype)
            cknown[b] = torch.from_numpy(cond.x0_known).to(dtype)

    shape = (B, NUM_ATTRIBUTES, max_nodes, M)
    x = torch.randn(shape, generator=gen, dtype=dtype) * valid

    ts = sample_timesteps(schedule.T, steps)
    prev_ts = ts[1:] + [0]
    with torch.no_grad():
        for t, t_prev in zip(ts, prev_ts):
            if cmask.any():
                eps_c = torch.randn(shape, generator=gen, dtype=dtype)
                x_known = q_sample(cknown, [t] * B, eps_c, schedule)
                x = torch.where(cmask > 0, x_known, x)
            t_batch = torch.full((B,), t, dtype=torch.long)
            eps_hat = denoiser(x, t_batch, categories, graphs)
            ab_t, ab_prev = schedule.alpha_bar(t), schedule.alpha_bar(t_prev)
            alpha_eff = ab_t / ab_prev
            noise = None
            variance = None
            if t_prev > 0:
                noise = torch.randn(shape, generator=gen, dtype=dtype)
                # marginal-preserving posterior variance of the strided chain;
                # plain beta_eff over-noises badly at wide strides near t=0
                variance = (1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - alpha_eff)
            x = _reverse_step(x, eps_hat, alpha_eff, ab_t, noise, variance)
            x = x * valid

    out = x.double().numpy()
    for b, cond in enumerate(conditions):
        if cond is not None:
            out[b][cond.mask > 0] = cond.x0_known[cond.mask > 0]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("sampler produced non-finite values")
    return out


def sample(
    denoiser,
    graph: ArticulationGraph,
    category: str,
    steps: int = SAMPLE_STEPS_DEFAULT,
    condition: ConditionMask | None = None,
    seed: int = 0,
    schedule: NoiseSchedule | None = None,
) -> np.ndarray:
    """Single-object sampling; see sample_batch."""
    return sample_batch(
        denoiser, [graph], [category], steps, [condition], seed, schedule
    )[0]
