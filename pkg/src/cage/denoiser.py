"""Noise-prediction network.

Every attribute row of the 5 x K x M tensor becomes one token (node-major
order, 5 tokens per node). Tokens run through a stack of attribute attention
blocks, each holding three masked attention stages (within-node, all valid
nodes, parent/child only) and a pointwise feed-forward, all wrapped in
zero-initialized adaptive-layernorm gating driven by the timestep and
category embeddings. Graph structure enters purely through attention masks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .schema import ArticulationGraph, CATEGORIES, K, M, NUM_ATTRIBUTES, SchemaError

CHECKPOINT_VERSION = 1

SUBLAYERS = ("la", "ga", "gra", "ff")


@dataclass(frozen=True)
class DenoiserConfig:
    layers: int = 12
    heads: int = 32
    token_dim: int = 128
    max_nodes: int = K
    slots: int = M
    num_attributes: int = NUM_ATTRIBUTES
    num_categories: int = len(CATEGORIES)
    timesteps: int = 1000
    ablate: tuple[str, ...] = ()  # sublayers skipped entirely (ablation studies)

    def __post_init__(self):
        if self.token_dim % self.heads != 0:
            raise ValueError(f"token_dim {self.token_dim} not divisible by heads {self.heads}")
        if self.token_dim % 2 != 0:
            raise ValueError("token_dim must be even for the timestep encoding")
        for name in self.ablate:
            if name not in SUBLAYERS:
                raise ValueError(f"unknown sublayer {name!r}")


# desk-scale preset for CPU runs; the full-size config is the default above
DESK_CONFIG = DenoiserConfig(layers=6, heads=8, token_dim=64)


@dataclass
class AttentionMasks:
    """Boolean keep-masks over the 5K token sequence (True = attend)."""

    la: torch.Tensor   # block-diagonal within each node's 5 tokens
    ga: torch.Tensor   # all-pairs over valid-node tokens
    gra: torch.Tensor  # parent/child token blocks plus the root self-loop

    def sliced(self, num_tokens: int) -> "AttentionMasks":
        return AttentionMasks(
            self.la[:num_tokens, :num_tokens],
            self.ga[:num_tokens, :num_tokens],
            self.gra[:num_tokens, :num_tokens],
        )


def build_masks(graph: ArticulationGraph, num_attributes: int = NUM_ATTRIBUTES) -> AttentionMasks:
    """Token-level attention masks for one graph.

    Padded token rows fall back to a self key so no attention row is empty;
    their outputs are discarded downstream.
    """
    n_nodes = graph.max_nodes
    L = n_nodes * num_attributes
    node_of = torch.arange(L) // num_attributes
    valid_node = torch.from_numpy(graph.valid_mask.astype(bool))
    valid_tok = valid_node[node_of]

    same_node = node_of.unsqueeze(1) == node_of.unsqueeze(0)
    both_valid = valid_tok.unsqueeze(1) & valid_tok.unsqueeze(0)

    la = same_node & both_valid
    ga = both_valid.clone()
    adj = torch.from_numpy(graph.attn_adjacency.astype(bool))
    gra = adj[node_of.unsqueeze(1), node_of.unsqueeze(0)]

    eye = torch.eye(L, dtype=torch.bool)
    for m in (la, ga, gra):
        empty_rows = ~m.any(dim=1)
        m |= eye & empty_rows.unsqueeze(1)
    return AttentionMasks(la, ga, gra)


def timestep_encoding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    """Sinusoidal features, (B, dim); deterministic and injective over 1..T."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(max_period) * torch.arange(half, dtype=torch.float64) / half
    )
    args = t.double().reshape(-1, 1) * freqs.reshape(1, -1)
    return torch.cat([torch.cos(args), torch.sin(args)], dim=-1)


class MaskedAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        B, L, D = x.shape
        qkv = self.qkv(x).reshape(B, L, 3, self.heads, D // self.heads).permute(2, 0, 3, 1, 4)
        q, k, v = qkv.unbind(0)
        out = F.scaled_dot_product_attention(q, k, v, attn_mask=mask)
        return self.proj(out.transpose(1, 2).reshape(B, L, D))


class FeedForward(nn.Module):
    def __init__(self, dim: int, ratio: int = 4):
        super().__init__()
        self.fc1 = nn.Linear(dim, ratio * dim)
        self.fc2 = nn.Linear(ratio * dim, dim)

    def forward(self, x: torch.Tensor, mask=None) -> torch.Tensor:
        return self.fc2(F.gelu(self.fc1(x)))


def _modulate(x: torch.Tensor, shift: torch.Tensor, scale: torch.Tensor) -> torch.Tensor:
    return x * (1.0 + scale.unsqueeze(1)) + shift.unsqueeze(1)


class AttributeAttentionBlock(nn.Module):
    """LA -> GA -> GRA -> FF, each as a gated residual sublayer.

    Per sublayer the condition vector regresses (shift, scale, gate); gates
    start at zero so the whole block is the identity at initialization.
    """

    def __init__(self, config: DenoiserConfig):
        super().__init__()
        dim = config.token_dim
        self.ablate = config.ablate
        self.ops = nn.ModuleDict(
            {
                "la": MaskedAttention(dim, config.heads),
                "ga": MaskedAttention(dim, config.heads),
                "gra": MaskedAttention(dim, config.heads),
                "ff": FeedForward(dim),
            }
        )
        self.norms = nn.ModuleDict(
            {name: nn.LayerNorm(dim, elementwise_affine=False) for name in SUBLAYERS}
        )
        self.modulation = nn.Sequential(nn.SiLU(), nn.Linear(dim, 3 * len(SUBLAYERS) * dim))
        nn.init.zeros_(self.modulation[-1].weight)
        nn.init.zeros_(self.modulation[-1].bias)

    def forward(self, x: torch.Tensor, cond: torch.Tensor, masks: dict) -> torch.Tensor:
        params = self.modulation(cond).chunk(3 * len(SUBLAYERS), dim=-1)
        for i, name in enumerate(SUBLAYERS):
            if name in self.ablate:
                continue
            shift, scale, gate = params[3 * i], params[3 * i + 1], params[3 * i + 2]
            h = _modulate(self.norms[name](x), shift, scale)
            h = self.ops[name](h, masks.get(name))
            x = x + gate.unsqueeze(1) * h
        return x


class Denoiser(nn.Module):
    """Predicts the noise residual for a batch of attribute tensors."""

    def __init__(self, config: DenoiserConfig | None = None):
        super().__init__()
        self.config = config or DenoiserConfig()
        cfg = self.config
        dim = cfg.token_dim

        self.token_proj = nn.Linear(cfg.slots, dim)
        self.attr_embed = nn.Embedding(cfg.num_attributes, dim)
        self.node_embed = nn.Embedding(cfg.max_nodes, dim)
        self.time_proj = nn.Linear(dim, dim)
        self.category_embed = nn.Embedding(cfg.num_categories, dim)

        self.blocks = nn.ModuleList(
            AttributeAttentionBlock(cfg) for _ in range(cfg.layers)
        )
        self.final_norm = nn.LayerNorm(dim, elementwise_affine=False)
        self.head = nn.Linear(dim, cfg.slots)
        # zero output head: the untrained model predicts zero noise
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

        # token index -> (node, attr), node-major
        attr_idx = torch.arange(cfg.max_nodes * cfg.num_attributes) % cfg.num_attributes
        node_idx = torch.arange(cfg.max_nodes * cfg.num_attributes) // cfg.num_attributes
        self.register_buffer("attr_idx", attr_idx, persistent=False)
        self.register_buffer("node_idx", node_idx, persistent=False)

    # --- embedding stages -------------------------------------------------

    def embed_tokens(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 5, K, M) -> (B, 5K, dim) with attribute and node encodings."""
        B = x.shape[0]
        rows = x.permute(0, 2, 1, 3).reshape(B, -1, self.config.slots)  # node-major
        tokens = self.token_proj(rows)
        L = tokens.shape[1]
        return tokens + self.attr_embed(self.attr_idx[:L]) + self.node_embed(self.node_idx[:L])

    def embed_condition(self, t: torch.Tensor, categories) -> tuple[torch.Tensor, torch.Tensor]:
        t = torch.as_tensor(t, dtype=torch.long).reshape(-1)
        cat_idx = self._category_indices(categories)
        t_feat = timestep_encoding(t, self.config.token_dim).to(self.time_proj.weight.dtype)
        return self.time_proj(t_feat), self.category_embed(cat_idx)

    def _category_indices(self, categories) -> torch.Tensor:
        if isinstance(categories, torch.Tensor):
            idx = categories.long()
        else:
            try:
                idx = torch.tensor([CATEGORIES.index(c) for c in categories], dtype=torch.long)
            except ValueError as e:
                raise SchemaError(f"unknown category in {list(categories)!r}") from e
        if idx.numel() and (idx.min() < 0 or idx.max() >= self.config.num_categories):
            raise SchemaError("category index out of range")
        return idx

    # --- forward -----------------------------------------------------------

    def forward(
        self,
        x_t: torch.Tensor,
        t: torch.Tensor,
        categories,
        graphs: list[ArticulationGraph],
    ) -> torch.Tensor:
        cfg = self.config
        x_t = x_t.to(self.head.weight.dtype)
        B = x_t.shape[0]
        if x_t.shape != (B, cfg.num_attributes, cfg.max_nodes, cfg.slots):
            raise SchemaError(f"input shape {tuple(x_t.shape)} does not match config")

        # only the valid prefix participates; trailing padded nodes are sliced off
        n_active = max(g.num_parts for g in graphs)
        L = n_active * cfg.num_attributes

        tokens = self.embed_tokens(x_t[:, :, :n_active, :])
        t_vec, c_vec = self.embed_condition(t, categories)
        cond = t_vec + c_vec

        mask_sets = [build_masks(g, cfg.num_attributes).sliced(L) for g in graphs]
        masks = {
            name: torch.stack([getattr(ms, name) for ms in mask_sets]).unsqueeze(1)
            for name in ("la", "ga", "gra")
        }

        h = tokens
        for block in self.blocks:
            h = block(h, cond, masks)
        out_rows = self.head(self.final_norm(h))  # (B, L, M)

        out = x_t.new_zeros(B, cfg.num_attributes, cfg.max_nodes, cfg.slots)
        out[:, :, :n_active, :] = out_rows.reshape(
            B, n_active, cfg.num_attributes, cfg.slots
        ).permute(0, 2, 1, 3)
        return out

    def denoise(self, x_t, t: int, category: str, graph: ArticulationGraph) -> torch.Tensor:
        """Unbatched convenience wrapper, (5, K, M) -> (5, K, M)."""
        x = torch.as_tensor(x_t).unsqueeze(0)
        with torch.no_grad():
            out = self.forward(x, torch.tensor([t]), [category], [graph])
        return out[0]


# --- checkpointing ----------------------------------------------------------


def save_checkpoint(
    denoiser: Denoiser,
    path: str | Path,
    schedule_params: dict | None = None,
    meta: dict | None = None,
) -> None:
    """Atomic checkpoint write (temp file + rename)."""
    path = Path(path)
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "denoiser_config": asdict(denoiser.config),
        "schedule": schedule_params or {"T": 1000, "beta_min": 1e-4, "beta_max": 0.02},
        "state_dict": denoiser.state_dict(),
        "meta": meta or {},
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path: str | Path):
    """Returns (denoiser, schedule_params, meta)."""
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    cfg_dict = dict(payload["denoiser_config"])
    cfg_dict["ablate"] = tuple(cfg_dict.get("ablate", ()))
    config = DenoiserConfig(**cfg_dict)
    denoiser = Denoiser(config)
    denoiser.load_state_dict(payload["state_dict"])
    denoiser.eval()
    return denoiser, payload["schedule"], payload.get("meta", {})
