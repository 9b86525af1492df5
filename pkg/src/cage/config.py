"""Structured config files with CAGE_-prefixed environment overrides.

A config is a JSON document with sections ("train", "denoiser", plus paths).
`CAGE_<SECTION>_<FIELD>=value` overrides one field; values parse as JSON when
possible and fall back to strings.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .denoiser import DenoiserConfig
from .training import TrainConfig

ENV_PREFIX = "CAGE_"

DEFAULT_CONFIG = {
    "corpus": "corpus",
    "out_dir": "runs/default",
    "train": {},
    "denoiser": {},
}


def load_config(path: str | Path | None, env: dict[str, str] | None = None) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path is not None:
        loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        for key, value in loaded.items():
            if isinstance(value, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
    return apply_env_overrides(cfg, env if env is not None else dict(os.environ))


def apply_env_overrides(cfg: dict, env: dict[str, str]) -> dict:
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        try:
            value = json.loads(raw)
        except (json.JSONDecodeError, ValueError):
            value = raw
        section, _, fieldname = key.partition("_")
        if section in cfg and isinstance(cfg[section], dict) and fieldname:
            cfg[section][fieldname] = value
        else:
            cfg[key] = value
    return cfg


def train_config_from(cfg: dict) -> TrainConfig:
    fields = dict(cfg.get("train", {}))
    if "betas" in fields:
        fields["betas"] = tuple(fields["betas"])
    return TrainConfig(**fields)


def denoiser_config_from(cfg: dict) -> DenoiserConfig:
    fields = dict(cfg.get("denoiser", {}))
    if "ablate" in fields:
        fields["ablate"] = tuple(fields["ablate"])
    return DenoiserConfig(**fields)
