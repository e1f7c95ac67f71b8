"""Run configuration: defaults, JSON config files, and flag overrides.

Precedence, lowest to highest: built-in defaults, the PROOFPATH_SEED
environment variable (seed only), the JSON config file, command-line
overrides.  Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from pathlib import Path
from typing import Any, Mapping

from .backend import DEFAULT_LOOP_TEMPLATE, SyntheticSpec
from .dqn import DqnConfig
from .errors import ConfigError
from .loops import LoopDetectorConfig
from .rng import stream_seed
from .search import SearchConfig

SEED_ENV_VAR = "PROOFPATH_SEED"

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "out_dir": "runs",
    "timing": False,
    "loop": {
        "alpha": 20,
        "beta": 0.1,
        "rho": 20,
        "delta": 3,
        "ordered_pairs": True,
    },
    "dqn": {
        "gamma": 0.9,
        "lr": 0.01,
        "capacity": 7000,
        "batch": 64,
        "bmax": 16,
        "hidden": [64, 64],
        "feature_dim": 64,
        "eps_start": 0.99,
        "eps_end": 0.1,
        "eps_anneal": 100,
        "negative_reward": -10.0,
        "positive_reward": 10.0,
        "positive_training": False,
    },
    "search": {
        "workers": 8,
        "max_epochs": 200,
        "depth_bound_initial": 5,
        "depth_bound_increment": 5,
        "path_cap": 500,
        "train_steps": 1,
    },
    "backend": {
        "kind": "synthetic",
        "trace_file": None,
        "synthetic": {
            "seed": None,
            "correct_depth": 5,
            "branching": 2,
            "decoy_delay": 4,
            "n_decoys": 2,
            "support_position": "last",
            "dead_prob": 0.1,
            "loop_template": DEFAULT_LOOP_TEMPLATE,
        },
    },
}


def default_config() -> dict[str, Any]:
    return copy.deepcopy(DEFAULTS)


def _merge(base: dict, incoming: Mapping, path: str = "") -> None:
    for key, value in incoming.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"{where} must be an object")
            _merge(base[key], value, where + ".")
        else:
            base[key] = value


def _coerce(dotted: str, raw: str, template: Any) -> Any:
    """Parse a flag value against the type of its default."""
    if isinstance(template, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{dotted}: expected true/false, got {raw!r}")
    if isinstance(template, int) and not isinstance(template, bool):
        try:
            return int(raw)
        except ValueError:
            # loop.delta accepts inf to disable detection
            if raw.lower() in ("inf", "infinity"):
                return math.inf
            raise ConfigError(f"{dotted}: expected an integer, got {raw!r}") from None
    if isinstance(template, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{dotted}: expected a number, got {raw!r}") from None
    if isinstance(template, list):
        return [int(part) for part in raw.split(",") if part]
    if template is None or isinstance(template, str):
        return None if raw == "none" else raw
    raise ConfigError(f"{dotted}: unsupported override type")  # pragma: no cover


def _lookup_default(dotted: str) -> Any:
    node: Any = DEFAULTS
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"unknown config key: {dotted}")
        node = node[part]
    if isinstance(node, dict):
        raise ConfigError(f"{dotted} is a section, not a value")
    return node


def apply_override(cfg: dict, dotted: str, raw_value: str) -> None:
    template = _lookup_default(dotted)
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = _coerce(dotted, raw_value, template)


def load_config(
    config_file: str | Path | None = None,
    overrides: Mapping[str, str] | None = None,
    seed_flag: int | None = None,
    env: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    """Assemble the effective config from all sources, strictly validated."""
    cfg = default_config()
    env = os.environ if env is None else env
    if SEED_ENV_VAR in env:
        try:
            cfg["seed"] = int(env[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from None
    if config_file is not None:
        try:
            loaded = json.loads(Path(config_file).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_file}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        _merge(cfg, loaded)
    for dotted, raw in (overrides or {}).items():
        apply_override(cfg, dotted, raw)
    if seed_flag is not None:
        cfg["seed"] = seed_flag
    validate_config(cfg)
    return cfg


def validate_config(cfg: Mapping[str, Any]) -> None:
    """Build every component config once, so bad values fail early."""
    try:
        build_loop_config(cfg)
        build_dqn_config(cfg)
        build_search_config(cfg)
        if cfg["backend"]["kind"] not in ("synthetic", "trace"):
            raise ValueError("backend.kind must be synthetic or trace")
        if cfg["backend"]["kind"] == "synthetic":
            build_synthetic_spec(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def build_loop_config(cfg: Mapping[str, Any]) -> LoopDetectorConfig:
    loop = cfg["loop"]
    return LoopDetectorConfig(
        alpha=loop["alpha"],
        beta=loop["beta"],
        rho=loop["rho"],
        delta=loop["delta"],
        ordered_pairs=loop["ordered_pairs"],
    )


def build_dqn_config(cfg: Mapping[str, Any]) -> DqnConfig:
    d = cfg["dqn"]
    return DqnConfig(
        gamma=d["gamma"],
        lr=d["lr"],
        capacity=d["capacity"],
        batch=d["batch"],
        bmax=d["bmax"],
        hidden=tuple(d["hidden"]),
        feature_dim=d["feature_dim"],
        eps_start=d["eps_start"],
        eps_end=d["eps_end"],
        eps_anneal=d["eps_anneal"],
        negative_reward=d["negative_reward"],
        positive_reward=d["positive_reward"],
        positive_training=d["positive_training"],
    )


def build_search_config(cfg: Mapping[str, Any]) -> SearchConfig:
    s = cfg["search"]
    return SearchConfig(
        workers=s["workers"],
        max_epochs=s["max_epochs"],
        depth_bound_initial=s["depth_bound_initial"],
        depth_bound_increment=s["depth_bound_increment"],
        path_cap=s["path_cap"],
        train_steps=s["train_steps"],
        seed=cfg["seed"],
        measure_wall_time=cfg["timing"],
        loop=build_loop_config(cfg),
        dqn=build_dqn_config(cfg),
    )


def build_synthetic_spec(cfg: Mapping[str, Any]) -> SyntheticSpec:
    b = cfg["backend"]["synthetic"]
    seed = b["seed"]
    if seed is None:
        seed = stream_seed(cfg["seed"], "backend") % 2**63
    return SyntheticSpec(
        seed=seed,
        correct_depth=b["correct_depth"],
        branching=b["branching"],
        decoy_delay=b["decoy_delay"],
        n_decoys=b["n_decoys"],
        support_position=b["support_position"],
        dead_prob=b["dead_prob"],
        loop_template=b["loop_template"],
    )


def config_hash(cfg: Mapping[str, Any]) -> str:
    """Hash of the semantic config; the output location does not participate."""
    semantic = {k: v for k, v in cfg.items() if k != "out_dir"}
    canon = json.dumps(semantic, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def dump_defaults() -> str:
    return json.dumps(DEFAULTS, indent=2, sort_keys=True)
