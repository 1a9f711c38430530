"""Run configuration: one strict JSON document for every subsystem.

Unknown keys are rejected with their full path (hyperparameter typos should
fail loudly, not train silently); missing keys take the documented defaults.
Two hashes are derived: `content_hash` covers the whole merged document and
stamps every artifact for provenance; `model_hash` covers only the subset
that determines checkpoint compatibility (schedule, model dims, task), so
evaluation runs may vary eval-only settings without being refused.
"""

from __future__ import annotations

import copy
import json

from .dataset import DeformFamilyConfig, SdfFamilyConfig
from .denoiser import ModelConfig, config_hash
from .diffusion import TrainConfig, default_noise_resolution
from .metrics import EvalConfig
from .noise_field import DomainSpec
from .schedule import NoiseSchedule

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "default_config"]

_TASKS = {
    # task -> (domain_dim, range_dim)
    "sdf2d": (2, 1),
    "sdf3d": (3, 1),
    "deform_circle": (2, 2),
}

_INT, _FLOAT, _STR, _BOOL = "int", "float", "str", "bool"


def _field(kind, default, choices=None):
    return {"kind": kind, "default": default, "choices": choices}


_SCHEMA = {
    "schedule": {
        "kind": _field(_STR, "default", choices=("default",)),
        "num_steps": _field(_INT, 50),
        "eps_sigma": _field(_FLOAT, 1e-6),
    },
    "noise": {
        "resolution": _field("int_list", None),  # None -> per-task default
        "seed": _field(_INT, 0),
    },
    "dataset": {
        "task": _field(_STR, "sdf2d", choices=tuple(_TASKS)),
        "count": _field(_INT, 512),
        "seed": _field(_INT, 1),
        "n_cond": _field(_INT, None),  # None -> family default
        "context_size": _field(_INT, 256),
        "query_size": _field(_INT, 64),
        "radius_range": _field("float_pair", (0.15, 0.4)),
        "shapes_range": _field("int_pair", None),  # None -> per-task default
        "inner_box": _field(_FLOAT, 0.8),
        "deform_order": _field(_INT, 2),
        "deform_max_norm": _field(_FLOAT, 0.3),
        "deform_min_norm": _field(_FLOAT, 0.05),
    },
    "model": {
        "latents": _field(_INT, 64),
        "width": _field(_INT, 64),
        "stages": _field(_INT, 2),
        "heads": _field(_INT, 4),
        "freqs": _field(_INT, 6),
        "mlp_ratio": _field(_INT, 4),
        "head_mlp_ratio": _field(_INT, 8),
        "value_tile": _field(_INT, 16),
    },
    "train": {
        "steps": _field(_INT, 2000),
        "batch_size": _field(_INT, 16),
        "lr": _field(_FLOAT, 3e-4),
        "warmup": _field(_INT, 200),
        "lr_decay": _field(_STR, "cosine", choices=("cosine", "none")),
        "lr_floor": _field(_FLOAT, 0.05),
        "clip_norm": _field(_FLOAT, 1.0),
        "seed": _field(_INT, 0),
        "context_strategy": _field(_STR, "uniform", choices=("uniform", "grid")),
        "query_strategy": _field(_STR, "mixed", choices=("uniform", "mixed", "grid", "context")),
        "near_fraction": _field(_FLOAT, 0.5),
        "near_sigma": _field(_FLOAT, 0.05),
        "log_interval": _field(_INT, 50),
        "ckpt_interval": _field(_INT, 1000),
    },
    "sample": {
        "num_steps": _field(_INT, 50),
        "context_size": _field(_INT, None),  # None -> train context size
        "seed": _field(_INT, 0),
        "grid": _field(_INT, 128),
    },
    "eval": {
        "count": _field(_INT, 64),
        "seed": _field(_INT, 7),
        "sample_steps": _field(_INT, 50),
        "n_interior": _field(_INT, 10000),
        "n_boundary": _field(_INT, 10000),
        "n_mc": _field(_INT, 1024),
        "n_deform": _field(_INT, 2048),
        "fd_h": _field(_FLOAT, 1e-3),
        "contour_grid": _field(_INT, 128),
        "contour_points": _field(_INT, 2048),
        "fscore_tau": _field(_FLOAT, 0.02),
    },
}


class ConfigError(ValueError):
    """Invalid configuration; message carries the offending key path."""


def _check_value(path: str, spec: dict, value):
    kind = spec["kind"]
    if value is None and spec["default"] is None:
        return None
    if kind == _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected integer, got {value!r}")
        return value
    if kind == _FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected number, got {value!r}")
        return float(value)
    if kind == _STR:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected string, got {value!r}")
        if spec["choices"] and value not in spec["choices"]:
            raise ConfigError(f"{path}: {value!r} not one of {spec['choices']}")
        return value
    if kind == "int_list":
        if not isinstance(value, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{path}: expected a list of integers, got {value!r}")
        return list(value)
    if kind in ("int_pair", "float_pair"):
        ok_type = int if kind == "int_pair" else (int, float)
        if (
            not isinstance(value, (list, tuple))
            or len(value) != 2
            or not all(isinstance(v, ok_type) and not isinstance(v, bool) for v in value)
        ):
            raise ConfigError(f"{path}: expected a pair of numbers, got {value!r}")
        return tuple(value)
    raise AssertionError(kind)


def parse_config(document: dict) -> "RunConfig":
    """Validate a JSON-like dict against the schema; unknown keys fail."""
    if not isinstance(document, dict):
        raise ConfigError("top level: expected a JSON object")
    merged: dict = {}
    for section, fields in _SCHEMA.items():
        given = document.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"{section}: expected an object")
        unknown = set(given) - set(fields)
        if unknown:
            raise ConfigError(f"{section}.{sorted(unknown)[0]}: unknown key")
        merged[section] = {
            key: _check_value(f"{section}.{key}", spec, given.get(key, copy.deepcopy(spec["default"])))
            for key, spec in fields.items()
        }
    unknown = set(document) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown section")
    return RunConfig(merged)


def load_config(path: str) -> "RunConfig":
    try:
        with open(path) as fh:
            document = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(document)


def default_config() -> "RunConfig":
    return parse_config({})


class RunConfig:
    """The merged, validated configuration plus typed accessors."""

    def __init__(self, merged: dict):
        self.raw = merged
        dim, range_dim = _TASKS[merged["dataset"]["task"]]
        self.domain_dim = dim
        self.range_dim = range_dim

    # -- hashing --

    @property
    def content_hash(self) -> str:
        return config_hash(self.raw)

    @property
    def model_hash(self) -> str:
        subset = {
            "schedule": self.raw["schedule"],
            "model": self.raw["model"],
            "task": self.raw["dataset"]["task"],
        }
        return config_hash(subset)

    # -- typed accessors --

    def schedule(self) -> NoiseSchedule:
        s = self.raw["schedule"]
        return NoiseSchedule(kind=s["kind"], eps_sigma=s["eps_sigma"])

    def model_config(self) -> ModelConfig:
        m = self.raw["model"]
        return ModelConfig(domain_dim=self.domain_dim, range_dim=self.range_dim, **m)

    def noise_resolution(self) -> list:
        res = self.raw["noise"]["resolution"]
        if res is None:
            return default_noise_resolution(self.domain_dim)
        if len(res) != self.domain_dim:
            raise ConfigError(
                f"noise.resolution: needs {self.domain_dim} entries, got {len(res)}"
            )
        return list(res)

    def train_config(self) -> TrainConfig:
        t = self.raw["train"]
        d = self.raw["dataset"]
        return TrainConfig(
            steps=t["steps"],
            batch_size=t["batch_size"],
            lr=t["lr"],
            warmup=t["warmup"],
            lr_decay=t["lr_decay"],
            lr_floor=t["lr_floor"],
            clip_norm=t["clip_norm"],
            seed=t["seed"],
            context_size=d["context_size"],
            query_size=d["query_size"],
            context_strategy=t["context_strategy"],
            query_strategy=t["query_strategy"],
            near_fraction=t["near_fraction"],
            near_sigma=t["near_sigma"],
            noise_resolution=tuple(self.noise_resolution()),
        )

    def eval_config(self) -> EvalConfig:
        e = self.raw["eval"]
        return EvalConfig(
            seed=e["seed"],
            sample_steps=e["sample_steps"],
            context_size=self.sample_context_size(),
            noise_resolution=tuple(self.noise_resolution()),
            n_interior=e["n_interior"],
            n_boundary=e["n_boundary"],
            n_mc=e["n_mc"],
            n_deform=e["n_deform"],
            fd_h=e["fd_h"],
            contour_grid=e["contour_grid"],
            contour_points=e["contour_points"],
            fscore_tau=e["fscore_tau"],
        )

    def sample_context_size(self) -> int:
        explicit = self.raw["sample"]["context_size"]
        return explicit if explicit is not None else self.raw["dataset"]["context_size"]

    # -- dataset construction --

    def family_config(self):
        d = self.raw["dataset"]
        task = d["task"]
        if task in ("sdf2d", "sdf3d"):
            dim = 2 if task == "sdf2d" else 3
            defaults = SdfFamilyConfig(dim=3, shapes_range=(1, 2), n_cond=64) if dim == 3 else SdfFamilyConfig()
            return SdfFamilyConfig(
                dim=dim,
                inner_box=d["inner_box"],
                radius_range=d["radius_range"],
                shapes_range=d["shapes_range"] or defaults.shapes_range,
                n_cond=d["n_cond"] or defaults.n_cond,
            )
        return DeformFamilyConfig(
            order=d["deform_order"],
            max_norm=d["deform_max_norm"],
            min_norm=d["deform_min_norm"],
            n_corr=d["n_cond"] or DeformFamilyConfig().n_corr,
        )

    def make_dataset(self, count: int | None = None, seed: int | None = None) -> list:
        from .dataset import generate_deformation_family, generate_sdf_family

        d = self.raw["dataset"]
        count = count if count is not None else d["count"]
        seed = seed if seed is not None else d["seed"]
        if d["task"] in ("sdf2d", "sdf3d"):
            return generate_sdf_family(count, seed, self.family_config())
        return generate_deformation_family(count, seed, self.family_config())

    def domain(self) -> DomainSpec:
        return self.make_dataset(count=1, seed=0)[0].domain
