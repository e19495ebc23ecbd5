"""Flat JSON run configuration with dotted overrides and presets.

One JSON document configures every stage; sections mirror the library
dataclasses. Sparse user files overlay the defaults, ``--set a.b=c``
overrides single leaves (values parse as JSON, bare words as strings),
and named presets bundle the standard ablation settings. Validation
rejects unknown keys anywhere in the document and reports every
violation at once, not just the first.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from pathlib import Path

from .augment import AugmentConfig
from .evaluation import ProbeConfig
from .humanmaps import HumanMapConfig
from .objective import LossWeights
from .pairs import ProposalConfig
from .synthworld import OBJECT_CLASSES, CoocConfig
from .trainer import TrainConfig

__all__ = [
    "ConfigError",
    "default_config",
    "load_config",
    "apply_overrides",
    "apply_preset",
    "validate_config",
    "config_hash",
    "PRESETS",
    "DATA_DIR_ENV",
]

DATA_DIR_ENV = "SECO_DATA_DIR"


class ConfigError(ValueError):
    """Carries the full list of config violations."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


def default_config() -> dict:
    return {
        "run": {
            "seed": 0,
            "out_dir": "runs/default",
            "data_dir": None,
        },
        "synthworld": {
            "context_classes": ["warm", "cool", "moss", "plum"],
            "object_classes": list(OBJECT_CLASSES),
            "cooc": None,
            "context_prior": None,
            "objects_per_scene": [3, 6],
            "object_size": [24, 56],
            "canvas": 224,
            "margin": 4,
            "n_train": 2000,
            "n_test": 200,
        },
        "pairs": {
            "source": "SS",
            "min_area_ratio": 0.001,
            "max_area_ratio": 0.1,
            "min_aspect": 0.2,
            "max_aspect": 5.0,
            "merge_iou": 0.3,
            "ss_scale": 100.0,
            "ss_sigma": 0.8,
            "ss_min_size": 50,
            "ss_max_side": 256,
            "ss_use_texture": False,
            "rg_count": None,
        },
        "augment": {
            "context_size": 224,
            "target_size": 96,
            "brightness": 0.4,
            "contrast": 0.4,
            "saturation": 0.4,
            "hue": 0.1,
            "grayscale_prob": 0.2,
            "blur_prob": 0.5,
            "blur_sigma": [0.1, 2.0],
            "flip_prob": 0.5,
            "shared_flip": True,
            "crop_scale": [0.5, 1.0],
            "crop_attempts": 10,
            "norm_mean": [0.5, 0.5, 0.5],
            "norm_std": [0.5, 0.5, 0.5],
        },
        "model": {
            "arch": "tiny",
            "h": 64,
            "k": 64,
            "shared_encoder": False,
            "use_memory": True,
            "projection_bias": True,
        },
        "objective": {
            "alpha": 25.0,
            "beta": 25.0,
            "gamma": 1.0,
            "var_target": 1.0,
            "var_eps": 1.0e-4,
            "halve_var": False,
        },
        "trainer": {
            "batch_size": 64,
            "epochs": 20,
            "warmup_epochs": 10,
            "pairs_per_image": 4,
            "min_lr": 2.0e-4,
            "momentum": 0.9,
            "weight_decay": 1.0e-6,
            "checkpoint_every": 1,
        },
        "probe": {
            "input_mode": "concat",
            "epochs": 300,
            "lr": 1.0e-2,
            "weight_decay": 0.0,
            "batch_size": 512,
        },
        "evaluation": {
            "grid_sizes": [8, 14, 28, 56, 112],
        },
        "humanmaps": {
            "grid": 32,
            "kernel_size": 11,
            "sigma": 1.5,
            "output_size": 224,
            "image_size": [800, 800],
        },
        "collection": {
            "port": 8765,
            "trials_per_session": 20,
            "sessions_per_pair": 3,
            "pairs_per_image": 4,
            "image_size": 800,
            "required_clicks": 10,
        },
    }


PRESETS = {
    "source-ss": {"pairs.source": "SS"},
    "source-gt": {"pairs.source": "GT"},
    "source-rg": {"pairs.source": "RG"},
    "arch-sa": {"model.shared_encoder": True},
    "arch-nsa": {"model.shared_encoder": False},
    "mem-on": {"model.use_memory": True},
    "mem-off": {"model.use_memory": False},
    "loss-25-25-1": {"objective.alpha": 25.0, "objective.beta": 25.0, "objective.gamma": 1.0},
    "loss-1-1-0": {"objective.alpha": 1.0, "objective.beta": 1.0, "objective.gamma": 0.0},
    "loss-0-25-1": {"objective.alpha": 0.0, "objective.beta": 25.0, "objective.gamma": 1.0},
    "loss-25-0-1": {"objective.alpha": 25.0, "objective.beta": 0.0, "objective.gamma": 1.0},
    "loss-1-0-0": {"objective.alpha": 1.0, "objective.beta": 0.0, "objective.gamma": 0.0},
}

# leaves that may hold null (auto-derived or optional values)
_NULLABLE = {
    "run.data_dir",
    "synthworld.cooc",
    "synthworld.context_prior",
    "pairs.rg_count",
}


def _walk_unknown(user: dict, defaults: dict, prefix: str, problems: list[str]) -> None:
    for key, value in user.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            problems.append(f"unknown key: {path}")
            continue
        if isinstance(defaults[key], dict) and defaults[key]:
            if not isinstance(value, dict):
                problems.append(f"{path}: expected a section object")
            else:
                _walk_unknown(value, defaults[key], path + ".", problems)


def _type_ok(value, default, path: str) -> bool:
    if value is None:
        return path in _NULLABLE
    if default is None:
        return True  # nullable leaf, any JSON value allowed; dataclass validates later
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, (int, float)):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list)
    return True


def validate_config(cfg: dict) -> list[str]:
    """All structural violations, empty when the config is acceptable."""
    defaults = default_config()
    problems: list[str] = []
    if not isinstance(cfg, dict):
        return ["config root must be a JSON object"]
    _walk_unknown(cfg, defaults, "", problems)

    def check_types(user: dict, defs: dict, prefix: str) -> None:
        for key, value in user.items():
            if key not in defs:
                continue
            path = f"{prefix}{key}"
            if isinstance(defs[key], dict) and defs[key]:
                if isinstance(value, dict):
                    check_types(value, defs[key], path + ".")
            elif not _type_ok(value, defs[key], path):
                problems.append(
                    f"{path}: expected {type(defs[key]).__name__}, got {type(value).__name__}"
                )

    check_types(cfg, defaults, "")
    return problems


def _deep_merge(base: dict, overlay: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None) -> dict:
    """Defaults overlaid with a sparse user file; raises ConfigError."""
    cfg = default_config()
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError([f"{path}: invalid JSON ({e})"]) from e
        problems = validate_config(user)
        if problems:
            raise ConfigError(problems)
        cfg = _deep_merge(cfg, user)
    if cfg["run"]["data_dir"] is None:
        cfg["run"]["data_dir"] = os.environ.get(DATA_DIR_ENV)
    return cfg


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, sets: list[str]) -> dict:
    """In-place dotted-path assignments like ``trainer.epochs=5``."""
    problems = []
    for item in sets:
        if "=" not in item:
            problems.append(f"override {item!r} is not of the form path=value")
            continue
        path, _, raw = item.partition("=")
        keys = path.strip().split(".")
        node = cfg
        defaults = default_config()
        ok = True
        for key in keys[:-1]:
            if not isinstance(node, dict) or key not in node:
                problems.append(f"unknown key: {path.strip()}")
                ok = False
                break
            node = node[key]
            defaults = defaults.get(key, {}) if isinstance(defaults, dict) else {}
        if not ok:
            continue
        leaf = keys[-1]
        if not isinstance(node, dict) or leaf not in node:
            problems.append(f"unknown key: {path.strip()}")
            continue
        value = _parse_value(raw)
        if isinstance(defaults, dict) and leaf in defaults:
            if not _type_ok(value, defaults[leaf], path.strip()):
                problems.append(
                    f"{path.strip()}: expected {type(defaults[leaf]).__name__}, "
                    f"got {type(value).__name__}"
                )
                continue
        node[leaf] = value
    if problems:
        raise ConfigError(problems)
    return cfg


def apply_preset(cfg: dict, name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(
            [f"unknown preset {name!r}; choose from {sorted(PRESETS)}"]
        )
    return apply_overrides(cfg, [f"{k}={json.dumps(v)}" for k, v in PRESETS[name].items()])


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ------------------------------------------------- typed section builders

def cooc_config(cfg: dict) -> CoocConfig:
    s = cfg["synthworld"]
    kwargs = dict(
        context_classes=tuple(s["context_classes"]),
        object_classes=tuple(s["object_classes"]),
        objects_per_scene=tuple(s["objects_per_scene"]),
        object_size=tuple(s["object_size"]),
        canvas=s["canvas"],
        margin=s["margin"],
    )
    if s["cooc"] is not None:
        kwargs["cooc"] = s["cooc"]
    if s["context_prior"] is not None:
        kwargs["context_prior"] = s["context_prior"]
    out = CoocConfig(**kwargs)
    out.validate()
    return out


def proposal_config(cfg: dict) -> ProposalConfig:
    p = cfg["pairs"]
    out = ProposalConfig(**p)
    out.validate()
    return out


def augment_config(cfg: dict) -> AugmentConfig:
    a = dict(cfg["augment"])
    for key in ("blur_sigma", "crop_scale", "norm_mean", "norm_std"):
        a[key] = tuple(a[key])
    out = AugmentConfig(**a)
    out.validate()
    return out


def loss_weights(cfg: dict) -> LossWeights:
    out = LossWeights(**cfg["objective"])
    out.validate()
    return out


def train_config(cfg: dict) -> TrainConfig:
    out = TrainConfig(seed=cfg["run"]["seed"], **cfg["trainer"])
    out.validate()
    return out


def probe_config(cfg: dict) -> ProbeConfig:
    out = ProbeConfig(seed=cfg["run"]["seed"], **cfg["probe"])
    out.validate()
    return out


def humanmap_config(cfg: dict) -> HumanMapConfig:
    h = dict(cfg["humanmaps"])
    h["image_size"] = tuple(h["image_size"])
    out = HumanMapConfig(**h)
    out.validate()
    return out


def model_kwargs(cfg: dict) -> dict:
    m = cfg["model"]
    a = cfg["augment"]
    return dict(
        arch=m["arch"],
        h=m["h"],
        k=m["k"],
        seed=cfg["run"]["seed"],
        shared_encoder=m["shared_encoder"],
        use_memory=m["use_memory"],
        projection_bias=m["projection_bias"],
        context_size=a["context_size"],
        target_size=a["target_size"],
    )
