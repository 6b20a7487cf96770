"""
core/config.py — RunConfig: um único documento JSON com uma seção por etapa.

Estrutura (valores padrão em _DEFAULT):
{
  "synth":     {"num_classes": 3, "num_train": 200, "num_test": 50, ...},
  "encode":    {"mode": "invariant", "width": 512},
  "prior":     {"aspect_ratios": [...], "layer_scales": null (padrão do preset), "match_threshold": 0.5, ...},
  "net":       {"preset": "tiny", "num_actions": 3, "channels": [16, 32, 64, 64, 64]},
  "train":     {"lr": 4e-06, "momentum": 0.9, ...},
  "inference": {"conf_threshold": 0.01, "top_k": 200, "nms_iou": 0.45},
  "eval":      {"thetas": [0.1, 0.3, 0.5, 0.7]}
}
Arquivos parciais são mesclados sobre o padrão; chaves desconhecidas são
rejeitadas. Flags do CLI sobrescrevem o arquivo.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Optional

from core.errors import ConfigError
from core.evaluation import DEFAULT_THETAS
from core.postprocess import DEFAULT_CONF_THRESHOLD, DEFAULT_NMS_IOU, DEFAULT_TOP_K
from core.priors import DEFAULT_ASPECT_RATIOS, DEFAULT_MATCH_THRESHOLD, DEFAULT_NEG_POS_RATIO
from core.skeleton_io import SynthConfig
from core.training import TrainConfig

ENCODE_MODES = ("invariant", "global")

_TRAIN_KEYS = ("lr", "momentum", "weight_decay", "batch_size", "lr_drop_factor",
               "lr_drops_max", "plateau_patience", "max_epochs", "seed", "augment_prob", "alpha")

_DEFAULT: dict = {
    "synth": {
        "num_classes": 3,
        "num_train": 200,
        "num_test": 50,
        "seq_len_range": [300, 500],
        "segment_len_range": [60, 140],
        "noise_amplitude": 0.005,
        "seed": 42,
        "frame_rate": 30.0,
    },
    "encode": {
        "mode": "invariant",
        "width": 512,
    },
    "prior": {
        "aspect_ratios": list(DEFAULT_ASPECT_RATIOS),
        "layer_scales": None,
        "match_threshold": DEFAULT_MATCH_THRESHOLD,
        "neg_pos_ratio": DEFAULT_NEG_POS_RATIO,
    },
    "net": {
        "preset": "tiny",
        "num_actions": 3,
        "channels": [16, 32, 64, 64, 64],
    },
    "train": {k: getattr(TrainConfig(), k) for k in _TRAIN_KEYS},
    "inference": {
        "conf_threshold": DEFAULT_CONF_THRESHOLD,
        "top_k": DEFAULT_TOP_K,
        "nms_iou": DEFAULT_NMS_IOU,
    },
    "eval": {
        "thetas": list(DEFAULT_THETAS),
    },
}


def defaults() -> dict:
    return copy.deepcopy(_DEFAULT)


def merge(base: dict, override: dict, where: str = "") -> dict:
    """Mescla `override` sobre `base` (cópia). Chave desconhecida → ConfigError."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{where}.{key}" if where else key
        if key not in out:
            raise ConfigError(f"unknown config key '{path}'")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key '{path}' must be an object")
            out[key] = merge(out[key], value, path)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load(path: Optional[Path] = None) -> dict:
    """Padrão + arquivo (se houver)."""
    if path is None:
        return defaults()
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return merge(_DEFAULT, data)


def dumps(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def save(path: Path, cfg: dict) -> None:
    """Persiste de forma atômica via arquivo temporário."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(cfg))
    tmp.replace(path)


def set_value(cfg: dict, dotted: str, value: Any) -> None:
    """Sobrescreve "secao.chave" in-place (usado pelas flags do CLI)."""
    section, _, key = dotted.partition(".")
    if section not in cfg or key not in cfg[section]:
        raise ConfigError(f"unknown config key '{dotted}'")
    cfg[section][key] = value


# ── Construtores das configs tipadas ──────────────────────────────────────────

def synth_config(cfg: dict) -> SynthConfig:
    s = cfg["synth"]
    sc = SynthConfig(
        num_classes=int(s["num_classes"]),
        num_sequences=int(s["num_train"]) + int(s["num_test"]),
        seq_len_range=tuple(int(v) for v in s["seq_len_range"]),
        segment_len_range=tuple(int(v) for v in s["segment_len_range"]),
        noise_amplitude=float(s["noise_amplitude"]),
        seed=int(s["seed"]),
        frame_rate=float(s["frame_rate"]),
    )
    sc.validate()
    return sc


def train_config(cfg: dict) -> TrainConfig:
    t, p = cfg["train"], cfg["prior"]
    try:
        tc = TrainConfig(**t, match_threshold=float(p["match_threshold"]),
                         neg_pos_ratio=float(p["neg_pos_ratio"]))
    except TypeError as e:
        raise ConfigError(f"train section: {e}") from e
    tc.validate()
    return tc


def encode_mode(cfg: dict) -> str:
    mode = cfg["encode"]["mode"]
    if mode not in ENCODE_MODES:
        raise ConfigError(f"encode.mode must be one of {ENCODE_MODES}, got '{mode}'")
    return mode
