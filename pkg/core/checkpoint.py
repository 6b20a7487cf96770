"""
core/checkpoint.py — Checkpoint versionado em JSON.

Estrutura:
{
  "format": "skelbox-checkpoint",
  "version": 1,
  "epoch": 12,
  "net": {...NetConfig.to_dict()...},
  "train": {...TrainConfig.to_dict()...},
  "params":   {"block1.w": {"shape": [3, 3, 3, 16], "data": "<base64 float64 LE>"}, ...},
  "velocity": {...mesmo formato...},
  "schedule": {...PlateauSchedule.state()...},
  "loss_log": [[epoch, loss, lr], ...],
  "encode":   {"mode": "invariant", "width": 512, "stats": null}
}
Chaves ordenadas e dados binários little-endian → arquivo byte-idêntico para
o mesmo estado.
"""
from __future__ import annotations

import base64
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from core.errors import ValidationError
from core.network import NetConfig, SkeletonNet
from core.training import EpochRecord, PlateauSchedule, TrainConfig

log = logging.getLogger(__name__)

FORMAT_NAME = "skelbox-checkpoint"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    net_config: NetConfig
    params: dict[str, np.ndarray]
    epoch: int = 0
    train_config: Optional[TrainConfig] = None
    velocity: dict[str, np.ndarray] = field(default_factory=dict)
    schedule: Optional[PlateauSchedule] = None
    loss_log: list[EpochRecord] = field(default_factory=list)
    encode: dict = field(default_factory=dict)

    def build_net(self) -> SkeletonNet:
        return SkeletonNet(self.net_config, params=self.params)


# ── Tensores ──────────────────────────────────────────────────────────────────

def _pack(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype=_DTYPE).tobytes()
    return {"shape": list(arr.shape), "data": base64.b64encode(data).decode("ascii")}


def _unpack(entry: dict, name: str) -> np.ndarray:
    try:
        raw = base64.b64decode(entry["data"], validate=True)
        shape = tuple(int(s) for s in entry["shape"])
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"checkpoint tensor '{name}' is malformed: {e}") from e
    if len(raw) != _DTYPE.itemsize * int(np.prod(shape, dtype=np.int64)):
        raise ValidationError(f"checkpoint tensor '{name}' has {len(raw)} bytes for shape {shape}")
    return np.frombuffer(raw, dtype=_DTYPE).reshape(shape).astype(np.float64)


# ── Salvar / carregar ─────────────────────────────────────────────────────────

def save_checkpoint(ckpt: Checkpoint, path: Path) -> Path:
    """Grava atomicamente (arquivo .tmp + replace)."""
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "epoch": ckpt.epoch,
        "net": ckpt.net_config.to_dict(),
        "train": ckpt.train_config.to_dict() if ckpt.train_config else None,
        "params": {k: _pack(v) for k, v in ckpt.params.items()},
        "velocity": {k: _pack(v) for k, v in ckpt.velocity.items()},
        "schedule": ckpt.schedule.state() if ckpt.schedule else None,
        "loss_log": [[r.epoch, r.loss, r.lr] for r in ckpt.loss_log],
        "encode": ckpt.encode,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")
    tmp.replace(path)
    log.debug("checkpoint saved to %s (epoch %d)", path, ckpt.epoch)
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path} is not a checkpoint: {e}") from e
    if doc.get("format") != FORMAT_NAME:
        raise ValidationError(f"{path} is not a checkpoint")
    if doc.get("version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported checkpoint version {doc.get('version')}")

    net_config = NetConfig.from_dict(doc["net"])
    params = {k: _unpack(v, k) for k, v in doc["params"].items()}
    expected = SkeletonNet(net_config, seed=0).params
    if set(params) != set(expected):
        raise ValidationError("checkpoint parameters do not match its network config")
    for k, v in expected.items():
        if params[k].shape != v.shape:
            raise ValidationError(f"checkpoint tensor '{k}' has shape {params[k].shape}, expected {v.shape}")
    # reordena na ordem canônica da rede
    params = {k: params[k] for k in expected}

    train = doc.get("train")
    schedule = doc.get("schedule")
    return Checkpoint(
        net_config=net_config,
        params=params,
        epoch=int(doc.get("epoch", 0)),
        train_config=TrainConfig(**train) if train else None,
        velocity={k: _unpack(v, k) for k, v in doc.get("velocity", {}).items()},
        schedule=PlateauSchedule.from_state(schedule) if schedule else None,
        loss_log=[EpochRecord(int(e), float(l), float(r)) for e, l, r in doc.get("loss_log", [])],
        encode=doc.get("encode") or {},
    )
