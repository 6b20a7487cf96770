"""
core/presets.py — Presets de rede e presets de configuração.

Presets de rede (código):
  tiny  — TinySkeletonNet, treinável em CPU
  vgg16 — VGG-16 (conv1_1–conv5_3, fc6/fc7 convolucionais) + extras conv8–conv11;
          documentado, fora da escala dos testes de treino

Presets de configuração (arquivos .json em uma pasta):
  Cada arquivo é um RunConfig parcial, mesclado sobre o padrão.
  A pasta padrão é presets/ na raiz do repositório.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Optional

from core import config as run_config
from core.errors import ConfigError
from core.network import ConvSpec, NetConfig, tiny_config
from core.priors import DEFAULT_LAYER_SCALES

DEFAULT_PRESETS_DIR = Path(__file__).parent.parent / "presets"


# ── Redes ─────────────────────────────────────────────────────────────────────

def vgg16_config(num_actions: int = 3, width: int = 512, height: int = 50,
                 layer_scales: tuple[float, ...] = DEFAULT_LAYER_SCALES) -> NetConfig:
    """Cabeças em conv4_3, fc7, conv8_2, conv9_2, conv10_2 e conv11_2."""
    def conv(name: str, ch: int, pool=None, kernel=(3, 3), stride=(1, 1)) -> ConvSpec:
        pad = (kernel[0] // 2, kernel[1] // 2)
        return ConvSpec(ch, kernel=kernel, stride=stride, pad=pad, pool=pool, name=name)

    layers = [
        conv("conv1_1", 64), conv("conv1_2", 64, pool=(2, 2)),
        conv("conv2_1", 128), conv("conv2_2", 128, pool=(2, 2)),
        conv("conv3_1", 256), conv("conv3_2", 256), conv("conv3_3", 256, pool=(1, 2)),
        conv("conv4_1", 512), conv("conv4_2", 512), conv("conv4_3", 512),
        conv("conv5_1", 512, pool=(1, 2)), conv("conv5_2", 512), conv("conv5_3", 512),
        conv("fc6", 1024), conv("fc7", 1024, kernel=(1, 1)),
        conv("conv8_1", 256, kernel=(1, 1)), conv("conv8_2", 512, stride=(2, 2)),
        conv("conv9_1", 128, kernel=(1, 1)), conv("conv9_2", 256, stride=(2, 2)),
        conv("conv10_1", 128, kernel=(1, 1)), conv("conv10_2", 256, stride=(1, 2)),
        conv("conv11_1", 128, kernel=(1, 1)), conv("conv11_2", 256, stride=(1, 2)),
    ]
    names = [spec.name for spec in layers]
    heads = tuple(names.index(n) for n in
                  ("conv4_3", "fc7", "conv8_2", "conv9_2", "conv10_2", "conv11_2"))
    return NetConfig(input_shape=(height, width, 3), backbone=tuple(layers),
                     head_layers=heads, num_actions=num_actions,
                     layer_scales=tuple(layer_scales))


NET_PRESETS: dict[str, Callable[..., NetConfig]] = {
    "tiny": tiny_config,
    "vgg16": vgg16_config,
}


def net_config(cfg: dict) -> NetConfig:
    """NetConfig a partir das seções net/encode/prior de um RunConfig."""
    net, prior = cfg["net"], cfg["prior"]
    preset = net["preset"]
    if preset not in NET_PRESETS:
        raise ConfigError(f"unknown network preset '{preset}' (known: {', '.join(NET_PRESETS)})")
    kwargs: dict = dict(num_actions=int(net["num_actions"]), width=int(cfg["encode"]["width"]))
    # null → escalas padrão do preset (uma por cabeça)
    if prior["layer_scales"] is not None:
        kwargs["layer_scales"] = tuple(float(s) for s in prior["layer_scales"])
    if preset == "tiny":
        kwargs["channels"] = tuple(int(c) for c in net["channels"])
    built = NET_PRESETS[preset](**kwargs)
    nc = NetConfig(input_shape=built.input_shape, backbone=built.backbone,
                   head_layers=built.head_layers, num_actions=built.num_actions,
                   aspect_ratios=tuple(float(a) for a in prior["aspect_ratios"]),
                   layer_scales=built.layer_scales)
    nc.validate()
    return nc


# ── Pasta de presets JSON ─────────────────────────────────────────────────────

def list_presets(folder: Optional[Path] = None) -> list[str]:
    """Nomes (sem extensão) dos .json da pasta, ordenados."""
    folder = Path(folder or DEFAULT_PRESETS_DIR)
    if not folder.is_dir():
        return []
    return sorted(p.stem for p in folder.glob("*.json"))


def preset_path(name: str, folder: Optional[Path] = None) -> Path:
    return Path(folder or DEFAULT_PRESETS_DIR) / f"{name}.json"


def load_preset(name: str, folder: Optional[Path] = None) -> dict:
    """RunConfig completo: padrão + preset."""
    path = preset_path(name, folder)
    if not path.exists():
        known = ", ".join(list_presets(folder)) or "none"
        raise ConfigError(f"preset '{name}' not found in {path.parent} (available: {known})")
    return run_config.load(path)


def save_preset(name: str, cfg: dict, folder: Optional[Path] = None) -> Path:
    """Grava só o que difere do padrão."""
    diff = _diff(run_config.defaults(), cfg)
    path = preset_path(name, folder)
    run_config.save(path, diff)
    return path


def _diff(base: dict, cfg: dict) -> dict:
    out = {}
    for key, value in cfg.items():
        if key not in base:
            raise ConfigError(f"unknown config key '{key}'")
        if isinstance(value, dict):
            sub = _diff(base[key], value)
            if sub:
                out[key] = sub
        elif json.dumps(value) != json.dumps(base[key]):
            out[key] = value
    return out
