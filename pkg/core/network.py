"""
core/network.py — Detector single-shot em escala de mesa.

Estrutura (NetConfig):
  backbone   — lista de ConvSpec (conv + ReLU + max-pool opcional)
  head_layers — índices do backbone que emitem predições
  cabeças    — por mapa: conv 5×1 para loc (|ratios|·4) e conf (|ratios|·(K+1))

TinySkeletonNet (preset padrão, ver tiny_config):
  50×512×3 → b1 16ch, pool 2×2 → b2 32ch, pool 2×2 → b3/b4/b5 64ch, pool 1×2
  (só colunas) → extra1/extra2 stride 2. Cabeças em b3, b4, b5, extra1, extra2.

Ordem das predições achatadas: camada-major, linha-major, ratio-minor,
idêntica a generate_priors.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from core.encoding import ActionImage
from core.errors import ConfigError, ShapeError
from core.layers import (Pair, Tensor, conv2d, conv2d_backward, conv_output_shape,
                         maxpool, maxpool_backward, relu, relu_backward)
from core.priors import DEFAULT_ASPECT_RATIOS, PriorConfig, generate_priors

log = logging.getLogger(__name__)

DETECTION_KERNEL: Pair = (5, 1)
BACKGROUND_BIAS: float = 2.0


# ── Configuração ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ConvSpec:
    channels: int
    kernel: Pair = (3, 3)
    stride: Pair = (1, 1)
    pad: Pair = (1, 1)
    pool: Optional[Pair] = None
    name: str = ""


@dataclass(frozen=True)
class NetConfig:
    input_shape: tuple[int, int, int] = (50, 512, 3)
    backbone: tuple[ConvSpec, ...] = ()
    head_layers: tuple[int, ...] = ()
    num_actions: int = 3
    detection_kernel: Pair = DETECTION_KERNEL
    aspect_ratios: tuple[float, ...] = DEFAULT_ASPECT_RATIOS
    layer_scales: tuple[float, ...] = ()

    @property
    def num_classes(self) -> int:
        """K ações + 1 fundo (classe 0)."""
        return self.num_actions + 1

    def layer_name(self, index: int) -> str:
        return self.backbone[index].name or f"conv{index + 1}"

    def feature_shapes(self) -> list[tuple[int, int, int]]:
        """Shape [H, W, C] da saída de cada camada do backbone."""
        h, w, _ = self.input_shape
        shapes = []
        for i, spec in enumerate(self.backbone):
            if h + 2 * spec.pad[0] < spec.kernel[0] or w + 2 * spec.pad[1] < spec.kernel[1]:
                raise ConfigError(f"layer {self.layer_name(i)} kernel exceeds its {h}x{w} input")
            h, w = conv_output_shape(h, w, spec.kernel, spec.stride, spec.pad)
            if spec.pool is not None:
                h, w = h // spec.pool[0], w // spec.pool[1]
            if h < 1 or w < 1:
                raise ConfigError(f"layer {self.layer_name(i)} collapses the feature map to {h}x{w}")
            shapes.append((h, w, spec.channels))
        return shapes

    def head_shapes(self) -> tuple[tuple[int, int], ...]:
        shapes = self.feature_shapes()
        return tuple(shapes[i][:2] for i in self.head_layers)

    def prior_config(self) -> PriorConfig:
        return PriorConfig(aspect_ratios=tuple(self.aspect_ratios),
                           layer_scales=tuple(self.layer_scales),
                           feature_map_shapes=self.head_shapes())

    def validate(self) -> None:
        if self.detection_kernel != DETECTION_KERNEL:
            raise ConfigError(f"detection kernel must be 5x1, got {self.detection_kernel}")
        if self.num_actions < 1:
            raise ConfigError(f"num_actions must be positive, got {self.num_actions}")
        if not self.head_layers or any(not 0 <= i < len(self.backbone) for i in self.head_layers):
            raise ConfigError(f"head_layers out of range: {self.head_layers}")
        cols = [c for _, c in self.head_shapes()]
        if any(b >= a for a, b in zip(cols, cols[1:])):
            raise ConfigError(f"head feature maps need strictly decreasing columns, got {cols}")
        self.prior_config().validate()

    # ── (de)serialização ──────────────────────────────────────────
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NetConfig":
        backbone = tuple(
            ConvSpec(channels=int(s["channels"]), kernel=tuple(s["kernel"]),
                     stride=tuple(s["stride"]), pad=tuple(s["pad"]),
                     pool=tuple(s["pool"]) if s.get("pool") else None, name=s.get("name", ""))
            for s in data["backbone"]
        )
        return cls(input_shape=tuple(data["input_shape"]), backbone=backbone,
                   head_layers=tuple(data["head_layers"]), num_actions=int(data["num_actions"]),
                   detection_kernel=tuple(data["detection_kernel"]),
                   aspect_ratios=tuple(float(a) for a in data["aspect_ratios"]),
                   layer_scales=tuple(float(s) for s in data["layer_scales"]))


def tiny_config(num_actions: int = 3, width: int = 512, height: int = 50,
                channels: tuple[int, ...] = (16, 32, 64, 64, 64),
                layer_scales: tuple[float, ...] = (0.2, 0.375, 0.55, 0.725, 0.9)) -> NetConfig:
    """TinySkeletonNet: 5 blocos 3×3 + 2 camadas extra stride 2, cabeças em b3..b5 e extras."""
    c1, c2, c3, c4, c5 = channels
    backbone = (
        ConvSpec(c1, pool=(2, 2), name="block1"),
        ConvSpec(c2, pool=(2, 2), name="block2"),
        ConvSpec(c3, pool=(1, 2), name="block3"),
        ConvSpec(c4, pool=(1, 2), name="block4"),
        ConvSpec(c5, pool=(1, 2), name="block5"),
        ConvSpec(c5, stride=(2, 2), name="extra1"),
        ConvSpec(c5, stride=(2, 2), name="extra2"),
    )
    return NetConfig(input_shape=(height, width, 3), backbone=backbone,
                     head_layers=(2, 3, 4, 5, 6), num_actions=num_actions,
                     layer_scales=layer_scales)


# ── Rede ──────────────────────────────────────────────────────────────────────

@dataclass
class ForwardCache:
    inputs: list[Tensor] = field(default_factory=list)      # entrada de cada conv
    pre_act: list[Tensor] = field(default_factory=list)     # conv + bias
    post_act: list[Tensor] = field(default_factory=list)    # ReLU
    features: list[Tensor] = field(default_factory=list)    # saída do bloco (após pool)


class SkeletonNet:
    """
    Rede single-shot parametrizada por NetConfig.

    Uso básico:
        net = SkeletonNet(tiny_config(num_actions=3), seed=0)
        loc, conf = net.predict(x)            # [P, 4], [P, K+1]
    """

    def __init__(self, config: NetConfig, seed: int = 0,
                 params: Optional[dict[str, Tensor]] = None) -> None:
        config.validate()
        self.config = config
        self.params: dict[str, Tensor] = params if params is not None else self._init_params(seed)

    # ──────────────────────────────────────────────────────────────
    # Inicialização
    # ──────────────────────────────────────────────────────────────

    def _init_params(self, seed: int) -> dict[str, Tensor]:
        """He-uniforme nas convs; cabeças zeradas, bias de fundo +2 em conf."""
        cfg = self.config
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        params: dict[str, Tensor] = {}
        c_in = cfg.input_shape[2]
        for i, spec in enumerate(cfg.backbone):
            fan_in = spec.kernel[0] * spec.kernel[1] * c_in
            limit = np.sqrt(6.0 / fan_in)
            name = cfg.layer_name(i)
            params[f"{name}.w"] = rng.uniform(-limit, limit,
                                              size=(*spec.kernel, c_in, spec.channels))
            params[f"{name}.b"] = np.zeros(spec.channels)
            c_in = spec.channels

        n_ratios = len(cfg.aspect_ratios)
        kh, kw = cfg.detection_kernel
        for j, li in enumerate(cfg.head_layers):
            ch = cfg.backbone[li].channels
            params[f"head{j}.loc.w"] = np.zeros((kh, kw, ch, n_ratios * 4))
            params[f"head{j}.loc.b"] = np.zeros(n_ratios * 4)
            params[f"head{j}.conf.w"] = np.zeros((kh, kw, ch, n_ratios * cfg.num_classes))
            bias = np.zeros((n_ratios, cfg.num_classes))
            bias[:, 0] = BACKGROUND_BIAS
            params[f"head{j}.conf.b"] = bias.reshape(-1)
        return params

    @property
    def head_pad(self) -> Pair:
        kh, kw = self.config.detection_kernel
        return (kh // 2, kw // 2)

    # ──────────────────────────────────────────────────────────────
    # Forward / backward
    # ──────────────────────────────────────────────────────────────

    def check_input(self, x: Tensor) -> None:
        if x.shape != tuple(self.config.input_shape):
            raise ShapeError("network input size mismatch", x.shape, self.config.input_shape)

    def forward(self, x: Tensor) -> tuple[list[tuple[Tensor, Tensor]], ForwardCache]:
        """x [H, W, 3] → por cabeça (loc [r, c, |ratios|·4], conf [r, c, |ratios|·(K+1)])."""
        self.check_input(x)
        cfg, p = self.config, self.params
        cache = ForwardCache()
        h = x
        for i, spec in enumerate(cfg.backbone):
            name = cfg.layer_name(i)
            z = conv2d(h, p[f"{name}.w"], spec.stride, spec.pad) + p[f"{name}.b"]
            a = relu(z)
            out = maxpool(a, spec.pool) if spec.pool is not None else a
            cache.inputs.append(h)
            cache.pre_act.append(z)
            cache.post_act.append(a)
            cache.features.append(out)
            h = out

        heads = []
        for j, li in enumerate(cfg.head_layers):
            f = cache.features[li]
            loc = conv2d(f, p[f"head{j}.loc.w"], (1, 1), self.head_pad) + p[f"head{j}.loc.b"]
            conf = conv2d(f, p[f"head{j}.conf.w"], (1, 1), self.head_pad) + p[f"head{j}.conf.b"]
            heads.append((loc, conf))
        return heads, cache

    def backward(self, cache: ForwardCache,
                 head_grads: list[tuple[Tensor, Tensor]]) -> dict[str, Tensor]:
        cfg, p = self.config, self.params
        grads: dict[str, Tensor] = {}
        d_features = [np.zeros_like(f) for f in cache.features]

        for j, li in enumerate(cfg.head_layers):
            dloc, dconf = head_grads[j]
            f = cache.features[li]
            dfl, grads[f"head{j}.loc.w"] = conv2d_backward(f, p[f"head{j}.loc.w"], dloc,
                                                            (1, 1), self.head_pad)
            dfc, grads[f"head{j}.conf.w"] = conv2d_backward(f, p[f"head{j}.conf.w"], dconf,
                                                             (1, 1), self.head_pad)
            grads[f"head{j}.loc.b"] = dloc.sum(axis=(0, 1))
            grads[f"head{j}.conf.b"] = dconf.sum(axis=(0, 1))
            d_features[li] += dfl + dfc

        for i in reversed(range(len(cfg.backbone))):
            spec = cfg.backbone[i]
            name = cfg.layer_name(i)
            d_out = d_features[i]
            d_act = maxpool_backward(cache.post_act[i], d_out, spec.pool) if spec.pool is not None else d_out
            d_z = relu_backward(cache.pre_act[i], d_act)
            d_in, grads[f"{name}.w"] = conv2d_backward(cache.inputs[i], p[f"{name}.w"], d_z,
                                                       spec.stride, spec.pad)
            grads[f"{name}.b"] = d_z.sum(axis=(0, 1))
            if i > 0:
                d_features[i - 1] += d_in

        return {k: grads[k] for k in p}

    # ──────────────────────────────────────────────────────────────
    # Predições achatadas (ordem dos priors)
    # ──────────────────────────────────────────────────────────────

    def flatten(self, heads: list[tuple[Tensor, Tensor]]) -> tuple[Tensor, Tensor]:
        c = self.config.num_classes
        loc = np.concatenate([l.reshape(-1, 4) for l, _ in heads], axis=0)
        conf = np.concatenate([k.reshape(-1, c) for _, k in heads], axis=0)
        return loc, conf

    def unflatten(self, heads: list[tuple[Tensor, Tensor]], dloc: Tensor,
                  dconf: Tensor) -> list[tuple[Tensor, Tensor]]:
        c = self.config.num_classes
        out, start = [], 0
        for loc, conf in heads:
            n = loc.size // 4
            out.append((dloc[start:start + n].reshape(loc.shape),
                        dconf[start:start + n].reshape(conf.shape)))
            start += n
        if start != dloc.shape[0] or dconf.shape != (start, c):
            raise ShapeError("prediction gradients do not match the heads", dloc.shape, dconf.shape)
        return out

    def predict(self, x: Tensor) -> tuple[Tensor, Tensor]:
        heads, _ = self.forward(x)
        return self.flatten(heads)

    def priors(self) -> np.ndarray:
        return generate_priors(self.config.prior_config())


def image_to_input(img: ActionImage, config: NetConfig) -> Tensor:
    """Pixels uint8 → float64 em [0, 1], já no tamanho de entrada da rede."""
    x = img.pixels.astype(np.float64) / 255.0
    if x.shape != tuple(config.input_shape):
        raise ShapeError("action image does not match the network input", x.shape, config.input_shape)
    return x
