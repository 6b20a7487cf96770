"""
core/priors.py — Default boxes (priors), sobreposições, matching e offsets.

Convenções:
  • Caixas em coordenadas normalizadas centro-tamanho (cx, cy, w, h).
    Arrays de caixas são [N, 4] float64 nessa mesma ordem.
  • Aspect ratio a = w / h: w = scale·√a, h = scale/√a.
  • Ordem dos priors: camada-major, linha-major, ratio-minor. A cabeça da rede
    achata as predições exatamente nessa ordem.
  • Offsets sem variâncias: t = ((g_cx-p_cx)/p_w, (g_cy-p_cy)/p_h, ln(g_w/p_w), ln(g_h/p_h)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from core.encoding import ActionImage
from core.errors import ConfigError, ValidationError
from core.skeleton_io import GroundTruthSegment

# 9 ratios, de 1/7 a 7.
DEFAULT_ASPECT_RATIOS: tuple[float, ...] = (1 / 7, 1 / 5, 1 / 3, 1 / 2, 1.0, 2.0, 3.0, 5.0, 7.0)
DEFAULT_LAYER_SCALES: tuple[float, ...] = (0.1, 0.2, 0.375, 0.55, 0.725, 0.9)
DEFAULT_MATCH_THRESHOLD: float = 0.5
DEFAULT_NEG_POS_RATIO: float = 3.0


# ── Tipos ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Box:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValidationError(f"box needs w > 0 and h > 0, got w={self.w}, h={self.h}")

    def to_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=np.float64)

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "Box":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))


@dataclass(frozen=True)
class BoxOffsets:
    t_cx: float
    t_cy: float
    t_w: float
    t_h: float

    def to_array(self) -> np.ndarray:
        return np.array([self.t_cx, self.t_cy, self.t_w, self.t_h], dtype=np.float64)


@dataclass(frozen=True)
class PriorConfig:
    aspect_ratios: tuple[float, ...] = DEFAULT_ASPECT_RATIOS
    layer_scales: tuple[float, ...] = DEFAULT_LAYER_SCALES
    feature_map_shapes: tuple[tuple[int, int], ...] = ()

    def validate(self) -> None:
        if not self.aspect_ratios or any(a <= 0 for a in self.aspect_ratios):
            raise ConfigError(f"aspect_ratios must be nonempty and positive: {self.aspect_ratios}")
        if any(not 0 < s <= 1 for s in self.layer_scales):
            raise ConfigError(f"layer_scales must lie in (0, 1]: {self.layer_scales}")
        if any(b <= a for a, b in zip(self.layer_scales, self.layer_scales[1:])):
            raise ConfigError(f"layer_scales must be strictly increasing: {self.layer_scales}")
        if len(self.layer_scales) != len(self.feature_map_shapes):
            raise ConfigError(
                f"{len(self.layer_scales)} scales for {len(self.feature_map_shapes)} feature maps")
        if any(r < 1 or c < 1 for r, c in self.feature_map_shapes):
            raise ConfigError(f"feature map shapes must be positive: {self.feature_map_shapes}")

    @property
    def num_priors(self) -> int:
        return sum(r * c for r, c in self.feature_map_shapes) * len(self.aspect_ratios)


@dataclass
class MatchResult:
    """
    gt_index   — [P] índice do gt casado, -1 = Unmatched
    iou        — [P] IoU do casamento (0 para Unmatched)
    best_prior — [G] prior escolhido para cada gt no estágio 1 (-1 se não sobrou prior livre)
    """
    gt_index: np.ndarray
    iou: np.ndarray
    best_prior: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def matched(self) -> np.ndarray:
        return self.gt_index >= 0

    @property
    def num_matched(self) -> int:
        return int(np.count_nonzero(self.gt_index >= 0))


# ── Priors ────────────────────────────────────────────────────────────────────

def generate_priors(config: PriorConfig) -> np.ndarray:
    """[P, 4] priors; P = Σ rows·cols·|ratios|."""
    config.validate()
    ratios = np.asarray(config.aspect_ratios, dtype=np.float64)
    sqrt_r = np.sqrt(ratios)
    blocks: list[np.ndarray] = []
    for scale, (rows, cols) in zip(config.layer_scales, config.feature_map_shapes):
        rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
        block = np.empty((rows, cols, len(ratios), 4))
        block[..., 0] = ((cc + 0.5) / cols)[..., None]
        block[..., 1] = ((rr + 0.5) / rows)[..., None]
        block[..., 2] = scale * sqrt_r
        block[..., 3] = scale / sqrt_r
        blocks.append(block.reshape(-1, 4))
    return np.concatenate(blocks, axis=0) if blocks else np.zeros((0, 4))


def iter_prior_records(config: PriorConfig) -> Iterator[tuple[int, int, int, float, float, float, float, float]]:
    """(layer, row, col, ratio, cx, cy, w, h) na mesma ordem de generate_priors."""
    priors = generate_priors(config)
    i = 0
    for layer, (rows, cols) in enumerate(config.feature_map_shapes):
        for r in range(rows):
            for c in range(cols):
                for ratio in config.aspect_ratios:
                    cx, cy, w, h = priors[i]
                    yield layer, r, c, float(ratio), float(cx), float(cy), float(w), float(h)
                    i += 1


# ── Sobreposição ──────────────────────────────────────────────────────────────

def to_corners(boxes: np.ndarray) -> np.ndarray:
    half = boxes[..., 2:] / 2.0
    return np.concatenate([boxes[..., :2] - half, boxes[..., :2] + half], axis=-1)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU 2D entre todas as caixas de a [A, 4] e b [B, 4] → [A, B]."""
    ca, cb = to_corners(np.atleast_2d(a)), to_corners(np.atleast_2d(b))
    lo = np.maximum(ca[:, None, :2], cb[None, :, :2])
    hi = np.minimum(ca[:, None, 2:], cb[None, :, 2:])
    inter = np.prod(np.clip(hi - lo, 0.0, None), axis=-1)
    area_a = (a[..., 2] * a[..., 3]).reshape(-1)
    area_b = (b[..., 2] * b[..., 3]).reshape(-1)
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union


def iou_box(a: Box, b: Box) -> float:
    return float(iou_matrix(a.to_array()[None], b.to_array()[None])[0, 0])


def iou_interval(a: tuple[float, float], b: tuple[float, float]) -> float:
    """|I ∩ I*| / |I ∪ I*|; intervalos que só se tocam → 0."""
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union


# ── Matching ──────────────────────────────────────────────────────────────────

def match_gt(priors: np.ndarray, gts: np.ndarray,
             threshold: float = DEFAULT_MATCH_THRESHOLD) -> MatchResult:
    """
    Estágio 1: cada gt (em ordem) pega seu prior de maior IoU ainda livre;
    empate → menor índice; conflito → o gt anterior vence. Com mais gts que
    priors, os gts que sobram ficam sem prior (nunca tomam um já casado).
    Estágio 2: priors restantes com melhor IoU > threshold casam com esse gt.
    """
    if not 0.0 < threshold < 1.0:
        raise ValidationError(f"match threshold must lie in (0, 1), got {threshold}")
    n_priors = priors.shape[0]
    gt_index = np.full(n_priors, -1, dtype=np.int64)
    match_iou = np.zeros(n_priors)
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 4)
    if gts.shape[0] == 0 or n_priors == 0:
        return MatchResult(gt_index, match_iou, np.full(gts.shape[0], -1, dtype=np.int64))

    overlaps = iou_matrix(gts, priors)
    claimed = np.zeros(n_priors, dtype=bool)
    best_prior = np.full(gts.shape[0], -1, dtype=np.int64)
    for g in range(gts.shape[0]):
        if claimed.all():
            break
        p = int(np.argmax(np.where(claimed, -1.0, overlaps[g])))
        best_prior[g] = p
        claimed[p] = True
        gt_index[p] = g
        match_iou[p] = overlaps[g, p]

    best_gt = np.argmax(overlaps, axis=0)
    best_iou = overlaps[best_gt, np.arange(n_priors)]
    extra = ~claimed & (best_iou > threshold)
    gt_index[extra] = best_gt[extra]
    match_iou[extra] = best_iou[extra]
    return MatchResult(gt_index, match_iou, best_prior)


# ── Offsets ───────────────────────────────────────────────────────────────────

def encode_offsets_array(priors: np.ndarray, gts: np.ndarray) -> np.ndarray:
    out = np.empty(np.broadcast_shapes(priors.shape, gts.shape))
    out[..., 0] = (gts[..., 0] - priors[..., 0]) / priors[..., 2]
    out[..., 1] = (gts[..., 1] - priors[..., 1]) / priors[..., 3]
    out[..., 2] = np.log(gts[..., 2] / priors[..., 2])
    out[..., 3] = np.log(gts[..., 3] / priors[..., 3])
    return out


def decode_offsets_array(priors: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    out = np.empty(np.broadcast_shapes(priors.shape, offsets.shape))
    out[..., 0] = priors[..., 0] + offsets[..., 0] * priors[..., 2]
    out[..., 1] = priors[..., 1] + offsets[..., 1] * priors[..., 3]
    out[..., 2] = priors[..., 2] * np.exp(offsets[..., 2])
    out[..., 3] = priors[..., 3] * np.exp(offsets[..., 3])
    return out


def encode_offsets(prior: Box, gt: Box) -> BoxOffsets:
    return BoxOffsets(*(float(v) for v in encode_offsets_array(prior.to_array(), gt.to_array())))


def decode_offsets(prior: Box, offsets: BoxOffsets) -> Box:
    return Box.from_array(decode_offsets_array(prior.to_array(), offsets.to_array()))


# ── Hard negative mining ──────────────────────────────────────────────────────

def hard_negative_mine(conf_losses: np.ndarray, match: MatchResult,
                       ratio: float = DEFAULT_NEG_POS_RATIO) -> np.ndarray:
    """
    Índices dos negativos escolhidos, na ordem de seleção (loss decrescente,
    empate → menor índice). Cota = min(⌊ratio·N_pos⌋, disponíveis).
    """
    if ratio <= 0:
        raise ValidationError(f"negative:positive ratio must be positive, got {ratio}")
    quota = math.floor(ratio * match.num_matched)
    candidates = np.flatnonzero(match.gt_index < 0)
    if quota == 0 or candidates.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((candidates, -np.asarray(conf_losses)[candidates]))
    return candidates[order[:quota]]


# ── Segmento temporal ↔ caixa ─────────────────────────────────────────────────

def gt_segment_to_box(seg: GroundTruthSegment, img: ActionImage) -> Box:
    """Caixa de altura total (cy = 0.5, h = 1); eixo x via col_to_frame."""
    seg.check_within(img.source_len)
    x0, x1 = img.frame_to_x(seg.start), img.frame_to_x(seg.end)
    return Box((x0 + x1) / 2.0, 0.5, x1 - x0, 1.0)


def segments_to_boxes(segments: Sequence[GroundTruthSegment], img: ActionImage) -> np.ndarray:
    if not segments:
        return np.zeros((0, 4))
    return np.stack([gt_segment_to_box(s, img).to_array() for s in segments])


def boxes_to_intervals(boxes: np.ndarray, img: ActionImage) -> np.ndarray:
    """
    Projeção inversa vetorizada: recorta x em [0, 1], mapeia para frames e
    arredonda (meio → par, como round()). Devolve [N, 2] int64.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    half = boxes[:, 2] / 2.0
    edges = np.clip(np.stack([boxes[:, 0] - half, boxes[:, 0] + half], axis=1), 0.0, 1.0)
    frames = img.col_to_frame.offset + img.col_to_frame.scale * (edges * img.width)
    return np.clip(np.rint(frames), 0, img.source_len).astype(np.int64)


def box_to_interval(box: np.ndarray, img: ActionImage) -> tuple[int, int]:
    start, end = boxes_to_intervals(box, img)[0]
    return int(start), int(end)
