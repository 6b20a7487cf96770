"""
core/postprocess.py — Saídas das cabeças → detecções temporais pontuadas.

  decode_detections — softmax por prior, limiar, decodificação da caixa e
                      projeção x → frames via col_to_frame; top-k por score
  nms               — supressão gulosa por (vídeo, classe) com IoU de intervalo
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from core.encoding import ActionImage
from core.errors import ShapeError, ValidationError
from core.loss import softmax
from core.priors import boxes_to_intervals, decode_offsets_array

DEFAULT_CONF_THRESHOLD = 0.01
DEFAULT_TOP_K = 200
DEFAULT_NMS_IOU = 0.45


@dataclass(frozen=True)
class Detection:
    """Intervalo [start, end) em frames, label 0-based."""
    label: int
    score: float
    start: int
    end: int
    video_id: str = ""

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ValidationError(f"detection needs start < end, got [{self.start}, {self.end})")
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"detection score must be in [0, 1], got {self.score}")

    @property
    def interval(self) -> tuple[int, int]:
        return self.start, self.end


def interval_iou(a: Detection, b: Detection) -> float:
    inter = max(0, min(a.end, b.end) - max(a.start, b.start))
    return inter / ((a.end - a.start) + (b.end - b.start) - inter)


# ── Decodificação ─────────────────────────────────────────────────────────────

def decode_detections(loc: np.ndarray, conf: np.ndarray, priors: np.ndarray,
                      img: ActionImage, conf_threshold: float = DEFAULT_CONF_THRESHOLD,
                      top_k: int = DEFAULT_TOP_K) -> list[Detection]:
    """
    loc [P, 4] e conf [P, K+1] na ordem dos priors. Intervalos que colapsam
    (start >= end) após o arredondamento são descartados antes do top-k.
    Empates de score → ordem (prior, classe).
    """
    if loc.shape != priors.shape or conf.shape[0] != priors.shape[0]:
        raise ShapeError("predictions do not line up with priors", loc.shape, conf.shape, priors.shape)
    probs = softmax(conf)[:, 1:]
    prior_idx, cls_idx = np.nonzero(probs > conf_threshold)
    if prior_idx.size == 0:
        return []

    boxes = decode_offsets_array(priors[prior_idx], loc[prior_idx])
    intervals = boxes_to_intervals(boxes, img)
    valid = intervals[:, 0] < intervals[:, 1]
    prior_idx, cls_idx, intervals = prior_idx[valid], cls_idx[valid], intervals[valid]
    scores = probs[prior_idx, cls_idx]

    order = np.argsort(-scores, kind="stable")[:top_k]
    return [Detection(int(cls_idx[i]), float(scores[i]), int(intervals[i, 0]),
                      int(intervals[i, 1]), img.source_id)
            for i in order]


# ── NMS ───────────────────────────────────────────────────────────────────────

def _rank_key(item: tuple[int, Detection]) -> tuple[float, int, int]:
    index, det = item
    return (-det.score, det.start, index)


def nms(dets: Sequence[Detection], iou_thresh: float = DEFAULT_NMS_IOU) -> list[Detection]:
    """
    Para cada (vídeo, classe): mantém a de maior score e suprime as demais
    com IoU > iou_thresh contra alguma mantida. Saída em score decrescente
    (empate → start menor → índice menor).
    """
    if not 0.0 < iou_thresh < 1.0:
        raise ValidationError(f"NMS IoU threshold must lie in (0, 1), got {iou_thresh}")
    groups: dict[tuple[str, int], list[tuple[int, Detection]]] = {}
    for item in enumerate(dets):
        groups.setdefault((item[1].video_id, item[1].label), []).append(item)

    kept: list[tuple[int, Detection]] = []
    for members in groups.values():
        members.sort(key=_rank_key)
        starts = np.array([d.start for _, d in members], dtype=np.float64)
        ends = np.array([d.end for _, d in members], dtype=np.float64)
        lengths = ends - starts
        order = np.arange(len(members))
        while order.size > 0:
            i = order[0]
            kept.append(members[i])
            rest = order[1:]
            inter = np.maximum(0.0, np.minimum(ends[i], ends[rest]) - np.maximum(starts[i], starts[rest]))
            iou = inter / (lengths[i] + lengths[rest] - inter)
            order = rest[iou <= iou_thresh]

    kept.sort(key=_rank_key)
    return [d for _, d in kept]
