"""
core/evaluation.py — Precisão/recall por IoU de intervalo e mAP(θ) interpolado.

Leitura adotada:
  • TP ⇔ IoU > θ com um gt da mesma classe (e vídeo) ainda não reivindicado;
    entre os candidatos vence o de maior IoU (empate → menor índice);
  • níveis de recall k/m para k = 1..m (m = nº de gts da consulta);
  • consultas = classes de ação; classes sem gt ficam fora de Q.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from core.errors import EmptyDatasetError, ValidationError
from core.postprocess import Detection
from core.skeleton_io import GroundTruthSegment

log = logging.getLogger(__name__)

DEFAULT_THETAS = (0.1, 0.3, 0.5, 0.7)


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float


def _iou(det: Detection, gt: GroundTruthSegment) -> float:
    inter = max(0, min(det.end, gt.end) - max(det.start, gt.start))
    return inter / ((det.end - det.start) + (gt.end - gt.start) - inter)


def _check_theta(theta: float) -> None:
    if not 0.0 < theta < 1.0:
        raise ValidationError(f"IoU threshold θ must lie in (0, 1), got {theta}")


def rank_detections(dets: Sequence[Detection]) -> list[Detection]:
    """Score decrescente; empate → ordem de entrada."""
    return [d for _, d in sorted(enumerate(dets), key=lambda item: (-item[1].score, item[0]))]


# ── Curva PR ──────────────────────────────────────────────────────────────────

def precision_recall(dets: Sequence[Detection], gts: Sequence[GroundTruthSegment],
                     theta: float) -> list[PRPoint]:
    """Um ponto por posição do ranking."""
    _check_theta(theta)
    m = len(gts)
    claimed = [False] * m
    points: list[PRPoint] = []
    tp = 0
    for rank, det in enumerate(rank_detections(dets), start=1):
        best, best_iou = -1, theta
        for g, gt in enumerate(gts):
            if claimed[g] or gt.label != det.label or gt.video_id != det.video_id:
                continue
            iou = _iou(det, gt)
            if iou > best_iou:
                best, best_iou = g, iou
        if best >= 0:
            claimed[best] = True
            tp += 1
        points.append(PRPoint(tp / m if m else 0.0, tp / rank))
    return points


def interpolated_precision(pr: Sequence[PRPoint], r: float) -> float:
    """max{precisão : recall ≥ r}; 0 se não houver ponto."""
    return max((p.precision for p in pr if p.recall >= r), default=0.0)


def average_precision(pr: Sequence[PRPoint], num_gts: int) -> float:
    if num_gts < 1:
        raise ValidationError("average precision needs at least one ground-truth segment")
    return sum(interpolated_precision(pr, k / num_gts) for k in range(1, num_gts + 1)) / num_gts


def mean_average_precision(queries: Iterable[tuple[Sequence[Detection], Sequence[GroundTruthSegment]]],
                           theta: float) -> float:
    _check_theta(theta)
    aps = []
    skipped = 0
    for dets, gts in queries:
        if not gts:
            skipped += 1
            continue
        aps.append(average_precision(precision_recall(dets, gts, theta), len(gts)))
    if skipped:
        log.warning("%d query(ies) without ground truth excluded from mAP", skipped)
    if not aps:
        raise EmptyDatasetError("no query has ground-truth segments; mAP is undefined")
    return sum(aps) / len(aps)


# ── Tabela por classe ─────────────────────────────────────────────────────────

def class_queries(dets: Sequence[Detection], gts: Sequence[GroundTruthSegment]
                  ) -> dict[int, tuple[list[Detection], list[GroundTruthSegment]]]:
    """Particiona por classe (reunindo os vídeos); só classes com gt."""
    labels = sorted({g.label for g in gts})
    return {k: ([d for d in dets if d.label == k], [g for g in gts if g.label == k])
            for k in labels}


@dataclass
class APTable:
    thetas: tuple[float, ...]
    classes: tuple[int, ...]
    ap: dict[float, dict[int, float]] = field(default_factory=dict)
    mean: dict[float, float] = field(default_factory=dict)

    def to_csv(self) -> str:
        """Rótulos 1-based, como nos arquivos de label."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["label", *(f"theta={t:g}" for t in self.thetas)])
        for k in self.classes:
            writer.writerow([k + 1, *(f"{self.ap[t][k]:.6f}" for t in self.thetas)])
        writer.writerow(["mAP", *(f"{self.mean[t]:.6f}" for t in self.thetas)])
        return buf.getvalue()

    def to_text(self) -> str:
        header = ["label"] + [f"θ={t:g}" for t in self.thetas]
        rows = [[str(k + 1)] + [f"{self.ap[t][k]:.4f}" for t in self.thetas] for k in self.classes]
        rows.append(["mAP"] + [f"{self.mean[t]:.4f}" for t in self.thetas])
        widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]

        def fmt(row: list[str]) -> str:
            return "  ".join(c.rjust(w) for c, w in zip(row, widths))

        sep = "  ".join("─" * w for w in widths)
        return "\n".join([fmt(header), sep, *map(fmt, rows[:-1]), sep, fmt(rows[-1])]) + "\n"


def evaluate(dets: Sequence[Detection], gts: Sequence[GroundTruthSegment],
             thetas: Sequence[float] = DEFAULT_THETAS,
             num_classes: Optional[int] = None) -> APTable:
    queries = class_queries(dets, gts)
    if num_classes is not None:
        for k in range(num_classes):
            if k not in queries:
                log.warning("class %d has no ground truth and is excluded", k + 1)
    if not queries:
        raise EmptyDatasetError("no ground-truth segments to evaluate against")
    table = APTable(tuple(thetas), tuple(queries))
    for theta in table.thetas:
        _check_theta(theta)
        table.ap[theta] = {k: average_precision(precision_recall(d, g, theta), len(g))
                           for k, (d, g) in queries.items()}
        table.mean[theta] = sum(table.ap[theta].values()) / len(queries)
    return table
