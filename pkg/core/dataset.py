"""
core/dataset.py — Diretórios de dataset e CSV de detecções.

Layout (o mesmo do PKU-MMD):
  DIR/skeleton/<id>.txt   — um frame por linha, 150 valores
  DIR/label/<id>.txt      — "label,start,end,confidence", label 1-based

Detecções: CSV "video_id,label,start_frame,end_frame,score", label 1-based.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from core.encoding import (DEFAULT_JOINT_ORDER, ActionImage, DatasetStats, JointOrder,
                           encode_for_detector)
from core.errors import EmptyDatasetError, ParseError, ValidationError
from core.network import NetConfig, image_to_input
from core.postprocess import Detection
from core.priors import segments_to_boxes
from core.skeleton_io import (GroundTruthSegment, SkeletonSequence, parse_label_file,
                              parse_skeleton_file, render_label_file, render_skeleton_file)
from core.training import Sample

log = logging.getLogger(__name__)

SKELETON_DIR = "skeleton"
LABEL_DIR = "label"
DETECTIONS_HEADER = ("video_id", "label", "start_frame", "end_frame", "score")


@dataclass
class Item:
    seq: SkeletonSequence
    segments: list[GroundTruthSegment]

    @property
    def video_id(self) -> str:
        return self.seq.source_id


# ── Leitura / escrita de diretórios ───────────────────────────────────────────

def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    tmp.replace(path)


def _with_file(exc: ValidationError, path: Path) -> ValidationError:
    return type(exc)(f"{path}: {exc}")


def load_skeletons(root: Path, frame_rate: float = 30.0) -> list[SkeletonSequence]:
    """Todas as sequências de DIR/skeleton (ou do próprio DIR), ordenadas por id."""
    root = Path(root)
    folder = root / SKELETON_DIR if (root / SKELETON_DIR).is_dir() else root
    paths = sorted(folder.glob("*.txt"))
    if not paths:
        raise EmptyDatasetError(f"no skeleton files in {folder}")
    out = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as f:
            try:
                out.append(parse_skeleton_file(f, source_id=path.stem, frame_rate=frame_rate))
            except ValidationError as e:
                raise _with_file(e, path) from None
    return out


def load_labels(folder: Path) -> dict[str, list[GroundTruthSegment]]:
    """id → segmentos (0-based). Aceita DIR ou DIR/label."""
    folder = Path(folder)
    if (folder / LABEL_DIR).is_dir():
        folder = folder / LABEL_DIR
    labels: dict[str, list[GroundTruthSegment]] = {}
    for path in sorted(folder.glob("*.txt")):
        with open(path, "r", encoding="utf-8") as f:
            try:
                labels[path.stem] = parse_label_file(f, video_id=path.stem)
            except ValidationError as e:
                raise _with_file(e, path) from None
    if not labels:
        raise EmptyDatasetError(f"no label files in {folder}")
    return labels


def load_dataset(root: Path, frame_rate: float = 30.0) -> list[Item]:
    """Pares (sequência, segmentos). Sequência sem label → erro; gts fora da sequência → erro."""
    sequences = load_skeletons(root, frame_rate)
    labels = load_labels(Path(root) / LABEL_DIR)
    items = []
    for seq in sequences:
        if seq.source_id not in labels:
            raise ValidationError(f"sequence '{seq.source_id}' has no label file")
        segments = labels[seq.source_id]
        for seg in segments:
            seg.check_within(len(seq))
        items.append(Item(seq, segments))
    log.info("loaded %d sequences from %s", len(items), root)
    return items


def write_dataset(root: Path, items: Iterable[tuple[SkeletonSequence, Sequence[GroundTruthSegment]]]) -> int:
    root = Path(root)
    (root / SKELETON_DIR).mkdir(parents=True, exist_ok=True)
    (root / LABEL_DIR).mkdir(parents=True, exist_ok=True)
    count = 0
    for seq, segments in items:
        if not seq.source_id:
            raise ValidationError("sequences written to a dataset need a source_id")
        _atomic_write(root / SKELETON_DIR / f"{seq.source_id}.txt", render_skeleton_file(seq))
        _atomic_write(root / LABEL_DIR / f"{seq.source_id}.txt", render_label_file(segments))
        count += 1
    return count


# ── Amostras para a rede ──────────────────────────────────────────────────────

def build_sample(item: Item, net_config: NetConfig, order: JointOrder = DEFAULT_JOINT_ORDER,
                 stats: Optional[DatasetStats] = None) -> tuple[Sample, ActionImage]:
    _, width, _ = net_config.input_shape
    img = encode_for_detector(item.seq, width, order, stats)
    boxes = segments_to_boxes(item.segments, img)
    labels = np.array([s.label for s in item.segments], dtype=np.int64)
    too_high = labels >= net_config.num_actions
    if np.any(too_high):
        raise ValidationError(f"'{item.video_id}' has label {int(labels[too_high][0]) + 1} "
                              f"but the network has {net_config.num_actions} action classes")
    return Sample(image_to_input(img, net_config), boxes, labels, item.video_id), img


# ── CSV de detecções ──────────────────────────────────────────────────────────

def write_detections(path: Path, dets: Iterable[Detection]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    count = 0
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(DETECTIONS_HEADER)
        for d in dets:
            writer.writerow([d.video_id, d.label + 1, d.start, d.end, repr(d.score)])
            count += 1
    tmp.replace(path)
    return count


def read_detections(path: Path) -> list[Detection]:
    dets = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != DETECTIONS_HEADER:
            raise ParseError(f"{path}: expected header {','.join(DETECTIONS_HEADER)}", 1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(DETECTIONS_HEADER):
                raise ParseError(f"{path}: expected {len(DETECTIONS_HEADER)} fields, got {len(row)}", line_no)
            try:
                label, start, end = int(row[1]), int(row[2]), int(row[3])
                score = float(row[4])
            except ValueError as e:
                raise ParseError(f"{path}: {e}", line_no) from None
            if label < 1:
                raise ValidationError(f"{path}: labels are 1-based, got {label}", line_no)
            try:
                dets.append(Detection(label - 1, score, start, end, row[0]))
            except ValidationError as e:
                raise ValidationError(f"{path}: {e}", line_no) from None
    return dets
