"""
core/encoding.py — Esqueleto → "action image" colorida.

Layout da imagem:
  linhas  = articulações na ordem por partes (pessoa 1: 0–24, pessoa 2: 25–49)
  colunas = frames
  canais  = (R, G, B) ↔ (x, y, z)

Dois mapeamentos:
  encode_global    — quantização com extremos do conjunto de treino inteiro.
  encode_invariant — por pessoa e por sequência: subtrai o mínimo de cada canal
                     e divide pela maior amplitude entre os três canais.
                     Invariante a translação e a escala uniforme.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from core.errors import (DegenerateStatsError, EmptyDatasetError, ShapeError,
                         ValidationError)
from core.skeleton_io import KINECT_PARTS, NUM_JOINTS, NUM_PERSONS, SkeletonSequence

log = logging.getLogger(__name__)

ROWS_PER_PERSON: int = NUM_JOINTS
DETECTOR_HEIGHT: int = ROWS_PER_PERSON * NUM_PERSONS
DEFAULT_WIDTH: int = 512


# ── Tipos ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class JointOrder:
    """Permutação das 25 articulações em 5 partes contíguas."""
    parts: tuple[tuple[str, tuple[int, ...]], ...]

    def __post_init__(self) -> None:
        perm = self.permutation
        if sorted(perm) != list(range(NUM_JOINTS)):
            raise ValidationError(f"joint order is not a bijection on 0..{NUM_JOINTS - 1}: {perm}")

    @property
    def permutation(self) -> tuple[int, ...]:
        return tuple(j for _, chain in self.parts for j in chain)

    @classmethod
    def from_mapping(cls, parts: dict[str, Sequence[int]]) -> "JointOrder":
        return cls(tuple((name, tuple(chain)) for name, chain in parts.items()))


DEFAULT_JOINT_ORDER = JointOrder.from_mapping({
    name: KINECT_PARTS[name]
    for name in ("left_arm", "right_arm", "trunk", "left_leg", "right_leg")
})


@dataclass(frozen=True)
class ColumnMap:
    """Mapa afim coluna → frame: frame = offset + scale · coluna (coordenadas contínuas)."""
    scale: float = 1.0
    offset: float = 0.0

    def frame_at(self, col: float) -> float:
        return self.offset + self.scale * col

    def col_at(self, frame: float) -> float:
        return (frame - self.offset) / self.scale


@dataclass(eq=False)
class ActionImage:
    pixels: np.ndarray            # [H, W, 3] uint8
    persons_encoded: int
    col_to_frame: ColumnMap
    source_len: int
    source_id: str = ""

    rows_per_person = ROWS_PER_PERSON

    def __post_init__(self) -> None:
        if self.pixels.dtype != np.uint8 or self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ShapeError("action image must be uint8 [H, W, 3]", self.pixels.shape)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def frame_to_x(self, frame: float) -> float:
        """Fronteira de frame → x normalizado em [0, 1] (largura da imagem)."""
        return self.col_to_frame.col_at(frame) / self.width

    def x_to_frame(self, x: float) -> float:
        return self.col_to_frame.frame_at(x * self.width)

    def metadata(self) -> dict:
        return {
            "source_id": self.source_id,
            "source_len": self.source_len,
            "persons_encoded": self.persons_encoded,
            "height": self.height,
            "width": self.width,
            "col_to_frame": {"scale": self.col_to_frame.scale,
                             "offset": self.col_to_frame.offset},
        }


@dataclass(frozen=True)
class DatasetStats:
    c_min: float
    c_max: float


# ── Helpers ───────────────────────────────────────────────────────────────────

def _persons_encoded(seq: SkeletonSequence) -> int:
    return 2 if bool(seq.present[:, 1].any()) else 1


def _quantize(ratio: np.ndarray) -> np.ndarray:
    # floor(255 · 1) = 255 exato; o clip cobre valores fora de [c_min, c_max]
    return np.clip(np.floor(255.0 * ratio), 0, 255).astype(np.uint8)


def _layout(levels: np.ndarray, present: np.ndarray, order: JointOrder,
            persons: int) -> np.ndarray:
    """[T, 2, 25, 3] uint8 → [25·persons, T, 3], linhas na ordem `order`."""
    perm = list(order.permutation)
    block = levels[:, :persons][:, :, perm, :]
    block = np.where(present[:, :persons, None, None], block, 0).astype(np.uint8)
    n_frames = levels.shape[0]
    return np.ascontiguousarray(block.transpose(1, 2, 0, 3).reshape(persons * NUM_JOINTS, n_frames, 3))


# ── Operações ─────────────────────────────────────────────────────────────────

def compute_dataset_stats(sequences: Iterable[SkeletonSequence]) -> DatasetStats:
    """Extremos globais sobre todas as coordenadas de pessoas presentes."""
    c_min, c_max = np.inf, -np.inf
    for seq in sequences:
        present = seq.coords[seq.present]
        if present.size == 0:
            continue
        c_min = min(c_min, float(present.min()))
        c_max = max(c_max, float(present.max()))
    if c_min > c_max:
        raise EmptyDatasetError("no present joints in the dataset")
    return DatasetStats(c_min=c_min, c_max=c_max)


def encode_global(seq: SkeletonSequence, order: JointOrder, stats: DatasetStats) -> ActionImage:
    if not stats.c_max > stats.c_min:
        raise DegenerateStatsError(f"c_max ({stats.c_max}) must exceed c_min ({stats.c_min})")
    ratio = (seq.coords - stats.c_min) / (stats.c_max - stats.c_min)
    persons = _persons_encoded(seq)
    return ActionImage(
        pixels=_layout(_quantize(ratio), seq.present, order, persons),
        persons_encoded=persons,
        col_to_frame=ColumnMap(),
        source_len=len(seq),
        source_id=seq.source_id,
    )


def encode_invariant(seq: SkeletonSequence, order: JointOrder) -> ActionImage:
    """
    Por pessoa: (c - min_k) / max_k(max_k - min_k), quantizado em [0, 255].
    Pessoa totalmente estática (as três amplitudes nulas) vira linhas zeradas.
    """
    if len(seq) == 0:
        raise ValidationError("cannot encode an empty sequence")
    levels = np.zeros(seq.coords.shape, dtype=np.uint8)
    for p in range(NUM_PERSONS):
        mask = seq.present[:, p]
        if not mask.any():
            continue
        coords = seq.coords[mask, p]                      # [Tp, 25, 3]
        mins = coords.min(axis=(0, 1))
        denom = float((coords.max(axis=(0, 1)) - mins).max())
        if denom == 0.0:
            log.warning("person %d of '%s' is static; encoding zero rows", p + 1, seq.source_id)
            continue
        levels[:, p] = _quantize((seq.coords[:, p] - mins) / denom)
    persons = _persons_encoded(seq)
    return ActionImage(
        pixels=_layout(levels, seq.present, order, persons),
        persons_encoded=persons,
        col_to_frame=ColumnMap(),
        source_len=len(seq),
        source_id=seq.source_id,
    )


def resample_width(img: ActionImage, target_w: int) -> ActionImage:
    """Vizinho mais próximo só no eixo das colunas: coluna c ← floor((c + 0.5)·W/T)."""
    if target_w <= 0:
        raise ValidationError(f"target width must be positive, got {target_w}")
    width = img.width
    if width < 1:
        raise ValidationError("cannot resample an image with no columns")
    if target_w == width:
        return ActionImage(img.pixels.copy(), img.persons_encoded, img.col_to_frame,
                           img.source_len, img.source_id)
    cols = np.arange(target_w, dtype=np.int64)
    src = np.minimum(((2 * cols + 1) * width) // (2 * target_w), width - 1)
    col_map = ColumnMap(scale=img.col_to_frame.scale * width / target_w,
                        offset=img.col_to_frame.offset)
    return ActionImage(np.ascontiguousarray(img.pixels[:, src]), img.persons_encoded,
                       col_map, img.source_len, img.source_id)


def letterbox_rows(img: ActionImage, height: int = DETECTOR_HEIGHT) -> ActionImage:
    """Completa com linhas zeradas embaixo até `height` (imagens de 1 pessoa → 50 linhas)."""
    if img.height > height:
        raise ShapeError(f"image taller than detector input ({height} rows)", img.pixels.shape)
    if img.height == height:
        return img
    pad = np.zeros((height - img.height, img.width, 3), dtype=np.uint8)
    return ActionImage(np.concatenate([img.pixels, pad], axis=0), img.persons_encoded,
                       img.col_to_frame, img.source_len, img.source_id)


def encode_for_detector(seq: SkeletonSequence, width: int = DEFAULT_WIDTH,
                        order: JointOrder = DEFAULT_JOINT_ORDER,
                        stats: DatasetStats | None = None) -> ActionImage:
    """Pipeline completo: codifica (invariante ou global), reamostra e faz letterbox."""
    img = encode_invariant(seq, order) if stats is None else encode_global(seq, order, stats)
    return letterbox_rows(resample_width(img, width))


# ── Arquivos (PNG + sidecar JSON) ─────────────────────────────────────────────

def save_action_image(img: ActionImage, png_path: Path) -> Path:
    """Grava PNG RGB 8-bit e o sidecar `<nome>.json`. Escrita atômica via .tmp."""
    png_path = Path(png_path)
    png_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = png_path.with_suffix(".tmp")
    Image.fromarray(img.pixels).save(tmp, format="PNG")
    tmp.replace(png_path)

    sidecar = png_path.with_suffix(".json")
    tmp = sidecar.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(img.metadata(), f, indent=2, sort_keys=True)
        f.write("\n")
    tmp.replace(sidecar)
    return sidecar


def load_action_image(png_path: Path) -> ActionImage:
    png_path = Path(png_path)
    with Image.open(png_path) as im:
        pixels = np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    with open(png_path.with_suffix(".json"), "r", encoding="utf-8") as f:
        meta = json.load(f)
    col = meta["col_to_frame"]
    return ActionImage(pixels, int(meta["persons_encoded"]),
                       ColumnMap(float(col["scale"]), float(col["offset"])),
                       int(meta["source_len"]), meta.get("source_id", ""))
