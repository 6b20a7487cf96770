"""
core/skeleton_io.py — Leitura/escrita de esqueletos no formato PKU-MMD e
geração de sequências sintéticas rotuladas.

Formato do arquivo de esqueleto (uma linha por frame):
  150 números = 2 pessoas × 25 articulações × (x, y, z), pessoa-major,
  articulação-major, xyz no nível mais interno. Uma pessoa cujos 75 números
  são todos 0 está ausente.

Formato do arquivo de rótulos (uma linha por segmento):
  "label,start,end,confidence" — label 1-based no disco, 0-based em memória.

Na memória, ausência é explícita (máscara `present`), nunca NaN nem (0,0,0).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO, Union

import numpy as np

from core.errors import ConfigError, ParseError, ValidationError

log = logging.getLogger(__name__)

NUM_PERSONS: int = 2
NUM_JOINTS: int = 25
FIELDS_PER_PERSON: int = NUM_JOINTS * 3
FIELDS_PER_LINE: int = NUM_PERSONS * FIELDS_PER_PERSON

# ── Convenção Kinect v2 (25 articulações) ─────────────────────────────────────
# Índices do SDK: 0 SpineBase, 1 SpineMid, 2 Neck, 3 Head, 4-7 braço esquerdo,
# 8-11 braço direito, 12-15 perna esquerda, 16-19 perna direita,
# 20 SpineShoulder, 21/22 HandTip/Thumb esquerdos, 23/24 direitos.
# Cada cadeia segue a conexão física, da raiz para a extremidade.
KINECT_PARTS: dict[str, tuple[int, ...]] = {
    "left_arm":  (4, 5, 6, 7, 21, 22),   # shoulder → elbow → wrist → hand → tip → thumb
    "right_arm": (8, 9, 10, 11, 23, 24),
    "trunk":     (3, 2, 20, 1, 0),       # head → neck → spine-shoulder → spine-mid → base
    "left_leg":  (12, 13, 14, 15),       # hip → knee → ankle → foot
    "right_leg": (16, 17, 18, 19),
}

# Pose de repouso em pé, em metros, no referencial do corpo (SpineBase na origem).
REST_POSE: np.ndarray = np.array([
    [ 0.00,  0.00, 0.00],   # 0  SpineBase
    [ 0.00,  0.30, 0.00],   # 1  SpineMid
    [ 0.00,  0.58, 0.00],   # 2  Neck
    [ 0.00,  0.72, 0.00],   # 3  Head
    [-0.18,  0.50, 0.00],   # 4  ShoulderLeft
    [-0.22,  0.25, 0.00],   # 5  ElbowLeft
    [-0.24,  0.02, 0.00],   # 6  WristLeft
    [-0.25, -0.06, 0.00],   # 7  HandLeft
    [ 0.18,  0.50, 0.00],   # 8  ShoulderRight
    [ 0.22,  0.25, 0.00],   # 9  ElbowRight
    [ 0.24,  0.02, 0.00],   # 10 WristRight
    [ 0.25, -0.06, 0.00],   # 11 HandRight
    [-0.09, -0.02, 0.00],   # 12 HipLeft
    [-0.10, -0.45, 0.00],   # 13 KneeLeft
    [-0.10, -0.85, 0.00],   # 14 AnkleLeft
    [-0.10, -0.90, 0.10],   # 15 FootLeft
    [ 0.09, -0.02, 0.00],   # 16 HipRight
    [ 0.10, -0.45, 0.00],   # 17 KneeRight
    [ 0.10, -0.85, 0.00],   # 18 AnkleRight
    [ 0.10, -0.90, 0.10],   # 19 FootRight
    [ 0.00,  0.50, 0.00],   # 20 SpineShoulder
    [-0.25, -0.14, 0.00],   # 21 HandTipLeft
    [-0.22, -0.08, 0.03],   # 22 ThumbLeft
    [ 0.25, -0.14, 0.00],   # 23 HandTipRight
    [ 0.22, -0.08, 0.03],   # 24 ThumbRight
], dtype=np.float64)

# Membros que podem "executar" uma ação sintética (ordem fixa).
_MOTION_LIMBS: tuple[str, ...] = ("left_arm", "right_arm", "left_leg", "right_leg")
_MOTION_AMPLITUDE: float = 0.25   # metros na extremidade da cadeia


# ── Tipos de domínio ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Frame:
    """Um frame: exatamente 2 slots de pessoa; None = Ausente, senão array [25, 3]."""
    persons: tuple[Optional[np.ndarray], Optional[np.ndarray]]


@dataclass(eq=False)
class SkeletonSequence:
    """
    Sequência de esqueletos.

    coords  — [T, 2, 25, 3] float64, metros; zerado onde a pessoa está ausente.
    present — [T, 2] bool; False = slot Ausente.
    Índices de frame são as posições 0..T-1 do array.
    """
    coords: np.ndarray
    present: np.ndarray
    frame_rate: float = 30.0
    source_id: str = ""

    def __post_init__(self) -> None:
        coords = np.array(self.coords, dtype=np.float64)
        present = np.array(self.present, dtype=bool)
        if coords.ndim != 4 or coords.shape[1:] != (NUM_PERSONS, NUM_JOINTS, 3):
            raise ValidationError(f"coords must be [T, 2, 25, 3], got {coords.shape}")
        if present.shape != coords.shape[:2]:
            raise ValidationError(f"present must be {coords.shape[:2]}, got {present.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValidationError("coordinates must be finite")
        coords[~present] = 0.0
        self.coords = coords
        self.present = present

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SkeletonSequence):
            return NotImplemented
        return (
            np.array_equal(self.present, other.present)
            and np.array_equal(self.coords, other.coords)
            and self.frame_rate == other.frame_rate
            and self.source_id == other.source_id
        )

    def frame(self, index: int) -> Frame:
        persons = tuple(
            self.coords[index, p].copy() if self.present[index, p] else None
            for p in range(NUM_PERSONS)
        )
        return Frame(persons=persons)  # type: ignore[arg-type]

    @property
    def frames(self) -> list[Frame]:
        return [self.frame(i) for i in range(len(self))]

    @classmethod
    def from_frames(cls, frames: list[Frame], frame_rate: float = 30.0,
                    source_id: str = "") -> "SkeletonSequence":
        coords = np.zeros((len(frames), NUM_PERSONS, NUM_JOINTS, 3))
        present = np.zeros((len(frames), NUM_PERSONS), dtype=bool)
        for i, fr in enumerate(frames):
            if len(fr.persons) != NUM_PERSONS:
                raise ValidationError(f"frame {i} has {len(fr.persons)} person slots")
            for p, joints in enumerate(fr.persons):
                if joints is None:
                    continue
                coords[i, p] = np.asarray(joints, dtype=np.float64).reshape(NUM_JOINTS, 3)
                present[i, p] = True
        return cls(coords=coords, present=present, frame_rate=frame_rate, source_id=source_id)


@dataclass(frozen=True)
class GroundTruthSegment:
    """Segmento rotulado: [start, end) em frames, label 0-based."""
    label: int
    start: int
    end: int
    confidence: float = 1.0
    video_id: str = ""

    def __post_init__(self) -> None:
        if self.label < 0:
            raise ValidationError(f"label must be >= 0, got {self.label}")
        if not 0 <= self.start < self.end:
            raise ValidationError(f"segment needs 0 <= start < end, got [{self.start}, {self.end})")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence must be in [0, 1], got {self.confidence}")

    def check_within(self, length: int) -> None:
        if self.end > length:
            raise ValidationError(
                f"segment [{self.start}, {self.end}) exceeds sequence length {length}")


@dataclass(frozen=True)
class SynthConfig:
    num_classes: int = 3
    num_sequences: int = 200
    seq_len_range: tuple[int, int] = (300, 500)
    segment_len_range: tuple[int, int] = (60, 140)
    noise_amplitude: float = 0.005
    seed: int = 42
    frame_rate: float = 30.0

    def validate(self) -> None:
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be positive, got {self.num_classes}")
        if self.num_sequences < 0:
            raise ConfigError(f"num_sequences must be >= 0, got {self.num_sequences}")
        for name in ("seq_len_range", "segment_len_range"):
            lo, hi = getattr(self, name)
            if lo < 1 or lo > hi:
                raise ConfigError(f"{name} must satisfy 1 <= min <= max, got ({lo}, {hi})")
        if self.noise_amplitude < 0:
            raise ConfigError(f"noise_amplitude must be >= 0, got {self.noise_amplitude}")
        if self.segment_len_range[1] > self.seq_len_range[0]:
            raise ConfigError(
                f"segment_len_range max {self.segment_len_range[1]} exceeds "
                f"seq_len_range min {self.seq_len_range[0]}")


# ── Leitura ───────────────────────────────────────────────────────────────────

def _iter_lines(text: Union[str, TextIO, Iterable[str]]) -> Iterable[tuple[int, str]]:
    """Enumera linhas 1-based de uma string ou stream de caracteres."""
    lines = text.splitlines() if isinstance(text, str) else text
    for line_no, line in enumerate(lines, start=1):
        yield line_no, line.strip()


def parse_skeleton_file(text: Union[str, TextIO, Iterable[str]], source_id: str = "",
                        frame_rate: float = 30.0) -> SkeletonSequence:
    """Uma linha não vazia = um frame. Erros carregam o número da linha."""
    rows: list[np.ndarray] = []
    for line_no, line in _iter_lines(text):
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != FIELDS_PER_LINE:
            raise ParseError(f"expected {FIELDS_PER_LINE} values, got {len(tokens)}", line_no)
        try:
            values = np.array([float(tok) for tok in tokens], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"non-numeric token ({exc})", line_no) from None
        if not np.all(np.isfinite(values)):
            raise ParseError("non-finite value", line_no)
        rows.append(values)

    if not rows:
        coords = np.zeros((0, NUM_PERSONS, NUM_JOINTS, 3))
    else:
        coords = np.stack(rows).reshape(-1, NUM_PERSONS, NUM_JOINTS, 3)
    present = np.any(coords != 0.0, axis=(2, 3))
    return SkeletonSequence(coords=coords, present=present,
                            frame_rate=frame_rate, source_id=source_id)


def parse_label_file(text: Union[str, TextIO, Iterable[str]],
                     video_id: str = "") -> list[GroundTruthSegment]:
    """Lê "label,start,end,confidence"; converte label 1-based → 0-based."""
    segments: list[GroundTruthSegment] = []
    for line_no, line in _iter_lines(text):
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 4:
            raise ParseError(f"expected 4 comma-separated fields, got {len(fields)}", line_no)
        try:
            label, start, end = (int(f) for f in fields[:3])
            confidence = float(fields[3])
        except ValueError as exc:
            raise ParseError(f"non-numeric field ({exc})", line_no) from None
        if label < 1:
            raise ValidationError(f"label files are 1-based, got label {label}", line_no)
        try:
            segments.append(GroundTruthSegment(label - 1, start, end, confidence, video_id))
        except ValidationError as exc:
            raise ValidationError(str(exc), line_no) from None
    return segments


# ── Escrita ───────────────────────────────────────────────────────────────────

def render_skeleton_file(seq: SkeletonSequence) -> str:
    """
    Inverso de parse_skeleton_file. Usa repr() para que o round-trip seja exato.
    Uma pessoa presente com todas as coordenadas 0 volta como Ausente.
    """
    out: list[str] = []
    for t in range(len(seq)):
        parts: list[str] = []
        for p in range(NUM_PERSONS):
            if seq.present[t, p]:
                parts.extend(repr(float(v)) for v in seq.coords[t, p].ravel())
            else:
                parts.extend(["0"] * FIELDS_PER_PERSON)
        out.append(" ".join(parts))
    return "\n".join(out) + ("\n" if out else "")


def render_label_file(segments: Iterable[GroundTruthSegment]) -> str:
    return "".join(f"{s.label + 1},{s.start},{s.end},{s.confidence!r}\n" for s in segments)


# ── Dados sintéticos ──────────────────────────────────────────────────────────

def sequence_rng(seed: int, index: int) -> np.random.Generator:
    """Sub-stream PCG64 da sequência `index`; independe de quantas existem."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def class_motion(label: int, n_frames: int, frame_rate: float) -> np.ndarray:
    """
    Deslocamento [n_frames, 25, 3] da ação `label`: oscilação senoidal de um
    membro, com frequência/fase/eixo próprios da classe. A raiz da cadeia fica
    parada; a amplitude cresce linearmente até a extremidade.
    """
    chain = KINECT_PARTS[_MOTION_LIMBS[label % len(_MOTION_LIMBS)]]
    axis = label % 3
    freq_hz = 0.5 + 0.4 * label
    phase = label * np.pi / 3.0
    t = np.arange(n_frames, dtype=np.float64) / frame_rate
    wave = np.sin(2.0 * np.pi * freq_hz * t + phase)
    sway = np.cos(2.0 * np.pi * freq_hz * t + phase)

    disp = np.zeros((n_frames, NUM_JOINTS, 3))
    for pos, joint in enumerate(chain):
        amp = _MOTION_AMPLITUDE * pos / (len(chain) - 1)
        disp[:, joint, axis] += amp * wave
        disp[:, joint, (axis + 1) % 3] += 0.5 * amp * sway
    return disp


def _place_segments(rng: np.random.Generator, seq_len: int,
                    len_range: tuple[int, int], num_classes: int) -> list[tuple[int, int, int]]:
    """Sorteia 1–3 segmentos sem sobreposição: (label, start, end)."""
    count = int(rng.integers(1, 4))
    lengths = [int(v) for v in rng.integers(len_range[0], len_range[1] + 1, size=count)]
    while sum(lengths) > seq_len:
        lengths.pop()
    free = seq_len - sum(lengths)
    cuts = np.sort(rng.integers(0, free + 1, size=len(lengths)))
    labels = rng.integers(0, num_classes, size=len(lengths))

    placed: list[tuple[int, int, int]] = []
    offset = 0
    for cut, length, label in zip(cuts, lengths, labels):
        start = int(cut) + offset
        placed.append((int(label), start, start + length))
        offset += length
    return placed


def generate_one(config: SynthConfig, index: int) -> tuple[SkeletonSequence, list[GroundTruthSegment]]:
    rng = sequence_rng(config.seed, index)
    seq_len = int(rng.integers(config.seq_len_range[0], config.seq_len_range[1] + 1))
    translation = rng.uniform(-1.0, 1.0, size=3) + np.array([0.0, 0.0, 2.5])
    body_scale = rng.uniform(0.9, 1.1)

    body = np.broadcast_to(REST_POSE, (seq_len, NUM_JOINTS, 3)).copy()
    body += rng.uniform(-config.noise_amplitude, config.noise_amplitude, size=body.shape)

    source_id = f"synth-{index:05d}"
    segments: list[GroundTruthSegment] = []
    for label, start, end in _place_segments(rng, seq_len, config.segment_len_range,
                                             config.num_classes):
        body[start:end] += class_motion(label, end - start, config.frame_rate)
        segments.append(GroundTruthSegment(label, start, end, 1.0, source_id))

    coords = np.zeros((seq_len, NUM_PERSONS, NUM_JOINTS, 3))
    coords[:, 0] = body * body_scale + translation
    present = np.zeros((seq_len, NUM_PERSONS), dtype=bool)
    present[:, 0] = True
    seq = SkeletonSequence(coords=coords, present=present,
                           frame_rate=config.frame_rate, source_id=source_id)
    return seq, segments


def generate_synthetic(config: SynthConfig) -> list[tuple[SkeletonSequence, list[GroundTruthSegment]]]:
    """Função pura da config: mesma seed → saída bit-idêntica."""
    config.validate()
    data = [generate_one(config, i) for i in range(config.num_sequences)]
    log.debug("generated %d synthetic sequences (seed=%d)", len(data), config.seed)
    return data
