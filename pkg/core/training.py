"""
core/training.py — Loop de treino: SGD com momento e weight decay, agenda de
learning rate por platô e aumento de dados por recorte temporal aleatório.

Determinismo:
  • permutação da época e aumento de cada amostra vêm de sub-streams PCG64
    derivados de (seed, época, amostra) e independem de --jobs;
  • gradientes por amostra são reduzidos na ordem da amostra.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from core.errors import ConfigError, TrainingError, ValidationError
from core.loss import LossReport, multibox_loss
from core.network import SkeletonNet
from core.priors import match_gt
from core.workers import map_ordered

log = logging.getLogger(__name__)


# ── Configuração ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TrainConfig:
    lr: float = 4e-6
    momentum: float = 0.9
    weight_decay: float = 0.0005
    batch_size: int = 4
    lr_drop_factor: float = 10.0
    lr_drops_max: int = 3
    plateau_patience: int = 1
    max_epochs: int = 30
    seed: int = 0
    augment_prob: float = 0.5
    alpha: float = 1.0
    match_threshold: float = 0.5
    neg_pos_ratio: float = 3.0

    def validate(self) -> None:
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.weight_decay < 0 or self.lr_drop_factor <= 1 or self.lr_drops_max < 0:
            raise ConfigError("weight_decay >= 0, lr_drop_factor > 1 and lr_drops_max >= 0 required")
        if self.plateau_patience < 1 or self.max_epochs < 0:
            raise ConfigError("plateau_patience >= 1 and max_epochs >= 0 required")
        if not 0 <= self.augment_prob <= 1:
            raise ConfigError(f"augment_prob must lie in [0, 1], got {self.augment_prob}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Sample:
    """Uma imagem de entrada da rede com seus gts em coordenadas normalizadas."""
    x: np.ndarray            # [H, W, 3] float64 em [0, 1]
    boxes: np.ndarray        # [G, 4]
    labels: np.ndarray       # [G] 0-based
    sample_id: str = ""


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    lr: float


# ── SGD ───────────────────────────────────────────────────────────────────────

def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             velocity: dict[str, np.ndarray], cfg: TrainConfig,
             current_lr: float) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """v ← μ·v − lr·(g + wd·p); p ← p + v. Atualiza in-place e devolve ambos."""
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValidationError(f"gradient for '{name}' has shape {g.shape}, param {p.shape}")
        v = velocity.setdefault(name, np.zeros_like(p))
        v *= cfg.momentum
        v -= current_lr * (g + cfg.weight_decay * p)
        p += v
    return params, velocity


@dataclass
class PlateauSchedule:
    """Divide o lr por `factor` após `patience` épocas sem queda da loss, até `max_drops` vezes."""
    lr: float
    factor: float = 10.0
    patience: int = 1
    max_drops: int = 3
    best: float = math.inf
    bad_epochs: int = 0
    drops: int = 0

    def update(self, epoch_loss: float) -> float:
        """Registra a loss da época e devolve o lr da próxima."""
        if epoch_loss < self.best:
            self.best = epoch_loss
            self.bad_epochs = 0
            return self.lr
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience and self.drops < self.max_drops:
            self.lr /= self.factor
            self.drops += 1
            self.bad_epochs = 0
            log.info("loss plateau: learning rate dropped to %g (%d/%d)",
                     self.lr, self.drops, self.max_drops)
        return self.lr

    def state(self) -> dict:
        return {"lr": self.lr, "factor": self.factor, "patience": self.patience,
                "max_drops": self.max_drops,
                "best": None if math.isinf(self.best) else self.best,
                "bad_epochs": self.bad_epochs, "drops": self.drops}

    @classmethod
    def from_state(cls, state: dict) -> "PlateauSchedule":
        best = state.get("best")
        return cls(lr=float(state["lr"]), factor=float(state["factor"]),
                   patience=int(state["patience"]), max_drops=int(state["max_drops"]),
                   best=math.inf if best is None else float(best),
                   bad_epochs=int(state["bad_epochs"]), drops=int(state["drops"]))


# ── Aumento: recorte temporal aleatório ───────────────────────────────────────

def random_patch(x: np.ndarray, boxes: np.ndarray, labels: np.ndarray,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Recorta uma janela temporal que contém o centro de ao menos um gt e a
    reamostra para a largura total. Mantém os gts cujo centro cai na janela,
    com as extremidades recortadas.
    """
    width = x.shape[1]
    if boxes.shape[0] == 0:
        return x, boxes, labels
    anchor = float(boxes[int(rng.integers(0, boxes.shape[0])), 0])
    frac = float(rng.uniform(0.3, 1.0))
    lo, hi = max(0.0, anchor - frac), min(anchor, 1.0 - frac)
    x0 = float(rng.uniform(lo, hi)) if hi > lo else max(0.0, min(lo, 1.0 - frac))
    c0 = int(math.floor(x0 * width))
    c1 = min(width, max(c0 + 1, int(math.ceil((x0 + frac) * width))))

    span = c1 - c0
    cols = np.arange(width)
    src = c0 + np.minimum(((2 * cols + 1) * span) // (2 * width), span - 1)
    patch = np.ascontiguousarray(x[:, src])

    left = (boxes[:, 0] - boxes[:, 2] / 2.0) * width
    right = (boxes[:, 0] + boxes[:, 2] / 2.0) * width
    centers = boxes[:, 0] * width
    keep = (centers >= c0) & (centers <= c1)
    new_left = np.clip((left[keep] - c0) / span, 0.0, 1.0)
    new_right = np.clip((right[keep] - c0) / span, 0.0, 1.0)
    valid = new_right > new_left
    new_boxes = np.stack([(new_left + new_right) / 2.0, boxes[keep, 1],
                          new_right - new_left, boxes[keep, 3]], axis=1)[valid]
    return patch, new_boxes, labels[keep][valid]


# ── Passo por amostra ─────────────────────────────────────────────────────────

def sample_gradients(net: SkeletonNet, priors: np.ndarray, sample: Sample,
                     cfg: TrainConfig) -> tuple[LossReport, dict[str, np.ndarray]]:
    heads, cache = net.forward(sample.x)
    loc, conf = net.flatten(heads)
    match = match_gt(priors, sample.boxes, cfg.match_threshold)
    report, dloc, dconf = multibox_loss(loc, conf, priors, sample.boxes, sample.labels,
                                        match, cfg.alpha, cfg.neg_pos_ratio)
    grads = net.backward(cache, net.unflatten(heads, dloc, dconf))
    return report, grads


def _substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _prepare(sample: Sample, cfg: TrainConfig, epoch: int, index: int) -> Sample:
    if cfg.augment_prob <= 0:
        return sample
    rng = _substream(cfg.seed, epoch, index + 1)
    if rng.uniform() >= cfg.augment_prob:
        return sample
    x, boxes, labels = random_patch(sample.x, sample.boxes, sample.labels, rng)
    return Sample(x, boxes, labels, sample.sample_id)


# ── Loop ──────────────────────────────────────────────────────────────────────

@dataclass
class TrainResult:
    net: SkeletonNet
    loss_log: list[EpochRecord]
    velocity: dict[str, np.ndarray]
    schedule: PlateauSchedule
    epochs_done: int


def train(samples: Sequence[Sample], net: SkeletonNet, cfg: TrainConfig, jobs: int = 1,
          velocity: Optional[dict[str, np.ndarray]] = None,
          schedule: Optional[PlateauSchedule] = None, start_epoch: int = 0,
          on_epoch: Optional[Callable[[TrainResult], None]] = None) -> TrainResult:
    """
    Treina `net` in-place. Cada época percorre mini-batches embaralhados; o
    gradiente do batch é a média dos gradientes por imagem (N normalizado por
    imagem). Loss não finita → TrainingError com época/batch.

    `on_epoch` recebe o estado completo ao fim de cada época, já com a agenda
    atualizada: um checkpoint gravado ali retoma exatamente daquele ponto.
    """
    cfg.validate()
    if not samples:
        raise ValidationError("cannot train on an empty dataset")
    priors = net.priors()
    velocity = velocity if velocity is not None else {}
    schedule = schedule or PlateauSchedule(cfg.lr, cfg.lr_drop_factor,
                                           cfg.plateau_patience, cfg.lr_drops_max)
    loss_log: list[EpochRecord] = []

    for epoch in range(start_epoch, cfg.max_epochs):
        lr = schedule.lr
        order = _substream(cfg.seed, epoch).permutation(len(samples))
        epoch_losses: list[float] = []
        for batch_no, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = [int(i) for i in order[start:start + cfg.batch_size]]
            prepared = [_prepare(samples[i], cfg, epoch, i) for i in batch]
            results = map_ordered(lambda s: sample_gradients(net, priors, s, cfg),
                                  prepared, jobs, name="Grad")

            summed = {k: np.zeros_like(v) for k, v in net.params.items()}
            for report, grads in results:
                if not math.isfinite(report.total):
                    raise TrainingError("non-finite loss", epoch + 1, batch_no + 1)
                epoch_losses.append(report.total)
                for k in summed:
                    summed[k] += grads[k]
            mean_grads = {k: v / len(results) for k, v in summed.items()}
            sgd_step(net.params, mean_grads, velocity, cfg, lr)

        epoch_loss = float(np.mean(epoch_losses))
        record = EpochRecord(epoch + 1, epoch_loss, lr)
        loss_log.append(record)
        log.info("epoch %d: loss %.6f (lr %g)", record.epoch, record.loss, record.lr)
        schedule.update(epoch_loss)
        if on_epoch is not None:
            on_epoch(TrainResult(net, list(loss_log), velocity, schedule, epoch + 1))

    return TrainResult(net, loss_log, velocity, schedule, max(start_epoch, cfg.max_epochs))
