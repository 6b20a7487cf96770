"""
core/loss.py — Objetivo multibox: (L_conf + α·L_loc) / N.

  L_loc  — smooth L1 sobre os 4 offsets dos priors casados
  L_conf — softmax cross-entropy dos priors casados (classe k → slot k+1)
           + negativos minerados (slot 0 = fundo), no máximo ratio·N
  N = 0  → loss e gradientes exatamente zero
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from core.errors import ShapeError, ValidationError
from core.priors import (DEFAULT_NEG_POS_RATIO, MatchResult, encode_offsets_array,
                         hard_negative_mine)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class LossReport:
    total: float
    conf: float
    loc: float
    n_matched: int
    n_negatives: int


def smooth_l1(x: ArrayLike) -> tuple[ArrayLike, ArrayLike]:
    """(valor, derivada): 0.5x² se |x| < 1, senão |x| - 0.5."""
    x = np.asarray(x, dtype=np.float64)
    inside = np.abs(x) < 1.0
    value = np.where(inside, 0.5 * x * x, np.abs(x) - 0.5)
    deriv = np.where(inside, x, np.sign(x))
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def softmax_ce(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """-log softmax(logits)[label]; gradiente = softmax - one_hot(label)."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise ValidationError(f"label {label} out of range for {logits.shape[-1]} classes")
    logp = log_softmax(logits)
    grad = np.exp(logp)
    grad[label] -= 1.0
    return float(-logp[label]), grad


def multibox_loss(loc_pred: np.ndarray, conf_pred: np.ndarray, priors: np.ndarray,
                  gt_boxes: np.ndarray, gt_labels: np.ndarray, match: MatchResult,
                  alpha: float = 1.0,
                  neg_pos_ratio: float = DEFAULT_NEG_POS_RATIO) -> tuple[LossReport, np.ndarray, np.ndarray]:
    """Devolve (LossReport, dL/dloc_pred [P, 4], dL/dconf_pred [P, K+1])."""
    n_priors = priors.shape[0]
    if loc_pred.shape != (n_priors, 4) or conf_pred.shape[0] != n_priors \
            or match.gt_index.shape != (n_priors,):
        raise ShapeError("predictions do not line up with priors",
                         loc_pred.shape, conf_pred.shape, priors.shape)

    dloc = np.zeros_like(loc_pred, dtype=np.float64)
    dconf = np.zeros_like(conf_pred, dtype=np.float64)
    n_pos = match.num_matched
    if n_pos == 0:
        return LossReport(0.0, 0.0, 0.0, 0, 0), dloc, dconf

    pos = np.flatnonzero(match.gt_index >= 0)
    matched_gt = match.gt_index[pos]
    targets = encode_offsets_array(priors[pos], np.asarray(gt_boxes)[matched_gt])
    loc_value, loc_deriv = smooth_l1(loc_pred[pos] - targets)
    loss_loc = float(np.sum(loc_value))

    logp = log_softmax(conf_pred)
    # mineração sobre a CE de fundo, sem gradiente próprio
    negatives = hard_negative_mine(-logp[:, 0], match, neg_pos_ratio)

    rows = np.concatenate([pos, negatives])
    labels = np.concatenate([np.asarray(gt_labels, dtype=np.int64)[matched_gt] + 1,
                             np.zeros(negatives.size, dtype=np.int64)])
    if labels.size and labels.max() >= conf_pred.shape[1]:
        raise ValidationError(f"gt label {labels.max() - 1} has no confidence slot")
    loss_conf = float(-np.sum(logp[rows, labels]))

    grad_rows = np.exp(logp[rows])
    grad_rows[np.arange(rows.size), labels] -= 1.0
    dconf[rows] = grad_rows / n_pos
    dloc[pos] = alpha * loc_deriv / n_pos

    total = (loss_conf + alpha * loss_loc) / n_pos
    return LossReport(total, loss_conf, loss_loc, n_pos, int(negatives.size)), dloc, dconf
