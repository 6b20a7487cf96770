"""Fixtures e utilitários compartilhados pela suíte."""
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from core.network import tiny_config  # noqa: E402
from core.skeleton_io import NUM_JOINTS, NUM_PERSONS, SkeletonSequence  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_net_config():
    """TinySkeletonNet estreita: 50×128, cabeças com 16/8/4/2/1 colunas."""
    return tiny_config(num_actions=2, width=128, channels=(3, 3, 3, 3, 3))


def make_sequence(coords: np.ndarray, present=None, source_id: str = "seq") -> SkeletonSequence:
    """coords [T, 25, 3] (só pessoa 1) ou [T, 2, 25, 3]."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim == 3:
        full = np.zeros((coords.shape[0], NUM_PERSONS, NUM_JOINTS, 3))
        full[:, 0] = coords
        coords = full
        if present is None:
            present = np.zeros(coords.shape[:2], dtype=bool)
            present[:, 0] = True
    if present is None:
        present = np.ones(coords.shape[:2], dtype=bool)
    return SkeletonSequence(coords=coords, present=present, source_id=source_id)


def numeric_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Diferenças centrais elemento a elemento (x é perturbado in-place e restaurado)."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        f_plus = f()
        x[idx] = orig - h
        f_minus = f()
        x[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2 * h)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
