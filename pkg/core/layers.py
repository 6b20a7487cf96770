"""
core/layers.py — Motor de tensores mínimo (numpy float64, layout HWC).

Cada operação diferenciável tem forward e backward explícitos:
  conv2d / conv2d_backward   — correlação cruzada com zero-padding
  relu / relu_backward
  maxpool / maxpool_backward — empates vão para o primeiro máximo (row-major)

Todas são funções puras e determinísticas.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.errors import ShapeError

Tensor = np.ndarray
Pair = tuple[int, int]


# ── Convolução ────────────────────────────────────────────────────────────────

def conv_output_shape(h: int, w: int, kernel: Pair, stride: Pair, pad: Pair) -> Pair:
    return ((h + 2 * pad[0] - kernel[0]) // stride[0] + 1,
            (w + 2 * pad[1] - kernel[1]) // stride[1] + 1)


def _windows(x: Tensor, kernel: Pair, stride: Pair, pad: Pair) -> Tensor:
    """Janelas [Ho, Wo, Cin, kh, kw] (view; copiada só dentro do tensordot)."""
    xp = np.pad(x, ((pad[0], pad[0]), (pad[1], pad[1]), (0, 0)))
    win = sliding_window_view(xp, kernel, axis=(0, 1))
    return win[::stride[0], ::stride[1]]


def _check_conv(x: Tensor, k: Tensor, pad: Pair) -> None:
    if x.ndim != 3 or k.ndim != 4 or x.shape[2] != k.shape[2]:
        raise ShapeError("conv2d expects input [H, W, Cin] and kernel [kh, kw, Cin, Cout]",
                         x.shape, k.shape)
    if x.shape[0] + 2 * pad[0] < k.shape[0] or x.shape[1] + 2 * pad[1] < k.shape[1]:
        raise ShapeError("padded input smaller than kernel", x.shape, k.shape)


def conv2d(x: Tensor, k: Tensor, stride: Pair = (1, 1), pad: Pair = (0, 0)) -> Tensor:
    """[H, W, Cin] ⋆ [kh, kw, Cin, Cout] → [Ho, Wo, Cout]."""
    _check_conv(x, k, pad)
    win = _windows(x, k.shape[:2], stride, pad)
    return np.tensordot(win, k, axes=([3, 4, 2], [0, 1, 2]))


def conv2d_backward(x: Tensor, k: Tensor, grad_out: Tensor,
                    stride: Pair = (1, 1), pad: Pair = (0, 0)) -> tuple[Tensor, Tensor]:
    """Adjunto de conv2d: devolve (dL/dx, dL/dk)."""
    _check_conv(x, k, pad)
    kh, kw = k.shape[:2]
    win = _windows(x, (kh, kw), stride, pad)
    if grad_out.shape != win.shape[:2] + (k.shape[3],):
        raise ShapeError("conv2d_backward: upstream gradient shape",
                         grad_out.shape, win.shape[:2] + (k.shape[3],))

    # [Cin, kh, kw, Cout] → [kh, kw, Cin, Cout]
    dk = np.tensordot(win, grad_out, axes=([0, 1], [0, 1])).transpose(1, 2, 0, 3)

    ho, wo = grad_out.shape[:2]
    dcol = np.tensordot(grad_out, k, axes=([2], [3]))          # [Ho, Wo, kh, kw, Cin]
    dxp = np.zeros((x.shape[0] + 2 * pad[0], x.shape[1] + 2 * pad[1], x.shape[2]))
    sh, sw = stride
    for i in range(kh):
        for j in range(kw):
            dxp[i:i + sh * ho:sh, j:j + sw * wo:sw] += dcol[:, :, i, j]
    dx = dxp[pad[0]:pad[0] + x.shape[0], pad[1]:pad[1] + x.shape[1]]
    return np.ascontiguousarray(dx), dk


# ── ReLU ──────────────────────────────────────────────────────────────────────

def relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0.0)


def relu_backward(x: Tensor, grad_out: Tensor) -> Tensor:
    if x.shape != grad_out.shape:
        raise ShapeError("relu_backward", x.shape, grad_out.shape)
    return np.where(x > 0.0, grad_out, 0.0)


# ── Max-pooling (janela = stride) ─────────────────────────────────────────────

def _pool_blocks(x: Tensor, size: Pair) -> Tensor:
    """[Ho, Wo, C, ph·pw] com a janela em ordem row-major. Bordas que sobram são descartadas."""
    ph, pw = size
    if x.ndim != 3 or x.shape[0] < ph or x.shape[1] < pw:
        raise ShapeError(f"maxpool {size} on input", x.shape)
    ho, wo = x.shape[0] // ph, x.shape[1] // pw
    blocks = x[:ho * ph, :wo * pw].reshape(ho, ph, wo, pw, x.shape[2])
    return blocks.transpose(0, 2, 4, 1, 3).reshape(ho, wo, x.shape[2], ph * pw)


def maxpool(x: Tensor, size: Pair = (2, 2)) -> Tensor:
    return _pool_blocks(x, size).max(axis=-1)


def maxpool_backward(x: Tensor, grad_out: Tensor, size: Pair = (2, 2)) -> Tensor:
    blocks = _pool_blocks(x, size)
    if grad_out.shape != blocks.shape[:3]:
        raise ShapeError("maxpool_backward", grad_out.shape, blocks.shape[:3])
    ph, pw = size
    ho, wo, c, _ = blocks.shape
    winner = np.argmax(blocks, axis=-1)                        # primeiro máximo
    onehot = (np.arange(ph * pw) == winner[..., None]) * grad_out[..., None]
    dx = np.zeros_like(x, dtype=np.float64)
    dx[:ho * ph, :wo * pw] = (onehot.reshape(ho, wo, c, ph, pw)
                              .transpose(0, 3, 1, 4, 2)
                              .reshape(ho * ph, wo * pw, c))
    return dx
