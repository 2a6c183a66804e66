"""Dense layer kernels with hand-written backward passes.

Tensors are float64 numpy arrays in NCHW layout. Convolutions are 3x3
cross-correlations with zero padding 1 and stride 1.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BatchTooSmall, OddSpatialDim, ShapeMismatch

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

_check_finite = os.environ.get("AFDC_CHECK_FINITE", "0") == "1"


def set_check_finite(enabled: bool) -> None:
    """Toggle NaN/Inf checking on every layer output."""
    global _check_finite
    _check_finite = bool(enabled)


def _finite(name, arr):
    if _check_finite and not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values after {name}")
    return arr


def _expect(cond, msg):
    if not cond:
        raise ShapeMismatch(msg)


# convolution -----------------------------------------------------------------

def conv2d_fwd(x, w, b):
    """Y[n,o,i,j] = sum_c,m,k X[n,c,i+m-1,j+k-1] * W[o,c,m,k] + b[o]."""
    _expect(x.ndim == 4, f"conv input must be (N,C,H,W), got {x.shape}")
    c = x.shape[1]
    _expect(w.ndim == 4 and w.shape[1:] == (c, 3, 3),
            f"kernel {w.shape} does not match input channels {c} with 3x3 window")
    _expect(b.shape == (w.shape[0],), f"bias {b.shape} vs {w.shape[0]} output channels")
    y = kernels.conv3x3_fwd(np.ascontiguousarray(x, dtype=np.float64),
                            np.ascontiguousarray(w), np.ascontiguousarray(b))
    return _finite("conv2d", y)


def conv2d_bwd(dy, x, w, need_dx=True):
    """Gradients (dX, dW, db) of :func:`conv2d_fwd`; dX is None when not needed."""
    n, c, h, wd = x.shape
    _expect(dy.shape == (n, w.shape[0], h, wd), f"upstream grad {dy.shape} vs output shape")
    dy = np.ascontiguousarray(dy, dtype=np.float64)
    db = dy.sum(axis=(0, 2, 3))
    dw = kernels.conv3x3_bwd_weight(dy, np.ascontiguousarray(x, dtype=np.float64))
    dx = kernels.conv3x3_bwd_input(dy, np.ascontiguousarray(w)) if need_dx else None
    return dx, dw, db


# fully connected -----------------------------------------------------------------

def fc_fwd(x, w, b):
    _expect(x.ndim == 2 and w.ndim == 2 and x.shape[1] == w.shape[1],
            f"fc input {x.shape} vs weights {w.shape}")
    _expect(b.shape == (w.shape[0],), f"bias {b.shape} vs weights {w.shape}")
    if x.shape[0] == 1:
        # keep single rows on the GEMM path so results match batched calls bitwise
        return _finite("fc", (np.concatenate([x, x]) @ w.T + b)[:1])
    return _finite("fc", x @ w.T + b)


def fc_bwd(dy, x, w):
    _expect(dy.shape == (x.shape[0], w.shape[0]), f"upstream grad {dy.shape}")
    return dy @ w, dy.T @ x, dy.sum(axis=0)


# pooling / activation ----------------------------------------------------------------

def maxpool2x2_fwd(x):
    """Max over disjoint 2x2 windows; ties resolve to the first in row-major order."""
    _expect(x.ndim == 4, f"pool input must be (N,C,H,W), got {x.shape}")
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise OddSpatialDim(f"2x2 pooling needs even H, W, got {x.shape[2:]}")
    return kernels.maxpool2x2_fwd(np.ascontiguousarray(x, dtype=np.float64))


def maxpool2x2_bwd(dy, idx):
    _expect(dy.shape == idx.shape, f"upstream grad {dy.shape} vs indices {idx.shape}")
    return kernels.maxpool2x2_bwd(np.ascontiguousarray(dy), idx)


def relu_fwd(x):
    return np.maximum(x, 0.0)


def relu_bwd(dy, x):
    return dy * (x > 0)


# batch normalization ------------------------------------------------------------------

@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray

    @classmethod
    def init(cls, channels):
        return cls(np.ones(channels), np.zeros(channels), np.zeros(channels), np.ones(channels))


def _bn_axes(x):
    _expect(x.ndim in (2, 4), f"batchnorm input must be (N,C) or (N,C,H,W), got {x.shape}")
    return (0,) if x.ndim == 2 else (0, 2, 3)


def _bcast(v, x):
    return v[None, :] if x.ndim == 2 else v[None, :, None, None]


def batchnorm_fwd(x, p: BatchNormParams, train: bool):
    """Returns (y, cache); cache is None in inference mode.

    Training mode normalizes by batch statistics and updates the running mean
    and (unbiased) running variance in ``p`` with momentum 0.1.
    """
    axes = _bn_axes(x)
    _expect(p.gamma.shape == (x.shape[1],), f"{x.shape[1]} channels vs gamma {p.gamma.shape}")
    if not train:
        inv = 1.0 / np.sqrt(p.running_var + BN_EPS)
        y = (x - _bcast(p.running_mean, x)) * _bcast(inv * p.gamma, x) + _bcast(p.beta, x)
        return _finite("batchnorm", y), None
    m = x.size // x.shape[1]
    if m < 2:
        raise BatchTooSmall(f"batchnorm needs >= 2 values per channel, got {m}")
    if x.ndim == 4:
        x = np.ascontiguousarray(x, dtype=np.float64)
        y, mean, var = kernels.batchnorm_train_fwd(x, p.gamma, p.beta, BN_EPS)
    else:
        mean = x.mean(axis=0)
        xc = x - mean
        var = (xc * xc).mean(axis=0)
        y = xc * (p.gamma / np.sqrt(var + BN_EPS)) + p.beta
    inv = 1.0 / np.sqrt(var + BN_EPS)
    p.running_mean *= 1.0 - BN_MOMENTUM
    p.running_mean += BN_MOMENTUM * mean
    p.running_var *= 1.0 - BN_MOMENTUM
    p.running_var += BN_MOMENTUM * var * (m / (m - 1))
    return _finite("batchnorm", y), (x, mean, inv)


def batchnorm_bwd(dy, cache, gamma):
    """Gradients (dX, dgamma, dbeta) through training-mode batch normalization."""
    x, mean, inv = cache
    _expect(dy.shape == x.shape, f"upstream grad {dy.shape} vs {x.shape}")
    if dy.ndim == 4:
        return kernels.batchnorm_train_bwd(np.ascontiguousarray(dy, dtype=np.float64), x, mean, inv, gamma)
    axes = _bn_axes(dy)
    xhat = (x - _bcast(mean, x)) * _bcast(inv, x)
    dbeta = dy.sum(axis=axes)
    dgamma = (dy * xhat).sum(axis=axes)
    m = dy.size // dy.shape[1]
    dx = _bcast(gamma * inv / m, dy) * (m * dy - _bcast(dbeta, dy) - xhat * _bcast(dgamma, dy))
    return dx, dgamma, dbeta


# loss -----------------------------------------------------------------------------------

def mse_loss(pred, target):
    """Mean squared error and its gradient with respect to ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _expect(pred.shape == target.shape, f"prediction {pred.shape} vs target {target.shape}")
    _expect(pred.size >= 1, "empty batch")
    diff = pred - target
    n = pred.shape[0]
    return float(np.sum(diff * diff) / n), (2.0 / n) * diff


# optimizers ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    for k, g in grads.items():
        _expect(g.shape == params[k].shape, f"grad {k} {g.shape} vs param {params[k].shape}")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for k, g in grads.items():
        if k not in state.m:
            state.m[k] = np.zeros_like(g)
            state.v[k] = np.zeros_like(g)
        m, v = state.m[k], state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        params[k] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def sgd_step(params: dict, grads: dict, state, lr: float) -> None:
    for k, g in grads.items():
        _expect(g.shape == params[k].shape, f"grad {k} {g.shape} vs param {params[k].shape}")
        params[k] -= lr * g
