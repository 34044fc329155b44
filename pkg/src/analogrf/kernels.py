"""Exact kernels, Gram matrices, softmax attention, and error metrics.

Everything in this module is a ground-truth oracle: plain float64 numpy with
no approximation. The random-feature and analog-backend code elsewhere in the
package is tested against these functions.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Kernel",
    "GramPair",
    "kernel_eval",
    "gram",
    "approx_error",
    "mse",
    "softmax_rows",
    "attention_exact",
]


class Kernel(str, Enum):
    """Closed set of kernels supported by the feature samplers."""

    RBF = "rbf"
    ARCCOS0 = "arccos0"
    SOFTMAX = "softmax"


def _as_vector(v) -> np.ndarray:
    return np.asarray(v, dtype=np.float64).ravel()


def kernel_eval(kernel: Kernel, x, y) -> float:
    """Evaluate k(x, y) exactly.

    RBF:      exp(-||x - y||^2 / 2)
    ArcCos0:  1 - theta / pi, theta the angle between x and y
    Softmax:  exp(x . y)

    ArcCos0 is undefined when either argument is the zero vector.
    """
    x, y = _as_vector(x), _as_vector(y)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if kernel is Kernel.RBF:
        diff = x - y
        return float(np.exp(-0.5 * (diff @ diff)))
    if kernel is Kernel.ARCCOS0:
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        if nx == 0.0 or ny == 0.0:
            raise ValueError("arccos0 kernel is undefined for zero vectors")
        # Round-off can push the cosine fractionally outside [-1, 1].
        c = np.clip((x @ y) / (nx * ny), -1.0, 1.0)
        return float(1.0 - np.arccos(c) / np.pi)
    if kernel is Kernel.SOFTMAX:
        return float(np.exp(x @ y))
    raise ValueError(f"unknown kernel: {kernel!r}")


def gram(kernel: Kernel, X, Y=None) -> np.ndarray:
    """Pairwise kernel matrix G[i, j] = k(X[i], Y[j]); Y defaults to X."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if kernel is Kernel.RBF:
        sq = (
            np.sum(X * X, axis=1)[:, None]
            + np.sum(Y * Y, axis=1)[None, :]
            - 2.0 * (X @ Y.T)
        )
        return np.exp(-0.5 * np.maximum(sq, 0.0))
    if kernel is Kernel.ARCCOS0:
        nx = np.linalg.norm(X, axis=1)
        ny = np.linalg.norm(Y, axis=1)
        if np.any(nx == 0.0) or np.any(ny == 0.0):
            raise ValueError("arccos0 kernel is undefined for zero vectors")
        c = np.clip((X / nx[:, None]) @ (Y / ny[:, None]).T, -1.0, 1.0)
        return 1.0 - np.arccos(c) / np.pi
    if kernel is Kernel.SOFTMAX:
        return np.exp(X @ Y.T)
    raise ValueError(f"unknown kernel: {kernel!r}")


@dataclass(frozen=True)
class GramPair:
    """An exact Gram matrix together with an approximation of it."""

    exact: np.ndarray
    approx: np.ndarray

    def __post_init__(self):
        exact = np.asarray(self.exact, dtype=np.float64)
        approx = np.asarray(self.approx, dtype=np.float64)
        if exact.shape != approx.shape:
            raise ValueError(
                f"shape mismatch: exact {exact.shape} vs approx {approx.shape}"
            )
        object.__setattr__(self, "exact", exact)
        object.__setattr__(self, "approx", approx)


def approx_error(pair: GramPair) -> float:
    """Relative Frobenius error ||G - Ghat||_F / ||G||_F of an approximation."""
    denom = np.linalg.norm(pair.exact)
    if denom == 0.0:
        raise ValueError("approximation error undefined for a zero exact matrix")
    return float(np.linalg.norm(pair.exact - pair.approx) / denom)


def mse(A, B) -> float:
    """Mean squared entrywise difference between two equal-shape matrices."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.mean((A - B) ** 2))


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for numerical stability."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def attention_exact(Q, K, V, d_head: int | None = None) -> np.ndarray:
    """Reference softmax attention: softmax(Q K^T / sqrt(d_head)) V."""
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    K = np.atleast_2d(np.asarray(K, dtype=np.float64))
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    if Q.shape[1] != K.shape[1]:
        raise ValueError("query/key dimension mismatch")
    if K.shape[0] != V.shape[0]:
        raise ValueError("key/value length mismatch")
    if d_head is None:
        d_head = Q.shape[1]
    logits = (Q @ K.T) / np.sqrt(float(d_head))
    return softmax_rows(logits) @ V
