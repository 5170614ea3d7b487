"""Two-layer ReLU network: f(x) = (1/sqrt(m)) * sum_r a_r * relu(<w_r, x>).

The output layer ``a`` is frozen at initialization; only the hidden
weights W train. The activation indicator is I{z >= 0} everywhere, so
the kink at exactly zero counts as active (matters only for gradients,
and keeps runs bitwise deterministic).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


class ShapeError(ValueError):
    """Feature dimension does not match the network."""


@dataclass
class NetworkState:
    """Hidden weights W (d x m), frozen signs a, frozen initial copy W0,
    and the auxiliary iterate V used by the two-step momentum update."""

    W: np.ndarray
    a: np.ndarray
    W0: np.ndarray
    V: np.ndarray

    @property
    def m(self) -> int:
        return self.W.shape[1]

    @property
    def d(self) -> int:
        return self.W.shape[0]


def init(m: int, d: int, seed: int) -> NetworkState:
    """Standard-normal hidden weights, Rademacher(1/2) output signs, V = W = W0."""
    if m < 1 or d < 1:
        raise ValueError(f"need m >= 1 and d >= 1, got m={m} d={d}")
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((d, m))
    a = rng.choice([-1.0, 1.0], size=m)
    a.setflags(write=False)
    W0 = W.copy()
    W0.setflags(write=False)
    return NetworkState(W=W, a=a, W0=W0, V=W.copy())


def _check_features(s: NetworkState, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != s.d:
        raise ShapeError(f"features shape {X.shape} incompatible with input dim {s.d}")
    return X


def forward(s: NetworkState, X: np.ndarray) -> np.ndarray:
    """Network outputs for each feature row."""
    X = _check_features(s, X)
    pre = X @ s.W
    return (np.maximum(pre, 0.0) @ s.a) / np.sqrt(s.m)


def residual(s: NetworkState, ds: Dataset) -> np.ndarray:
    """Prediction-minus-label vector."""
    return forward(s, ds.X) - ds.y


def loss(s: NetworkState, ds: Dataset) -> float:
    """Square loss (1/2) * sum_i (y_i - f(x_i))^2 — no 1/n factor."""
    xi = residual(s, ds)
    return 0.5 * float(xi @ xi)


def gradient(s: NetworkState, ds: Dataset, xi: np.ndarray | None = None) -> np.ndarray:
    """Full-batch loss gradient w.r.t. W; column r is the r-th neuron's gradient.

    Passing a precomputed residual avoids one forward pass inside the
    training loop.
    """
    X = _check_features(s, ds.X)
    if xi is None:
        xi = residual(s, ds)
    active = (X @ s.W) >= 0
    return (X.T @ (xi[:, None] * active)) * s.a / np.sqrt(s.m)


def activation_pattern(s: NetworkState, X: np.ndarray, at_init: bool = False) -> np.ndarray:
    """Boolean n x m matrix of activation indicators at W (or at W0)."""
    X = _check_features(s, X)
    return (X @ (s.W0 if at_init else s.W)) >= 0
