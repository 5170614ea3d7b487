"""Experimental observables: weight drift, activation-flip statistics, and
scaling diagnostics used by the empirical verification suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg, network
from .data import Dataset
from .network import NetworkState


@dataclass(frozen=True)
class MetricSample:
    t: int
    max_dist: float
    pattern_ratio: float
    sup_flip_count: int
    residual_norm: float
    loss: float


def max_distance(s: NetworkState) -> float:
    """Largest per-neuron distance from initialization, max_r ||w_r - w0_r||."""
    diff = s.W - s.W0
    return float(np.sqrt((diff * diff).sum(axis=0)).max())


def pattern_ratio(s: NetworkState, ds: Dataset) -> float:
    """Instantaneous fraction of the m*n activation indicators that differ
    from their value at initialization (time t vs time 0 directly)."""
    now = network.activation_pattern(s, ds.X)
    init = network.activation_pattern(s, ds.X, at_init=True)
    return float((now != init).mean())


@dataclass(frozen=True)
class FlipCountReport:
    counts: np.ndarray  # cumulative flips per instance
    sup_count: int
    bound: float  # 4*m*R
    per_instance_ok: np.ndarray

    @property
    def all_ok(self) -> bool:
        return bool(self.per_instance_ok.all())


def flip_counts(pattern_history: list[np.ndarray], R: float) -> FlipCountReport:
    """Cumulative per-instance flip counts from a history of n x m
    activation-pattern snapshots (first snapshot is the reference), checked
    against the 4*m*R neuron-flip bound. Report-only: the bound is a
    high-probability claim.
    """
    if not pattern_history:
        raise ValueError("need at least the initial pattern snapshot")
    init = pattern_history[0]
    m = init.shape[1]
    flipped = np.zeros_like(init, dtype=bool)
    for pat in pattern_history[1:]:
        flipped |= pat != init
    counts = flipped.sum(axis=1)
    bound = 4.0 * m * R
    return FlipCountReport(
        counts=counts,
        sup_count=int(counts.max()),
        bound=bound,
        per_instance_ok=counts <= bound,
    )


@dataclass(frozen=True)
class GramDriftReport:
    measured: float
    bound: float
    ok: bool


def gram_drift(H_t: np.ndarray, H_0: np.ndarray, R: float, n: int) -> GramDriftReport:
    """Frobenius drift of the Gram matrix against its 2*n*R bound (report-only)."""
    measured = linalg.fro_norm(np.asarray(H_t) - np.asarray(H_0))
    bound = 2.0 * n * R
    return GramDriftReport(measured=measured, bound=bound, ok=measured <= bound)


@dataclass(frozen=True)
class InitResidualReport:
    norm_sq: float
    reference: float
    ratio: float


def init_residual_check(xi0: np.ndarray, n: int, m: int, delta: float = 0.1) -> InitResidualReport:
    """Initial residual energy against its n*log(m/delta)*log^2(n/delta)
    scaling reference. The asymptotic statement carries no constant, so this
    is a diagnostic ratio to track across (n, m), never a pass/fail gate.
    """
    norm_sq = float(np.asarray(xi0) @ np.asarray(xi0))
    reference = n * np.log(m / delta) * np.log(n / delta) ** 2
    return InitResidualReport(norm_sq=norm_sq, reference=float(reference), ratio=norm_sq / reference)


def iters_to_threshold(losses: np.ndarray, frac: float) -> int | None:
    """First iteration with loss <= frac * initial loss, or None if never."""
    if not 0.0 < frac < 1.0:
        raise ValueError("frac must be in (0, 1)")
    losses = np.asarray(losses)
    hits = np.where(losses <= frac * losses[0])[0]
    return int(hits[0]) if hits.size else None
