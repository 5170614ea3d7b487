"""GD, heavy-ball and Nesterov updates on the network, plus the training loop.

The canonical Nesterov implementation is the two-step form

    v_{t+1} = w_t - eta * grad(w_t)
    w_{t+1} = v_{t+1} + beta * (v_{t+1} - v_t),        v_0 = w_0.

The single-line form (momentum plus gradient-correction term) is kept as a
verification oracle; the two are algebraically identical, so trajectories
may differ only by float drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import metrics, network, ntk
from .data import Dataset
from .network import NetworkState
from .ntk import HyperParams, Method

LOSS_CAP = 1e12


class DivergenceError(RuntimeError):
    """Training produced a non-finite or runaway iterate."""

    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass
class OptimizerState:
    """Bookkeeping shared by the update rules.

    ``W_prev`` starts equal to W (the w_{-1} = w_0 convention) and
    ``grad_prev`` starts at zero: with v_0 = w_0 the two-step form gives
    w_1 = w_0 - eta*(1+beta)*grad(w_0), and the one-line first step
    reproduces that exactly iff the previous gradient is taken as zero.
    """

    hp: HyperParams
    W_prev: np.ndarray
    grad_prev: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, hp: HyperParams, s: NetworkState) -> "OptimizerState":
        return cls(hp=hp, W_prev=s.W.copy(), grad_prev=np.zeros_like(s.W))


def step_gd(s: NetworkState, os_: OptimizerState, ds: Dataset, xi: np.ndarray | None = None):
    g = network.gradient(s, ds, xi)
    os_.W_prev = s.W
    s.W = s.W - os_.hp.eta * g
    os_.grad_prev = g
    os_.t += 1


def step_hb(s: NetworkState, os_: OptimizerState, ds: Dataset, xi: np.ndarray | None = None):
    g = network.gradient(s, ds, xi)
    hp = os_.hp
    W_new = s.W + hp.beta * (s.W - os_.W_prev) - hp.eta * g
    os_.W_prev = s.W
    s.W = W_new
    os_.grad_prev = g
    os_.t += 1


def step_nag(s: NetworkState, os_: OptimizerState, ds: Dataset, xi: np.ndarray | None = None):
    g = network.gradient(s, ds, xi)
    hp = os_.hp
    V_new = s.W - hp.eta * g
    os_.W_prev = s.W
    s.W = V_new + hp.beta * (V_new - s.V)
    s.V = V_new
    os_.grad_prev = g
    os_.t += 1


def step_nag_oneline(s: NetworkState, os_: OptimizerState, ds: Dataset, xi: np.ndarray | None = None):
    """Momentum step with explicit gradient correction; oracle for step_nag."""
    g = network.gradient(s, ds, xi)
    hp = os_.hp
    W_new = (
        s.W
        + hp.beta * (s.W - os_.W_prev)
        - hp.eta * g
        - hp.beta * hp.eta * (g - os_.grad_prev)
    )
    os_.W_prev = s.W
    s.W = W_new
    os_.grad_prev = g
    os_.t += 1


_STEPPERS = {
    Method.GD: step_gd,
    Method.HB: step_hb,
    Method.NAG: step_nag,
}


@dataclass
class ResidualTrace:
    """Everything observed during one training run.

    Residual vectors and losses are recorded at every iteration (they are
    byproducts of the gradient computation). Metric samples follow the
    observer stride; Gram snapshots and cumulative flip tracking are only
    collected when ``audit`` logging was requested.
    """

    hp: HyperParams
    n: int
    m: int
    stride: int
    losses: np.ndarray = field(default=None)
    residuals: np.ndarray = field(default=None)
    metric_samples: list = field(default_factory=list)
    gram_snapshots: dict = field(default_factory=dict)
    sup_flip_counts: np.ndarray = field(default=None)
    flip_counts_final: np.ndarray = field(default=None)
    max_dist_overall: float = 0.0
    final_state: object = None

    @property
    def T(self) -> int:
        return len(self.losses) - 1

    def residual_norm(self, t: int) -> float:
        return float(np.linalg.norm(self.residuals[t]))

    def xi(self, t: int) -> np.ndarray:
        """Residual at iteration t, with xi_{-1} = xi_0."""
        return self.residuals[max(t, 0)]

    def z_norm(self, t: int) -> float:
        """Norm of the stacked residual [xi_t; xi_{t-1}]."""
        return float(np.hypot(self.residual_norm(t), self.residual_norm(max(t - 1, 0))))


def train(
    s: NetworkState,
    os_: OptimizerState,
    ds: Dataset,
    T: int,
    stride: int = 10,
    audit: bool = False,
    oneline: bool = False,
) -> ResidualTrace:
    """Run T optimizer steps and accumulate a trace.

    ``audit`` turns on the expensive observers needed by the dynamics
    checks: Gram snapshots at the stride (plus each preceding step) and
    per-step cumulative activation-flip counts.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    stepper = _STEPPERS[os_.hp.method]
    if oneline:
        if os_.hp.method is not Method.NAG:
            raise ValueError("one-line form is only defined for NAG")
        stepper = step_nag_oneline

    n = ds.n
    trace = ResidualTrace(hp=os_.hp, n=n, m=s.m, stride=stride)
    losses = np.empty(T + 1)
    residuals = np.empty((T + 1, n))
    sup_flips = np.zeros(T + 1, dtype=int)

    pat0 = network.activation_pattern(s, ds.X, at_init=True)
    flipped = np.zeros_like(pat0)

    xi = network.residual(s, ds)
    residuals[0] = xi
    losses[0] = 0.5 * float(xi @ xi)
    if audit:
        trace.gram_snapshots[0] = ntk.empirical_gram(s, ds.X)

    def sample_metrics(t: int):
        md = metrics.max_distance(s)
        trace.max_dist_overall = max(trace.max_dist_overall, md)
        trace.metric_samples.append(
            metrics.MetricSample(
                t=t,
                max_dist=md,
                pattern_ratio=metrics.pattern_ratio(s, ds),
                sup_flip_count=int(flipped.sum(axis=1).max()),
                residual_norm=float(np.linalg.norm(residuals[t])),
                loss=float(losses[t]),
            )
        )

    sample_metrics(0)

    for t in range(T):
        stepper(s, os_, ds, xi)
        xi = network.residual(s, ds)
        tt = t + 1
        residuals[tt] = xi
        losses[tt] = 0.5 * float(xi @ xi)
        if not np.isfinite(losses[tt]) or losses[tt] > LOSS_CAP:
            raise DivergenceError(tt, f"loss = {losses[tt]!r}")

        track_now = audit or tt % stride == 0 or tt == T
        if track_now:
            flipped |= network.activation_pattern(s, ds.X) != pat0
        sup_flips[tt] = flipped.sum(axis=1).max()
        if audit:
            trace.max_dist_overall = max(trace.max_dist_overall, metrics.max_distance(s))
            if tt % stride == 0 or (tt + 1) % stride == 0 or tt == T:
                trace.gram_snapshots[tt] = ntk.empirical_gram(s, ds.X)
        if tt % stride == 0 or tt == T:
            sample_metrics(tt)

    trace.losses = losses
    trace.residuals = residuals
    trace.sup_flip_counts = sup_flips
    trace.flip_counts_final = flipped.sum(axis=1)
    return trace
