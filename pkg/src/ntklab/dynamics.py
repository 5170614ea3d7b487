"""Residual dynamics of momentum training in the near-initialization regime.

Stacking consecutive residuals z_t = [xi_t; xi_{t-1}] turns the update
into a linear system z_{t+1} = M z_t + mu_t, where M is a 2n x 2n
companion-style matrix built from the init-time Gram matrix and mu_t
collects the finite-width deviations: a Gram-drift part (psi) and an
activation-flip part (phi). This module builds M, analyses its spectrum
through the per-eigenvalue 2x2 blocks, computes the explicit decay
constants, and checks the measured trajectories against the predicted
envelopes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .ntk import HyperParams, Method
from .optimizers import ResidualTrace

BOTTOM_TOL = 1e-9


class AdmissibilityError(ValueError):
    """(eta, beta) outside the regime where the decay constant is defined."""


class InconsistencyError(RuntimeError):
    """A definitional identity of the dynamics was violated."""


@dataclass(frozen=True)
class CompanionMatrix:
    """Blocks of the 2n x 2n coefficient matrix for one momentum method.

    NAG: [[(1+b)(I - eta*H0), b(-I + eta*H0)], [I, 0]].
    HB:  [[(1+b)I - eta*H0,   -b*I         ], [I, 0]].
    """

    top_left: np.ndarray
    top_right: np.ndarray
    method: Method
    eta: float
    beta: float
    source_H: np.ndarray

    @property
    def n(self) -> int:
        return self.top_left.shape[0]

    def assemble(self) -> np.ndarray:
        n = self.n
        M = np.zeros((2 * n, 2 * n))
        M[:n, :n] = self.top_left
        M[:n, n:] = self.top_right
        M[n:, :n] = np.eye(n)
        return M

    def apply(self, z: np.ndarray) -> np.ndarray:
        n = self.n
        top = self.top_left @ z[:n] + self.top_right @ z[n:]
        return np.concatenate([top, z[:n]])


def build_companion(H0: np.ndarray, hp: HyperParams) -> CompanionMatrix:
    """Coefficient matrix of the stacked-residual recursion."""
    H0 = linalg.check_symmetric(H0)
    n = H0.shape[0]
    I = np.eye(n)
    if hp.method is Method.NAG:
        tl = (1.0 + hp.beta) * (I - hp.eta * H0)
        tr = hp.beta * (-I + hp.eta * H0)
    elif hp.method is Method.HB:
        tl = (1.0 + hp.beta) * I - hp.eta * H0
        tr = -hp.beta * I
    else:
        raise ValueError("plain gradient descent has no stacked-residual companion form")
    return CompanionMatrix(
        top_left=tl, top_right=tr, method=hp.method,
        eta=hp.eta, beta=hp.beta, source_H=H0,
    )


@dataclass(frozen=True)
class BlockRoots:
    """Eigenvalues of the 2x2 block attached to one eigenvalue of H0.

    The block's characteristic polynomial is
    z^2 - (1+b)(1-eta*lam) z + b(1-eta*lam); when its discriminant is
    nonpositive the roots are conjugate with magnitude
    sqrt(b*(1-eta*lam)).
    """

    lam: float
    z1: complex
    z2: complex
    discriminant: float
    magnitude: float


def block_spectrum(cm: CompanionMatrix) -> list[BlockRoots]:
    """Per-eigenvalue 2x2 root analysis of the NAG companion matrix."""
    if cm.method is not Method.NAG:
        raise ValueError("block analysis applies to the NAG companion form")
    out = []
    for lam in linalg.eig_sym(cm.source_H):
        lam = float(lam)
        s = 1.0 - cm.eta * lam
        block = np.array([[(1.0 + cm.beta) * s, cm.beta * (-1.0 + cm.eta * lam)], [1.0, 0.0]])
        z1, z2 = linalg.eig_general_2x2(block)
        disc = ((1.0 + cm.beta) * s) ** 2 - 4.0 * cm.beta * s
        if disc <= 0.0:
            mag = float(np.sqrt(cm.beta * s))
        else:
            mag = max(abs(z1), abs(z2))
        out.append(BlockRoots(lam=lam, z1=z1, z2=z2, discriminant=disc, magnitude=mag))
    return out


def _g(x: float, y: float) -> float:
    return 4.0 * x * (1.0 - y) - ((1.0 + x) * (1.0 - y)) ** 2


def power_decay_constant(H: np.ndarray, eta: float, beta: float) -> tuple[float, float]:
    """(C, rate) such that ||M^k v|| <= C * rate^k * ||v|| for the NAG
    companion matrix built from H, valid when beta dominates
    (1 - sqrt(eta*lam_min)) / (1 + sqrt(eta*lam_min)) and eta <= 1/lam_max.
    """
    ev = linalg.eig_sym(H)
    lmin, lmax = float(ev[0]), float(ev[-1])
    gmin = min(_g(beta, eta * lmin), _g(beta, eta * lmax))
    if gmin <= 0.0:
        raise AdmissibilityError(
            f"g(beta, eta*lam) = {gmin:.3e} <= 0 at a spectrum endpoint; "
            "(eta, beta) outside the admissible region"
        )
    rate = float(np.sqrt(beta * (1.0 - eta * lmin)))
    C = (2.0 * beta * (1.0 - eta * lmin) + 2.0) / np.sqrt(gmin)
    return float(C), rate


@dataclass(frozen=True)
class EnvelopeParams:
    """Closed-form decay constants for the tuned momentum setting
    eta = 1/(2*lam_max), beta = (3*sqrt(k)-2)/(3*sqrt(k)+2)."""

    kappa_bar: float
    gamma: float  # 12*sqrt(k)
    rho: float  # 1 - 1/(2*sqrt(k)); envelope decay rate
    alpha: float  # 1 - 2/(3*sqrt(k)); bound on the raw power-decay rate
    C_bound: float  # upper bound on the power-decay constant
    rate_bound: float  # alias of alpha, bound on sqrt(beta*(1-eta*lam_min))


def tuned_decay_bounds(kappa_bar: float) -> EnvelopeParams:
    if kappa_bar < 1.0:
        raise ValueError("condition number must be >= 1")
    sk = float(np.sqrt(kappa_bar))
    alpha = 1.0 - 2.0 / (3.0 * sk)
    return EnvelopeParams(
        kappa_bar=float(kappa_bar),
        gamma=12.0 * sk,
        rho=1.0 - 1.0 / (2.0 * sk),
        alpha=alpha,
        C_bound=12.0 * sk,
        rate_bound=alpha,
    )


@dataclass(frozen=True)
class Decomposition:
    """Measured deviation of one step from the idealized linear system."""

    t: int
    psi: np.ndarray  # Gram-drift part
    phi: np.ndarray  # activation-flip part (measured remainder)
    mu: np.ndarray  # full 2n defect z_{t+1} - M z_t


def decompose_step(
    cm: CompanionMatrix,
    xi_next: np.ndarray,
    xi_t: np.ndarray,
    xi_tm1: np.ndarray,
    H_t: np.ndarray,
    H_tm1: np.ndarray,
    t: int,
) -> Decomposition:
    """Split the measured one-step defect into Gram-drift and flip parts.

    mu is the measured defect z_{t+1} - M z_t; its bottom half must vanish
    (the bottom block row of M is the identity shift) and any excess is an
    internal inconsistency, not a modeling error. psi is the explicit
    Gram-drift term

        psi_t = b*eta*(H_{t-1} - H0)*xi_{t-1} - (1+b)*eta*(H_t - H0)*xi_t

    and phi is the remainder attributed to activation flips.
    """
    z_curr = np.concatenate([xi_t, xi_tm1])
    z_next = np.concatenate([xi_next, xi_t])
    mu = z_next - cm.apply(z_curr)
    n = cm.n
    bottom = float(np.abs(mu[n:]).max()) if n else 0.0
    if bottom > BOTTOM_TOL:
        raise InconsistencyError(
            f"bottom half of the step defect is {bottom:.3e} > {BOTTOM_TOL:g} at t={t}"
        )
    H0 = cm.source_H
    psi = cm.beta * cm.eta * (H_tm1 - H0) @ xi_tm1 - (1.0 + cm.beta) * cm.eta * (H_t - H0) @ xi_t
    phi = mu[:n] - psi
    return Decomposition(t=t, psi=psi, phi=phi, mu=mu)


def flip_term_bound(
    t: int,
    residual_norms: np.ndarray,
    sup_flip_count: int,
    m: int,
    n: int,
    eta: float,
    beta: float,
) -> float:
    """Predicted bound on each entry of the flip part at step t:

        sup_j|S_j| * sqrt(n) * eta / m *
            [(2+4b)||xi_t|| + 3b||xi_{t-1}|| + 2*sum_{i<t} b^{t+1-i} ||xi_i||].
    """
    powers = beta ** (t + 1 - np.arange(t))
    tail = float(powers @ residual_norms[:t]) if t > 0 else 0.0
    xim1 = residual_norms[t - 1] if t >= 1 else residual_norms[0]
    return float(
        sup_flip_count * np.sqrt(n) * eta / m
        * ((2.0 + 4.0 * beta) * residual_norms[t] + 3.0 * beta * xim1 + 2.0 * tail)
    )


@dataclass(frozen=True)
class FlipBoundCheck:
    t: int
    bound: float
    per_index_ok: np.ndarray
    max_violation: float

    @property
    def all_ok(self) -> bool:
        return bool(self.per_index_ok.all())


def check_flip_bound(
    dec: Decomposition,
    residual_norms: np.ndarray,
    sup_flip_count: int,
    m: int,
    eta: float,
    beta: float,
) -> FlipBoundCheck:
    """Compare the measured flip part against its predicted entrywise bound.

    Report-only: the bound is a high-probability statement, so violations
    are surfaced with their slack, never raised.
    """
    n = dec.psi.shape[0]
    rhs = flip_term_bound(dec.t, residual_norms, sup_flip_count, m, n, eta, beta)
    ok = np.abs(dec.phi) <= rhs
    return FlipBoundCheck(
        t=dec.t,
        bound=rhs,
        per_index_ok=ok,
        max_violation=float(max(np.abs(dec.phi).max() - rhs, 0.0)),
    )


def decompose_trace(trace: ResidualTrace, cm: CompanionMatrix) -> list[Decomposition]:
    """Per-step decompositions at every stride point with Gram snapshots."""
    out = []
    for t in sorted(trace.gram_snapshots):
        if t == 0 or t >= trace.T or (t - 1) not in trace.gram_snapshots:
            continue
        out.append(
            decompose_step(
                cm,
                xi_next=trace.xi(t + 1),
                xi_t=trace.xi(t),
                xi_tm1=trace.xi(t - 1),
                H_t=trace.gram_snapshots[t],
                H_tm1=trace.gram_snapshots[t - 1],
                t=t,
            )
        )
    return out


@dataclass(frozen=True)
class EnvelopeReport:
    bounds: np.ndarray
    values: np.ndarray
    ok: np.ndarray

    @property
    def all_ok(self) -> bool:
        return bool(self.ok.all())

    @property
    def pass_rate(self) -> float:
        return float(self.ok.mean())


def residual_envelope(trace: ResidualTrace, ep: EnvelopeParams) -> EnvelopeReport:
    """Check ||[xi_t; xi_{t-1}]|| <= rho^t * 2*gamma * ||[xi_0; xi_0]|| at
    every iteration (report-only: a high-probability claim)."""
    T = trace.T
    values = np.array([trace.z_norm(t) for t in range(T + 1)])
    bounds = ep.rho ** np.arange(T + 1) * 2.0 * ep.gamma * trace.z_norm(0)
    return EnvelopeReport(bounds=bounds, values=values, ok=values <= bounds)


@dataclass(frozen=True)
class WeightDistanceReport:
    bound: float
    max_measured: float
    ok: bool


def weight_distance_envelope(
    max_measured: float, kappa_bar: float, lam: float, n: int, m: int, xi0_norm: float
) -> WeightDistanceReport:
    """Check max_{r,t} ||w_t^r - w_0^r|| against 48*sqrt(2*n*k)/(lam*sqrt(m)) * ||xi_0||."""
    bound = 48.0 * np.sqrt(2.0 * n * kappa_bar) / (lam * np.sqrt(m)) * xi0_norm
    return WeightDistanceReport(bound=float(bound), max_measured=max_measured, ok=max_measured <= bound)


def linear_predictor(z0: np.ndarray, cm: CompanionMatrix, T: int) -> np.ndarray:
    """Norms of the homogeneous iteration z_{t+1} = M z_t for t = 0..T."""
    z = np.asarray(z0, dtype=np.float64)
    norms = np.empty(T + 1)
    norms[0] = np.linalg.norm(z)
    for t in range(T):
        z = cm.apply(z)
        norms[t + 1] = np.linalg.norm(z)
    return norms
