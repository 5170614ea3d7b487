"""Kernel Gram matrices for the two-layer ReLU network.

``empirical_gram`` evaluates the width-m Gram matrix at the current
weights; ``analytic_ntk`` is its infinite-width limit, available in
closed form for unit-norm inputs:

    K(x_i, x_j) = <x_i, x_j> * (pi - arccos(<x_i, x_j>)) / (2*pi).

The closed-form kernel's spectrum drives every hyperparameter choice:
learning rate and momentum for each method come from (lambda_min,
lambda_max, condition number) via fixed formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import linalg
from .data import Dataset
from .network import NetworkState, _check_features

PSD_TOL = 1e-10


class PositivityError(ValueError):
    """A matrix that must be strictly PSD has a nonpositive eigenvalue."""


class Method(str, Enum):
    GD = "gd"
    HB = "hb"
    NAG = "nag"


class LambdaConvention(str, Enum):
    """Which definition of the small eigenvalue feeds the derived scale.

    ``TABLE1``: lambda = lambda_min of the analytic kernel (the
    experiment-facing recipe). ``THEOREM1``: lambda = 3/4 of it (the
    convergence-theorem bookkeeping). Both share the same adjusted
    condition number.
    """

    TABLE1 = "table1"
    THEOREM1 = "theorem1"


@dataclass(frozen=True)
class SpectrumSummary:
    lambda_min: float
    lambda_max: float
    kappa: float
    full_spectrum: np.ndarray


@dataclass(frozen=True)
class HyperParams:
    method: Method
    eta: float
    beta: float
    lam: float
    lam_max: float
    kappa_bar: float
    convention: LambdaConvention = LambdaConvention.TABLE1


def empirical_gram(s: NetworkState, X: np.ndarray) -> np.ndarray:
    """Gram matrix at the current weights: pairwise input inner products
    masked by shared activation patterns, averaged over neurons."""
    X = _check_features(s, X)
    P = ((X @ s.W) >= 0).astype(np.float64)
    return (X @ X.T) * (P @ P.T) / s.m


def analytic_ntk(ds: Dataset) -> np.ndarray:
    """Closed-form infinite-width kernel for unit-norm features.

    Inner products are clamped to [-1, 1] before arccos to absorb
    rounding on unit-norm rows, and the diagonal is pinned at its exact
    value 1/2 (self inner products are 1 by construction).
    """
    G = np.clip(ds.X @ ds.X.T, -1.0, 1.0)
    K = G * (np.pi - np.arccos(G)) / (2.0 * np.pi)
    np.fill_diagonal(K, 0.5)
    return K


def spectrum_summary(A: np.ndarray) -> SpectrumSummary:
    """Eigenvalue summary of a strictly positive symmetric matrix."""
    ev = linalg.eig_sym(A)
    lmin, lmax = float(ev[0]), float(ev[-1])
    if lmin <= -PSD_TOL or lmin <= 0.0:
        raise PositivityError(f"matrix is not strictly positive: lambda_min = {lmin:.3e}")
    return SpectrumSummary(lambda_min=lmin, lambda_max=lmax, kappa=lmax / lmin, full_spectrum=ev)


def derive_hyperparams(
    ss: SpectrumSummary,
    method: Method | str,
    convention: LambdaConvention | str = LambdaConvention.TABLE1,
) -> HyperParams:
    """Learning rate and momentum from the analytic kernel's spectrum.

    Derived scale: lam_max = lambda_max + lam/4 and
    kappa_bar = 4*kappa/3 + 1/3 (kappa of the analytic kernel).
    Per-method choices:
      GD:  eta = 1/lam_max, beta = 0 (same scale as HB for comparability)
      HB:  eta = 1/lam_max, beta = (1 - 1/(2*sqrt(kappa_bar)))^2
      NAG: eta = 1/(2*lam_max), beta = (3*sqrt(kappa_bar)-2)/(3*sqrt(kappa_bar)+2)
    """
    method = Method(method)
    convention = LambdaConvention(convention)
    lam = ss.lambda_min if convention is LambdaConvention.TABLE1 else 0.75 * ss.lambda_min
    lam_max = ss.lambda_max + lam / 4.0
    kappa_bar = 4.0 * ss.kappa / 3.0 + 1.0 / 3.0
    if kappa_bar < 1.0:
        raise AssertionError(f"kappa_bar = {kappa_bar} < 1 should be impossible")
    sk = np.sqrt(kappa_bar)
    if method is Method.GD:
        eta, beta = 1.0 / lam_max, 0.0
    elif method is Method.HB:
        eta, beta = 1.0 / lam_max, (1.0 - 1.0 / (2.0 * sk)) ** 2
    else:
        eta, beta = 1.0 / (2.0 * lam_max), (3.0 * sk - 2.0) / (3.0 * sk + 2.0)
    return HyperParams(
        method=method, eta=float(eta), beta=float(beta),
        lam=float(lam), lam_max=float(lam_max), kappa_bar=float(kappa_bar),
        convention=convention,
    )


@dataclass(frozen=True)
class ConcentrationReport:
    """Closeness of the width-m init-time Gram matrix to its limit."""

    fro_gap: float
    fro_ok: bool
    lmin_ok: bool
    lmax_ok: bool
    kappa_ok: bool
    lmin_H0: float
    lmax_H0: float
    kappa_H0: float

    @property
    def all_ok(self) -> bool:
        return self.fro_ok and self.lmin_ok and self.lmax_ok and self.kappa_ok


def concentration_check(H0: np.ndarray, Hbar: np.ndarray) -> ConcentrationReport:
    """Check the four init-time concentration inequalities (report, never raise):

        ||H0 - Hbar||_F <= lam/4
        lambda_min(H0)  >= 3*lam/4
        lambda_max(H0)  <= lambda_max(Hbar) + lam/4
        kappa(H0)       <= 4*kappa(Hbar)/3 + 1/3

    with lam = lambda_min(Hbar). These hold with high probability at
    sufficient width; a single seed may legitimately violate them.
    """
    H0 = np.asarray(H0, dtype=np.float64)
    Hbar = np.asarray(Hbar, dtype=np.float64)
    if H0.shape != Hbar.shape:
        raise ValueError(f"shape mismatch: {H0.shape} vs {Hbar.shape}")
    ev0 = linalg.eig_sym(H0)
    evb = linalg.eig_sym(Hbar)
    lam = float(evb[0])
    gap = linalg.fro_norm(H0 - Hbar)
    lmin0, lmax0 = float(ev0[0]), float(ev0[-1])
    kappa0 = lmin0 and lmax0 / lmin0 or np.inf
    return ConcentrationReport(
        fro_gap=gap,
        fro_ok=gap <= lam / 4.0,
        lmin_ok=lmin0 >= 0.75 * lam,
        lmax_ok=lmax0 <= float(evb[-1]) + lam / 4.0,
        kappa_ok=kappa0 <= 4.0 * (evb[-1] / lam) / 3.0 + 1.0 / 3.0,
        lmin_H0=lmin0, lmax_H0=lmax0, kappa_H0=float(kappa0),
    )


def nag_beta_admissible(hp: HyperParams) -> bool:
    """Momentum must dominate (1 - sqrt(eta*lam)) / (1 + sqrt(eta*lam))
    for the companion blocks to have complex (equal-magnitude) roots."""
    root = np.sqrt(hp.eta * hp.lam)
    return hp.beta >= (1.0 - root) / (1.0 + root)
