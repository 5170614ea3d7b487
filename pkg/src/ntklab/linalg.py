"""Dense linear algebra helpers for small symmetric matrices and 2x2 blocks."""

from __future__ import annotations

import numpy as np

SYMMETRY_TOL = 1e-12


class SymmetryError(ValueError):
    """Raised when a matrix expected to be symmetric is not."""


def check_symmetric(A: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """Validate symmetry within ``tol`` (absolute) and return the symmetrized matrix.

    Symmetrizing (averaging with the transpose) absorbs roundoff before
    eigendecomposition.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SymmetryError(f"expected a square matrix, got shape {A.shape}")
    gap = np.abs(A - A.T).max() if A.size else 0.0
    if gap > tol:
        raise SymmetryError(f"matrix is not symmetric: max |A - A^T| = {gap:.3e} > {tol:.0e}")
    return 0.5 * (A + A.T)


def eig_sym(A: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted ascending.

    Input is validated against the symmetry tolerance and symmetrized before
    decomposition.
    """
    return np.linalg.eigvalsh(check_symmetric(A))


def fro_norm(A: np.ndarray) -> float:
    """Frobenius norm: sqrt of the sum of squared entries."""
    return float(np.linalg.norm(np.asarray(A, dtype=np.float64)))


def eig_general_2x2(B: np.ndarray) -> tuple[complex, complex]:
    """Both roots of the characteristic polynomial of a real 2x2 matrix.

    Uses the quadratic formula directly; roots come back complex whenever the
    discriminant is negative.
    """
    B = np.asarray(B, dtype=np.float64)
    if B.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {B.shape}")
    tr = B[0, 0] + B[1, 1]
    det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
    disc = tr * tr - 4.0 * det
    sq = np.sqrt(complex(disc))
    z1 = (tr - sq) / 2.0
    z2 = (tr + sq) / 2.0
    if disc >= 0:
        return complex(z1.real), complex(z2.real)
    return z1, z2


def rayleigh(A: np.ndarray, u: np.ndarray) -> float:
    """Rayleigh quotient u^T A u / u^T u."""
    u = np.asarray(u, dtype=np.float64)
    return float(u @ (np.asarray(A) @ u) / (u @ u))
