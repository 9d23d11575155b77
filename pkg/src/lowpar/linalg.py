"""Complex dense linear algebra and unitary DFT primitives.

Gram-matrix Cholesky machinery for least-squares work on wide
full-row-rank matrices, plus the orthonormal DFT pair used to move
signals between frequency and time domains.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

# A Cholesky pivot below this fraction of the largest Gram diagonal is
# treated as numerically rank deficient.
PIVOT_RTOL = 1e-12


class RankDeficiencyError(ValueError):
    """Matrix is numerically rank deficient where full row rank is required."""


def as_complex_vector(x, name="x"):
    """Validate and return a finite 1-D complex128 array."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_complex_matrix(a, name="a"):
    """Validate and return a finite 2-D complex128 array."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class GramFactorization:
    """Lower-triangular Cholesky factor of A @ A^H for a wide matrix A.

    Attributes:
        factor: (m, m) lower-triangular complex array, factor @ factor^H = A @ A^H.
        rows: number of rows m of A.
        cols: number of columns n of A (n >= m).
    """

    factor: np.ndarray
    rows: int
    cols: int


def cholesky_spd(gram):
    """Lower Cholesky factor of a Hermitian positive-definite matrix.

    Raises RankDeficiencyError when the matrix is not positive definite
    or any pivot falls below PIVOT_RTOL times the largest diagonal entry.
    Accepts a stacked (..., m, m) array and factorizes each matrix.
    """
    diag = np.real(np.diagonal(gram, axis1=-2, axis2=-1))
    ref = np.max(np.abs(diag), axis=-1)
    try:
        factor = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("Gram matrix is not positive definite") from exc
    pivots = np.real(np.diagonal(factor, axis1=-2, axis2=-1)) ** 2
    if np.any(np.min(pivots, axis=-1) < PIVOT_RTOL * ref):
        raise RankDeficiencyError(
            f"Cholesky pivot below {PIVOT_RTOL:g} times the largest Gram diagonal"
        )
    return factor


def gram_factorize(a):
    """Factorize the Gram matrix A @ A^H of a wide matrix A.

    Args:
        a: (m, n) complex matrix with m <= n and full row rank.

    Returns:
        GramFactorization with the lower Cholesky factor.

    Raises:
        RankDeficiencyError: if the rows are numerically dependent.
    """
    a = as_complex_matrix(a)
    m, n = a.shape
    if m > n:
        raise ValueError(f"matrix must be wide (rows <= cols), got {a.shape}")
    gram = a @ a.conj().T
    return GramFactorization(factor=cholesky_spd(gram), rows=m, cols=n)


def gram_solve(fac, b):
    """Solve (A @ A^H) w = b using a precomputed GramFactorization."""
    b = as_complex_vector(b, "b")
    if b.shape[0] != fac.rows:
        raise ValueError(f"rhs length {b.shape[0]} does not match {fac.rows} rows")
    y = solve_triangular(fac.factor, b, lower=True)
    return solve_triangular(fac.factor, y, lower=True, trans="C")


def dft_unitary(t, axis=-1):
    """Unitary DFT along one axis (norm-preserving, 1/sqrt(n) scaling)."""
    arr = np.asarray(t, dtype=np.complex128)
    if not np.isfinite(arr).all():
        raise ValueError("input contains non-finite entries")
    return np.fft.fft(arr, axis=axis, norm="ortho")


def idft_unitary(f, axis=-1):
    """Unitary inverse DFT along one axis; exact inverse of dft_unitary."""
    arr = np.asarray(f, dtype=np.complex128)
    if not np.isfinite(arr).all():
        raise ValueError("input contains non-finite entries")
    return np.fft.ifft(arr, axis=axis, norm="ortho")
