"""Dense symmetric-matrix numerics shared by the rest of the package.

Everything here works on plain float64 numpy arrays. Matrices that are
symmetric by contract are validated and then stored in exactly
symmetrized form (A + A.T) / 2 so downstream eigendecompositions see a
bitwise-symmetric operand.
"""

from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError, NotPsdError, SingularMatrixError

# Absolute tolerance for accepting a matrix as symmetric.
SYMMETRY_ATOL = 1e-12

# Relative floor used when classifying eigenvalues, scaled by max(1, largest
# eigenvalue) so that tiny matrices are not judged with an absurdly tight bar.
EIG_RELATIVE_FLOOR = 1e-10


def as_symmetric(a, *, atol=SYMMETRY_ATOL):
    """Validate that `a` is a finite square symmetric matrix and symmetrize it.

    Parameters
    ----------
    a : array_like, shape (p, p)
        Matrix to validate.
    atol : float
        Absolute tolerance on max |a - a.T|.

    Returns
    -------
    ndarray
        float64 copy equal to (a + a.T) / 2.

    Raises
    ------
    InvalidInputError
        If `a` is not square, contains non-finite entries, or is asymmetric
        beyond `atol`.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidInputError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix contains non-finite entries")
    gap = np.max(np.abs(a - a.T))
    if gap > atol:
        raise InvalidInputError(f"matrix is asymmetric: max |a - a.T| = {gap:.3e} > {atol:.0e}")
    return (a + a.T) / 2.0


class EigenDecomposition(NamedTuple):
    """Eigenvalues in ascending order plus the matching orthonormal eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray


def eig_sym(a):
    """Eigendecomposition of a symmetric matrix via the dedicated symmetric solver.

    Returns an :class:`EigenDecomposition` with ascending eigenvalues; the
    reconstruction ``vectors @ diag(values) @ vectors.T`` reproduces the
    symmetrized input to machine precision.
    """
    a = as_symmetric(a)
    values, vectors = np.linalg.eigh(a)
    return EigenDecomposition(values, vectors)


def sqrt_psd(c):
    """Symmetric PSD square root of a symmetric PSD matrix.

    Eigenvalues in [-eps, 0) are clipped to zero, with
    eps = 1e-10 * max(1, largest eigenvalue); anything more negative raises.

    Raises
    ------
    NotPsdError
        If the smallest eigenvalue is below the clip threshold.
    """
    c = as_symmetric(c)
    values, vectors = np.linalg.eigh(c)
    clip = EIG_RELATIVE_FLOOR * max(1.0, values[-1])
    if values[0] < -clip:
        raise NotPsdError(
            f"matrix is not positive semidefinite: min eigenvalue {values[0]:.6e} < -{clip:.1e}"
        )
    root = (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T
    return (root + root.T) / 2.0


def inv_sqrt_pd(c):
    """Symmetric inverse square root of a symmetric positive definite matrix.

    Raises
    ------
    SingularMatrixError
        If the smallest eigenvalue is at or below
        1e-10 * max(1, largest eigenvalue).
    """
    c = as_symmetric(c)
    values, vectors = np.linalg.eigh(c)
    floor = EIG_RELATIVE_FLOOR * max(1.0, values[-1])
    if values[0] <= floor:
        raise SingularMatrixError(
            f"matrix is numerically singular: min eigenvalue {values[0]:.6e} <= {floor:.1e}"
        )
    m = (vectors / np.sqrt(values)) @ vectors.T
    return (m + m.T) / 2.0


def solve_pxq(p, q, r, gamma):
    """Solve the linear matrix equation P @ X @ Q + gamma * X = R.

    P and Q must be symmetric positive semidefinite and gamma > 0, so every
    transformed denominator is at least gamma. Diagonalizing P = Up D Up.T and
    Q = Uq E Uq.T reduces the equation to an entrywise divide:

        X = Up (W * (Up.T @ R @ Uq)) Uq.T,   W[i, j] = 1 / (D[i] * E[j] + gamma)

    The weight orientation (P's spectrum along rows, Q's along columns) is
    pinned by the residual identity P @ X @ Q + gamma * X = R; the transposed
    orientation does not satisfy it unless P and Q commute.

    Returns
    -------
    ndarray
        The unique solution X, same shape as R.
    """
    if not np.isfinite(gamma) or gamma <= 0:
        raise InvalidInputError(f"gamma must be a positive real, got {gamma!r}")
    p = as_symmetric(p)
    q = as_symmetric(q)
    r = np.asarray(r, dtype=float)
    if r.shape != p.shape or q.shape != p.shape:
        raise InvalidInputError(
            f"shape mismatch: P {p.shape}, Q {q.shape}, R {r.shape} must all agree"
        )
    if not np.all(np.isfinite(r)):
        raise InvalidInputError("right-hand side contains non-finite entries")
    dvals, up = np.linalg.eigh(p)
    evals, uq = np.linalg.eigh(q)
    weights = 1.0 / (np.multiply.outer(dvals, evals) + gamma)
    return up @ (weights * (up.T @ r @ uq)) @ uq.T


def soft_threshold(a, lam, *, off_diagonal_only=False):
    """Entrywise soft thresholding sign(a) * max(|a| - lam, 0).

    With `off_diagonal_only`, diagonal entries pass through unchanged
    (requires a square input).
    """
    if not np.isfinite(lam) or lam < 0:
        raise InvalidInputError(f"threshold must be a nonnegative real, got {lam!r}")
    a = np.asarray(a, dtype=float)
    out = np.sign(a) * np.maximum(np.abs(a) - lam, 0.0)
    if off_diagonal_only:
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInputError("off_diagonal_only requires a square matrix")
        np.fill_diagonal(out, np.diagonal(a))
    return out


def vec(a):
    """Column-stack a matrix into a vector (Fortran order)."""
    return np.asarray(a, dtype=float).flatten(order="F")


def unvec(z, rows, cols):
    """Inverse of :func:`vec`: reshape a vector into a (rows, cols) matrix."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size != rows * cols:
        raise InvalidInputError(
            f"cannot reshape {z.shape} into ({rows}, {cols}): need exactly {rows * cols} entries"
        )
    return z.reshape((rows, cols), order="F").copy()


def off_diagonal_l1(a):
    """Sum of absolute values of the off-diagonal entries of a square matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    return float(np.sum(np.abs(a)) - np.sum(np.abs(np.diagonal(a))))
