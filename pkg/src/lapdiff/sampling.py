"""Sampling node potentials and forming whitened covariance factors.

The observation model: injections x ~ N(0, sigma_x) enter a network with
symmetric nonsingular system matrix b, and the observed potentials solve
b @ y = x. Rows of all sample arrays are observations, columns are nodes.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularMatrixError
from .linalg import EIG_RELATIVE_FLOOR, as_symmetric, inv_sqrt_pd, sqrt_psd


def sample_potentials(b, sigma_x, n, seed=0):
    """Draw n potential vectors y = b^{-1} x with x ~ N(0, sigma_x).

    Returns an (n, p) array. Deterministic for fixed inputs and seed; `seed`
    may be anything numpy's default_rng accepts (int or a sequence of ints).

    Raises
    ------
    SingularMatrixError
        If b is numerically singular (smallest |eigenvalue| within a relative
        floor of zero).
    """
    b = as_symmetric(b)
    sigma_x = as_symmetric(sigma_x)
    if sigma_x.shape != b.shape:
        raise InvalidInputError(f"sigma_x shape {sigma_x.shape} != b shape {b.shape}")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidInputError(f"n must be a positive integer, got {n!r}")
    abs_eigs = np.abs(np.linalg.eigvalsh(b))
    if abs_eigs.min() <= EIG_RELATIVE_FLOOR * max(1.0, abs_eigs.max()):
        raise SingularMatrixError(
            f"b is numerically singular (min |eigenvalue| {abs_eigs.min():.3e})"
        )
    root = sqrt_psd(sigma_x)
    transfer = np.linalg.solve(b, root)  # b^{-1} sigma_x^{1/2}
    z = np.random.default_rng(seed).standard_normal((int(n), b.shape[0]))
    return z @ transfer.T


def whiten(samples, m_x):
    """Apply the symmetric multiplier m_x to each observation row.

    With m_x = sigma_x^{1/2}, potentials with covariance
    b^{-1} sigma_x b^{-1} are mapped to rows whose covariance is the perfect
    square (m_x b^{-1} m_x)^2, which is what lets precision_factor recover
    b^{-1} through a PSD square root.
    """
    samples = np.asarray(samples, dtype=float)
    m_x = as_symmetric(m_x)
    if samples.ndim != 2 or samples.shape[1] != m_x.shape[0]:
        raise InvalidInputError(
            f"samples shape {samples.shape} incompatible with whitener {m_x.shape}"
        )
    return samples @ m_x


def sample_covariance(samples, center=False):
    """(Un)centered second-moment matrix of the rows of `samples`.

    Uncentered (default): Y.T @ Y / n, which is PSD for every n, including
    n < p. With center=True the empirical mean is subtracted first and the
    divisor stays n.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 1:
        raise InvalidInputError(f"expected a nonempty (n, p) array, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise InvalidInputError("samples contain non-finite entries")
    n = samples.shape[0]
    if center:
        if n < 2:
            raise InvalidInputError("centering requires at least 2 observations")
        samples = samples - samples.mean(axis=0)
    cov = samples.T @ samples / n
    return (cov + cov.T) / 2.0


@dataclass(frozen=True)
class PrecisionFactor:
    """A square-root precision factor ready for the difference estimator.

    matrix is the symmetric factor itself; n_used records how many
    observations produced it (0 for population inputs); whitener_inv is the
    inverse square root of the injection covariance used to build it.
    """

    matrix: np.ndarray
    n_used: int = 0
    whitener_inv: np.ndarray | None = None


def precision_factor(samples, sigma_x):
    """Square-root precision factor of one regime from raw potentials.

    With m = sigma_x^{1/2}, whitened observations yt = y @ m have uncentered
    covariance s; the factor is m^{-1} @ sqrt(s)^... specifically
    m_inv @ sqrt_psd(s) @ m_inv, which for population s equals b^{-1}, the
    inverse system matrix. PSD square roots keep this well defined for every
    sample size, including n < p.
    """
    samples = np.asarray(samples, dtype=float)
    sigma_x = as_symmetric(sigma_x)
    if samples.ndim != 2 or samples.shape[1] != sigma_x.shape[0]:
        raise InvalidInputError(
            f"samples shape {samples.shape} incompatible with sigma_x {sigma_x.shape}"
        )
    root = sqrt_psd(sigma_x)
    m_inv = inv_sqrt_pd(sigma_x)
    whitened = samples @ root
    cov = sample_covariance(whitened)
    factor = m_inv @ sqrt_psd(cov) @ m_inv
    factor = (factor + factor.T) / 2.0
    return PrecisionFactor(matrix=factor, n_used=samples.shape[0], whitener_inv=m_inv)


def precision_factor_from_covariance(cov_y, sigma_x, n_used=0):
    """Square-root precision factor from a precomputed potential covariance.

    Equivalent to precision_factor when cov_y is the uncentered covariance
    of the same raw potentials: the whitened second moment is
    m @ cov_y @ m with m = sigma_x^{1/2}, and the factor is
    m^{-1} @ sqrt_psd(m @ cov_y @ m) @ m^{-1}.
    """
    cov_y = as_symmetric(cov_y)
    sigma_x = as_symmetric(sigma_x)
    if cov_y.shape != sigma_x.shape:
        raise InvalidInputError(
            f"covariance shape {cov_y.shape} != sigma_x shape {sigma_x.shape}"
        )
    root = sqrt_psd(sigma_x)
    m_inv = inv_sqrt_pd(sigma_x)
    whitened_cov = as_symmetric(root @ cov_y @ root)
    factor = m_inv @ sqrt_psd(whitened_cov) @ m_inv
    factor = (factor + factor.T) / 2.0
    return PrecisionFactor(matrix=factor, n_used=int(n_used), whitener_inv=m_inv)
