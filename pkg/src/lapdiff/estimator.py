"""Core difference estimation: quadratic trace loss, ADMM solver, exact
identity, plug-in baseline, unknown-covariance variant, and the uniqueness
diagnostic.

All estimators target delta = b2 - b1, the difference of the two symmetric
system matrices, using only square-root precision factors built from node
potentials (see sampling.precision_factor).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidInputError,
    NotPsdError,
    PluginUndefinedError,
    SingularMatrixError,
    SolverDivergedError,
)
from .linalg import (
    EIG_RELATIVE_FLOOR,
    as_symmetric,
    inv_sqrt_pd,
    off_diagonal_l1,
    soft_threshold,
    sqrt_psd,
    vec,
)
from .sampling import PrecisionFactor, precision_factor, sample_covariance, whiten

# Hessian eigenvalues at or below this fraction of the largest are treated
# as kernel directions by the uniqueness diagnostic.
DEFAULT_TOL_KERNEL = 1e-9

# Largest dimension for which the p^2 x p^2 Hessian is assembled densely.
UNIQUENESS_MAX_P = 40


@dataclass
class SolverConfig:
    """Parameters of the ADMM solver for the penalized difference problem.

    lam is the l1 penalty weight; rho the augmented-Lagrangian parameter;
    iteration stops at consensus residual <= tol_consensus or max_iter.
    tol_objective is kept for objective-based diagnostics by callers; the
    stopping rule itself is consensus-or-max_iter. penalize_diagonal extends
    the shrinkage to diagonal entries (off-diagonal only by default).
    """

    lam: float
    rho: float = 0.001
    max_iter: int = 20000
    tol_consensus: float = 1e-6
    tol_objective: float = 1e-9
    penalize_diagonal: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidInputError(f"lam must be a finite nonnegative real, got {self.lam!r}")
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise InvalidInputError(f"rho must be a finite positive real, got {self.rho!r}")
        if int(self.max_iter) < 1:
            raise InvalidInputError(f"max_iter must be >= 1, got {self.max_iter!r}")
        self.max_iter = int(self.max_iter)
        if not (math.isfinite(self.tol_consensus) and self.tol_consensus > 0):
            raise InvalidInputError(f"tol_consensus must be positive, got {self.tol_consensus!r}")


@dataclass
class AdmmState:
    """Final iterates of the consensus ADMM.

    d1, d2, d3 are the three copies of the difference variable; l1, l2, l3
    the multipliers of the coupling constraints d3 = d1, d2 = d3, d1 = d2.
    """

    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    l3: np.ndarray
    iterations: int

    def consensus_residual(self):
        return float(
            max(
                np.max(np.abs(self.d1 - self.d2)),
                np.max(np.abs(self.d1 - self.d3)),
                np.max(np.abs(self.d2 - self.d3)),
            )
        )


@dataclass
class DeltaEstimate:
    """A computed difference estimate plus solver bookkeeping."""

    delta: np.ndarray
    iterations: int
    converged: bool
    objective: float


@dataclass
class UniquenessReport:
    """Outcome of the kernel-based uniqueness diagnostic.

    condition_inner is the worst inner product d . vec(factor1 - factor2)
    over signed unit kernel basis vectors (0.0 when the kernel is trivial);
    condition_norm the worst off-diagonal l1 norm of a reshaped basis
    vector; tau the radius those norms are compared against.
    """

    kernel_dim: int
    condition_inner: float
    condition_norm: float
    tau: float
    verdict: str


def _factor_matrix(factor, name):
    if isinstance(factor, PrecisionFactor):
        factor = factor.matrix
    try:
        return as_symmetric(factor)
    except InvalidInputError as exc:
        raise InvalidInputError(f"{name}: {exc}") from None


def dtrace_loss(delta, psi1, psi2):
    """Quadratic difference loss 0.25(<P1 D, D P2> + <P2 D, D P1>) - <D, P1 - P2>.

    <A, B> = trace(A B^T). The population minimizer over symmetric D is
    exactly b2 - b1 when the factors are the inverse system matrices.
    """
    p1 = _factor_matrix(psi1, "psi1")
    p2 = _factor_matrix(psi2, "psi2")
    delta = np.asarray(delta, dtype=float)
    if delta.shape != p1.shape or p2.shape != p1.shape:
        raise InvalidInputError(
            f"shape mismatch: delta {delta.shape}, psi1 {p1.shape}, psi2 {p2.shape}"
        )
    quad = np.sum((p1 @ delta) * (delta @ p2)) + np.sum((p2 @ delta) * (delta @ p1))
    linear = np.sum(delta * (p1 - p2))
    return float(0.25 * quad - linear)


def penalized_objective(delta, psi1, psi2, config):
    """dtrace_loss plus the configured l1 penalty."""
    penalty = off_diagonal_l1(delta)
    if config.penalize_diagonal:
        penalty += float(np.sum(np.abs(np.diagonal(delta))))
    return dtrace_loss(delta, psi1, psi2) + config.lam * penalty


def run_admm(psi1, psi2, config):
    """Consensus ADMM for the penalized difference problem, from zero start.

    Each sweep updates d1 and d2 by solving P X Q + 4 rho X = R in the fixed
    eigenbases of the two factors, shrinks d3 (off-diagonal soft threshold
    at lam / (2 rho) by default), and ascends the three multipliers with
    step rho. Gauss-Seidel ordering: the d2 update sees the fresh d1.

    Returns (AdmmState, converged). Raises SolverDivergedError if iterates
    stop being finite.
    """
    p1 = _factor_matrix(psi1, "psi1")
    p2 = _factor_matrix(psi2, "psi2")
    if p2.shape != p1.shape:
        raise InvalidInputError(f"factor shapes differ: {p1.shape} vs {p2.shape}")
    if not isinstance(config, SolverConfig):
        raise InvalidInputError(f"config must be a SolverConfig, got {type(config).__name__}")
    p = p1.shape[0]
    rho = config.rho
    gamma = 4.0 * rho
    thresh = config.lam / (2.0 * rho)
    off_only = not config.penalize_diagonal

    e1, u1 = np.linalg.eigh(p1)
    e2, u2 = np.linalg.eigh(p2)
    w12 = 1.0 / (np.multiply.outer(e1, e2) + gamma)  # d1 update: p1 on the left
    w21 = w12.T  # d2 update swaps the roles of the factors
    diff = p1 - p2

    d1 = np.zeros((p, p))
    d2 = np.zeros((p, p))
    d3 = np.zeros((p, p))
    l1 = np.zeros((p, p))
    l2 = np.zeros((p, p))
    l3 = np.zeros((p, p))

    converged = False
    iteration = 0
    for iteration in range(1, config.max_iter + 1):
        r1 = 2.0 * rho * (d3 + d2) + diff + 2.0 * (l1 - l3)
        d1 = u1 @ (w12 * (u1.T @ r1 @ u2)) @ u2.T
        r2 = 2.0 * rho * (d3 + d1) + diff + 2.0 * (l3 - l2)
        d2 = u2 @ (w21 * (u2.T @ r2 @ u1)) @ u1.T
        d3 = soft_threshold(
            (rho * (d1 + d2) - l1 + l2) / (2.0 * rho), thresh, off_diagonal_only=off_only
        )
        l1 = l1 + rho * (d3 - d1)
        l2 = l2 + rho * (d2 - d3)
        l3 = l3 + rho * (d1 - d2)

        residual = max(
            np.max(np.abs(d1 - d2)), np.max(np.abs(d1 - d3)), np.max(np.abs(d2 - d3))
        )
        if not np.isfinite(residual):
            raise SolverDivergedError(
                f"iterates became non-finite at iteration {iteration}", iteration=iteration
            )
        if residual <= config.tol_consensus:
            converged = True
            break

    state = AdmmState(d1=d1, d2=d2, d3=d3, l1=l1, l2=l2, l3=l3, iterations=iteration)
    return state, converged


def estimate_delta(psi1, psi2, config):
    """Penalized difference estimate from two square-root precision factors.

    Accepts PrecisionFactor instances or plain symmetric matrices. Returns a
    DeltaEstimate holding the symmetrized sparse iterate, iteration count,
    convergence flag, and the final penalized objective.
    """
    state, converged = run_admm(psi1, psi2, config)
    delta = (state.d3 + state.d3.T) / 2.0
    objective = penalized_objective(delta, psi1, psi2, config)
    return DeltaEstimate(
        delta=delta, iterations=state.iterations, converged=converged, objective=objective
    )


def exact_delta(b1, b2, sigma_x1, sigma_x2):
    """Population identity: recover b2 - b1 through the square-root pipeline.

    For each regime, forms the population covariance of the multiplied
    potentials, ( sigma^{1/2} b^{-1} sigma^{1/2} )^2, takes its inverse PSD
    square root, and wraps it with sigma^{1/2} on both sides. The difference
    of the two wrapped roots equals b2 - b1 up to floating-point error; this
    is the identity the sample estimator plugs into.
    """
    terms = []
    for b, sigma in ((b1, sigma_x1), (b2, sigma_x2)):
        b = as_symmetric(b)
        sigma = as_symmetric(sigma)
        if sigma.shape != b.shape:
            raise InvalidInputError(f"sigma shape {sigma.shape} != b shape {b.shape}")
        eigs = np.linalg.eigvalsh(b)
        if eigs[0] <= EIG_RELATIVE_FLOOR * max(1.0, abs(eigs[-1])):
            raise NotPsdError(f"b must be positive definite (min eigenvalue {eigs[0]:.6e})")
        root = sqrt_psd(sigma)
        t = root @ np.linalg.solve(b, root)
        t = (t + t.T) / 2.0
        cov = t @ t
        theta_root = inv_sqrt_pd((cov + cov.T) / 2.0)
        terms.append(root @ theta_root @ root)
    delta = terms[1] - terms[0]
    return (delta + delta.T) / 2.0


def plugin_delta(samples1, samples2, sigma_x1, sigma_x2):
    """Plug-in baseline: inverse square roots of the sample covariances.

    Substitutes the inverse square root of each whitened sample covariance
    for the population inverse root in the exact identity. Only defined when
    both sample covariances are invertible, which requires n > p.
    """
    terms = []
    for samples, sigma in ((samples1, sigma_x1), (samples2, sigma_x2)):
        samples = np.asarray(samples, dtype=float)
        sigma = as_symmetric(sigma)
        if samples.ndim != 2 or samples.shape[1] != sigma.shape[0]:
            raise InvalidInputError(
                f"samples shape {samples.shape} incompatible with sigma {sigma.shape}"
            )
        n, p = samples.shape
        if n <= p:
            raise PluginUndefinedError(
                f"plug-in estimate undefined: need n > p, got n = {n}, p = {p}"
            )
        root = sqrt_psd(sigma)
        cov = sample_covariance(whiten(samples, root))
        try:
            inv_root = inv_sqrt_pd(cov)
        except SingularMatrixError as exc:
            raise PluginUndefinedError(f"sample covariance is singular: {exc}") from None
        terms.append(root @ inv_root @ root)
    delta = terms[1] - terms[0]
    return (delta + delta.T) / 2.0


def estimate_sqrt_delta(samples1, samples2, config):
    """Unknown-covariance variant: the same pipeline with the whitener fixed
    to the identity.

    The output then estimates the sparse difference of the inverse-covariance
    square roots of the two potential distributions (which is (b2 - b1) / 2
    when both injection covariances equal 4 I, and more generally a rescaled
    difference for proportional covariances).
    """
    samples1 = np.asarray(samples1, dtype=float)
    samples2 = np.asarray(samples2, dtype=float)
    if samples1.ndim != 2 or samples2.ndim != 2 or samples1.shape[1] != samples2.shape[1]:
        raise InvalidInputError(
            f"sample arrays must share a column count, got {samples1.shape} and {samples2.shape}"
        )
    eye = np.eye(samples1.shape[1])
    return estimate_delta(
        precision_factor(samples1, eye), precision_factor(samples2, eye), config
    )


def uniqueness_check(psi1, psi2, tau, tol_kernel=DEFAULT_TOL_KERNEL):
    """Kernel diagnostic for uniqueness of the penalized difference estimate.

    Assembles the quadratic-form Hessian H = (P1 (x) P2 + P2 (x) P1) / 2,
    extracts an orthonormal basis of its numerical kernel (eigenvalues at or
    below tol_kernel times the largest), and evaluates, over each basis
    vector and its negation, the inner product with vec(P1 - P2) and the
    off-diagonal l1 norm of the reshaped vector.

    Verdicts: a trivial kernel certifies a strongly convex problem
    ("unique"); a signed basis vector violating either condition witnesses
    "not-unique"; otherwise "inconclusive", because only basis directions
    (not the whole kernel cone) were examined.
    """
    p1 = _factor_matrix(psi1, "psi1")
    p2 = _factor_matrix(psi2, "psi2")
    if p2.shape != p1.shape:
        raise InvalidInputError(f"factor shapes differ: {p1.shape} vs {p2.shape}")
    p = p1.shape[0]
    if p > UNIQUENESS_MAX_P:
        raise InvalidInputError(
            f"uniqueness check assembles a {p * p} x {p * p} matrix; p must be <= "
            f"{UNIQUENESS_MAX_P}, got {p}"
        )
    if not (math.isfinite(tau) and tau > 0):
        raise InvalidInputError(f"tau must be a positive real, got {tau!r}")

    hess = (np.kron(p1, p2) + np.kron(p2, p1)) / 2.0
    values, vectors = np.linalg.eigh((hess + hess.T) / 2.0)
    cutoff = tol_kernel * max(values[-1], 0.0)
    kernel_mask = values <= cutoff
    kernel_dim = int(np.count_nonzero(kernel_mask))

    if kernel_dim == 0:
        return UniquenessReport(
            kernel_dim=0, condition_inner=0.0, condition_norm=0.0, tau=float(tau),
            verdict="unique",
        )

    target = vec(p1 - p2)
    inner_tol = 1e-10 * max(1.0, float(np.linalg.norm(target)))
    basis = vectors[:, kernel_mask]
    # both signs of each basis vector are covered by taking absolute values
    condition_inner = float(np.max(np.abs(basis.T @ target)))
    condition_norm = 0.0
    for k in range(kernel_dim):
        direction = basis[:, k].reshape((p, p), order="F")
        condition_norm = max(condition_norm, off_diagonal_l1(direction))

    if condition_inner > inner_tol or condition_norm > tau:
        verdict = "not-unique"
    else:
        verdict = "inconclusive"
    return UniquenessReport(
        kernel_dim=kernel_dim,
        condition_inner=condition_inner,
        condition_norm=condition_norm,
        tau=float(tau),
        verdict=verdict,
    )
