"""Independent brute-force reference implementations used only by tests.

Everything here is written against numpy directly, without importing the
package under test, so agreement between the two is meaningful.
"""

import numpy as np


def naive_inner(a, b):
    """<A, B> = trace(A @ B.T) computed elementwise."""
    total = 0.0
    rows, cols = a.shape
    for i in range(rows):
        for j in range(cols):
            total += a[i, j] * b[i, j]
    return total


def naive_dtrace_loss(delta, psi1, psi2):
    """Literal trace-form loss evaluation via explicit matrix products."""
    t1 = np.trace(psi1 @ delta @ (delta @ psi2).T)
    t2 = np.trace(psi2 @ delta @ (delta @ psi1).T)
    t3 = np.trace(delta @ (psi1 - psi2).T)
    return 0.25 * (t1 + t2) - t3


def quadratic_hessian(psi1, psi2):
    """Dense p^2 x p^2 Hessian of the quadratic part of the loss."""
    return (np.kron(psi2, psi1) + np.kron(psi1, psi2)) / 2.0


def kron_stationary_delta(psi1, psi2):
    """Unpenalized minimizer via the vectorized normal equations.

    Solves H vec(Delta) = vec(psi1 - psi2) densely, where H is the
    quadratic-form Hessian. Requires H nonsingular (PD factors).
    """
    p = psi1.shape[0]
    rhs = (psi1 - psi2).flatten(order="F")
    x = np.linalg.solve(quadratic_hessian(psi1, psi2), rhs)
    return x.reshape((p, p), order="F")


def _shrink(z, thr, penalize_diagonal):
    out = np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)
    if not penalize_diagonal:
        np.fill_diagonal(out, np.diagonal(z))
    return out


def _objective(d, psi1, psi2, lam, penalize_diagonal):
    pen = np.sum(np.abs(d)) - np.sum(np.abs(np.diagonal(d)))
    if penalize_diagonal:
        pen += np.sum(np.abs(np.diagonal(d)))
    return naive_dtrace_loss(d, psi1, psi2) + lam * pen


def ista_reference_delta(psi1, psi2, lam, penalize_diagonal=False, max_iter=2000000):
    """Proximal-gradient reference solver, run to a tiny stationarity gap.

    First-order method with constant step 1 / L, entirely different from an
    operator-splitting scheme, so it is a genuine cross-check. Returns the
    iterate once the proximal-gradient fixed-point residual drops below
    1e-12 (sup-norm) or iterations run out.
    """
    p = psi1.shape[0]
    lip = float(np.linalg.eigvalsh(psi1)[-1] * np.linalg.eigvalsh(psi2)[-1]) + 1e-12
    step = 1.0 / lip
    d = np.zeros((p, p))
    for _ in range(max_iter):
        grad = 0.5 * (psi1 @ d @ psi2 + psi2 @ d @ psi1) - (psi1 - psi2)
        nxt = _shrink(d - step * grad, lam * step, penalize_diagonal)
        gap = np.max(np.abs(nxt - d))
        d = nxt
        if gap <= 1e-12:
            break
    return d


def kernel_pair_count(psi1, psi2, tol=1e-9):
    """Kernel dimension of the Hessian by brute-force eigendecomposition."""
    values = np.linalg.eigvalsh(quadratic_hessian(psi1, psi2))
    top = max(values[-1], 0.0)
    return int(np.count_nonzero(values <= tol * top))
