"""
When is the penalized solution unique?
======================================

The quadratic part of the loss has Hessian (P1 x P2 + P2 x P1) / 2 in
Kronecker form. When both precision factors are positive definite the
Hessian is too, and the minimizer is unique. With rank-deficient factors
(always the case when n < p) the Hessian picks up a kernel, and uniqueness
rests on how the penalty behaves along kernel directions. The diagnostic
below reports the kernel dimension and the worst-case values of the two
uniqueness conditions over a kernel eigenbasis.
"""

import numpy as np

from lapdiff import uniqueness_check

rng = np.random.default_rng(8)
p = 6


def rotated(eigs, seed):
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((p, p)))
    return (q * np.array(eigs)) @ q.T


# a positive definite pair: kernel dimension zero, verdict unique
pd1 = rotated(rng.uniform(0.5, 2.0, p), 21)
pd2 = rotated(rng.uniform(0.5, 2.0, p), 22)
rep = uniqueness_check(pd1, pd2, tau=1.0)
print(f"PD pair:            kernel_dim = {rep.kernel_dim}, verdict = {rep.verdict}")

# a rank-deficient pair sharing an eigenbasis: the Hessian eigenvalues are
# (a_i b_j + a_j b_i) / 2, so zeros of the factors produce a known kernel
a = (0.0, 0.0, 1.0, 1.0, 2.0, 3.0)
b = (0.0, 1.0, 1.0, 2.0, 2.0, 4.0)
low1 = rotated(a, 23)
low2 = rotated(b, 23)  # same rotation keeps the closed-form kernel count
expected = sum(
    1 for i in range(p) for j in range(p) if a[i] * b[j] + a[j] * b[i] == 0.0
)
rep = uniqueness_check(low1, low2, tau=1.0)
print(f"rank-deficient pair: kernel_dim = {rep.kernel_dim} (closed form {expected})")
print(f"                     verdict = {rep.verdict}")
print(f"                     worst inner condition value  = {rep.condition_inner:.3e}")
print(f"                     worst off-diagonal l1 of d   = {rep.condition_norm:.3f}")
print(f"                     tau = {rep.tau}")
