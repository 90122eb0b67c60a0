"""Weighted graphs, their Laplacians, and synthetic problem generators.

Conventions: a Laplacian here has nonnegative diagonal, entry (i, j) equal
to minus the edge weight for i != j, and zero row sums, so it is positive
semidefinite with the all-ones vector in its kernel. Grounding a reference
node produces the positive definite reduced matrix the estimators work on.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NearSingularScenarioError, ReductionError
from .linalg import as_symmetric

# Constant added to the absolute row sums when building diagonals of
# synthetic difference matrices; keeps them nonsingular without dominating.
DELTA_DIAGONAL_SHIFT = 0.1

# A grounded Laplacian whose smallest eigenvalue falls at or below this is
# treated as evidence of a disconnected graph.
REDUCTION_MIN_EIG = 1e-12

# Matrices in an assembled scenario must keep all eigenvalue magnitudes
# above this, or sampling from the implied covariance is meaningless.
SCENARIO_MIN_EIG = 1e-6


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected weighted graph on nodes 0 .. node_count - 1.

    Edges are (i, j, weight) triples. Construction validates indices,
    forbids self-loops and negative weights, merges parallel edges by
    summing their weights, and stores the result sorted by node pair.
    """

    node_count: int
    edges: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.node_count < 1:
            raise InvalidInputError(f"node_count must be >= 1, got {self.node_count}")
        merged = {}
        for edge in self.edges:
            try:
                i, j, w = edge
            except (TypeError, ValueError):
                raise InvalidInputError(f"edge must be an (i, j, weight) triple, got {edge!r}")
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise InvalidInputError(f"self-loop on node {i} is not allowed")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise InvalidInputError(
                    f"edge ({i}, {j}) out of range for {self.node_count} nodes"
                )
            if not math.isfinite(w) or w < 0:
                raise InvalidInputError(f"edge ({i}, {j}) has invalid weight {w!r}")
            key = (min(i, j), max(i, j))
            merged[key] = merged.get(key, 0.0) + w
        canon = tuple((i, j, w) for (i, j), w in sorted(merged.items()))
        object.__setattr__(self, "edges", canon)

    @property
    def edge_count(self):
        return len(self.edges)


def laplacian_from_graph(graph):
    """Dense Laplacian of a weighted graph: zero row sums, PSD."""
    if not isinstance(graph, WeightedGraph):
        raise InvalidInputError(f"expected a WeightedGraph, got {type(graph).__name__}")
    n = graph.node_count
    lap = np.zeros((n, n))
    for i, j, w in graph.edges:
        lap[i, j] -= w
        lap[j, i] -= w
        lap[i, i] += w
        lap[j, j] += w
    return lap


def reduce_ground_node(laplacian, ground, mode="delete"):
    """Ground one node of a Laplacian, returning a (p-1) x (p-1) matrix.

    mode="delete" removes the ground node's row and column (the standard
    grounded Laplacian; PD exactly when the graph is connected). mode="kron"
    eliminates the node by Schur complement instead, which preserves the
    effective conductances among the remaining nodes. Note that Schur
    elimination of a node from an exact Laplacian (zero row sums) yields a
    matrix that again has zero row sums, hence is singular and rejected by
    the PD check below; kron mode is therefore only useful on system
    matrices carrying self-conductance terms on the diagonal.

    Raises
    ------
    ReductionError
        If the reduced matrix is not positive definite (smallest eigenvalue
        <= 1e-12), which in delete mode means the graph is disconnected, or
        if the eliminated node has a nonpositive pivot in kron mode.
    """
    lap = as_symmetric(laplacian)
    n = lap.shape[0]
    if not isinstance(ground, (int, np.integer)) or not (0 <= ground < n):
        raise InvalidInputError(f"ground node {ground!r} out of range for size {n}")
    if mode not in ("delete", "kron"):
        raise InvalidInputError(f"unknown reduction mode {mode!r}; use 'delete' or 'kron'")
    if n == 1:
        raise InvalidInputError("cannot reduce a 1 x 1 Laplacian")
    keep = np.array([k for k in range(n) if k != ground])
    reduced = lap[np.ix_(keep, keep)]
    if mode == "kron":
        pivot = lap[ground, ground]
        if pivot <= REDUCTION_MIN_EIG:
            raise ReductionError(f"ground node {ground} has zero degree; cannot eliminate it")
        col = lap[keep, ground]
        reduced = reduced - np.outer(col, col) / pivot
    reduced = (reduced + reduced.T) / 2.0
    min_eig = float(np.linalg.eigvalsh(reduced)[0])
    if min_eig <= REDUCTION_MIN_EIG:
        raise ReductionError(
            f"reduced matrix is not positive definite (min eigenvalue {min_eig:.3e}); "
            "the graph is likely disconnected"
        )
    return reduced


def _signed_weights(rng, count, weight_range, sign_mode):
    lo, hi = float(weight_range[0]), float(weight_range[1])
    if not (0 < lo <= hi):
        raise InvalidInputError(f"weight range must satisfy 0 < lo <= hi, got ({lo}, {hi})")
    if sign_mode not in ("mixed", "positive"):
        raise InvalidInputError(f"unknown sign_mode {sign_mode!r}; use 'mixed' or 'positive'")
    weights = rng.uniform(lo, hi, size=count)
    if sign_mode == "mixed":
        weights *= rng.choice([-1.0, 1.0], size=count)
    return weights


def lattice_edges(p):
    """Edge list of the truncated square lattice on p nodes.

    Nodes are laid out row by row on a grid ceil(sqrt(p)) columns wide; each
    node connects to its right and lower neighbor when those exist. For a
    perfect square p this is the standard 4-neighbor grid. Deterministic and
    connected for every p >= 2; maximum degree 4 once the lattice has at
    least three rows and columns.
    """
    if p < 2:
        raise InvalidInputError(f"lattice needs at least 2 nodes, got {p}")
    cols = math.isqrt(p)
    if cols * cols < p:
        cols += 1
    edges = []
    for i in range(p):
        if (i % cols) != cols - 1 and i + 1 < p:
            edges.append((i, i + 1))
        if i + cols < p:
            edges.append((i, i + cols))
    return edges


def lattice_delta(p, weight_range=(0.4, 1.0), sign_mode="mixed", seed=0):
    """Sparse symmetric difference matrix supported on a truncated lattice.

    Off-diagonal entries on lattice edges get weights drawn uniformly from
    weight_range (with random signs under sign_mode="mixed"); each diagonal
    entry is its row's absolute off-diagonal sum plus 0.1.
    """
    edges = lattice_edges(p)
    rng = np.random.default_rng(seed)
    weights = _signed_weights(rng, len(edges), weight_range, sign_mode)
    delta = np.zeros((p, p))
    for (i, j), w in zip(edges, weights):
        delta[i, j] = w
        delta[j, i] = w
    np.fill_diagonal(delta, np.sum(np.abs(delta), axis=1) + DELTA_DIAGONAL_SHIFT)
    return delta


def grid_delta(p, weight_range=(0.4, 1.0), sign_mode="mixed", seed=0):
    """Sparse difference matrix on the k x k 4-neighbor grid; requires p = k*k, k >= 2."""
    k = math.isqrt(p)
    if k * k != p or k < 2:
        raise InvalidInputError(f"grid_delta needs p = k*k with k >= 2, got p = {p}")
    return lattice_delta(p, weight_range=weight_range, sign_mode=sign_mode, seed=seed)


def random_base_matrix(p, density, margin=0.5, scale=1.0, seed=0):
    """Random symmetric positive definite base matrix.

    Each off-diagonal pair (i, j), i < j, is nonzero independently with
    probability `density`, with magnitude uniform in [0.5, 1.0] times
    `scale` and random sign. Diagonal entries are the absolute row sums
    plus `margin`, which makes the matrix strictly diagonally dominant,
    hence positive definite with smallest eigenvalue at least `margin`.

    `scale` controls how large the off-diagonal couplings are relative to
    the diagonal. At scale 1.0 a dense matrix has operator norm growing
    linearly with p; small scales keep the norm near `margin`, which is
    the regime where a fixed-magnitude difference between two such
    matrices remains statistically visible at moderate sample sizes.
    """
    if p < 1:
        raise InvalidInputError(f"p must be >= 1, got {p}")
    if not (0 < density <= 1):
        raise InvalidInputError(f"density must lie in (0, 1], got {density}")
    if not (margin > 0):
        raise InvalidInputError(f"margin must be positive, got {margin}")
    if not (scale > 0 and math.isfinite(scale)):
        raise InvalidInputError(f"scale must be positive and finite, got {scale}")
    rng = np.random.default_rng(seed)
    rows, cols = np.triu_indices(p, k=1)
    present = rng.random(rows.size) < density
    magnitudes = rng.uniform(0.5, 1.0, size=rows.size) * scale
    signs = rng.choice([-1.0, 1.0], size=rows.size)
    base = np.zeros((p, p))
    vals = np.where(present, signs * magnitudes, 0.0)
    base[rows, cols] = vals
    base[cols, rows] = vals
    np.fill_diagonal(base, np.sum(np.abs(base), axis=1) + margin)
    return base


@dataclass(frozen=True)
class NetworkScenario:
    """A fully specified two-regime ground truth.

    b2 equals b1 + delta_true exactly; both are symmetric and nonsingular
    with eigenvalue magnitudes above the scenario floor. sigma_x1 and
    sigma_x2 are the positive definite injection covariances of the two
    regimes, and seed keys every random draw made on the scenario's behalf.
    """

    b1: np.ndarray
    b2: np.ndarray
    delta_true: np.ndarray
    sigma_x1: np.ndarray
    sigma_x2: np.ndarray
    seed: int = 0

    @property
    def p(self):
        return self.b1.shape[0]


def assemble_scenario(b1, delta, sigma_x1, sigma_x2, seed=0):
    """Validate the pieces of a two-regime scenario and bundle them.

    Raises
    ------
    InvalidInputError
        On shape mismatches or covariances that are not positive definite.
    NearSingularScenarioError
        If b1 or b2 = b1 + delta has an eigenvalue of magnitude <= 1e-6.
    """
    b1 = as_symmetric(b1)
    delta = as_symmetric(delta)
    sigma_x1 = as_symmetric(sigma_x1)
    sigma_x2 = as_symmetric(sigma_x2)
    p = b1.shape[0]
    for name, mat in (("delta", delta), ("sigma_x1", sigma_x1), ("sigma_x2", sigma_x2)):
        if mat.shape != (p, p):
            raise InvalidInputError(f"{name} has shape {mat.shape}, expected {(p, p)}")
    for name, sigma in (("sigma_x1", sigma_x1), ("sigma_x2", sigma_x2)):
        eigs = np.linalg.eigvalsh(sigma)
        if eigs[0] <= 1e-10 * max(1.0, eigs[-1]):
            raise InvalidInputError(f"{name} is not positive definite (min eig {eigs[0]:.3e})")
    b2 = b1 + delta
    for name, mat in (("b1", b1), ("b2", b2)):
        margin = float(np.min(np.abs(np.linalg.eigvalsh(mat))))
        if margin <= SCENARIO_MIN_EIG:
            raise NearSingularScenarioError(
                f"{name} is too close to singular (min |eigenvalue| {margin:.3e} <= "
                f"{SCENARIO_MIN_EIG:.0e})"
            )
    return NetworkScenario(
        b1=b1, b2=b2, delta_true=delta, sigma_x1=sigma_x1, sigma_x2=sigma_x2, seed=int(seed)
    )
