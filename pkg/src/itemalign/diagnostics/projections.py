"""Two-dimensional projections of item embeddings: PCA, t-SNE, ISOMAP.

All three are deterministic given their inputs (and, for t-SNE, the
seed). t-SNE is the exact O(n^2) formulation rather than a tree
approximation: at desk scale that is fast enough, and it lets the
gradient be validated against finite differences of the objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from ..embeddings import EmbeddingSet
from ..rng import derive_seed


@dataclass(frozen=True)
class ProjectionResult:
    method: str
    coordinates: dict[str, tuple[float, ...]]
    metadata: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if not self.coordinates:
            raise ValueError("projection holds no points")
        for item_id, coord in self.coordinates.items():
            if not all(np.isfinite(c) for c in coord):
                raise ValueError(f"non-finite coordinate for {item_id!r}")

    def matrix(self) -> np.ndarray:
        return np.array(list(self.coordinates.values()), dtype=np.float64)

    def ids(self) -> list[str]:
        return list(self.coordinates)


def render_projection_csv(result: ProjectionResult, labels: dict[str, str] | None = None) -> str:
    dims = len(next(iter(result.coordinates.values())))
    header = "id," + ",".join(f"c{i + 1}" for i in range(dims))
    if labels is not None:
        header += ",label"
    lines = [header]
    for item_id, coord in result.coordinates.items():
        row = item_id + "," + ",".join(repr(float(c)) for c in coord)
        if labels is not None:
            if item_id not in labels:
                raise ValueError(f"no label for {item_id!r}")
            row += "," + labels[item_id]
        lines.append(row)
    return "\n".join(lines) + "\n"


# -- PCA ----------------------------------------------------------------------


@dataclass(frozen=True)
class PCABasis:
    mean: np.ndarray
    components: np.ndarray            # out_dim x d, orthonormal rows
    explained_variance: np.ndarray    # descending
    explained_variance_ratio: np.ndarray

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        return (np.asarray(matrix, dtype=np.float64) - self.mean) @ self.components.T


def fit_pca(matrix: np.ndarray, out_dim: int) -> PCABasis:
    """Top principal axes by SVD of the centered data.

    Sign convention: the largest-magnitude loading of each component is
    positive, which pins down the otherwise arbitrary axis orientations.
    """
    x = np.asarray(matrix, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least 2 points")
    if not 1 <= out_dim <= min(n, d):
        raise ValueError(f"out_dim must be in [1, {min(n, d)}], got {out_dim}")
    mean = x.mean(axis=0)
    centered = x - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:out_dim].copy()
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    variances = singular ** 2 / (n - 1)
    total = float(variances.sum())
    ratios = variances[:out_dim] / total if total > 0 else np.zeros(out_dim)
    return PCABasis(mean, components, variances[:out_dim], ratios)


def pca_project(embeddings: EmbeddingSet, out_dim: int = 2) -> ProjectionResult:
    ids = embeddings.ids()
    basis = fit_pca(embeddings.matrix(), out_dim)
    scores = basis.transform(embeddings.matrix())
    coords = {i: tuple(float(v) for v in row) for i, row in zip(ids, scores)}
    return ProjectionResult(
        method="pca",
        coordinates=coords,
        metadata={
            "explained_variance_ratio": [float(r) for r in basis.explained_variance_ratio],
        },
    )


# -- t-SNE --------------------------------------------------------------------


def _squared_distances(x: np.ndarray) -> np.ndarray:
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def _conditional_affinities(d2: np.ndarray, perplexity: float,
                            tol: float = 1e-5, max_steps: int = 50) -> np.ndarray:
    """Row-stochastic p(j|i) with per-row bandwidths matched to perplexity."""
    n = d2.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        beta = 1.0
        beta_lo, beta_hi = 0.0, np.inf
        di = np.delete(d2[i], i)
        for _ in range(max_steps):
            w = np.exp(-di * beta)
            total = w.sum()
            if total <= 0:
                entropy = 0.0
                probs = np.zeros_like(w)
            else:
                probs = w / total
                entropy = beta * float((di * probs).sum()) + np.log(total)
            diff = entropy - target
            if abs(diff) < tol:
                break
            if diff > 0:       # entropy too high: sharpen
                beta_lo = beta
                beta = beta * 2.0 if beta_hi == np.inf else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = beta / 2.0 if beta_lo == 0.0 else (beta + beta_lo) / 2.0
        row = np.insert(probs, i, 0.0)
        p[i] = row
    return p


def tsne_objective(p: np.ndarray, y: np.ndarray) -> float:
    """KL divergence between the affinities p and the Student-t kernel of y."""
    num = 1.0 / (1.0 + _squared_distances(y))
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), 1e-12)
    mask = p > 0
    return float((p[mask] * np.log(p[mask] / q[mask])).sum())


def tsne_gradient(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    num = 1.0 / (1.0 + _squared_distances(y))
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), 1e-12)
    mult = (p - q) * num
    # grad_i = 4 * sum_j mult_ij (y_i - y_j), expanded to two matrix products
    return 4.0 * (mult.sum(axis=1)[:, None] * y - mult @ y)


def tsne_affinities(x: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized, normalized joint affinities with zero diagonal."""
    cond = _conditional_affinities(_squared_distances(x), perplexity)
    p = (cond + cond.T) / (2.0 * x.shape[0])
    np.fill_diagonal(p, 0.0)
    return p


def tsne_project(embeddings: EmbeddingSet, perplexity: float = 30.0,
                 iterations: int = 1000, learning_rate: float = 200.0,
                 seed: int = 0) -> ProjectionResult:
    ids = embeddings.ids()
    x = embeddings.matrix()
    n = x.shape[0]
    if n < 4:
        raise ValueError("need at least 4 points")
    if perplexity >= (n - 1) / 3:
        raise ValueError(
            f"perplexity {perplexity} infeasible for n={n}; needs perplexity < {(n - 1) / 3}")
    if perplexity <= 0 or iterations < 1 or learning_rate <= 0:
        raise ValueError("invalid t-SNE parameters")

    p = tsne_affinities(x, perplexity)
    rng = np.random.default_rng(derive_seed(seed, "tsne-init"))
    y = rng.standard_normal((n, 2)) * 1e-4
    initial_kl = tsne_objective(p, y)

    # plain momentum descent can oscillate at a fixed rate, so the returned
    # configuration is the lowest-objective one visited (the initialization
    # counts); a run therefore never ends worse than it started
    best_kl, best_y, best_iter = initial_kl, y.copy(), -1
    exaggeration = 12.0
    exaggeration_span = min(250, iterations)
    update = np.zeros_like(y)
    for it in range(iterations):
        p_eff = p * exaggeration if it < exaggeration_span else p
        grad = tsne_gradient(p_eff, y)
        momentum = 0.5 if it < 250 else 0.8
        update = momentum * update - learning_rate * grad
        y = y + update
        kl = tsne_objective(p, y)
        if kl < best_kl:
            best_kl, best_y, best_iter = kl, y.copy(), it

    coords = {i: (float(r[0]), float(r[1])) for i, r in zip(ids, best_y)}
    return ProjectionResult(
        method="tsne",
        coordinates=coords,
        metadata={
            "perplexity": perplexity,
            "iterations": iterations,
            "learning_rate": learning_rate,
            "initial_kl": initial_kl,
            "final_kl": best_kl,
            "best_iteration": best_iter,
        },
        seed=seed,
    )


# -- ISOMAP -------------------------------------------------------------------


class DisconnectedGraphError(ValueError):
    """Raised when the neighborhood graph splits into several components."""

    def __init__(self, component_sizes, k_neighbors: int):
        self.component_sizes = tuple(sorted(component_sizes, reverse=True))
        self.k_neighbors = k_neighbors
        sizes = ", ".join(str(s) for s in self.component_sizes)
        super().__init__(
            f"neighborhood graph with k={k_neighbors} is disconnected: "
            f"{len(component_sizes)} components of sizes [{sizes}]")


def _neighbor_graph(x: np.ndarray, k: int) -> csr_matrix:
    n = x.shape[0]
    d2 = _squared_distances(x)
    dist = np.sqrt(d2)
    rows, cols, vals = [], [], []
    order_idx = np.arange(n)
    for i in range(n):
        # stable sort with index tiebreak; position 0 is the point itself
        order = np.lexsort((order_idx, dist[i]))
        for j in order[1:k + 1]:
            rows.append(i)
            cols.append(int(j))
            vals.append(dist[i, j])
    graph = csr_matrix((vals, (rows, cols)), shape=(n, n))
    # symmetrize: keep an edge when either endpoint listed the other
    return graph.maximum(graph.T)


def classical_mds(squared_dist: np.ndarray, out_dim: int) -> np.ndarray:
    n = squared_dist.shape[0]
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ squared_dist @ j
    eigvals, eigvecs = np.linalg.eigh((b + b.T) / 2.0)
    order = np.argsort(eigvals)[::-1][:out_dim]
    coords = eigvecs[:, order] * np.sqrt(np.maximum(eigvals[order], 0.0))
    for col in coords.T:
        pivot = np.argmax(np.abs(col))
        if col[pivot] < 0:
            col *= -1.0
    return coords


def isomap_project(embeddings: EmbeddingSet, k_neighbors: int = 10,
                   out_dim: int = 2) -> ProjectionResult:
    ids = embeddings.ids()
    x = embeddings.matrix()
    n = x.shape[0]
    if not 1 <= k_neighbors < n:
        raise ValueError(f"k_neighbors must be in [1, {n - 1}], got {k_neighbors}")
    graph = _neighbor_graph(x, k_neighbors)
    n_comp, assignment = connected_components(graph, directed=False)
    if n_comp > 1:
        sizes = np.bincount(assignment).tolist()
        raise DisconnectedGraphError(sizes, k_neighbors)
    geodesic = shortest_path(graph, method="D", directed=False)
    coords = classical_mds(geodesic ** 2, out_dim)
    return ProjectionResult(
        method="isomap",
        coordinates={i: tuple(float(v) for v in row) for i, row in zip(ids, coords)},
        metadata={"k_neighbors": k_neighbors},
    )


def isomap_project_auto_k(embeddings: EmbeddingSet, k_neighbors: int = 10,
                          out_dim: int = 2) -> ProjectionResult:
    """Like isomap_project, but grows k until the graph connects."""
    n = len(embeddings.ids())
    k = k_neighbors
    while True:
        try:
            return isomap_project(embeddings, k, out_dim)
        except DisconnectedGraphError:
            if k >= n - 1:
                raise
            k = min(k * 2, n - 1)
