"""Misclassification diagnostics: group similarity, densities, projections."""

from .density import (
    DensityGrid,
    GridSpec,
    KLRow,
    KLTable,
    auto_bounds,
    density_estimate,
    kl_divergence,
    kl_table,
    render_kl_csv,
    render_kl_markdown,
)
from .plots import DEFAULT_PALETTE, scatter_svg
from .projections import (
    DisconnectedGraphError,
    PCABasis,
    ProjectionResult,
    classical_mds,
    fit_pca,
    isomap_project,
    isomap_project_auto_k,
    pca_project,
    render_projection_csv,
    tsne_affinities,
    tsne_gradient,
    tsne_objective,
    tsne_project,
)
from .similarity import (
    GroupIndex,
    GroupSelector,
    SimilarityRow,
    SimilarityTable,
    avg_pairwise_cosine,
    cosine_table,
    render_similarity_csv,
    render_similarity_markdown,
)

__all__ = [
    "GroupSelector", "GroupIndex", "SimilarityRow", "SimilarityTable",
    "avg_pairwise_cosine", "cosine_table",
    "render_similarity_csv", "render_similarity_markdown",
    "ProjectionResult", "PCABasis", "fit_pca", "pca_project",
    "tsne_project", "tsne_objective", "tsne_gradient", "tsne_affinities",
    "isomap_project", "isomap_project_auto_k", "classical_mds",
    "DisconnectedGraphError", "render_projection_csv",
    "GridSpec", "DensityGrid", "density_estimate", "auto_bounds",
    "kl_divergence", "KLRow", "KLTable", "kl_table",
    "render_kl_csv", "render_kl_markdown",
    "scatter_svg", "DEFAULT_PALETTE",
]
