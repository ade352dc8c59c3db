"""Smoothed 2D embedding densities and KL divergence between them.

A density is a 2D histogram convolved with a truncated Gaussian kernel,
floored by a small epsilon in every cell, and normalized to sum 1. The
divergence between two grids P, Q of identical geometry is

    sum_i P(i) * ln(P(i) / Q(i))

which the epsilon floor keeps finite. Reported values are grid-dependent,
so every table carries its grid spec.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .projections import fit_pca
from .similarity import GroupIndex, GroupSelector


@dataclass(frozen=True)
class GridSpec:
    bins_x: int = 50
    bins_y: int = 50
    sigma: float = 2.0          # in bin units
    epsilon: float = 1e-10
    padding: float = 0.05
    bounds: tuple[float, float, float, float] | None = None  # auto when None

    def __post_init__(self):
        if self.bins_x < 1 or self.bins_y < 1:
            raise ValueError("need at least one bin per axis")
        if self.sigma < 0 or self.epsilon <= 0 or self.padding < 0:
            raise ValueError("invalid grid parameters")
        if self.bounds is not None:
            xmin, xmax, ymin, ymax = self.bounds
            if not (xmax > xmin and ymax > ymin):
                raise ValueError(f"bounds enclose zero area: {self.bounds}")


@dataclass(frozen=True)
class DensityGrid:
    bounds: tuple[float, float, float, float]
    bins: tuple[int, int]
    sigma: float
    values: np.ndarray  # bins_x rows, bins_y columns

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.shape != self.bins:
            raise ValueError(f"values shape {v.shape} does not match bins {self.bins}")
        if np.any(v < 0):
            raise ValueError("density cells must be nonnegative")
        if abs(float(v.sum()) - 1.0) > 1e-12:
            raise ValueError(f"density must sum to 1, got {float(v.sum())!r}")

    def same_geometry(self, other: "DensityGrid") -> bool:
        return self.bounds == other.bounds and self.bins == other.bins


def auto_bounds(point_groups, padding: float = 0.05) -> tuple[float, float, float, float]:
    """Joint extent of all groups, padded on each side; degenerate axes widen."""
    stacked = np.vstack([np.asarray(p, dtype=np.float64) for p in point_groups])
    if stacked.ndim != 2 or stacked.shape[1] != 2 or stacked.shape[0] < 1:
        raise ValueError("bounds need at least one 2D point")
    mins = stacked.min(axis=0)
    maxs = stacked.max(axis=0)
    spans = maxs - mins
    pads = [padding * s if s > 0 else 0.5 for s in spans]
    return (float(mins[0] - pads[0]), float(maxs[0] + pads[0]),
            float(mins[1] - pads[1]), float(maxs[1] + pads[1]))


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(np.ceil(4.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    return kernel / kernel.sum()


def _smooth(grid: np.ndarray, sigma: float) -> np.ndarray:
    """Separable truncated-Gaussian blur; edge mass folds back (reflection),
    so every point keeps exactly unit weight and a uniform grid stays uniform."""
    if sigma == 0.0:
        return grid
    kernel = _gaussian_kernel(sigma)
    r = kernel.size // 2

    def along(a: np.ndarray, axis: int) -> np.ndarray:
        pad = [(r, r) if ax == axis else (0, 0) for ax in range(a.ndim)]
        padded = np.pad(a, pad, mode="symmetric")
        return np.apply_along_axis(
            lambda v: np.convolve(v, kernel, mode="valid"), axis, padded)

    return along(along(grid, 0), 1)


def density_estimate(points: np.ndarray, spec: GridSpec = GridSpec()) -> DensityGrid:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValueError("need at least one 2D point")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    bounds = spec.bounds if spec.bounds is not None else auto_bounds([pts], spec.padding)
    xmin, xmax, ymin, ymax = bounds
    outside = ((pts[:, 0] < xmin) | (pts[:, 0] > xmax)
               | (pts[:, 1] < ymin) | (pts[:, 1] > ymax))
    if np.any(outside):
        bad = pts[np.argmax(outside)]
        raise ValueError(f"point ({bad[0]}, {bad[1]}) lies outside grid bounds {bounds}")
    hist, _, _ = np.histogram2d(
        pts[:, 0], pts[:, 1], bins=(spec.bins_x, spec.bins_y),
        range=((xmin, xmax), (ymin, ymax)))
    smoothed = _smooth(hist, spec.sigma)
    floored = smoothed + spec.epsilon
    values = floored / floored.sum()
    return DensityGrid(bounds=bounds, bins=(spec.bins_x, spec.bins_y),
                       sigma=spec.sigma, values=values)


def kl_divergence(p: DensityGrid, q: DensityGrid) -> float:
    if not p.same_geometry(q):
        raise ValueError(
            f"grid geometry mismatch: {p.bounds}/{p.bins} vs {q.bounds}/{q.bins}")
    pv = p.values
    qv = q.values
    mask = pv > 0
    return float((pv[mask] * np.log(pv[mask] / qv[mask])).sum())


@dataclass(frozen=True)
class KLRow:
    source: GroupSelector
    target: GroupSelector
    value: float


@dataclass(frozen=True)
class KLTable:
    rows: tuple[KLRow, ...]
    grid: GridSpec = field(default_factory=GridSpec)

    def minimum_row(self) -> KLRow:
        return min(self.rows, key=lambda r: r.value)


def kl_table(source: GroupSelector, targets, index: GroupIndex,
             grid: GridSpec = GridSpec(), pca_dim: int = 2) -> KLTable:
    """KL from the source group to each target, in one shared 2D projection.

    A single PCA basis is fitted on the union of every involved embedding
    (deduplicated by item), and all densities share one grid geometry, so
    the rows are comparable with each other.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("no target groups")
    seen = set()
    for t in targets:
        if t in seen:
            raise ValueError(f"duplicate target group: {t.describe()}")
        seen.add(t)

    selectors = [source] + targets
    union: dict[tuple[str, str], np.ndarray] = {}
    group_ids: list[list[tuple[str, str]]] = []
    for sel in selectors:
        ids = index.ids_of(sel)
        _, embs = index.sources[sel.corpus]
        keys = [(sel.corpus, i) for i in ids]
        group_ids.append(keys)
        for key, item_id in zip(keys, ids):
            union.setdefault(key, embs.vector(item_id))

    basis = fit_pca(np.stack(list(union.values())), pca_dim)
    projected = {key: basis.transform(vec[None, :])[0] for key, vec in union.items()}
    group_points = [np.stack([projected[k] for k in keys]) for keys in group_ids]

    if grid.bounds is None:
        grid = replace(grid, bounds=auto_bounds(group_points, grid.padding))
    densities = [density_estimate(pts, grid) for pts in group_points]
    source_density = densities[0]
    rows = tuple(
        KLRow(source, target, kl_divergence(source_density, density))
        for target, density in zip(targets, densities[1:]))
    return KLTable(rows=rows, grid=grid)


def render_kl_csv(table: KLTable) -> str:
    lines = ["from,to,kl_divergence"]
    for row in table.rows:
        lines.append(f"{row.source.describe()},{row.target.describe()},{row.value:.3f}")
    return "\n".join(lines) + "\n"


def render_kl_markdown(table: KLTable) -> str:
    lines = [
        "| From | To | KL divergence |",
        "| --- | --- | --- |",
    ]
    for row in table.rows:
        lines.append(f"| {row.source.describe()} | {row.target.describe()} "
                     f"| {row.value:.3f} |")
    return "\n".join(lines) + "\n"
