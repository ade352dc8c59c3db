"""Deterministic SVG scatter plots for 2D projections."""

from __future__ import annotations

from .projections import ProjectionResult

DEFAULT_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

_WIDTH = 640
_HEIGHT = 480
_MARGIN = 40


def scatter_svg(result: ProjectionResult, labels: dict[str, str],
                palette=DEFAULT_PALETTE, title: str = "") -> str:
    """One circle per item, colored by label, with a legend; stable bytes."""
    ids = result.ids()
    missing = [i for i in ids if i not in labels]
    if missing:
        raise ValueError(f"no label for item {missing[0]!r} ({len(missing)} missing)")

    coords = result.matrix()
    xs = coords[:, 0]
    ys = coords[:, 1] if coords.shape[1] > 1 else xs * 0.0
    label_order = sorted(set(labels[i] for i in ids))
    if len(label_order) > len(palette):
        raise ValueError(f"{len(label_order)} labels exceed palette size {len(palette)}")
    color = {lab: palette[i] for i, lab in enumerate(label_order)}

    x_span = float(xs.max() - xs.min()) or 1.0
    y_span = float(ys.max() - ys.min()) or 1.0
    plot_w = _WIDTH - 2 * _MARGIN
    plot_h = _HEIGHT - 2 * _MARGIN

    def sx(v):
        return _MARGIN + (v - float(xs.min())) / x_span * plot_w

    def sy(v):
        # SVG y axis points down; flip so larger values plot higher
        return _HEIGHT - _MARGIN - (v - float(ys.min())) / y_span * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{_WIDTH // 2}" y="20" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="14">{title}</text>')
    for item_id, x, y in zip(ids, xs, ys):
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" '
                     f'fill="{color[labels[item_id]]}" fill-opacity="0.8">'
                     f'<title>{item_id}</title></circle>')
    for i, lab in enumerate(label_order):
        ly = _MARGIN + 16 * i
        parts.append(f'<circle cx="{_WIDTH - _MARGIN - 80}" cy="{ly}" r="4" '
                     f'fill="{color[lab]}"/>')
        parts.append(f'<text x="{_WIDTH - _MARGIN - 70}" y="{ly + 4}" '
                     f'font-family="sans-serif" font-size="12">{lab}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
