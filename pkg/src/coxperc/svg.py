"""Minimal SVG output: percolation curves and measure snapshots."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def _doc(width: int, height: int, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def curves_svg(series: dict[str, tuple], title: str = "", width: int = 640, height: int = 420) -> str:
    """Line plot of ``{label: (x, y, se)}`` with y in ``[0, 1]`` and +-2 SE bars."""
    pad_l, pad_r, pad_t, pad_b = 60, 150, 30, 45
    xs = np.concatenate([np.asarray(v[0], float) for v in series.values()]) if series else np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    if x1 <= x0:
        x1 = x0 + 1.0
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def py(y):
        return pad_t + (1.0 - y) * ph

    body = [
        f'<text x="{pad_l}" y="18" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(6):
        y = k / 5
        body.append(f'<line x1="{pad_l - 4}" y1="{py(y):.1f}" x2="{pad_l}" y2="{py(y):.1f}" stroke="black"/>')
        body.append(
            f'<text x="{pad_l - 8}" y="{py(y) + 4:.1f}" font-family="sans-serif" font-size="11" '
            f'text-anchor="end">{y:.1f}</text>'
        )
        xv = x0 + k / 5 * (x1 - x0)
        body.append(
            f'<text x="{px(xv):.1f}" y="{pad_t + ph + 16}" font-family="sans-serif" font-size="11" '
            f'text-anchor="middle">{xv:.3g}</text>'
        )
    body.append(
        f'<text x="{pad_l + pw / 2:.1f}" y="{height - 8}" font-family="sans-serif" font-size="12" '
        f'text-anchor="middle">lambda</text>'
    )
    for i, (label, (x, y, se)) in enumerate(series.items()):
        col = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x, y))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        for a, b, s in zip(x, y, se):
            lo, hi = max(0.0, b - 2 * s), min(1.0, b + 2 * s)
            body.append(
                f'<line x1="{px(a):.1f}" y1="{py(lo):.1f}" x2="{px(a):.1f}" y2="{py(hi):.1f}" stroke="{col}"/>'
            )
            body.append(f'<circle cx="{px(a):.1f}" cy="{py(b):.1f}" r="2.5" fill="{col}"/>')
        ly = pad_t + 14 + 18 * i
        body.append(f'<line x1="{width - pad_r + 10}" y1="{ly - 4}" x2="{width - pad_r + 30}" y2="{ly - 4}" stroke="{col}" stroke-width="2"/>')
        body.append(
            f'<text x="{width - pad_r + 35}" y="{ly}" font-family="sans-serif" font-size="11">{escape(label)}</text>'
        )
    return _doc(width, height, body)


def snapshot_svg(window, segments=None, density=None, points=None, size: int = 600) -> str:
    """Measure realization (segments or a density raster) with points overlaid.

    ``segments`` is an ``(m, 2, 2)`` array; ``density`` a 2-d array of cell
    values covering ``window``; ``points`` an ``(n, 2)`` array.
    """
    lo = np.asarray(window.lower, float)
    scale = size / window.side

    def tx(p):
        return (p[..., 0] - lo[0]) * scale, size - (p[..., 1] - lo[1]) * scale

    body = []
    if density is not None and density.size:
        top = float(density.max()) or 1.0
        nx, ny = density.shape
        cw, ch = size / nx, size / ny
        for i in range(nx):
            for j in range(ny):
                v = density[i, j] / top
                if v <= 0:
                    continue
                g = int(255 - 180 * v)
                body.append(
                    f'<rect x="{i * cw:.2f}" y="{size - (j + 1) * ch:.2f}" width="{cw:.2f}" height="{ch:.2f}" '
                    f'fill="rgb({g},{g},255)"/>'
                )
    if segments is not None and len(segments):
        ax, ay = tx(segments[:, 0])
        bx, by = tx(segments[:, 1])
        for x1, y1, x2, y2 in zip(ax, ay, bx, by):
            body.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="#555" stroke-width="0.8"/>')
    if points is not None and len(points):
        px, py = tx(np.asarray(points, float))
        for x, y in zip(px, py):
            body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="1.6" fill="#d62728"/>')
    return _doc(size, size, body)
