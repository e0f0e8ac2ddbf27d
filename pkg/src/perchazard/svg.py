"""Bare-bones SVG line charts for eyeballing output files.

No plotting library is involved; each chart is a list of polylines in a
unit box with min/max tick labels. The data files remain the reference.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_chart", "write_panels"]

WIDTH, HEIGHT, PAD = 640, 220, 48
COLORS = ("#1f4e9c", "#c0392b", "#2e7d32", "#6a1b9a")


def _scale(v, lo, hi, a, b):
    if hi == lo:
        return np.full(np.shape(v), (a + b) / 2)
    return a + (np.asarray(v, dtype=float) - lo) * (b - a) / (hi - lo)


def line_chart(x, series: dict, title: str = "", y0: float = 0.0, marks=None, logy: bool = False) -> str:
    """One panel as an ``<g>`` fragment; ``series`` maps label to y values."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    if logy:
        ys = {k: np.where(v > 0, np.log10(np.where(v > 0, v, 1.0)), np.nan) for k, v in ys.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()] or [np.zeros(1)])
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    xlo, xhi = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    left, right, top, bottom = PAD, WIDTH - 10, y0 + 20, y0 + HEIGHT - 24
    parts = [f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
             'fill="none" stroke="#999"/>',
             f'<text x="{left}" y="{top - 6}" font-size="12">{escape(title)}</text>',
             f'<text x="4" y="{top + 10}" font-size="10">{hi:.4g}</text>',
             f'<text x="4" y="{bottom}" font-size="10">{lo:.4g}</text>',
             f'<text x="{left}" y="{bottom + 14}" font-size="10">{xlo:.4g}</text>',
             f'<text x="{right - 40}" y="{bottom + 14}" font-size="10">{xhi:.4g}</text>']
    for i, (label, y) in enumerate(ys.items()):
        ok = np.isfinite(y)
        px = _scale(x[ok], xlo, xhi, left, right)
        py = _scale(y[ok], lo, hi, bottom, top)
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py))
        color = COLORS[i % len(COLORS)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>')
        parts.append(f'<text x="{right - 120}" y="{top + 12 + 12 * i}" font-size="10" fill="{color}">'
                     f'{escape(label)}</text>')
    for xm in marks if marks is not None else ():
        px = float(_scale(xm, xlo, xhi, left, right))
        parts.append(f'<line x1="{px:.1f}" y1="{top}" x2="{px:.1f}" y2="{bottom}" stroke="#c0392b" '
                     'stroke-dasharray="3,3" stroke-width="0.6"/>')
    return "<g>" + "".join(parts) + "</g>"


def write_panels(path, panels: list[dict]) -> Path:
    """Stack panels vertically; each dict holds :func:`line_chart` kwargs."""
    path = Path(path)
    body = [line_chart(y0=i * HEIGHT, **panel) for i, panel in enumerate(panels)]
    total = HEIGHT * max(len(panels), 1)
    path.write_text(f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{total}" '
                    f'font-family="sans-serif">' + "".join(body) + "</svg>\n")
    return path
