"""Plain SVG projections of ellipsoids and their unions.

Coordinates are written with two decimals in pixel space, so output is
byte-identical for identical inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bounds import EllipsoidBound, plane_axes, union_projection_outline

AXIS_NAMES = ("x1", "x2", "x3")


@dataclass(frozen=True)
class Overlay:
    ellipsoid: EllipsoidBound
    label: str
    color: str
    dash: str = ""
    width: float = 2.0


def ellipse_polyline(e: EllipsoidBound, plane: str, n: int = 256) -> np.ndarray:
    i, j = plane_axes(plane)
    center = (0.0, 0.0, e.x30)
    ax = e.semi_axes
    t = np.linspace(0.0, 2.0 * math.pi, n)
    return np.column_stack([center[i] + ax[i] * np.cos(t), center[j] + ax[j] * np.sin(t)])


def render_svg(union: Sequence[EllipsoidBound] = (), overlays: Sequence[Overlay] = (), plane: str = "x1x3",
               size: int = 600, resolution: int = 300, title: str = "") -> str:
    """SVG with the union outline (thin gray) and overlay ellipses."""
    if not union and not overlays:
        raise ValueError("nothing to plot")
    i, j = plane_axes(plane)
    lines_union = union_projection_outline(list(union), plane, resolution) if union else []
    curves = [(ov, ellipse_polyline(ov.ellipsoid, plane)) for ov in overlays]
    pts = [ln for ln in lines_union] + [c for _, c in curves]
    allp = np.vstack(pts)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = max(hi[0] - lo[0], hi[1] - lo[1]) or 1.0
    margin = 50
    scale = (size - 2 * margin) / span
    mid = 0.5 * (lo + hi)

    def tx(p):
        x = margin + (p[:, 0] - mid[0]) * scale + (size - 2 * margin) / 2
        y = size - (margin + (p[:, 1] - mid[1]) * scale + (size - 2 * margin) / 2)
        return x, y

    def path(p):
        x, y = tx(p)
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>']
    if title:
        out.append(f'<text x="{size / 2:.2f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>')
    out.append(f'<text x="{size / 2:.2f}" y="{size - 10}" text-anchor="middle" font-size="12">'
               f'{AXIS_NAMES[i]}</text>')
    out.append(f'<text x="14" y="{size / 2:.2f}" font-size="12" '
               f'transform="rotate(-90 14 {size / 2:.2f})" text-anchor="middle">{AXIS_NAMES[j]}</text>')
    for ln in lines_union:
        out.append(f'<polyline points="{path(ln)}" fill="none" stroke="gray" stroke-width="0.8"/>')
    for k, (ov, c) in enumerate(curves):
        dash = f' stroke-dasharray="{ov.dash}"' if ov.dash else ""
        out.append(f'<polyline points="{path(c)}" fill="none" stroke="{ov.color}" '
                   f'stroke-width="{ov.width:.1f}"{dash}/>')
        out.append(f'<text x="{size - 10}" y="{40 + 16 * k}" text-anchor="end" font-size="12" '
                   f'fill="{ov.color}">{_esc(ov.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
