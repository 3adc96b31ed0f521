"""Plane figures of a set, a body and a cone, as standalone SVG text.

Only two-dimensional scenes are drawn.  Output is deterministic: fixed
viewport, coordinates printed at four decimals, rays sorted by angle and
no timestamps, so repeated runs produce identical bytes.
"""

from __future__ import annotations

import math

import numpy as np

from . import sets as S_
from .config import DEFAULT_CONFIG, ToleranceConfig
from .errors import InputError

__all__ = ["scene_svg", "write_scene"]

_SIZE = 480.0
_PAD = 28.0
_HALF = 1.5  # world half-width of the viewport around the base point


def _fmt(v: float) -> str:
    return f"{v:.4f}"


class _View:
    def __init__(self, center: np.ndarray, half: float):
        self.cx, self.cy = float(center[0]), float(center[1])
        self.half = half
        self.scale = (_SIZE - 2 * _PAD) / (2 * half)

    def to_px(self, x: float, y: float) -> tuple[float, float]:
        return (_PAD + (x - self.cx + self.half) * self.scale,
                _PAD + (self.cy + self.half - y) * self.scale)

    def corners(self) -> list[tuple[float, float]]:
        h = self.half
        return [(self.cx - h, self.cy - h), (self.cx + h, self.cy - h),
                (self.cx + h, self.cy + h), (self.cx - h, self.cy + h)]


def _clip_halfplane(poly: list[tuple[float, float]], a: np.ndarray,
                    b: float) -> list[tuple[float, float]]:
    """Keep the part of a polygon with a.x <= b (Sutherland-Hodgman step)."""
    out: list[tuple[float, float]] = []
    k = len(poly)
    for i in range(k):
        p, q = poly[i], poly[(i + 1) % k]
        fp = a[0] * p[0] + a[1] * p[1] - b
        fq = a[0] * q[0] + a[1] * q[1] - b
        if fp <= 0:
            out.append(p)
        if (fp <= 0) != (fq <= 0):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _poly_to_window(P: S_.Polyhedron, view: _View) -> list[tuple[float, float]]:
    poly = view.corners()
    for a, b in zip(P.A, P.b):
        poly = _clip_halfplane(poly, a, float(b))
        if not poly:
            break
    return poly


def _polygon_elem(pts: list[tuple[float, float]], view: _View,
                  fill: str, stroke: str, opacity: str) -> str:
    if len(pts) < 3:
        return ""
    coords = " ".join(f"{_fmt(px)},{_fmt(py)}"
                      for px, py in (view.to_px(x, y) for x, y in pts))
    return (f'<polygon points="{coords}" fill="{fill}" stroke="{stroke}" '
            f'stroke-width="1" fill-opacity="{opacity}"/>')


def _curve_elems(S: S_.CurveGraph, view: _View, n: int = 400) -> list[str]:
    """Polyline segments of the curve, restricted to twice the viewport."""
    ts = np.linspace(S.t_lo, S.t_hi, n)
    P = S.gamma(ts)
    h2 = 2 * view.half
    inside = (np.abs(P[:, 0] - view.cx) <= h2) & (np.abs(P[:, 1] - view.cy) <= h2)
    out: list[str] = []
    run: list[str] = []
    for ok, (x, y) in zip(inside, P):
        if ok:
            px, py = view.to_px(float(x), float(y))
            run.append(f"{_fmt(px)},{_fmt(py)}")
        elif run:
            if len(run) >= 2:
                out.append('<polyline points="' + " ".join(run) +
                           '" fill="none" stroke="#1d5fa8" stroke-width="2.4"/>')
            run = []
    if len(run) >= 2:
        out.append('<polyline points="' + " ".join(run) +
                   '" fill="none" stroke="#1d5fa8" stroke-width="2.4"/>')
    return out


def _epis_region(S: S_.Epigraph, view: _View) -> list[tuple[float, float]]:
    lo, hi = S.f.dom_bounds()
    xlo = max(lo, view.cx - view.half)
    xhi = min(hi, view.cx + view.half)
    if xhi <= xlo:
        return []
    xs = np.linspace(xlo, xhi, 240)
    ys = np.clip(S.f.value_many(xs, 0.0), view.cy - 4 * view.half,
                 view.cy + 4 * view.half)
    edge = view.cy + view.half if S.above else view.cy - view.half
    pts = list(zip(xs.tolist(), ys.tolist()))
    return pts + [(xhi, edge), (xlo, edge)]


def _draw_set(S, view: _View, depth: int = 0) -> list[str]:
    if depth > 4:
        return []
    if isinstance(S, S_.Union):
        out: list[str] = []
        for m in S.members:
            out.extend(_draw_set(m, view, depth + 1))
        return out
    if isinstance(S, S_.CurveGraph):
        return _curve_elems(S, view)
    if isinstance(S, S_.Epigraph):
        return [_polygon_elem(_epis_region(S, view), view,
                              "#5b8fc9", "#1d5fa8", "0.30")]
    P = getattr(S, "as_polyhedron", lambda: None)()
    if P is not None:
        return [_polygon_elem(_poly_to_window(P, view), view,
                              "#5b8fc9", "#1d5fa8", "0.30")]
    # structural fallback: membership dots on a fixed lattice
    g = np.linspace(-view.half, view.half, 41)
    X, Y = np.meshgrid(view.cx + g, view.cy + g)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    keep = S.contains_many(pts, 1e-9)
    dots = []
    for x, y in pts[keep]:
        px, py = view.to_px(float(x), float(y))
        dots.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="1.6" '
                    f'fill="#1d5fa8"/>')
    return dots


def _draw_rays(rays: np.ndarray, view: _View) -> list[str]:
    out = []
    L = 0.42 * 2 * view.half
    ang = np.arctan2(rays[:, 1], rays[:, 0])
    for k in np.argsort(ang):
        d = rays[k] / max(float(np.linalg.norm(rays[k])), 1e-300)
        x0, y0 = view.to_px(view.cx, view.cy)
        x1, y1 = view.to_px(view.cx + L * d[0], view.cy + L * d[1])
        out.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" '
                   f'y2="{_fmt(y1)}" stroke="#b3301f" stroke-width="1.8" '
                   f'marker-end="url(#tip)"/>')
    return out


def scene_svg(omega, xbar, rays, body=None,
              cfg: ToleranceConfig = DEFAULT_CONFIG, title: str = "",
              half: float = _HALF) -> str:
    """Render the set, the optional body, and cone rays at the base point."""
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    if xbar.shape[0] != 2:
        raise InputError("figures are drawn in the plane only")
    rays = np.asarray(rays, dtype=float).reshape(-1, 2) if np.size(rays) else \
        np.zeros((0, 2))
    view = _View(xbar, half)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(_SIZE)}" '
             f'height="{int(_SIZE)}" viewBox="0 0 {int(_SIZE)} {int(_SIZE)}">',
             '<defs><marker id="tip" markerWidth="8" markerHeight="8" '
             'refX="6" refY="3" orient="auto">'
             '<path d="M0,0 L6,3 L0,6 z" fill="#b3301f"/></marker></defs>',
             f'<rect x="0" y="0" width="{int(_SIZE)}" height="{int(_SIZE)}" '
             'fill="#ffffff"/>']
    if title:
        parts.append(f'<text x="{_fmt(_SIZE / 2)}" y="18" font-family="sans-serif" '
                     f'font-size="13" text-anchor="middle" fill="#333333">'
                     f'{title}</text>')
    # clip all geometry to the framed region
    parts.append(f'<clipPath id="frame"><rect x="{_fmt(_PAD)}" y="{_fmt(_PAD)}" '
                 f'width="{_fmt(_SIZE - 2 * _PAD)}" '
                 f'height="{_fmt(_SIZE - 2 * _PAD)}"/></clipPath>')
    parts.append('<g clip-path="url(#frame)">')
    if body is not None:
        P = getattr(body, "as_polyhedron", lambda: None)()
        if P is not None:
            parts.append(_polygon_elem(_poly_to_window(P, view), view,
                                       "#8a8a8a", "#5e5e5e", "0.18"))
        else:
            parts.extend(_draw_set(body, view))
    parts.extend(_draw_set(omega, view))
    parts.extend(_draw_rays(rays, view))
    parts.append('</g>')
    bx, by = view.to_px(view.cx, view.cy)
    parts.append(f'<circle cx="{_fmt(bx)}" cy="{_fmt(by)}" r="3.5" '
                 f'fill="#111111"/>')
    parts.append(f'<rect x="{_fmt(_PAD)}" y="{_fmt(_PAD)}" '
                 f'width="{_fmt(_SIZE - 2 * _PAD)}" '
                 f'height="{_fmt(_SIZE - 2 * _PAD)}" fill="none" '
                 f'stroke="#999999" stroke-width="1"/>')
    parts.append('</svg>')
    return "\n".join(p for p in parts if p) + "\n"


def write_scene(path: str, omega, xbar, rays, body=None,
                cfg: ToleranceConfig = DEFAULT_CONFIG, title: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(scene_svg(omega, xbar, rays, body=body, cfg=cfg, title=title))
