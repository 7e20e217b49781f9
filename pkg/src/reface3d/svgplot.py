"""Deterministic SVG plot emitters (Bland-Altman and trade-off plots).

No plotting dependency: elements are written in a fixed order with fixed
4-decimal coordinates, so identical inputs give byte-identical files.
"""

from __future__ import annotations

from .stats import BlandAltman, TradeoffPoint

WIDTH = 640.0
HEIGHT = 480.0
MARGIN = 64.0


def _fmt(x: float) -> str:
    return f"{x:.4f}"


class _Scale:
    """Linear data -> pixel map with padding; degenerate ranges get a unit span."""

    def __init__(self, lo: float, hi: float, px_lo: float, px_hi: float):
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        self.lo, self.hi = lo - pad, hi + pad
        self.px_lo, self.px_hi = px_lo, px_hi

    def __call__(self, value: float) -> float:
        frac = (value - self.lo) / (self.hi - self.lo)
        return self.px_lo + frac * (self.px_hi - self.px_lo)

    def ticks(self, count: int = 5) -> list[float]:
        step = (self.hi - self.lo) / (count - 1)
        return [self.lo + i * step for i in range(count)]


def _header(title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(WIDTH)}" height="{int(HEIGHT)}" '
        f'viewBox="0 0 {int(WIDTH)} {int(HEIGHT)}">',
        f'<rect x="0" y="0" width="{int(WIDTH)}" height="{int(HEIGHT)}" fill="white"/>',
        f'<text x="{_fmt(WIDTH / 2)}" y="24" text-anchor="middle" font-size="16" '
        f'font-family="sans-serif">{title}</text>',
    ]


def _axes(sx: _Scale, sy: _Scale, xlabel: str, ylabel: str) -> list[str]:
    parts = [
        f'<line x1="{_fmt(MARGIN)}" y1="{_fmt(HEIGHT - MARGIN)}" x2="{_fmt(WIDTH - MARGIN)}" '
        f'y2="{_fmt(HEIGHT - MARGIN)}" stroke="black" stroke-width="1"/>',
        f'<line x1="{_fmt(MARGIN)}" y1="{_fmt(MARGIN)}" x2="{_fmt(MARGIN)}" '
        f'y2="{_fmt(HEIGHT - MARGIN)}" stroke="black" stroke-width="1"/>',
        f'<text x="{_fmt(WIDTH / 2)}" y="{_fmt(HEIGHT - 16)}" text-anchor="middle" '
        f'font-size="12" font-family="sans-serif">{xlabel}</text>',
        f'<text x="16" y="{_fmt(HEIGHT / 2)}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif" transform="rotate(-90 16 {_fmt(HEIGHT / 2)})">{ylabel}</text>',
    ]
    for tx in sx.ticks():
        px = sx(tx)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(HEIGHT - MARGIN)}" x2="{_fmt(px)}" '
            f'y2="{_fmt(HEIGHT - MARGIN + 5)}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{_fmt(HEIGHT - MARGIN + 18)}" text-anchor="middle" '
            f'font-size="10" font-family="sans-serif">{_fmt(tx)}</text>'
        )
    for ty in sy.ticks():
        py = sy(ty)
        parts.append(
            f'<line x1="{_fmt(MARGIN - 5)}" y1="{_fmt(py)}" x2="{_fmt(MARGIN)}" '
            f'y2="{_fmt(py)}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(MARGIN - 8)}" y="{_fmt(py + 3)}" text-anchor="end" '
            f'font-size="10" font-family="sans-serif">{_fmt(ty)}</text>'
        )
    return parts


def bland_altman_svg(ba: BlandAltman, title: str = "Bland-Altman") -> str:
    """Scatter of (pair mean, difference) with mean and limit-of-agreement lines."""
    xs = [m for m, _ in ba.points]
    ys = [d for _, d in ba.points]
    y_all = ys + [ba.loa_low, ba.loa_high, ba.mean_diff]
    sx = _Scale(min(xs), max(xs), MARGIN, WIDTH - MARGIN)
    sy = _Scale(min(y_all), max(y_all), HEIGHT - MARGIN, MARGIN)
    parts = _header(title) + _axes(sx, sy, "pair mean [mL]", "difference (orig - anon) [mL]")
    for level, color in ((ba.mean_diff, "black"), (ba.loa_low, "gray"), (ba.loa_high, "gray")):
        py = sy(level)
        parts.append(
            f'<line x1="{_fmt(MARGIN)}" y1="{_fmt(py)}" x2="{_fmt(WIDTH - MARGIN)}" '
            f'y2="{_fmt(py)}" stroke="{color}" stroke-width="1" stroke-dasharray="6,3"/>'
        )
    for m, d in ba.points:
        parts.append(
            f'<circle cx="{_fmt(sx(m))}" cy="{_fmt(sy(d))}" r="3" fill="steelblue" '
            f'fill-opacity="0.7"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def tradeoff_svg(points: list[TradeoffPoint], title: str = "Reproducibility vs re-identification") -> str:
    """One whiskered marker per tool: x = nCR, y = mean inverse face distance."""
    if not points:
        raise ValueError("no trade-off points")
    xs = [p.ncr for p in points]
    ys = [p.mean_inverse_distance for p in points]
    x_all = xs + [p.ncr - p.ncr_spread for p in points] + [p.ncr + p.ncr_spread for p in points]
    y_all = (
        ys
        + [p.mean_inverse_distance - p.inv_dist_spread for p in points]
        + [p.mean_inverse_distance + p.inv_dist_spread for p in points]
    )
    sx = _Scale(min(x_all), max(x_all), MARGIN, WIDTH - MARGIN)
    sy = _Scale(min(y_all), max(y_all), HEIGHT - MARGIN, MARGIN)
    parts = _header(title) + _axes(sx, sy, "nCR", "mean inverse face distance")
    for p in sorted(points, key=lambda q: q.tool):
        px, py = sx(p.ncr), sy(p.mean_inverse_distance)
        x_lo, x_hi = sx(p.ncr - p.ncr_spread), sx(p.ncr + p.ncr_spread)
        y_lo, y_hi = sy(p.mean_inverse_distance - p.inv_dist_spread), sy(
            p.mean_inverse_distance + p.inv_dist_spread
        )
        parts.append(
            f'<line x1="{_fmt(x_lo)}" y1="{_fmt(py)}" x2="{_fmt(x_hi)}" y2="{_fmt(py)}" '
            f'stroke="dimgray" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(y_lo)}" x2="{_fmt(px)}" y2="{_fmt(y_hi)}" '
            f'stroke="dimgray" stroke-width="1"/>'
        )
        parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="4" fill="crimson"/>')
        parts.append(
            f'<text x="{_fmt(px + 6)}" y="{_fmt(py - 6)}" font-size="11" '
            f'font-family="sans-serif">{p.tool}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
