"""Minimal dependency-free SVG line and scatter plots.

Output is a pure function of the data so files are byte-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Series:
    xs: list
    ys: list
    label: str = ""
    style: str = "line"  # "line" | "points"
    color: str | None = None


@dataclass
class Plot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logx: bool = False
    logy: bool = False
    width: int = 640
    height: int = 420
    series: list = field(default_factory=list)

    def add(self, xs, ys, label="", style="line", color=None) -> "Plot":
        self.series.append(Series([float(v) for v in xs], [float(v) for v in ys], label, style, color))
        return self

    def render(self) -> str:
        return render_plot(self)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.1e}"
    return f"{v:.4g}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * abs(step):
        out.append(round(v, 12))
        v += step
    return out


def render_plot(plot: Plot) -> str:
    left, right, top, bottom = 70, 20, 36, 50
    w, h = plot.width, plot.height
    pw, ph = w - left - right, h - top - bottom

    def tx(v):
        return math.log10(v) if plot.logx else v

    def ty(v):
        return math.log10(v) if plot.logy else v

    pts = [
        (tx(x), ty(y))
        for s in plot.series
        for x, y in zip(s.xs, s.ys)
        if math.isfinite(x) and math.isfinite(y) and (not plot.logx or x > 0) and (not plot.logy or y > 0)
    ]
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if plot.title:
        out.append(f'<text x="{w / 2}" y="22" text-anchor="middle" font-size="15" font-family="sans-serif">{escape(plot.title)}</text>')
    for t in _ticks(x0, x1):
        label = _tick_label(10 ** t if plot.logx else t)
        out.append(f'<line x1="{_fmt(sx(t))}" y1="{top + ph}" x2="{_fmt(sx(t))}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(sx(t))}" y="{top + ph + 18}" text-anchor="middle" font-size="11" font-family="sans-serif">{label}</text>')
    for t in _ticks(y0, y1):
        label = _tick_label(10 ** t if plot.logy else t)
        out.append(f'<line x1="{left - 5}" y1="{_fmt(sy(t))}" x2="{left}" y2="{_fmt(sy(t))}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_fmt(sy(t) + 4)}" text-anchor="end" font-size="11" font-family="sans-serif">{label}</text>')
    if plot.xlabel:
        out.append(f'<text x="{left + pw / 2}" y="{h - 10}" text-anchor="middle" font-size="12" font-family="sans-serif">{escape(plot.xlabel)}</text>')
    if plot.ylabel:
        out.append(
            f'<text x="16" y="{top + ph / 2}" text-anchor="middle" font-size="12" font-family="sans-serif" '
            f'transform="rotate(-90 16 {top + ph / 2})">{escape(plot.ylabel)}</text>'
        )
    for i, s in enumerate(plot.series):
        color = s.color or PALETTE[i % len(PALETTE)]
        xy = [
            (sx(tx(x)), sy(ty(y)))
            for x, y in zip(s.xs, s.ys)
            if math.isfinite(x) and math.isfinite(y) and (not plot.logx or x > 0) and (not plot.logy or y > 0)
        ]
        if s.style == "points":
            for px, py in xy:
                out.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="2.5" fill="{color}"/>')
        elif xy:
            d = " ".join(("M" if j == 0 else "L") + f"{_fmt(px)},{_fmt(py)}" for j, (px, py) in enumerate(xy))
            out.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if s.label:
            ly = top + 14 + 16 * i
            out.append(f'<rect x="{left + pw - 150}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
            out.append(f'<text x="{left + pw - 135}" y="{ly + 1}" font-size="11" font-family="sans-serif">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def panel_grid(panels: list[Plot], columns: int) -> str:
    """Tile several plots into one SVG document."""
    if not panels:
        raise ValueError("no panels")
    w, h = panels[0].width, panels[0].height
    rows = math.ceil(len(panels) / columns)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * columns}" height="{h * rows}">']
    for i, p in enumerate(panels):
        r, c = divmod(i, columns)
        body = p.render().split("\n", 1)[1].rsplit("</svg>", 1)[0]
        out.append(f'<g transform="translate({c * w},{r * h})">')
        out.append(body.rstrip("\n"))
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
