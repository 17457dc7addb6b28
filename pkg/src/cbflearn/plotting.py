"""Static SVG figures from trajectory CSVs: phase portraits and h(t) plots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Sequence
from xml.sax.saxutils import escape


from .barrier import BarrierFunction, PitchEllipseBarrier, PitchRateBarrier
from .io import read_trajectory_csv

WIDTH, HEIGHT = 640, 480
MARGIN = 60


@dataclass(frozen=True)
class Trace:
    path: str
    color: str = "#d62728"
    label: str = ""


@dataclass
class PlotSpec:
    kind: Literal["phase", "h_vs_t"]
    traces: Sequence[Trace] = field(default_factory=list)
    output: str = "plot.svg"
    barrier: Optional[BarrierFunction] = None
    title: str = ""


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo, hi, n=5):
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12:
        ticks.append(0.0 if abs(v) < step * 1e-9 else v)
        v += step
    return ticks


class _Canvas:
    def __init__(self, xlim, ylim, xlabel, ylabel, title):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.sx = (WIDTH - 2 * MARGIN) / (self.x1 - self.x0)
        self.sy = (HEIGHT - 2 * MARGIN) / (self.y1 - self.y0)
        self.items = []
        self._axes(xlabel, ylabel, title)

    def px(self, x):
        return MARGIN + (x - self.x0) * self.sx

    def py(self, y):
        return HEIGHT - MARGIN - (y - self.y0) * self.sy

    def _axes(self, xlabel, ylabel, title):
        left, right, top, bottom = MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN
        self.items.append(f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
                          'fill="none" stroke="#000" stroke-width="1"/>')
        for t in _nice_ticks(self.x0, self.x1):
            x = self.px(t)
            self.items.append(f'<line x1="{_fmt(x)}" y1="{bottom}" x2="{_fmt(x)}" y2="{bottom + 5}" stroke="#000"/>')
            self.items.append(f'<text x="{_fmt(x)}" y="{bottom + 18}" text-anchor="middle" font-size="11">{t:g}</text>')
        for t in _nice_ticks(self.y0, self.y1):
            y = self.py(t)
            self.items.append(f'<line x1="{left - 5}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="#000"/>')
            self.items.append(f'<text x="{left - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-size="11">{t:g}</text>')
        self.items.append(f'<text x="{WIDTH / 2:g}" y="{HEIGHT - 15}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>')
        self.items.append(f'<text x="15" y="{HEIGHT / 2:g}" text-anchor="middle" font-size="13" '
                          f'transform="rotate(-90 15 {HEIGHT / 2:g})">{escape(ylabel)}</text>')
        if title:
            self.items.append(f'<text x="{WIDTH / 2:g}" y="30" text-anchor="middle" font-size="14">{escape(title)}</text>')

    def polyline(self, xs, ys, color, label=""):
        pts = " ".join(f"{_fmt(self.px(x))},{_fmt(self.py(y))}" for x, y in zip(xs, ys))
        title = f"<title>{escape(label)}</title>" if label else ""
        self.items.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                          f'clip-path="url(#plot-area)" points="{pts}">{title}</polyline>')

    def render(self) -> str:
        left, top = MARGIN, MARGIN
        w, h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN
        head = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">',
            f'<defs><clipPath id="plot-area"><rect x="{left}" y="{top}" width="{w}" height="{h}"/></clipPath></defs>',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>',
        ]
        return "\n".join(head + self.items + ["</svg>"]) + "\n"


def _limits(values, pad=0.05):
    lo, hi = float(min(values)), float(max(values))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    d = (hi - lo) * pad
    return lo - d, hi + d


def _load(traces):
    return [(t, read_trajectory_csv(t.path)) for t in traces]


def _phase(spec: PlotSpec, data) -> str:
    bf = spec.barrier
    thetas, rates = [], []
    if isinstance(bf, PitchEllipseBarrier):
        a, b = bf.semi_axes()
        thetas += [bf.theta_e - 1.2 * a, bf.theta_e + 1.2 * a]
        rates += [-1.2 * b, 1.2 * b]
    elif isinstance(bf, PitchRateBarrier):
        r = bf.rate_limit()
        rates += [-1.5 * r, 1.5 * r]
        thetas += [bf.theta_e - 0.5, bf.theta_e + 0.5]
    for _, d in data:
        thetas += [d["theta"].min(), d["theta"].max()]
        rates += [d["theta_dot"].min(), d["theta_dot"].max()]
    if not thetas:
        thetas, rates = [-1.0, 1.0], [-1.0, 1.0]
    cv = _Canvas(_limits(thetas), _limits(rates), "theta [rad]", "theta_dot [rad/s]", spec.title)

    if isinstance(bf, PitchEllipseBarrier):
        a, b = bf.semi_axes()
        cv.items.append(
            f'<ellipse cx="{_fmt(cv.px(bf.theta_e))}" cy="{_fmt(cv.py(0.0))}" '
            f'rx="{_fmt(a * cv.sx)}" ry="{_fmt(b * cv.sy)}" fill="none" stroke="#000" stroke-width="2" '
            f'data-theta-semi-axis="{a!r}" data-rate-semi-axis="{b!r}" data-level="0"/>'
        )
    elif isinstance(bf, PitchRateBarrier):
        r = bf.rate_limit()
        y_top, y_bot = cv.py(r), cv.py(-r)
        cv.items.append(
            f'<rect x="{MARGIN}" y="{_fmt(y_top)}" width="{WIDTH - 2 * MARGIN}" height="{_fmt(y_bot - y_top)}" '
            f'fill="#000" fill-opacity="0.08" stroke="#000" stroke-width="2" '
            f'data-rate-limit="{r!r}" data-level="0"/>'
        )
    for trace, d in data:
        cv.polyline(d["theta"], d["theta_dot"], trace.color, trace.label)
    return cv.render()


def _h_vs_t(spec: PlotSpec, data) -> str:
    ts, hs = [0.0], [0.0]
    for _, d in data:
        ts += [d["t"].min(), d["t"].max()]
        hs += [d["h"].min(), d["h"].max()]
    if len(ts) == 1:
        ts.append(1.0)
    xlim = (min(ts), max(ts)) if max(ts) > min(ts) else (0.0, 1.0)
    cv = _Canvas(xlim, _limits(hs), "t [s]", "h", spec.title)
    y0 = cv.py(0.0)
    cv.items.append(f'<line x1="{MARGIN}" y1="{_fmt(y0)}" x2="{WIDTH - MARGIN}" y2="{_fmt(y0)}" '
                    'stroke="#000" stroke-dasharray="6,4" data-level="0"/>')
    for trace, d in data:
        cv.polyline(d["t"], d["h"], trace.color, trace.label)
    return cv.render()


def emit_plot(spec: PlotSpec) -> Path:
    """Render ``spec`` to its output path and return that path."""
    data = _load(spec.traces)
    if spec.kind == "phase":
        svg = _phase(spec, data)
    elif spec.kind == "h_vs_t":
        svg = _h_vs_t(spec, data)
    else:
        raise ValueError(f"unknown plot kind {spec.kind!r}")
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    return out
