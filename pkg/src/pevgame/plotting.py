"""Hand-written SVG charts for the three experiment types.

Output is a pure function of the input: fixed 800x600 canvas, coordinates
rounded to two decimals, no timestamps or random ids.
"""

from __future__ import annotations

from collections.abc import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .montecarlo import SweepRecord, ValleyProfile, summarize

WIDTH, HEIGHT = 800, 600
FONT = 'font-family="sans-serif" font-size="12"'
COLORS = {"social": "#1f77b4", "nash": "#d62728", "non-PEV": "#2ca02c"}
KINDS = ("poa-sweep", "hetero-sweep", "valley-fill")


def _n(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.4g}"


class _Axes:
    def __init__(self, left, top, width, height, xlim, ylim):
        self.left, self.top, self.width, self.height = left, top, width, height
        self.x0, self.x1 = xlim
        y0, y1 = ylim
        if y1 <= y0:
            pad = abs(y0) * 0.05 or 1.0
            y0, y1 = y0 - pad, y1 + pad
        self.y0, self.y1 = y0, y1

    def x(self, v):
        if self.x1 == self.x0:
            return self.left + self.width / 2
        return self.left + (v - self.x0) / (self.x1 - self.x0) * self.width

    def y(self, v):
        return self.top + self.height - (v - self.y0) / (self.y1 - self.y0) * self.height

    def frame(self, out, xlabel, ylabel, xticks, yticks=5):
        lft, t, w, h = self.left, self.top, self.width, self.height
        out.append(f'<rect x="{_n(lft)}" y="{_n(t)}" width="{_n(w)}" height="{_n(h)}" '
                   'fill="none" stroke="#000000" stroke-width="1"/>')
        for v, label in xticks:
            px = self.x(v)
            out.append(f'<line x1="{_n(px)}" y1="{_n(t + h)}" x2="{_n(px)}" y2="{_n(t + h + 4)}" stroke="#000000"/>')
            out.append(f'<text x="{_n(px)}" y="{_n(t + h + 16)}" text-anchor="middle" {FONT}>{escape(label)}</text>')
        for v in np.linspace(self.y0, self.y1, yticks):
            py = self.y(v)
            out.append(f'<line x1="{_n(lft - 4)}" y1="{_n(py)}" x2="{_n(lft)}" y2="{_n(py)}" stroke="#000000"/>')
            out.append(f'<text x="{_n(lft - 6)}" y="{_n(py + 4)}" text-anchor="end" {FONT}>{_tick(v)}</text>')
        out.append(f'<text x="{_n(lft + w / 2)}" y="{_n(t + h + 34)}" text-anchor="middle" {FONT}>'
                   f'{escape(xlabel)}</text>')
        cx, cy = lft - 58, t + h / 2
        out.append(f'<text x="{_n(cx)}" y="{_n(cy)}" text-anchor="middle" '
                   f'transform="rotate(-90 {_n(cx)} {_n(cy)})" '
                   f'{FONT}>{escape(ylabel)}</text>')


def _document(title: str, body: list[str]) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        (f'<text x="{WIDTH / 2:.2f}" y="24.00" text-anchor="middle" font-family="sans-serif" font-size="14">'
         f'{escape(title)}</text>'),
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _finite(records, attr):
    return [r for r in records if np.isfinite(getattr(r, attr))]


def _boxplot(records: Sequence[SweepRecord], title: str) -> str:
    records = _finite(records, "rel_error")
    if not records:
        raise ValueError("no finite records to plot")
    stats = summarize(records, "rel_error")
    ms = sorted(stats)
    vals = [r.rel_error for r in records]
    ax = _Axes(100, 50, 660, 470, (-0.5, len(ms) - 0.5), (min(0.0, min(vals)), max(vals)))
    out: list[str] = []
    ax.frame(out, "number of agents m", "relative error", [(k, str(m)) for k, m in enumerate(ms)])
    half = min(30.0, ax.width / len(ms) / 3)
    for k, m in enumerate(ms):
        s = stats[m]
        cx = ax.x(k)
        if s["n"] > 1:
            out.append('<g class="box">')
            out.append(f'<line x1="{_n(cx)}" y1="{_n(ax.y(s["whisker_low"]))}" x2="{_n(cx)}" '
                       f'y2="{_n(ax.y(s["whisker_high"]))}" stroke="#000000" stroke-dasharray="4 2"/>')
            top, bot = ax.y(s["q75"]), ax.y(s["q25"])
            out.append(f'<rect x="{_n(cx - half)}" y="{_n(top)}" width="{_n(2 * half)}" height="{_n(bot - top)}" '
                       'fill="#ffffff" stroke="#1f77b4"/>')
            ym = ax.y(s["median"])
            out.append(f'<line x1="{_n(cx - half)}" y1="{_n(ym)}" x2="{_n(cx + half)}" y2="{_n(ym)}" '
                       'stroke="#d62728"/>')
            for o in s["outliers"]:
                out.append(f'<text x="{_n(cx)}" y="{_n(ax.y(o) + 4)}" text-anchor="middle" {FONT}>+</text>')
            out.append("</g>")
        out.append(f'<circle class="mark" cx="{_n(cx)}" cy="{_n(ax.y(s["mean"]))}" r="4" fill="#1f77b4"/>')
    return _document(title, out)


def _histograms(records: Sequence[SweepRecord], title: str, bins: int = 20) -> str:
    records = _finite(records, "normalized_value")
    if not records:
        raise ValueError("no finite records to plot")
    ms = sorted({r.m for r in records})
    vals = np.array([r.normalized_value for r in records])
    lo, hi = float(vals.min()), float(vals.max())
    if hi <= lo:
        pad = abs(lo) * 0.05 or 1.0
        lo, hi = lo - pad, hi + pad
    edges = np.linspace(lo, hi, bins + 1)
    out: list[str] = []
    panel_h = (HEIGHT - 110) / len(ms)
    for k, m in enumerate(ms):
        v = np.array([r.normalized_value for r in records if r.m == m])
        counts, _ = np.histogram(v, bins=edges)
        frac = counts / counts.sum()
        top = 50 + k * panel_h
        ax = _Axes(100, top + 6, 660, panel_h - 30, (lo, hi), (0.0, max(frac.max(), 1e-12)))
        xticks = [(e, _tick(e)) for e in edges[:: max(1, bins // 4)]] if k == len(ms) - 1 else []
        ax.frame(out, "F / m^2" if k == len(ms) - 1 else "", "fraction", xticks, yticks=2)
        out.append(f'<text x="{_n(ax.left + ax.width - 4)}" y="{_n(ax.top + 14)}" text-anchor="end" {FONT}>'
                   f'm = {m}</text>')
        for j, f in enumerate(frac):
            if counts[j] == 0:
                continue
            x0, x1 = ax.x(edges[j]), ax.x(edges[j + 1])
            y = ax.y(f)
            out.append(f'<rect class="mark" x="{_n(x0)}" y="{_n(y)}" width="{_n(max(x1 - x0, 1.0))}" '
                       f'height="{_n(ax.y(0.0) - y)}" fill="#1f77b4" stroke="#ffffff"/>')
    return _document(title, out)


def _profiles(profiles: Sequence[ValleyProfile], title: str) -> str:
    n = len(profiles)
    allv = np.concatenate([np.concatenate([p.social, p.nash, p.base]) for p in profiles])
    ylim = (min(0.0, float(allv.min())), float(allv.max()))
    out: list[str] = []
    gap = 70
    pw = (WIDTH - 100 - 40 - gap * (n - 1)) / n
    for k, prof in enumerate(profiles):
        h = prof.base.shape[0]
        ax = _Axes(100 + k * (pw + gap), 50, pw, 440, (0, max(h - 1, 1)), ylim)
        step = max(1, h // 6)
        ax.frame(out, f"time slot (m = {prof.m})", "normalized demand" if k == 0 else "",
                 [(t, str(t)) for t in range(0, h, step)])
        for name, series in (("social", prof.social), ("nash", prof.nash), ("non-PEV", prof.base)):
            pts = " ".join(f"{_n(ax.x(t))},{_n(ax.y(v))}" for t, v in enumerate(series))
            out.append(f'<polyline class="series" data-series="{name}" points="{pts}" fill="none" '
                       f'stroke="{COLORS[name]}" stroke-width="2"/>')
    ly = 540
    for j, name in enumerate(("social", "nash", "non-PEV")):
        lx = 120 + j * 160
        out.append(f'<g class="legend"><line x1="{lx}" y1="{ly}" x2="{lx + 30}" y2="{ly}" stroke="{COLORS[name]}" '
                   f'stroke-width="2"/><text x="{lx + 36}" y="{ly + 4}" {FONT}>{name}</text></g>')
    return _document(title, out)


def render_svg(data, kind: str, title: str | None = None) -> str:
    """Render sweep records or valley profiles as an SVG document.

    ``kind`` is one of ``"poa-sweep"`` (boxplot of relative error per m),
    ``"hetero-sweep"`` (histogram of F/m^2 per m) or ``"valley-fill"``
    (three normalized demand curves per m).
    """
    data = list(data)
    if not data:
        raise ValueError("nothing to plot")
    if kind == "poa-sweep":
        return _boxplot(data, title or "Relative error of the Nash equilibrium")
    if kind == "hetero-sweep":
        return _histograms(data, title or "Empirical distribution of F/m^2")
    if kind == "valley-fill":
        return _profiles(data, title or "Normalized total consumption")
    raise ValueError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
