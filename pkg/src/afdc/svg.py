"""Standalone SVG 1.1 charts built from plain strings.

Three chart kinds are provided: line series with optional log-scaled y
(loss curves), a truth-vs-prediction density scatter with a y = x reference
(hexagonal bins or a square heat map), and index-ordered series overlays.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH = 640
HEIGHT = 480
MARGIN = (70, 30, 40, 60)  # left, right, top, bottom
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def _num(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".") if math.isfinite(v) else "0"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


class Canvas:
    """Plot area with linear or log10 axes mapping data to pixel coordinates."""

    def __init__(self, xlim, ylim, logy=False, width=WIDTH, height=HEIGHT):
        self.width, self.height = width, height
        self.logy = logy
        left, right, top, bottom = MARGIN
        self.px0, self.px1 = left, width - right
        self.py0, self.py1 = height - bottom, top
        self.xlim = _pad_range(*xlim)
        ylo, yhi = ylim
        if logy:
            ylo, yhi = math.log10(ylo), math.log10(yhi)
        self.ylim = _pad_range(ylo, yhi)
        self.parts = []

    def x(self, v):
        a, b = self.xlim
        return self.px0 + (v - a) / (b - a) * (self.px1 - self.px0)

    def y(self, v):
        if self.logy:
            v = math.log10(v)
        a, b = self.ylim
        return self.py0 + (v - a) / (b - a) * (self.py1 - self.py0)

    def add(self, element: str):
        self.parts.append(element)

    def axes(self, xlabel: str, ylabel: str, title: str = ""):
        p0, p1, q0, q1 = self.px0, self.px1, self.py0, self.py1
        self.add(f'<rect x="{p0}" y="{q1}" width="{p1 - p0}" height="{q0 - q1}" '
                 'fill="none" stroke="#000" stroke-width="1"/>')
        for v in _ticks(*self.xlim):
            px = _num(self.x(v))
            self.add(f'<line x1="{px}" y1="{q0}" x2="{px}" y2="{q0 + 5}" stroke="#000"/>')
            self.add(f'<text x="{px}" y="{q0 + 18}" text-anchor="middle" font-size="11">'
                     f'{escape(_tick_label(v))}</text>')
        yticks = _log_ticks(*self.ylim) if self.logy else _ticks(*self.ylim)
        for v in yticks:
            py = _num(self.y(v))
            self.add(f'<line x1="{p0 - 5}" y1="{py}" x2="{p0}" y2="{py}" stroke="#000"/>')
            self.add(f'<text x="{p0 - 8}" y="{py}" text-anchor="end" dominant-baseline="middle" '
                     f'font-size="11">{escape(_tick_label(v))}</text>')
        self.add(f'<text x="{(p0 + p1) / 2}" y="{self.height - 15}" text-anchor="middle" '
                 f'font-size="13">{escape(xlabel)}</text>')
        self.add(f'<text x="18" y="{(q0 + q1) / 2}" text-anchor="middle" font-size="13" '
                 f'transform="rotate(-90 18 {(q0 + q1) / 2})">{escape(ylabel)}</text>')
        if title:
            self.add(f'<text x="{(p0 + p1) / 2}" y="22" text-anchor="middle" font-size="14">'
                     f'{escape(title)}</text>')

    def polyline(self, xs, ys, color, width=1.5, dash=None):
        pts = " ".join(f"{_num(self.x(a))},{_num(self.y(b))}" for a, b in zip(xs, ys))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                 f'stroke-width="{width}"{extra}/>')

    def legend(self, entries):
        x0 = self.px1 - 150
        y0 = self.py1 + 10
        self.add(f'<rect x="{x0 - 8}" y="{y0 - 4}" width="150" height="{18 * len(entries) + 6}" '
                 'fill="#fff" stroke="#999"/>')
        for k, (label, color) in enumerate(entries):
            yy = y0 + 9 + 18 * k
            self.add(f'<line x1="{x0}" y1="{yy}" x2="{x0 + 24}" y2="{yy}" stroke="{color}" '
                     'stroke-width="2"/>')
            self.add(f'<text x="{x0 + 30}" y="{yy}" dominant-baseline="middle" font-size="12">'
                     f'{escape(label)}</text>')

    def render(self) -> str:
        body = "\n".join(self.parts)
        return ('<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
                '<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" '
                '"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" '
                'font-family="sans-serif">\n'
                f'<rect width="{self.width}" height="{self.height}" fill="#fff"/>\n'
                f'{body}\n</svg>\n')


def _pad_range(lo, hi):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return 0.0, 1.0
    if hi - lo < 1e-12 * max(1.0, abs(lo), abs(hi)):
        d = max(abs(lo) * 0.05, 0.5)
        return lo - d, hi + d
    return lo, hi


def _ticks(lo, hi, target=6):
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _log_ticks(lo, hi):
    """Decade ticks, in data units, for a log10 axis spanning [lo, hi] in exponents."""
    out = [10.0 ** e for e in range(math.ceil(lo), math.floor(hi) + 1)]
    return out or [10.0 ** lo, 10.0 ** hi]


# charts -----------------------------------------------------------------------------

def line_chart(series, xlabel, ylabel, title="", logy=False) -> str:
    """``series`` is a list of (label, xs, ys); non-positive ys are dropped on log axes."""
    pts = []
    for _, xs, ys in series:
        for a, b in zip(xs, ys):
            if math.isfinite(b) and (b > 0 or not logy):
                pts.append((a, b))
    if not pts:
        pts = [(0.0, 1.0), (1.0, 1.0)]
    xs_all = [p[0] for p in pts]
    ys_all = [p[1] for p in pts]
    c = Canvas((min(xs_all), max(xs_all)), (min(ys_all), max(ys_all)), logy=logy)
    c.axes(xlabel, ylabel, title)
    entries = []
    for k, (label, xs, ys) in enumerate(series):
        keep = [(a, b) for a, b in zip(xs, ys) if math.isfinite(b) and (b > 0 or not logy)]
        color = PALETTE[k % len(PALETTE)]
        if keep:
            c.polyline([a for a, _ in keep], [b for _, b in keep], color)
        entries.append((label, color))
    c.legend(entries)
    return c.render()


def loss_curves(train_mse, valid_mse) -> str:
    epochs = list(range(1, len(train_mse) + 1))
    return line_chart([("train", epochs, train_mse), ("valid", epochs, valid_mse)],
                      "epoch", "MSE (normalized labels, log scale)", "Train vs. valid loss",
                      logy=True)


def _density_color(frac: float) -> str:
    # white -> dark blue ramp
    r = int(round(255 - frac * (255 - 8)))
    g = int(round(255 - frac * (255 - 48)))
    b = int(round(255 - frac * (255 - 107)))
    return f"#{r:02x}{g:02x}{b:02x}"


def hexbin_counts(px, py, size):
    """Axial hex coordinates (pointy-top, circumradius ``size``) -> point count."""
    counts = {}
    for a, b in zip(px, py):
        q = (math.sqrt(3) / 3 * a - b / 3) / size
        r = (2 / 3 * b) / size
        # cube rounding
        x, z = q, r
        y = -x - z
        rx, ry, rz = round(x), round(y), round(z)
        dx, dy, dz = abs(rx - x), abs(ry - y), abs(rz - z)
        if dx > dy and dx > dz:
            rx = -ry - rz
        elif dy <= dz:
            rz = -rx - ry
        counts[(int(rx), int(rz))] = counts.get((int(rx), int(rz)), 0) + 1
    return counts


def _scatter_limits(truth, pred):
    vals = [v for v in list(truth) + list(pred) if math.isfinite(v)]
    if not vals:
        return 0.0, 1.0
    return _pad_range(min(vals), max(vals))


def scatter_density(truth, pred, bins=None, title="Prediction vs. ground truth") -> str:
    """Density scatter with x = prediction, y = truth and a y = x reference line.

    With ``bins`` = K the plane is cut into a K x K heat map; otherwise hexagonal
    bins are shaded by count and the individual points are drawn on top.
    """
    truth = [float(v) for v in truth]
    pred = [float(v) for v in pred]
    lo, hi = _scatter_limits(truth, pred)
    c = Canvas((lo, hi), (lo, hi))
    c.axes("predicted", "ground truth", title)
    if bins:
        k = int(bins)
        if k < 1:
            raise ValueError("bins must be >= 1")
        h, _, _ = np.histogram2d(pred, truth, bins=k, range=[[lo, hi], [lo, hi]])
        peak = h.max() or 1.0
        step = (hi - lo) / k
        for i in range(k):
            for j in range(k):
                if h[i, j] == 0:
                    continue
                x0, x1 = c.x(lo + i * step), c.x(lo + (i + 1) * step)
                y0, y1 = c.y(lo + (j + 1) * step), c.y(lo + j * step)
                c.add(f'<rect x="{_num(x0)}" y="{_num(y0)}" width="{_num(x1 - x0)}" '
                      f'height="{_num(y1 - y0)}" fill="{_density_color(h[i, j] / peak)}">'
                      f'<title>{int(h[i, j])}</title></rect>')
    else:
        # hex size in pixels, binning in screen space keeps hexagons regular
        size = 10.0
        sx = [c.x(v) for v in pred]
        sy = [c.y(v) for v in truth]
        counts = hexbin_counts(sx, sy, size)
        peak = max(counts.values(), default=1)
        for (q, r), n in sorted(counts.items()):
            cx = size * math.sqrt(3) * (q + r / 2)
            cy = size * 1.5 * r
            corners = []
            for t in range(6):
                ang = math.radians(60 * t - 30)
                corners.append(f"{_num(cx + size * math.cos(ang))},{_num(cy + size * math.sin(ang))}")
            c.add(f'<polygon points="{" ".join(corners)}" fill="{_density_color(0.15 + 0.85 * n / peak)}" '
                  f'stroke="none"><title>{n}</title></polygon>')
        for a, b in zip(sx, sy):
            c.add(f'<circle cx="{_num(a)}" cy="{_num(b)}" r="1.6" fill="#d62728" fill-opacity="0.7"/>')
    c.polyline([lo, hi], [lo, hi], "#000", width=1, dash="4 3")
    c.legend([("y = x", "#000")])
    return c.render()


def overlay(truth, pred, ylabel="value", title="Ground truth and prediction by sample") -> str:
    idx = list(range(len(truth)))
    return line_chart([("prediction", idx, [float(v) for v in pred]),
                       ("ground truth", idx, [float(v) for v in truth])],
                      "sample index", ylabel, title)
