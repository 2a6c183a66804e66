"""Airfoil coordinate files: parsing, normalization and posing.

Coordinates follow the UIUC database conventions. Selig files are a single
loop from the trailing edge over the upper surface to the leading edge and
back along the lower surface. Lednicer files carry a point-count header and
list each surface separately from leading to trailing edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CountMismatch,
    DegenerateChord,
    EmptyFile,
    MalformedLine,
    NonPositiveClearance,
    SurfaceSplitFailure,
    TooFewPoints,
)

SELIG = "selig"
LEDNICER = "lednicer"

PIVOT = (0.25, 0.0)


@dataclass(frozen=True, eq=False)
class AirfoilGeometry:
    """Ordered 2D coordinate loop of an airfoil section, in chord units."""

    name: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 2)
        if pts.shape[0] < 3:
            raise TooFewPoints(f"{self.name!r}: need at least 3 points, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise ValueError(f"{self.name!r}: non-finite coordinate")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, AirfoilGeometry):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.points, other.points)

    __hash__ = None

    @property
    def chord(self) -> float:
        x = self.points[:, 0]
        return float(x.max() - x.min())


@dataclass(frozen=True, eq=False)
class PosedSection:
    """Section rotated to an angle of attack and lifted above the ground y = 0."""

    polygon: np.ndarray
    aoa_deg: float
    ground_clearance: float


def _content_lines(text):
    """Yield (1-based line number, stripped line) for non-blank lines."""
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line:
            yield i, line


def _parse_pair(lineno, line):
    tokens = line.replace(",", " ").split()
    if len(tokens) != 2:
        raise MalformedLine(lineno, line)
    try:
        x, y = float(tokens[0]), float(tokens[1])
    except ValueError:
        raise MalformedLine(lineno, line) from None
    if not (math.isfinite(x) and math.isfinite(y)):
        raise MalformedLine(lineno, line)
    return x, y


def detect_format(text: str) -> str:
    lines = list(_content_lines(text))
    if not lines:
        raise EmptyFile("no content")
    if len(lines) >= 2:
        tokens = lines[1][1].replace(",", " ").split()
        if len(tokens) == 2:
            try:
                a, b = float(tokens[0]), float(tokens[1])
            except ValueError:
                return SELIG
            if a > 1 and b > 1:
                return LEDNICER
    return SELIG


def parse_selig(text: str) -> AirfoilGeometry:
    lines = list(_content_lines(text))
    if not lines:
        raise EmptyFile("no content")
    name = lines[0][1]
    pts = [_parse_pair(i, line) for i, line in lines[1:]]
    if len(pts) < 3:
        raise TooFewPoints(f"{name!r}: need at least 3 points, got {len(pts)}")
    return AirfoilGeometry(name, np.array(pts))


def parse_lednicer(text: str) -> AirfoilGeometry:
    """Parse a Lednicer file and return the points in Selig order.

    The upper block is reversed to run trailing edge to leading edge, then the
    lower block is appended; a lower-surface leading-edge point identical to
    the upper one is dropped.
    """
    lines = list(_content_lines(text))
    if not lines:
        raise EmptyFile("no content")
    name = lines[0][1]
    if len(lines) < 2:
        raise TooFewPoints(f"{name!r}: missing point-count header")
    n_up, n_lo = _parse_pair(*lines[1])
    if n_up != int(n_up) or n_lo != int(n_lo):
        raise MalformedLine(lines[1][0], lines[1][1])
    n_up, n_lo = int(n_up), int(n_lo)
    pts = [_parse_pair(i, line) for i, line in lines[2:]]
    if len(pts) != n_up + n_lo:
        raise CountMismatch(f"{name!r}: header declares {n_up}+{n_lo} points, file has {len(pts)}")
    upper = pts[:n_up][::-1]
    lower = pts[n_up:]
    if lower and upper and lower[0] == upper[-1]:
        lower = lower[1:]
    return AirfoilGeometry(name, np.array(upper + lower))


def parse(text: str) -> AirfoilGeometry:
    if detect_format(text) == LEDNICER:
        return parse_lednicer(text)
    return parse_selig(text)


def load_dat(path) -> AirfoilGeometry:
    text = Path(path).read_text(encoding="utf-8", errors="strict")
    return parse(text)


def _fmt(v):
    return repr(float(v))


def serialize_selig(g: AirfoilGeometry) -> str:
    rows = [g.name] + [f"{_fmt(x)} {_fmt(y)}" for x, y in g.points]
    return "\n".join(rows) + "\n"


def leading_edge_index(points) -> int:
    """Index of the leftmost point (first one on ties)."""
    return int(np.argmin(points[:, 0]))


def serialize_lednicer(g: AirfoilGeometry) -> str:
    le = leading_edge_index(g.points)
    upper = g.points[: le + 1][::-1]
    lower = g.points[le:]
    rows = [g.name, f"{len(upper)}. {len(lower)}.", ""]
    rows += [f"{_fmt(x)} {_fmt(y)}" for x, y in upper]
    rows.append("")
    rows += [f"{_fmt(x)} {_fmt(y)}" for x, y in lower]
    return "\n".join(rows) + "\n"


def normalize(g: AirfoilGeometry) -> AirfoilGeometry:
    """Translate to x_min = 0 and scale uniformly to unit chord."""
    x = g.points[:, 0]
    x0, x1 = x.min(), x.max()
    chord = x1 - x0
    if not chord > 0:
        raise DegenerateChord(f"{g.name!r}: zero chord")
    pts = np.empty_like(g.points)
    pts[:, 0] = (x - x0) / chord
    pts[:, 1] = g.points[:, 1] / chord
    return AirfoilGeometry(g.name, pts)


def rotate(points, aoa_deg, pivot=PIVOT):
    """Rotate by -aoa about ``pivot`` so that positive aoa lifts the leading edge."""
    a = math.radians(aoa_deg)
    c, s = math.cos(a), math.sin(a)
    px, py = pivot
    dx = points[:, 0] - px
    dy = points[:, 1] - py
    out = np.empty((points.shape[0], 2))
    out[:, 0] = px + c * dx + s * dy
    out[:, 1] = py - s * dx + c * dy
    return out


def pose(g: AirfoilGeometry, aoa_deg: float, ground_clearance: float) -> PosedSection:
    if not math.isfinite(aoa_deg):
        raise ValueError("aoa_deg must be finite")
    if not ground_clearance > 0:
        raise NonPositiveClearance(f"ground clearance must be > 0, got {ground_clearance}")
    pts = rotate(g.points, aoa_deg)
    pts[:, 1] += ground_clearance - pts[:, 1].min()
    return PosedSection(pts, float(aoa_deg), float(ground_clearance))


def cosine_stations(n: int) -> np.ndarray:
    x = 0.5 * (1.0 - np.cos(np.pi * np.arange(n + 1) / n))
    x[0], x[-1] = 0.0, 1.0
    return x


def _surface(points):
    order = np.argsort(points[:, 0], kind="stable")
    return points[order, 0], points[order, 1]


def split_surfaces(g: AirfoilGeometry):
    """Return the two surfaces, each running leading edge to trailing edge."""
    pts = g.points
    le = leading_edge_index(pts)
    if le == 0 or le == len(pts) - 1:
        raise SurfaceSplitFailure(f"{g.name!r}: leading edge sits at an end of the loop")
    first = pts[: le + 1][::-1]
    second = pts[le:]
    return first, second


def camber_line(g: AirfoilGeometry, n: int) -> np.ndarray:
    """Mean line sampled at ``n + 1`` cosine-spaced stations, shape (n+1, 2)."""
    if n < 10:
        raise ValueError(f"need n >= 10 panels, got {n}")
    first, second = split_surfaces(g)
    xs = cosine_stations(n)
    lo, hi = g.points[:, 0].min(), g.points[:, 0].max()
    xs = lo + (hi - lo) * xs
    xa, ya = _surface(first)
    xb, yb = _surface(second)
    ua = np.interp(xs, xa, ya)
    ub = np.interp(xs, xb, yb)
    return np.column_stack([xs, 0.5 * (ua + ub)])


def naca4_camber(code: str, x):
    """Closed-form mean line of a NACA 4-digit section."""
    m = int(code[0]) / 100.0
    p = int(code[1]) / 10.0
    x = np.asarray(x, dtype=np.float64)
    if m == 0 or p == 0:
        return np.zeros_like(x), np.zeros_like(x)
    fwd = x < p
    yc = np.where(fwd, m / p**2 * (2 * p * x - x**2), m / (1 - p) ** 2 * ((1 - 2 * p) + 2 * p * x - x**2))
    dyc = np.where(fwd, 2 * m / p**2 * (p - x), 2 * m / (1 - p) ** 2 * (p - x))
    return yc, dyc


def naca4(code: str, n_side: int = 80, closed_te: bool = True) -> AirfoilGeometry:
    """NACA 4-digit section in Selig order with ``2 * n_side + 1`` points."""
    if len(code) != 4 or not code.isdigit():
        raise ValueError(f"not a 4-digit NACA code: {code!r}")
    t = int(code[2:]) / 100.0
    x = cosine_stations(n_side)
    a4 = -0.1036 if closed_te else -0.1015
    yt = 5 * t * (0.2969 * np.sqrt(x) - 0.1260 * x - 0.3516 * x**2 + 0.2843 * x**3 + a4 * x**4)
    yc, dyc = naca4_camber(code, x)
    th = np.arctan(dyc)
    xu, yu = x - yt * np.sin(th), yc + yt * np.cos(th)
    xl, yl = x + yt * np.sin(th), yc - yt * np.cos(th)
    pts = np.concatenate([np.column_stack([xu, yu])[::-1], np.column_stack([xl, yl])[1:]])
    return AirfoilGeometry(f"NACA {code}", pts)
