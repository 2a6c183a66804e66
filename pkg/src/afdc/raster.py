"""Binary rasterization of posed sections and a ground plane."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import PolygonOutOfWindow

EDGE_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Pixel grid over a world window given in chord units.

    The default window puts the ground plane a quarter of the way up the frame
    so that the band below y = 0 is visible.
    """

    width: int = 128
    height: int = 128
    x0: float = -0.5
    x1: float = 1.5
    y0: float = -0.5
    y1: float = 1.5

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise ValueError(f"grid must be at least 8x8, got {self.width}x{self.height}")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("empty world window")

    @property
    def pixel_area(self) -> float:
        return (self.x1 - self.x0) / self.width * ((self.y1 - self.y0) / self.height)

    def centers(self):
        """Pixel-center x (per column) and y (per row, row 0 at the top)."""
        dx = (self.x1 - self.x0) / self.width
        dy = (self.y1 - self.y0) / self.height
        xs = self.x0 + (np.arange(self.width) + 0.5) * dx
        ys = self.y1 - (np.arange(self.height) + 0.5) * dy
        return xs, ys

    def to_dict(self):
        return {"width": self.width, "height": self.height,
                "x0": self.x0, "x1": self.x1, "y0": self.y0, "y1": self.y1}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["width"]), int(d["height"]), float(d["x0"]), float(d["x1"]),
                   float(d["y0"]), float(d["y1"]))


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """0/1 raster, row-major with row 0 at the top of the frame."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError("pixels must be 2D (height, width)")
        if px.size and not np.all((px == 0) | (px == 1)):
            raise ValueError("pixels must be 0 or 1")
        px = np.ascontiguousarray(px, dtype=np.uint8)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def count(self) -> int:
        return int(self.pixels.sum(dtype=np.int64))

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


def rasterize(section, grid: GridSpec = GridSpec(), draw_ground: bool = True) -> BinaryImage:
    """Fill pixels whose centers lie inside the polygon or on/below the ground.

    An empty polygon (zero vertices) renders the ground band alone.
    """
    poly = np.ascontiguousarray(getattr(section, "polygon", section), dtype=np.float64).reshape(-1, 2)
    xs, ys = grid.centers()
    out = np.zeros((grid.height, grid.width), dtype=np.uint8)
    if len(poly):
        bx0, by0 = poly.min(axis=0)
        bx1, by1 = poly.max(axis=0)
        if bx1 < grid.x0 or bx0 > grid.x1 or by1 < grid.y0 or by0 > grid.y1:
            raise PolygonOutOfWindow(f"polygon bbox [{bx0}, {bx1}]x[{by0}, {by1}] misses the window")
        cols = np.nonzero((xs >= bx0) & (xs <= bx1))[0]
        rows = np.nonzero((ys >= by0) & (ys <= by1))[0]
        if cols.size and rows.size:
            gx, gy = np.meshgrid(xs[cols], ys[rows])
            hit = kernels.points_in_polygon(gx.ravel(), gy.ravel(), poly, EDGE_TOL)
            out[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1] = hit.reshape(gx.shape)
    if draw_ground:
        out[ys <= 0.0, :] = 1
    return BinaryImage(out)


def _neighborhood(px):
    h, w = px.shape
    padded = np.pad(px, 1, mode="edge")
    return [padded[m:m + h, k:k + w] for m in range(3) for k in range(3)]


def dilate3x3(img: BinaryImage) -> BinaryImage:
    return BinaryImage(np.maximum.reduce(_neighborhood(img.pixels)))


def erode3x3(img: BinaryImage) -> BinaryImage:
    return BinaryImage(np.minimum.reduce(_neighborhood(img.pixels)))


def closing(img: BinaryImage) -> BinaryImage:
    return erode3x3(dilate3x3(img))


def opening(img: BinaryImage) -> BinaryImage:
    return dilate3x3(erode3x3(img))


MORPHOLOGY = {
    "none": lambda img: img,
    "closing": closing,
    "opening": opening,
    "dilate": dilate3x3,
    "erode": erode3x3,
}


def to_tensor(img: BinaryImage) -> np.ndarray:
    """Single-channel float64 copy of shape (1, height, width)."""
    return img.pixels.astype(np.float64)[None, :, :]


def from_tensor(t, threshold=0.5) -> BinaryImage:
    t = np.asarray(t)
    return BinaryImage((t.reshape(t.shape[-2], t.shape[-1]) >= threshold).astype(np.uint8))


def write_pgm(img: BinaryImage, path) -> None:
    """Binary PGM (P5, maxval 255); set pixels are white."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + (img.pixels * 255).astype(np.uint8).tobytes())


def read_pgm(path) -> BinaryImage:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    px = np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)
    return BinaryImage((px >= 128).astype(np.uint8))
