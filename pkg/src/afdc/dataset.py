"""Labeled image datasets swept over airfoils, angles and ground clearances.

A dataset directory holds ``manifest.json`` (grid, target, sample table,
split assignment, label statistics, checksums) and ``images.bin`` with the
packed binary images.
"""
from __future__ import annotations

import json
import math
import os
import struct
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry, oracle, raster
from .errors import (
    AfdcError,
    AllSamplesFailed,
    ChecksumMismatch,
    CorruptFile,
    NonPositiveClearance,
    NonPositiveStep,
    TooFewAirfoils,
    VersionMismatch,
)
from .geometry import AirfoilGeometry
from .oracle import AeroLabel, OracleConfig
from .raster import BinaryImage, GridSpec

TARGETS = ("clcd", "cl")
SPLITS = ("train", "valid", "test")
DEFAULT_CLEARANCES = (0.2, 0.5, 1.0)
DEFAULT_FRACTIONS = (0.7, 0.2, 0.1)

IMAGES_MAGIC = b"AFDS"
IMAGES_VERSION = 1
MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
IMAGES_NAME = "images.bin"

# slack for floor() on products like 0.7 * 1000 that land just under an integer
_FLOOR_EPS = 1e-9


def target_value(label: AeroLabel, target: str) -> float:
    if target == "clcd":
        return label.ratio
    if target == "cl":
        return label.cl
    raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")


@dataclass(frozen=True, eq=False)
class Sample:
    airfoil_id: str
    aoa_deg: float
    ground_clearance: float
    image: BinaryImage
    label: AeroLabel

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.label.cl, self.label.cd, self.label.ratio)):
            raise ValueError(f"non-finite label for {self.airfoil_id} at {self.aoa_deg} deg")

    @property
    def key(self):
        return (self.airfoil_id, self.aoa_deg, self.ground_clearance)

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return self.key == other.key and self.image == other.image and self.label == other.label

    __hash__ = None


@dataclass(frozen=True)
class Skip:
    """A sweep point whose rasterization or labeling failed."""

    airfoil_id: str
    aoa_deg: float
    ground_clearance: float
    error: str
    message: str

    def to_dict(self):
        return {"airfoil_id": self.airfoil_id, "aoa_deg": self.aoa_deg,
                "ground_clearance": self.ground_clearance, "error": self.error,
                "message": self.message}


@dataclass
class LabelStats:
    mean: float
    std: float


@dataclass
class Dataset:
    grid: GridSpec
    target: str
    samples: list
    splits: list | None = None
    stats: LabelStats | None = None
    skipped: list = field(default_factory=list)

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}; expected one of {TARGETS}")
        for s in self.samples:
            if (s.image.height, s.image.width) != (self.grid.height, self.grid.width):
                raise ValueError(f"sample {s.key} image is {s.image.height}x{s.image.width}, "
                                 f"grid is {self.grid.height}x{self.grid.width}")

    def __len__(self):
        return len(self.samples)

    def sample(self, i: int) -> Sample:
        """Single access point to sample data; wrap it to audit reads."""
        return self.samples[i]

    def indices(self, split: str) -> list:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")
        if self.splits is None:
            raise ValueError("dataset has no split assignment")
        return [i for i, s in enumerate(self.splits) if s == split]

    def airfoil_ids(self) -> list:
        return sorted({s.airfoil_id for s in self.samples})

    def images(self, idx) -> np.ndarray:
        """(N, 1, H, W) float64 tensor for the given sample indices."""
        out = np.empty((len(idx), 1, self.grid.height, self.grid.width))
        for k, i in enumerate(idx):
            out[k, 0] = self.sample(i).image.pixels
        return out

    def targets(self, idx) -> np.ndarray:
        """(N, 1) raw target values for the given sample indices."""
        return np.array([[target_value(self.sample(i).label, self.target)] for i in idx],
                        dtype=np.float64).reshape(len(idx), 1)


# sweeps -------------------------------------------------------------------------

def sweep_angles(start: float = 0.0, end: float = 20.0, step: float = 0.25) -> list:
    """Inclusive arithmetic sequence ``start, start + step, ...`` not passing ``end``."""
    if not step > 0:
        raise NonPositiveStep(f"step must be > 0, got {step}")
    if end < start:
        raise ValueError(f"end {end} is below start {start}")
    count = math.floor((end - start) / step + _FLOOR_EPS) + 1
    return [start + k * step for k in range(count)]


def unique_ids(names) -> list:
    """Suffix repeated names with ``#k`` (k = 2, 3, ...) so every id is distinct."""
    seen = {}
    taken = set(names)
    out = []
    for name in names:
        k = seen.get(name, 0) + 1
        seen[name] = k
        ident = name
        if k > 1:
            ident = f"{name}#{k}"
            while ident in taken:
                k += 1
                ident = f"{name}#{k}"
            seen[name] = k
        taken.add(ident)
        out.append(ident)
    return out


def _sweep_one(args):
    ident, g, angles, clearances, grid, cfg, morph = args
    op = raster.MORPHOLOGY[morph]
    done, skipped = [], []
    for a in angles:
        for h in clearances:
            try:
                img = op(raster.rasterize(geometry.pose(g, a, h), grid, True))
                lab = oracle.label(g, a, h, cfg.panels, ground_effect=cfg.ground_effect,
                                   polar=cfg.polar)
                done.append(Sample(ident, float(a), float(h), img, lab))
            except (AfdcError, ValueError, FloatingPointError) as exc:
                skipped.append(Skip(ident, float(a), float(h), type(exc).__name__, str(exc)))
    return done, skipped


def worker_count() -> int:
    """Worker cap from ``AFDC_THREADS``, else the machine's parallelism."""
    env = os.environ.get("AFDC_THREADS", "").strip()
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"AFDC_THREADS must be >= 1, got {env!r}")
        return n
    return os.cpu_count() or 1


def build(airfoils, angles, clearances=DEFAULT_CLEARANCES, grid: GridSpec = GridSpec(),
          config: OracleConfig = OracleConfig(), target: str = "clcd", morph: str = "closing",
          workers: int | None = None) -> Dataset:
    """One sample per (airfoil, angle, clearance); failures go to ``skipped``.

    ``airfoils`` is a sequence of :class:`AirfoilGeometry`; their names become
    sample ids. Samples are sorted by (id, angle, clearance) so the result
    does not depend on the worker count.
    """
    airfoils = list(airfoils)
    if not airfoils:
        raise ValueError("need at least one airfoil")
    clearances = [float(h) for h in clearances]
    for h in clearances:
        if not h > 0:
            raise NonPositiveClearance(f"ground clearance must be > 0, got {h}")
    if morph not in raster.MORPHOLOGY:
        raise ValueError(f"unknown morphology {morph!r}")
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")
    ids = unique_ids([g.name for g in airfoils])
    jobs = [(i, geometry.normalize(g), list(angles), clearances, grid, config, morph)
            for i, g in zip(ids, airfoils)]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    samples = [s for done, _ in results for s in done]
    skipped = [k for _, sk in results for k in sk]
    if not samples:
        raise AllSamplesFailed(f"all {len(skipped)} sweep points failed")
    samples.sort(key=lambda s: s.key)
    skipped.sort(key=lambda k: (k.airfoil_id, k.aoa_deg, k.ground_clearance))
    return Dataset(grid, target, samples, skipped=skipped)


# splitting --------------------------------------------------------------------------

def split_counts(n: int, fractions=DEFAULT_FRACTIONS):
    """Number of airfoils per split: floor for train and valid, remainder for test."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError(f"need three non-negative fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    n_train = math.floor(fractions[0] * n + _FLOOR_EPS)
    n_valid = math.floor(fractions[1] * n + _FLOOR_EPS)
    return n_train, n_valid, n - n_train - n_valid


def assign_ids(ids, fractions=DEFAULT_FRACTIONS, seed: int = 0) -> dict:
    """Map each airfoil id to a split by a seeded shuffle of the sorted ids."""
    ids = sorted(set(ids))
    if len(ids) < 3:
        raise TooFewAirfoils(f"need at least 3 airfoils to split, got {len(ids)}")
    n_train, n_valid, _ = split_counts(len(ids), fractions)
    order = np.random.default_rng(seed).permutation(len(ids))
    out = {}
    for rank, j in enumerate(order):
        out[ids[j]] = "train" if rank < n_train else "valid" if rank < n_train + n_valid else "test"
    return out


def label_stats(values) -> LabelStats:
    """Mean and population std; a degenerate spread falls back to std 1."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values for label statistics")
    mean = float(v.mean())
    std = float(v.std())
    if not std > 1e-12:
        std = 1.0
    return LabelStats(mean, std)


def split(ds: Dataset, fractions=DEFAULT_FRACTIONS, seed: int = 0) -> Dataset:
    """New dataset with a per-airfoil split and train-only label statistics."""
    assignment = assign_ids([s.airfoil_id for s in ds.samples], fractions, seed)
    splits = [assignment[s.airfoil_id] for s in ds.samples]
    train = [target_value(s.label, ds.target) for s, k in zip(ds.samples, splits) if k == "train"]
    stats = label_stats(train) if train else None
    return Dataset(ds.grid, ds.target, list(ds.samples), splits, stats, list(ds.skipped))


# serialization ---------------------------------------------------------------------------

def _pack_images(samples) -> bytes:
    parts = [IMAGES_MAGIC, struct.pack("<II", IMAGES_VERSION, len(samples))]
    for s in samples:
        px = s.image.pixels
        parts.append(struct.pack("<II", px.shape[0], px.shape[1]))
        parts.append(np.ascontiguousarray(px, dtype=np.uint8).tobytes())
    return b"".join(parts)


def _unpack_images(data: bytes) -> list:
    if len(data) < 12 or data[:4] != IMAGES_MAGIC:
        raise CorruptFile("images file lacks the AFDS header")
    version, count = struct.unpack_from("<II", data, 4)
    if version != IMAGES_VERSION:
        raise VersionMismatch(f"images file version {version}, expected {IMAGES_VERSION}")
    pos = 12
    out = []
    for k in range(count):
        if pos + 8 > len(data):
            raise CorruptFile(f"images file truncated at image {k}")
        h, w = struct.unpack_from("<II", data, pos)
        pos += 8
        if pos + h * w > len(data):
            raise CorruptFile(f"images file truncated inside image {k}")
        px = np.frombuffer(data, dtype=np.uint8, count=h * w, offset=pos).reshape(h, w)
        pos += h * w
        try:
            out.append(BinaryImage(px.copy()))
        except ValueError as exc:
            raise CorruptFile(f"image {k}: {exc}") from exc
    if pos != len(data):
        raise CorruptFile(f"{len(data) - pos} trailing bytes in images file")
    return out


def _crc(data: bytes) -> str:
    return f"{zlib.crc32(data) & 0xFFFFFFFF:08x}"


def write(ds: Dataset, directory) -> Path:
    """Write ``manifest.json`` and ``images.bin``; floats are stored as exact reprs."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    blob = _pack_images(ds.samples)
    table = []
    for k, s in enumerate(ds.samples):
        table.append({
            "id": s.airfoil_id,
            "aoa_deg": s.aoa_deg,
            "ground_clearance": s.ground_clearance,
            "cl": s.label.cl,
            "cd": s.label.cd,
            "ratio": s.label.ratio,
            "split": None if ds.splits is None else ds.splits[k],
        })
    manifest = {
        "format_version": MANIFEST_VERSION,
        "grid": ds.grid.to_dict(),
        "target": ds.target,
        "count": len(ds.samples),
        "stats": None if ds.stats is None else {"mean": ds.stats.mean, "std": ds.stats.std},
        "files": {IMAGES_NAME: {"crc32": _crc(blob), "bytes": len(blob)}},
        "samples": table,
        "skipped": [k.to_dict() for k in ds.skipped],
    }
    (d / IMAGES_NAME).write_bytes(blob)
    (d / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return d


def read(directory) -> Dataset:
    d = Path(directory)
    try:
        manifest = json.loads((d / MANIFEST_NAME).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CorruptFile(f"missing {MANIFEST_NAME} in {d}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"unreadable manifest: {exc}") from exc
    try:
        if manifest["format_version"] != MANIFEST_VERSION:
            raise VersionMismatch(f"manifest version {manifest['format_version']}")
        files = manifest["files"]
        table = manifest["samples"]
        grid = GridSpec.from_dict(manifest["grid"])
        target = manifest["target"]
        stats = manifest["stats"]
        skipped = [Skip(**k) for k in manifest.get("skipped", [])]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CorruptFile):
            raise
        raise CorruptFile(f"malformed manifest: {exc}") from exc
    if IMAGES_NAME not in files:
        raise CorruptFile(f"manifest does not list {IMAGES_NAME}")
    path = d / IMAGES_NAME
    if not path.is_file():
        raise CorruptFile(f"manifest references missing file {path}")
    blob = path.read_bytes()
    if _crc(blob) != files[IMAGES_NAME]["crc32"]:
        raise ChecksumMismatch(f"{IMAGES_NAME} CRC32 {_crc(blob)} != recorded {files[IMAGES_NAME]['crc32']}")
    images = _unpack_images(blob)
    if len(images) != len(table) or len(table) != manifest["count"]:
        raise CorruptFile(f"{len(images)} images for {len(table)} manifest rows")
    samples, splits = [], []
    try:
        for row, img in zip(table, images):
            lab = AeroLabel(float(row["cl"]), float(row["cd"]), float(row["ratio"]))
            samples.append(Sample(row["id"], float(row["aoa_deg"]), float(row["ground_clearance"]),
                                  img, lab))
            splits.append(row["split"])
        ds = Dataset(grid, target, samples,
                     None if all(s is None for s in splits) else splits,
                     None if stats is None else LabelStats(float(stats["mean"]), float(stats["std"])),
                     skipped)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"malformed sample table: {exc}") from exc
    return ds
