"""Snapshot rendering and run metrics.

Both run measures work a posteriori from rendered bitmaps alone: exploration
counts never-before-seen particle colors per snapshot, and structuredness is
the KL divergence of the sampled pairwise pixel-distance distribution from the
distribution of uniformly random points in the same rectangle.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .engine import World, radius_pairs
from .rng import SeededRng

BACKGROUND_RGB = (255, 255, 255)
PASSIVE_RGB = (231, 231, 231)
DEFAULT_RESOLUTION = 500
DISTANCE_BINS = 100
DEFAULT_PAIR_SAMPLES = 100_000
REFERENCE_PAIRS = 10_000_000
_REFERENCE_SEED = 0x5EEDD157
_REFERENCE_CACHE: dict[tuple[int, int], np.ndarray] = {}
REFERENCE_FLOOR = 1e-12
DEFAULT_CLUSTER_LINK_RADIUS = 15.0


@dataclass(frozen=True)
class SnapshotBitmap:
    width: int
    height: int
    pixels: np.ndarray  # uint8, shape (height, width, 3)
    step: int


def color_for_params(values) -> tuple[int, int, int]:
    """Stable 24-bit color for a kinetic parameter set (quantized to 4 decimals)."""
    quantized = struct.pack("<8d", *(round(float(v), 4) for v in values))
    digest = hashlib.blake2b(quantized, digest_size=3).digest()
    color = (digest[0], digest[1], digest[2])
    if color in (BACKGROUND_RGB, PASSIVE_RGB):
        color = (color[0], color[1], color[2] ^ 1)
    return color


def render(world: World, width: int = DEFAULT_RESOLUTION,
           height: int = DEFAULT_RESOLUTION) -> SnapshotBitmap:
    """Plot each particle as one pixel: actives by type color, passives gray."""
    img = np.full((height, width, 3), 255, dtype=np.uint8)
    if world.n:
        ix = np.clip((world.pos[:, 0] * (width / world.size)).astype(np.int64), 0, width - 1)
        iy = np.clip((world.pos[:, 1] * (height / world.size)).astype(np.int64), 0, height - 1)
        passive = ~world.active
        img[iy[passive], ix[passive]] = PASSIVE_RGB
        act = world.active_ids()
        if act.size:
            quant = np.round(world.params[act], 4)
            uniq, inverse = np.unique(quant, axis=0, return_inverse=True)
            palette = np.array([color_for_params(row) for row in uniq], dtype=np.uint8)
            img[iy[act], ix[act]] = palette[inverse]
    return SnapshotBitmap(width, height, img, world.t)


def write_ppm(bitmap: SnapshotBitmap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P6\n{bitmap.width} {bitmap.height}\n255\n".encode("ascii"))
        fh.write(bitmap.pixels.tobytes())


def read_ppm(path, step: int = 0) -> SnapshotBitmap:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6" or len(parts) < 4:
        raise ValueError(f"not a P6 bitmap: {path}")
    width, height = (int(x) for x in parts[1].split())
    if parts[2] != b"255":
        raise ValueError("unsupported max value")
    pixels = np.frombuffer(parts[3][: width * height * 3], dtype=np.uint8)
    return SnapshotBitmap(width, height, pixels.reshape(height, width, 3).copy(), step)


def snapshot_colors(bitmap: SnapshotBitmap) -> set[tuple[int, int, int]]:
    """Distinct particle-type colors in a bitmap (background and passive excluded)."""
    flat = bitmap.pixels.reshape(-1, 3)
    uniq = np.unique(flat, axis=0)
    colors = {tuple(int(c) for c in row) for row in uniq}
    colors.discard(BACKGROUND_RGB)
    colors.discard(PASSIVE_RGB)
    return colors


def exploration_series(snapshots) -> list[int]:
    """Per-snapshot count of colors never seen in any earlier snapshot."""
    seen: set[tuple[int, int, int]] = set()
    out = []
    for snap in snapshots:
        colors = snapshot_colors(snap) if isinstance(snap, SnapshotBitmap) else set(snap)
        out.append(len(colors - seen))
        seen |= colors
    return out


def _distance_edges(width: int, height: int) -> np.ndarray:
    return np.linspace(0.0, float(np.hypot(width, height)), DISTANCE_BINS + 1)


def reference_histogram(width: int, height: int) -> np.ndarray:
    """Pairwise-distance distribution of uniform random points in the rectangle.

    Monte Carlo with REFERENCE_PAIRS pairs, computed once per geometry and cached.
    """
    key = (width, height)
    if key not in _REFERENCE_CACHE:
        rng = np.random.default_rng(_REFERENCE_SEED)
        edges = _distance_edges(width, height)
        counts = np.zeros(DISTANCE_BINS, dtype=np.int64)
        chunk = 1_000_000
        remaining = REFERENCE_PAIRS
        while remaining > 0:
            m = min(chunk, remaining)
            a = rng.uniform(0.0, (width, height), (m, 2))
            b = rng.uniform(0.0, (width, height), (m, 2))
            d = np.hypot(a[:, 0] - b[:, 0], a[:, 1] - b[:, 1])
            counts += np.histogram(d, bins=edges)[0]
            remaining -= m
        _REFERENCE_CACHE[key] = counts / counts.sum()
    return _REFERENCE_CACHE[key]


def particle_pixel_coords(bitmap: SnapshotBitmap) -> np.ndarray:
    """(row, col) coordinates of pixels that carry a particle-type color."""
    px = bitmap.pixels
    bg = np.all(px == np.array(BACKGROUND_RGB, dtype=np.uint8), axis=2)
    passive = np.all(px == np.array(PASSIVE_RGB, dtype=np.uint8), axis=2)
    return np.argwhere(~bg & ~passive)


def sampled_distance_histogram(coords: np.ndarray, rng: SeededRng,
                               samples: int, edges: np.ndarray) -> np.ndarray:
    """Histogram of distances between `samples` random coordinate pairs (i != j)."""
    k = coords.shape[0]
    ii = rng.integers(0, k, samples)
    jj = rng.integers(0, k, samples)
    clash = ii == jj
    while clash.any():
        jj = jj.copy()
        jj[clash] = rng.integers(0, k, int(clash.sum()))
        clash = ii == jj
    d = np.hypot(coords[ii, 0].astype(float) - coords[jj, 0],
                 coords[ii, 1].astype(float) - coords[jj, 1])
    counts = np.histogram(d, bins=edges)[0]
    return counts / counts.sum()


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    q = np.maximum(q, REFERENCE_FLOOR)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def structuredness(bitmap: SnapshotBitmap, rng: SeededRng | None = None,
                   samples: int = DEFAULT_PAIR_SAMPLES) -> float:
    """KL divergence of the sampled pairwise pixel-distance distribution
    from the uniform-scatter reference for this geometry."""
    coords = particle_pixel_coords(bitmap)
    if coords.shape[0] < 2:
        raise ValueError("structuredness needs at least 2 particle pixels")
    if rng is None:
        rng = SeededRng(_REFERENCE_SEED)
    edges = _distance_edges(bitmap.width, bitmap.height)
    p = sampled_distance_histogram(coords, rng, samples, edges)
    q = reference_histogram(bitmap.width, bitmap.height)
    return kl_divergence(p, q)


def mean_same_type_cluster_size(world: World,
                                link_radius: float = DEFAULT_CLUSTER_LINK_RADIUS) -> float:
    """Mean size of single-linkage clusters of same-type active particles.

    Two active particles link when they share identical current kinetic
    parameters and sit within `link_radius`. Isolated actives count as
    clusters of size one.
    """
    act = world.active_ids()
    if act.size == 0:
        return 0.0
    parent = {int(i): int(i) for i in act}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pa, pb = radius_pairs(world.pos, act, world.size, link_radius)
    for a, b in zip(pa, pb):
        a, b = int(a), int(b)
        if np.array_equal(world.params[a], world.params[b]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
    sizes: dict[int, int] = {}
    for i in act:
        root = find(int(i))
        sizes[root] = sizes.get(root, 0) + 1
    return float(np.mean(list(sizes.values())))


@dataclass
class RunSeries:
    """Metric time series of one run, aligned on snapshot steps."""

    run_id: str
    condition: str
    steps: list[int]
    new_colors: list[int]
    kl_divergence: list[float]


@dataclass(frozen=True)
class SummaryRow:
    condition: str
    run_id: str
    mean_exploration: float
    mean_structuredness: float


def condition_summary(runs: list[RunSeries],
                      window: tuple[int, int] = (10_000, 30_000)) -> list[SummaryRow]:
    """Per-run means over the step window, one row per run, grouped by condition."""
    lo, hi = window
    rows = []
    for run in sorted(runs, key=lambda r: (r.condition, r.run_id)):
        steps = np.asarray(run.steps)
        mask = (steps >= lo) & (steps <= hi)
        if not mask.any():
            raise ValueError(f"run {run.run_id}: window {window} outside recorded steps")
        rows.append(SummaryRow(
            condition=run.condition,
            run_id=run.run_id,
            mean_exploration=float(np.mean(np.asarray(run.new_colors, dtype=float)[mask])),
            mean_structuredness=float(np.nanmean(np.asarray(run.kl_divergence)[mask])),
        ))
    return rows
