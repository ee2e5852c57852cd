"""Kinetic world: particle population, uniform-grid neighbor search, per-step update.

The square space is pseudo-periodic: positions wrap around the edges, but
distances and interaction forces never cross a boundary. All per-step random
draws happen up front in particle-id order, so a trajectory is a deterministic
function of the initial world and its seed.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np
from numba import njit

from .recipe import Recipe, parse_recipe, serialize_recipe
from .rng import SeededRng

DEFAULT_CELL_SIZE = 300.0  # max perception radius
STRAY_ACCEL = 0.5          # straying acceleration bound, per component
KICK_ACCEL = 5.0           # random-steer acceleration bound, per component
SINGULAR_DISTANCE = 1e-3   # below this separation distance the repulsion term is substituted

CHECKPOINT_MAGIC = b"SWLD"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Particle:
    """Immutable snapshot of one particle's state."""

    pos: tuple[float, float]
    vel: tuple[float, float]
    active: bool
    recipe: Recipe | None
    type_index: int


def distance_nonwrapping(a, b) -> float:
    """Plain Euclidean distance; no torus minimum-image."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


def build_cell_index(pos: np.ndarray, size: float, cell_size: float):
    """Counting-sort particles into a uniform grid.

    Returns (order, start, ncx, ncy): `order[start[c]:start[c+1]]` are the
    row indices of `pos` in cell c, with c = cx * ncy + cy.
    """
    ncx = max(1, int(np.ceil(size / cell_size)))
    ncy = ncx
    cx = np.clip((pos[:, 0] // cell_size).astype(np.int64), 0, ncx - 1)
    cy = np.clip((pos[:, 1] // cell_size).astype(np.int64), 0, ncy - 1)
    cid = cx * ncy + cy
    order = np.argsort(cid, kind="stable").astype(np.int64)
    counts = np.bincount(cid, minlength=ncx * ncy)
    start = np.zeros(ncx * ncy + 1, dtype=np.int64)
    np.cumsum(counts, out=start[1:])
    return order, start, ncx, ncy


@njit(cache=True)
def _kinetic_kernel(apos, avel, aparams, order, start, ncx, ncy, cell_size, size,
                    stray, coin, kick, zero_dir, sep_dir):
    """One synchronous kinetic step over the active sub-population.

    All arrays are indexed in active-rank order (ascending particle id), and
    the cell scan order is fixed, so the update is bit-reproducible.
    """
    na = apos.shape[0]
    new_pos = np.empty_like(apos)
    new_vel = np.empty_like(avel)
    sing2 = SINGULAR_DISTANCE * SINGULAR_DISTANCE
    for i in range(na):
        px = apos[i, 0]
        py = apos[i, 1]
        radius = aparams[i, 0]
        r2 = radius * radius
        cnt = 0
        sum_px = 0.0
        sum_py = 0.0
        sum_vx = 0.0
        sum_vy = 0.0
        sep_x = 0.0
        sep_y = 0.0
        ccx = int(px // cell_size)
        ccy = int(py // cell_size)
        for dx in range(-1, 2):
            gx = ccx + dx
            if gx < 0 or gx >= ncx:
                continue
            for dy in range(-1, 2):
                gy = ccy + dy
                if gy < 0 or gy >= ncy:
                    continue
                c = gx * ncy + gy
                for k in range(start[c], start[c + 1]):
                    j = order[k]
                    if j == i:
                        continue
                    ddx = apos[j, 0] - px
                    ddy = apos[j, 1] - py
                    d2 = ddx * ddx + ddy * ddy
                    if d2 < r2:
                        cnt += 1
                        sum_px += apos[j, 0]
                        sum_py += apos[j, 1]
                        sum_vx += avel[j, 0]
                        sum_vy += avel[j, 1]
                        if d2 < sing2:
                            # substitute a unit repulsion at the singular-distance magnitude
                            sep_x += np.cos(sep_dir[i]) / SINGULAR_DISTANCE
                            sep_y += np.sin(sep_dir[i]) / SINGULAR_DISTANCE
                        else:
                            sep_x += -ddx / d2
                            sep_y += -ddy / d2
        vx = avel[i, 0]
        vy = avel[i, 1]
        if cnt == 0:
            ax = stray[i, 0]
            ay = stray[i, 1]
        else:
            inv = 1.0 / cnt
            ax = (aparams[i, 3] * (sum_px * inv - px)
                  + aparams[i, 4] * (sum_vx * inv - vx)
                  + aparams[i, 5] * sep_x)
            ay = (aparams[i, 3] * (sum_py * inv - py)
                  + aparams[i, 4] * (sum_vy * inv - vy)
                  + aparams[i, 5] * sep_y)
            if coin[i] < aparams[i, 6]:
                ax += kick[i, 0]
                ay += kick[i, 1]
        vx += ax
        vy += ay
        vmax = aparams[i, 2]
        speed = np.sqrt(vx * vx + vy * vy)
        if speed > vmax:
            f = vmax / speed
            vx *= f
            vy *= f
            speed = vmax
        if speed == 0.0:
            ux = np.cos(zero_dir[i])
            uy = np.sin(zero_dir[i])
        else:
            ux = vx / speed
            uy = vy / speed
        prop = aparams[i, 7]
        vx = prop * aparams[i, 1] * ux + (1.0 - prop) * vx
        vy = prop * aparams[i, 1] * uy + (1.0 - prop) * vy
        # normal-speed pull can exceed the cap when normal_speed > max_speed
        speed = np.sqrt(vx * vx + vy * vy)
        if speed > vmax:
            f = vmax / speed
            vx *= f
            vy *= f
        nx = (px + vx) % size
        ny = (py + vy) % size
        if nx >= size or nx < 0.0:
            nx = 0.0
        if ny >= size or ny < 0.0:
            ny = 0.0
        new_pos[i, 0] = nx
        new_pos[i, 1] = ny
        new_vel[i, 0] = vx
        new_vel[i, 1] = vy
    return new_pos, new_vel


@njit(cache=True)
def _radius_pairs_kernel(pos, ids, order, start, ncx, ncy, cell_size, radius,
                         out_a, out_b, fill):
    """Collect unordered pairs (a < b) of `ids` members within `radius`.

    Two-pass: with fill=False only counts, with fill=True writes into out_a/out_b.
    `order`/`start` index into `ids`.
    """
    n = ids.shape[0]
    r2 = radius * radius
    m = 0
    for ii in range(n):
        i = ids[ii]
        px = pos[i, 0]
        py = pos[i, 1]
        ccx = int(px // cell_size)
        ccy = int(py // cell_size)
        for dx in range(-1, 2):
            gx = ccx + dx
            if gx < 0 or gx >= ncx:
                continue
            for dy in range(-1, 2):
                gy = ccy + dy
                if gy < 0 or gy >= ncy:
                    continue
                c = gx * ncy + gy
                for k in range(start[c], start[c + 1]):
                    j = ids[order[k]]
                    if j <= i:
                        continue
                    ddx = pos[j, 0] - px
                    ddy = pos[j, 1] - py
                    if ddx * ddx + ddy * ddy < r2:
                        if fill:
                            out_a[m] = i
                            out_b[m] = j
                        m += 1
    return m


def radius_pairs(pos: np.ndarray, ids: np.ndarray, size: float, radius: float):
    """All unordered pairs of `ids` whose positions lie within `radius`."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size < 2:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    cell = max(radius, 1e-9)
    order, start, ncx, ncy = build_cell_index(pos[ids], size, cell)
    empty = np.empty(0, np.int64)
    count = _radius_pairs_kernel(pos, ids, order, start, ncx, ncy, cell, radius,
                                 empty, empty, False)
    out_a = np.empty(count, np.int64)
    out_b = np.empty(count, np.int64)
    _radius_pairs_kernel(pos, ids, order, start, ncx, ncy, cell, radius,
                         out_a, out_b, True)
    return out_a, out_b


class World:
    """Bounded square space with a fixed-size particle population."""

    def __init__(self, size: float, n: int, rng: SeededRng,
                 cell_size: float = DEFAULT_CELL_SIZE):
        if size <= 0:
            raise ValueError("size must be positive")
        self.size = float(size)
        self.cell_size = float(cell_size)
        self.rng = rng
        self.t = 0
        n = int(n)
        self.pos = np.zeros((n, 2))
        self.vel = np.zeros((n, 2))
        self.active = np.zeros(n, dtype=bool)
        self.params = np.zeros((n, 8))
        self.type_index = np.full(n, -1, dtype=np.int32)
        self.recipes: list[Recipe | None] = [None] * n
        self._grid = None

    # -- population access ---------------------------------------------------

    @property
    def n(self) -> int:
        return self.pos.shape[0]

    def active_ids(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def particle(self, i: int) -> Particle:
        return Particle(
            pos=(float(self.pos[i, 0]), float(self.pos[i, 1])),
            vel=(float(self.vel[i, 0]), float(self.vel[i, 1])),
            active=bool(self.active[i]),
            recipe=self.recipes[i],
            type_index=int(self.type_index[i]),
        )

    def place(self, i: int, pos, vel=(0.0, 0.0)) -> None:
        self.pos[i] = pos
        self.vel[i] = vel
        self._grid = None

    def activate(self, i: int, recipe: Recipe, type_index: int) -> None:
        """Make particle i active under `recipe`, differentiated into entry `type_index`."""
        if not 0 <= type_index < len(recipe.entries):
            raise IndexError(f"type index {type_index} out of range for recipe of length {len(recipe)}")
        self.recipes[i] = recipe
        self.type_index[i] = type_index
        self.active[i] = True
        self.params[i] = recipe.entries[type_index].params.as_tuple()

    def set_type(self, i: int, type_index: int) -> None:
        self.activate(i, self.recipes[i], type_index)

    def deactivate(self, i: int) -> None:
        self.recipes[i] = None
        self.type_index[i] = -1
        self.active[i] = False
        self.params[i] = 0.0
        self.vel[i] = 0.0

    def mark_positions_dirty(self) -> None:
        self._grid = None

    # -- queries ---------------------------------------------------------------

    def neighbors(self, i: int, radius: float) -> list[int]:
        """Ids of all particles strictly within `radius` of particle i, sorted.

        Distances never wrap across boundaries.
        """
        if not 0 < radius <= self.cell_size:
            raise ValueError(f"radius must be in (0, {self.cell_size}]")
        if self._grid is None:
            self._grid = build_cell_index(self.pos, self.size, self.cell_size)
        order, start, ncx, ncy = self._grid
        ccx = min(int(self.pos[i, 0] // self.cell_size), ncx - 1)
        ccy = min(int(self.pos[i, 1] // self.cell_size), ncy - 1)
        chunks = []
        for gx in range(max(0, ccx - 1), min(ncx, ccx + 2)):
            for gy in range(max(0, ccy - 1), min(ncy, ccy + 2)):
                c = gx * ncy + gy
                chunks.append(order[start[c]:start[c + 1]])
        cand = np.concatenate(chunks) if chunks else np.empty(0, np.int64)
        d2 = ((self.pos[cand] - self.pos[i]) ** 2).sum(axis=1)
        hits = cand[(d2 < radius * radius) & (cand != i)]
        return sorted(int(j) for j in hits)

    # -- dynamics ----------------------------------------------------------------

    def step(self) -> None:
        """Advance one step: synchronous kinetic update of all active particles."""
        act = self.active_ids()
        if act.size:
            na = act.size
            stray = self.rng.uniform(-STRAY_ACCEL, STRAY_ACCEL, (na, 2))
            coin = self.rng.random(na)
            kick = self.rng.uniform(-KICK_ACCEL, KICK_ACCEL, (na, 2))
            zero_dir = self.rng.uniform(0.0, 2.0 * np.pi, na)
            sep_dir = self.rng.uniform(0.0, 2.0 * np.pi, na)
            apos = self.pos[act]
            avel = self.vel[act]
            aparams = self.params[act]
            order, start, ncx, ncy = build_cell_index(apos, self.size, self.cell_size)
            new_pos, new_vel = _kinetic_kernel(
                apos, avel, aparams, order, start, ncx, ncy,
                self.cell_size, self.size,
                stray, coin, kick, zero_dir, sep_dir)
            self.pos[act] = new_pos
            self.vel[act] = new_vel
        self.t += 1
        self._grid = None

    # -- checkpointing -------------------------------------------------------------

    def save(self, path) -> None:
        """Write a versioned binary checkpoint that round-trips bit-exactly."""
        unique: dict[int, int] = {}
        texts: list[str] = []
        refs = np.full(self.n, -1, dtype=np.int32)
        for i, r in enumerate(self.recipes):
            if r is None:
                continue
            key = id(r)
            if key not in unique:
                unique[key] = len(texts)
                texts.append(serialize_recipe(r))
            refs[i] = unique[key]
        rng_blob = json.dumps(self.rng.get_state()).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<IdQdI", CHECKPOINT_VERSION, self.size, self.t,
                                 self.cell_size, len(rng_blob)))
            fh.write(rng_blob)
            fh.write(struct.pack("<I", self.n))
            fh.write(self.pos.astype("<f8").tobytes())
            fh.write(self.vel.astype("<f8").tobytes())
            fh.write(self.active.astype("<u1").tobytes())
            fh.write(self.type_index.astype("<i4").tobytes())
            fh.write(refs.astype("<i4").tobytes())
            fh.write(struct.pack("<I", len(texts)))
            for text in texts:
                blob = text.encode("utf-8")
                fh.write(struct.pack("<I", len(blob)))
                fh.write(blob)

    @classmethod
    def load(cls, path) -> "World":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != CHECKPOINT_MAGIC:
                raise ValueError("not a world checkpoint")
            version, size, t, cell_size, rng_len = struct.unpack("<IdQdI", fh.read(32))
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            rng = SeededRng.from_state(json.loads(fh.read(rng_len).decode("utf-8")))
            (n,) = struct.unpack("<I", fh.read(4))
            world = cls(size, n, rng, cell_size=cell_size)
            world.t = int(t)
            world.pos = np.frombuffer(fh.read(n * 16), dtype="<f8").reshape(n, 2).copy()
            world.vel = np.frombuffer(fh.read(n * 16), dtype="<f8").reshape(n, 2).copy()
            world.active = np.frombuffer(fh.read(n), dtype="<u1").astype(bool)
            world.type_index = np.frombuffer(fh.read(n * 4), dtype="<i4").copy()
            refs = np.frombuffer(fh.read(n * 4), dtype="<i4")
            (n_texts,) = struct.unpack("<I", fh.read(4))
            recipes = []
            for _ in range(n_texts):
                (blob_len,) = struct.unpack("<I", fh.read(4))
                recipes.append(parse_recipe(fh.read(blob_len).decode("utf-8")))
        for i in range(n):
            if refs[i] >= 0:
                r = recipes[refs[i]]
                world.recipes[i] = r
                world.params[i] = r.entries[world.type_index[i]].params.as_tuple()
        return world
