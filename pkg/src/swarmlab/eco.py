"""Ecosystem dynamics layered on the kinetic world.

Active particles carry recipes; collisions transmit recipes into passive
particles (recruitment) or between active particles of different types, with
the transmission direction decided by a competition function. Recipes mutate
on transmission and spontaneously, and scheduled environmental perturbations
keep the system from settling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .engine import World, build_cell_index
from .params import PARAM_SPANS, KineticParams
from .recipe import Recipe, RecipeEntry, random_params, random_recipe
from .rng import SeededRng

COMPETITION_FUNCTIONS = (
    "faster",
    "slower",
    "behind",
    "majority",
    "majority_probabilistic",
    "majority_relative",
    "recipe_length",
    "recipe_length_then_majority",
    "recipe_length_times_majority",
)

COLLISION_MODES = ("original", "revised")
PERTURBATION_KINDS = ("deactivate_disc", "scatter")

MAJORITY_RADIUS = 30.0          # neighborhood for same-type counting
ORIGINAL_MODE_FACTOR = 0.2      # collision threshold fraction of the larger perception radius
BEHIND_CONE_COS = math.cos(math.pi / 4)  # 90-degree total cone width

DUPLICATION_RATE = 0.05   # per entry
DELETION_RATE = 0.05      # per entry; never empties the recipe
POINT_RATE = 0.10         # per parameter
POINT_SIGMA_FRACTION = 0.10  # of the parameter's span

# (transmission, spontaneous) mutation probabilities
MUTATION_PRESETS = {"low": (1e-3, 1e-5), "high": (1e-1, 1e-3)}


@dataclass(frozen=True)
class PerturbationConfig:
    enabled: bool = False
    interval: int = 2000
    kinds: tuple[str, ...] = PERTURBATION_KINDS
    disc_radius: float | None = None  # None: a quarter of the world size
    scatter_fraction: float = 0.25


@dataclass(frozen=True)
class EcoConfig:
    redifferentiation_rate: float = 0.005
    transmission_mutation: float = 1e-3
    spontaneous_mutation: float = 1e-5
    competition: str = "majority_relative"
    collision_mode: str = "revised"
    collision_radius: float = 10.0
    add_rate: float = 0.10
    perturbations: PerturbationConfig = field(default_factory=PerturbationConfig)

    def __post_init__(self):
        for name in ("redifferentiation_rate", "transmission_mutation",
                     "spontaneous_mutation", "add_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.competition not in COMPETITION_FUNCTIONS:
            raise ValueError(f"unknown competition function {self.competition!r}")
        if self.collision_mode not in COLLISION_MODES:
            raise ValueError(f"unknown collision mode {self.collision_mode!r}")
        if not 0.0 <= self.perturbations.scatter_fraction <= 1.0:
            raise ValueError("scatter_fraction must be in [0, 1]")


CONDITION_NAMES = ("original-low", "original-high", "revised-low", "revised-high")


def condition_preset(name: str) -> EcoConfig:
    """The four named experimental conditions: collision algorithm x mutation level.

    High-mutation conditions also enable environmental perturbations; the
    quantified experiments used the raised entry-addition rate of 0.5.
    """
    try:
        mode, level = name.split("-")
        p_t, p_s = MUTATION_PRESETS[level]
        if mode not in COLLISION_MODES:
            raise KeyError(mode)
    except (ValueError, KeyError):
        raise ValueError(f"unknown condition preset {name!r}") from None
    return EcoConfig(
        transmission_mutation=p_t,
        spontaneous_mutation=p_s,
        collision_mode=mode,
        add_rate=0.5,
        perturbations=PerturbationConfig(enabled=(level == "high")),
    )


# -- recipe-level operations ---------------------------------------------------

def differentiate(recipe: Recipe, rng: SeededRng) -> int:
    """Pick an entry index with probability proportional to its count."""
    u = rng.random() * recipe.total_count
    acc = 0
    for k, entry in enumerate(recipe.entries):
        acc += entry.count
        if u < acc:
            return k
    return len(recipe.entries) - 1


def mutate_recipe(recipe: Recipe, rng: SeededRng, add_rate: float) -> Recipe:
    """One mutation event: duplications, deletions, optional addition, point mutations."""
    # duplication, per entry
    out: list[RecipeEntry] = []
    for entry in recipe.entries:
        out.append(entry)
        if rng.random() < DUPLICATION_RATE:
            out.append(entry)
    # deletion, per entry; a deletion that would empty the recipe is suppressed
    kept: list[RecipeEntry] = []
    for idx, entry in enumerate(out):
        delete = rng.random() < DELETION_RATE
        if delete and not kept and idx == len(out) - 1:
            delete = False
        if not delete:
            kept.append(entry)
    # addition of one random entry
    if rng.random() < add_rate:
        count = max(1, round(sum(e.count for e in kept) / len(kept))) if kept else 1
        kept.append(RecipeEntry(count, random_params(rng)))
    # point mutation, per parameter
    result: list[RecipeEntry] = []
    for entry in kept:
        values = list(entry.params.as_tuple())
        changed = False
        for k in range(len(values)):
            if rng.random() < POINT_RATE:
                values[k] += rng.normal(0.0, POINT_SIGMA_FRACTION * PARAM_SPANS[k])
                changed = True
        if changed:
            entry = RecipeEntry(entry.count, KineticParams.from_values(values))
        result.append(entry)
    return Recipe(tuple(result))


# -- competition -----------------------------------------------------------------

@dataclass(frozen=True)
class CompetitorContext:
    """Everything a competition function may inspect about one collision party."""

    pos: tuple[float, float]
    vel: tuple[float, float]
    speed: float
    recipe_len: int
    same_type_nearby: int = 0     # same-type count within MAJORITY_RADIUS
    same_type_in_range: int = 0   # same-type count within own perception radius
    total_in_range: int = 0       # all particles within own perception radius


def _coin(rng: SeededRng) -> int:
    return 0 if rng.random() < 0.5 else 1


def _pick(score_a: float, score_b: float, rng: SeededRng) -> int:
    if score_a > score_b:
        return 0
    if score_b > score_a:
        return 1
    return _coin(rng)


def _is_behind(x: CompetitorContext, y: CompetitorContext) -> bool:
    """True if x sits within the 90-degree cone opposite y's velocity."""
    dx = x.pos[0] - y.pos[0]
    dy = x.pos[1] - y.pos[1]
    dist = math.hypot(dx, dy)
    if dist == 0.0 or y.speed == 0.0:
        return False
    dot = -(dx * y.vel[0] + dy * y.vel[1])
    return dot >= dist * y.speed * BEHIND_CONE_COS


def _relative_density(c: CompetitorContext) -> float:
    return c.same_type_in_range / c.total_in_range if c.total_in_range else 0.0


def compete(a: CompetitorContext, b: CompetitorContext, fn: str, rng: SeededRng) -> int:
    """Return 0 if a wins the collision, 1 if b does. Exact ties fall to a fair coin."""
    if fn == "faster":
        return _pick(a.speed, b.speed, rng)
    if fn == "slower":
        return _pick(-a.speed, -b.speed, rng)
    if fn == "behind":
        qa, qb = _is_behind(a, b), _is_behind(b, a)
        if qa != qb:
            return 0 if qa else 1
        return _coin(rng)
    if fn == "majority":
        return _pick(a.same_type_nearby, b.same_type_nearby, rng)
    if fn == "majority_probabilistic":
        total = a.same_type_nearby + b.same_type_nearby
        if total == 0:
            return _coin(rng)
        return 0 if rng.random() < a.same_type_nearby / total else 1
    if fn == "majority_relative":
        return _pick(_relative_density(a), _relative_density(b), rng)
    if fn == "recipe_length":
        return _pick(a.recipe_len, b.recipe_len, rng)
    if fn == "recipe_length_then_majority":
        if a.recipe_len != b.recipe_len:
            return 0 if a.recipe_len > b.recipe_len else 1
        return _pick(a.same_type_nearby, b.same_type_nearby, rng)
    if fn == "recipe_length_times_majority":
        return _pick(a.recipe_len * a.same_type_nearby,
                     b.recipe_len * b.same_type_nearby, rng)
    raise ValueError(f"unknown competition function {fn!r}")


# -- collision detection ------------------------------------------------------------

@njit(cache=True)
def _collision_pairs_kernel(pos, active_u8, eff_radius, order, start, ncx, ncy,
                            cell_size, original_mode, fixed_radius, out_a, out_b, fill):
    n = pos.shape[0]
    m = 0
    for i in range(n):
        if active_u8[i] == 0:
            continue
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
                    j = order[k]
                    if j == i:
                        continue
                    if active_u8[j] == 1 and j < i:
                        continue  # active-active pair handled from the lower id
                    if original_mode:
                        thr = ORIGINAL_MODE_FACTOR * max(eff_radius[i], eff_radius[j])
                    else:
                        thr = fixed_radius
                    ddx = pos[j, 0] - px
                    ddy = pos[j, 1] - py
                    if ddx * ddx + ddy * ddy < thr * thr:
                        if fill:
                            out_a[m] = i
                            out_b[m] = j
                        m += 1
    return m


@njit(cache=True)
def _same_type_counts_kernel(pos, type_ids, order, start, ncx, ncy, cell_size, radius):
    n = pos.shape[0]
    out = np.zeros(n, np.int64)
    r2 = radius * radius
    for i in range(n):
        t = type_ids[i]
        if t < 0:
            continue
        px = pos[i, 0]
        py = pos[i, 1]
        ccx = int(px // cell_size)
        ccy = int(py // cell_size)
        cnt = 0
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
                    if j == i or type_ids[j] != t:
                        continue
                    ddx = pos[j, 0] - px
                    ddy = pos[j, 1] - py
                    if ddx * ddx + ddy * ddy < r2:
                        cnt += 1
        out[i] = cnt
    return out


@njit(cache=True)
def _perception_counts_kernel(pos, type_ids, radii, subset, order, start,
                              ncx, ncy, cell_size):
    m = subset.shape[0]
    same = np.zeros(m, np.int64)
    total = np.zeros(m, np.int64)
    for s in range(m):
        i = subset[s]
        t = type_ids[i]
        r2 = radii[i] * radii[i]
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
                    j = order[k]
                    if j == i:
                        continue
                    ddx = pos[j, 0] - px
                    ddy = pos[j, 1] - py
                    if ddx * ddx + ddy * ddy < r2:
                        total[s] += 1
                        if type_ids[j] == t:
                            same[s] += 1
    return same, total


def detect_collisions(world: World, config: EcoConfig) -> list[tuple[int, int]]:
    """Colliding pairs to process this step, each particle in at most one pair.

    Pairs are canonicalized (low id, high id) and selected greedily in
    lexicographic order; at least one particle of each pair is active.
    """
    if not world.active.any():
        return []
    original = config.collision_mode == "original"
    if original:
        thr_max = ORIGINAL_MODE_FACTOR * max(300.0, config.collision_radius)
    else:
        thr_max = config.collision_radius
    cell = max(thr_max, MAJORITY_RADIUS)
    order, start, ncx, ncy = build_cell_index(world.pos, world.size, cell)
    active_u8 = world.active.astype(np.uint8)
    eff_radius = np.where(world.active, world.params[:, 0], config.collision_radius)
    empty = np.empty(0, np.int64)
    count = _collision_pairs_kernel(world.pos, active_u8, eff_radius, order, start,
                                    ncx, ncy, cell, original, config.collision_radius,
                                    empty, empty, False)
    if count == 0:
        return []
    out_a = np.empty(count, np.int64)
    out_b = np.empty(count, np.int64)
    _collision_pairs_kernel(world.pos, active_u8, eff_radius, order, start,
                            ncx, ncy, cell, original, config.collision_radius,
                            out_a, out_b, True)
    u = np.minimum(out_a, out_b)
    v = np.maximum(out_a, out_b)
    idx = np.lexsort((v, u))
    used = np.zeros(world.n, dtype=bool)
    pairs = []
    for k in idx:
        a, b = int(u[k]), int(v[k])
        if used[a] or used[b]:
            continue
        used[a] = used[b] = True
        pairs.append((a, b))
    return pairs


class _StepContext:
    """Per-step shared lookups for collision resolution (lazily built)."""

    def __init__(self, world: World, config: EcoConfig):
        self.world = world
        self.config = config
        self._type_ids = None
        self._count30 = None
        self._grid300 = None

    def type_ids(self) -> np.ndarray:
        if self._type_ids is None:
            w = self.world
            ids = np.full(w.n, -1, dtype=np.int64)
            act = w.active_ids()
            if act.size:
                _, inverse = np.unique(w.params[act], axis=0, return_inverse=True)
                ids[act] = inverse
            self._type_ids = ids
        return self._type_ids

    def count30(self) -> np.ndarray:
        if self._count30 is None:
            w = self.world
            order, start, ncx, ncy = build_cell_index(w.pos, w.size, MAJORITY_RADIUS)
            self._count30 = _same_type_counts_kernel(
                w.pos, self.type_ids(), order, start, ncx, ncy,
                MAJORITY_RADIUS, MAJORITY_RADIUS)
        return self._count30

    def perception_counts(self, ids: tuple[int, ...]) -> dict[int, tuple[int, int]]:
        w = self.world
        if self._grid300 is None:
            self._grid300 = build_cell_index(w.pos, w.size, w.cell_size)
        order, start, ncx, ncy = self._grid300
        subset = np.asarray(ids, dtype=np.int64)
        same, total = _perception_counts_kernel(
            w.pos, self.type_ids(), w.params[:, 0], subset, order, start,
            ncx, ncy, w.cell_size)
        return {int(i): (int(s), int(t)) for i, s, t in zip(subset, same, total)}


_NEEDS_COUNT30 = {"majority", "majority_probabilistic",
                  "recipe_length_then_majority", "recipe_length_times_majority"}


def _context_pair(world: World, a: int, b: int, config: EcoConfig,
                  ctx: _StepContext) -> tuple[CompetitorContext, CompetitorContext]:
    count30 = ctx.count30() if config.competition in _NEEDS_COUNT30 else None
    perception = (ctx.perception_counts((a, b))
                  if config.competition == "majority_relative" else None)
    out = []
    for i in (a, b):
        same_in_range, total_in_range = perception[i] if perception else (0, 0)
        out.append(CompetitorContext(
            pos=(float(world.pos[i, 0]), float(world.pos[i, 1])),
            vel=(float(world.vel[i, 0]), float(world.vel[i, 1])),
            speed=float(np.hypot(world.vel[i, 0], world.vel[i, 1])),
            recipe_len=len(world.recipes[i]),
            same_type_nearby=int(count30[i]) if count30 is not None else 0,
            same_type_in_range=same_in_range,
            total_in_range=total_in_range,
        ))
    return out[0], out[1]


def _transmit(world: World, src: int, dst: int, config: EcoConfig, rng: SeededRng) -> None:
    recipe = world.recipes[src]
    if rng.random() < config.transmission_mutation:
        recipe = mutate_recipe(recipe, rng, config.add_rate)
    world.activate(dst, recipe, differentiate(recipe, rng))


def resolve_collision(world: World, pair: tuple[int, int], config: EcoConfig,
                      rng: SeededRng, _ctx: _StepContext | None = None) -> None:
    """Apply recipe transmission for one colliding pair."""
    a, b = pair
    active_a = bool(world.active[a])
    active_b = bool(world.active[b])
    if active_a and not active_b:
        _transmit(world, a, b, config, rng)
    elif active_b and not active_a:
        _transmit(world, b, a, config, rng)
    elif active_a and active_b:
        ra, rb = world.recipes[a], world.recipes[b]
        if (ra is rb or ra == rb) and world.type_index[a] == world.type_index[b]:
            return
        ctx = _ctx if _ctx is not None else _StepContext(world, config)
        ca, cb = _context_pair(world, a, b, config, ctx)
        winner = compete(ca, cb, config.competition, rng)
        if winner == 0:
            _transmit(world, a, b, config, rng)
        else:
            _transmit(world, b, a, config, rng)


# -- per-step stochastic updates -----------------------------------------------------

def spontaneous_updates(world: World, config: EcoConfig, rng: SeededRng | None = None) -> None:
    """Independent per-particle re-differentiation and recipe mutation."""
    act = world.active_ids()
    if act.size == 0:
        return
    rng = rng if rng is not None else world.rng
    redif = rng.random(act.size)
    mut = rng.random(act.size)
    hits = np.flatnonzero((redif < config.redifferentiation_rate)
                          | (mut < config.spontaneous_mutation))
    for h in hits:
        i = int(act[h])
        if redif[h] < config.redifferentiation_rate:
            world.set_type(i, differentiate(world.recipes[i], rng))
        if mut[h] < config.spontaneous_mutation:
            mutated = mutate_recipe(world.recipes[i], rng, config.add_rate)
            idx = int(world.type_index[i])
            if idx >= len(mutated.entries):
                idx = differentiate(mutated, rng)
            world.activate(i, mutated, idx)


# -- initial conditions and perturbations ----------------------------------------------

def make_initial_world(kind: str, rng: SeededRng, recipe: Recipe | None = None,
                       size: float = 5000.0, n_particles: int = 10000,
                       n_active: int = 100, cell_size: float = 300.0) -> World:
    """Random: n_active one-type seeds; designed: a single recipe carrier at the center."""
    world = World(size, n_particles, rng, cell_size=cell_size)
    world.pos = rng.uniform(0.0, size, (n_particles, 2))
    if kind == "random":
        for i in range(n_active):
            world.activate(i, random_recipe(rng, 1, 1), 0)
    elif kind == "designed":
        if recipe is None:
            raise ValueError("designed initial condition requires a recipe")
        world.pos[0] = (size / 2.0, size / 2.0)
        world.activate(0, recipe, differentiate(recipe, rng))
    else:
        raise ValueError(f"unknown initial condition kind {kind!r}")
    return world


@dataclass(frozen=True)
class PerturbationEvent:
    kind: str
    center: tuple[float, float] | None = None
    radius: float | None = None
    fraction: float | None = None


def draw_perturbation(world: World, config: EcoConfig, rng: SeededRng) -> PerturbationEvent:
    kinds = config.perturbations.kinds
    kind = kinds[int(rng.integers(0, len(kinds)))]
    if kind == "deactivate_disc":
        center = rng.uniform(0.0, world.size, 2)
        radius = config.perturbations.disc_radius
        if radius is None:
            radius = world.size / 4.0
        return PerturbationEvent(kind, center=(float(center[0]), float(center[1])),
                                 radius=float(radius))
    if kind == "scatter":
        return PerturbationEvent(kind, fraction=config.perturbations.scatter_fraction)
    raise ValueError(f"unknown perturbation kind {kind!r}")


def apply_perturbation(world: World, event: PerturbationEvent, rng: SeededRng) -> None:
    """Particle count is conserved by every perturbation kind."""
    if event.kind == "deactivate_disc":
        d2 = ((world.pos - np.asarray(event.center)) ** 2).sum(axis=1)
        for i in np.flatnonzero((d2 < event.radius * event.radius) & world.active):
            world.deactivate(int(i))
    elif event.kind == "scatter":
        k = int(round(event.fraction * world.n))
        if k:
            ids = rng.choice_without_replacement(world.n, k)
            world.pos[ids] = rng.uniform(0.0, world.size, (k, 2))
            world.mark_positions_dirty()
    else:
        raise ValueError(f"unknown perturbation kind {event.kind!r}")


class EcoSimulation:
    """Orchestrates one step: kinetics, collisions, spontaneous updates, perturbations."""

    def __init__(self, world: World, config: EcoConfig):
        self.world = world
        self.config = config

    def step(self) -> None:
        world, config = self.world, self.config
        world.step()
        pairs = detect_collisions(world, config)
        if pairs:
            ctx = _StepContext(world, config)
            for pair in pairs:
                resolve_collision(world, pair, config, world.rng, _ctx=ctx)
        spontaneous_updates(world, config)
        pert = config.perturbations
        if pert.enabled and pert.interval > 0 and world.t % pert.interval == 0:
            event = draw_perturbation(world, config, world.rng)
            apply_perturbation(world, event, world.rng)

    def run(self, steps: int, on_step=None) -> None:
        for _ in range(steps):
            self.step()
            if on_step is not None:
                on_step(self.world)
