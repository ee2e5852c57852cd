"""Interactive evolution sessions.

A session holds tiles, each an independently simulated swarm, and applies the
operator set a human drives: mutate, mix, replicate, kill, random, plus the
generation-at-once flow. Every recipe-affecting draw comes from the session
stream in operator order, so replaying the operator log against the same seed
reconstructs the exact tile population; tile worlds step on child streams and
never touch the session stream.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .engine import World
from .params import N_PARAMS, PARAM_SPANS, KineticParams
from .recipe import Recipe, RecipeEntry, random_params
from .rng import SeededRng

MODES = ("niec", "hiec")

PARAM_MUTATION_RATE = 0.10       # per parameter
PARAM_SIGMA_FRACTION = 0.10      # of the parameter's span
COUNT_SPREAD = 0.20              # counts scale by 1 +/- this


class UnknownTileError(KeyError):
    pass


class ModeError(ValueError):
    pass


@dataclass(frozen=True)
class SessionConfig:
    tile_size: float = 300.0
    tile_particles: int = 200
    generation_size: int = 6
    max_random_types: int = 5


@dataclass(frozen=True)
class OperatorRecord:
    wall_time: float
    step: int
    op: str
    args: tuple
    result_ids: tuple[str, ...]
    rng_draws: int


@dataclass
class SwarmTile:
    id: str
    recipe: Recipe
    world: World
    created_at: float
    created_step: int


def perturb_recipe(recipe: Recipe, rng: SeededRng) -> Recipe:
    """Point-perturbed copy: each parameter nudged with probability 0.10,
    every count rescaled by up to +/-20% (rounded, min 1)."""
    entries = []
    for entry in recipe.entries:
        values = list(entry.params.as_tuple())
        for k in range(N_PARAMS):
            if rng.random() < PARAM_MUTATION_RATE:
                values[k] += rng.normal(0.0, PARAM_SIGMA_FRACTION * PARAM_SPANS[k])
        count = max(1, round(entry.count * (1.0 + rng.uniform(-COUNT_SPREAD, COUNT_SPREAD))))
        entries.append(RecipeEntry(count, KineticParams.from_values(values)))
    return Recipe(tuple(entries))


def mix_recipes(a: Recipe, b: Recipe) -> Recipe:
    """Physical mix: concatenated entries with counts halved (rounded up)."""
    entries = [RecipeEntry(max(1, math.ceil(e.count / 2)), e.params)
               for e in (*a.entries, *b.entries)]
    return Recipe(tuple(entries))


def random_session_recipe(rng: SeededRng, total_count: int, max_types: int) -> Recipe:
    """Random recipe with 1..max_types entries whose counts sum to total_count."""
    n_types = int(rng.integers(1, min(max_types, total_count) + 1))
    base, extra = divmod(total_count, n_types)
    entries = []
    for k in range(n_types):
        entries.append(RecipeEntry(base + (1 if k < extra else 0), random_params(rng)))
    return Recipe(tuple(entries))


def make_tile_world(recipe: Recipe, rng: SeededRng, size: float) -> World:
    """Fresh tile world: one particle per recipe count, uniform positions, at rest."""
    n = recipe.total_count
    world = World(size, n, rng, cell_size=size)
    world.pos = rng.uniform(0.0, size, (n, 2))
    i = 0
    for k, entry in enumerate(recipe.entries):
        for _ in range(entry.count):
            world.activate(i, recipe, k)
            i += 1
    return world


class Session:
    def __init__(self, mode: str, rng: SeededRng, config: SessionConfig | None = None):
        if mode not in MODES:
            raise ModeError(f"unknown mode {mode!r}")
        self.mode = mode
        self.rng = rng
        self.config = config if config is not None else SessionConfig()
        self.tiles: list[SwarmTile] = []
        self.history: list[OperatorRecord] = []
        self.step = 0
        self._next_tile = 0

    # -- bookkeeping ---------------------------------------------------------

    def tile(self, tile_id: str) -> SwarmTile:
        for t in self.tiles:
            if t.id == tile_id:
                return t
        raise UnknownTileError(tile_id)

    def _new_tile(self, recipe: Recipe) -> SwarmTile:
        tile_id = f"t{self._next_tile:04d}"
        self._next_tile += 1
        world = make_tile_world(recipe, self.rng.spawn(), self.config.tile_size)
        tile = SwarmTile(tile_id, recipe, world, time.time(), self.step)
        return tile

    def _log(self, op: str, args: tuple, result_ids: tuple[str, ...], draws_before: int):
        self.history.append(OperatorRecord(
            wall_time=time.time(), step=self.step, op=op, args=args,
            result_ids=result_ids, rng_draws=self.rng.draw_count - draws_before))

    def _require_mode(self, mode: str) -> None:
        if self.mode != mode:
            raise ModeError(f"operator requires {mode} mode, session is {self.mode}")

    def step_all(self, n: int = 1) -> None:
        for _ in range(n):
            for tile in self.tiles:
                tile.world.step()
            self.step += 1

    # -- operators ------------------------------------------------------------

    def seed_tiles(self, count: int) -> list[SwarmTile]:
        """Populate a fresh session with `count` random tiles."""
        return [self.random_tile() for _ in range(count)]

    def random_tile(self) -> SwarmTile:
        before = self.rng.draw_count
        recipe = random_session_recipe(self.rng, self.config.tile_particles,
                                       self.config.max_random_types)
        tile = self._new_tile(recipe)
        self.tiles.append(tile)
        self._log("random", (), (tile.id,), before)
        return tile

    def mutate_tile(self, tile_id: str) -> SwarmTile:
        self._require_mode("hiec")
        source = self.tile(tile_id)
        before = self.rng.draw_count
        tile = self._new_tile(perturb_recipe(source.recipe, self.rng))
        self.tiles.append(tile)
        self._log("mutate", (tile_id,), (tile.id,), before)
        return tile

    def mix_tiles(self, tile_a: str, tile_b: str) -> SwarmTile:
        self._require_mode("hiec")
        if tile_a == tile_b:
            raise ValueError("cannot mix a tile with itself")
        a, b = self.tile(tile_a), self.tile(tile_b)
        before = self.rng.draw_count
        tile = self._new_tile(mix_recipes(a.recipe, b.recipe))
        self.tiles.append(tile)
        self._log("mix", (tile_a, tile_b), (tile.id,), before)
        return tile

    def replicate_tile(self, tile_id: str) -> SwarmTile:
        self._require_mode("hiec")
        source = self.tile(tile_id)
        before = self.rng.draw_count
        tile = self._new_tile(source.recipe)
        self.tiles.append(tile)
        self._log("replicate", (tile_id,), (tile.id,), before)
        return tile

    def kill_tile(self, tile_id: str) -> None:
        self._require_mode("hiec")
        tile = self.tile(tile_id)
        before = self.rng.draw_count
        self.tiles.remove(tile)
        self._log("kill", (tile_id,), (), before)

    def niec_generation(self, selected: list[str]) -> list[SwarmTile]:
        """Replace the whole generation from one or two selected tiles."""
        self._require_mode("niec")
        if not 1 <= len(selected) <= 2:
            raise ValueError("select one or two tiles")
        if len(set(selected)) != len(selected):
            raise ValueError("selections must be distinct")
        sources = [self.tile(tid) for tid in selected]
        k = self.config.generation_size
        before = self.rng.draw_count
        new_tiles = [self._new_tile(src.recipe) for src in sources]
        while len(new_tiles) < k:
            if len(sources) == 1:
                recipe = perturb_recipe(sources[0].recipe, self.rng)
            else:
                recipe = perturb_recipe(mix_recipes(sources[0].recipe, sources[1].recipe),
                                        self.rng)
            new_tiles.append(self._new_tile(recipe))
        self.tiles = list(new_tiles[:k])
        self._log("niec_select", tuple(selected), tuple(t.id for t in self.tiles), before)
        return self.tiles


def replay(mode: str, seed: int, history: list[OperatorRecord],
           config: SessionConfig | None = None) -> Session:
    """Rebuild a session by replaying an operator log against the same seed."""
    session = Session(mode, SeededRng(seed), config)
    for record in history:
        if record.op == "random":
            session.random_tile()
        elif record.op == "mutate":
            session.mutate_tile(*record.args)
        elif record.op == "mix":
            session.mix_tiles(*record.args)
        elif record.op == "replicate":
            session.replicate_tile(*record.args)
        elif record.op == "kill":
            session.kill_tile(*record.args)
        elif record.op == "niec_select":
            session.niec_generation(list(record.args))
        else:
            raise ValueError(f"unknown operator {record.op!r} in log")
    return session
