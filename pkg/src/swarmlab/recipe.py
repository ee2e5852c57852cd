"""Recipe codec: the ordered (count, parameter set) genome and its text format.

A recipe is printed one entry per line as

    <count> * (<p1>, <p2>, ..., <p8>)

with parameters written as the shortest plain decimal that parses back to the
identical float, so serialize/parse is an exact round trip.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .params import N_PARAMS, PARAM_MAXS, PARAM_MINS, KineticParams
from .rng import SeededRng


class RecipeError(ValueError):
    """Raised for malformed recipe text; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class RecipeEntry:
    count: int
    params: KineticParams

    def __post_init__(self):
        if self.count < 1:
            raise RecipeError(f"entry count must be >= 1, got {self.count}")


@dataclass(frozen=True)
class Recipe:
    entries: tuple[RecipeEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise RecipeError("recipe must have at least one entry")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def total_count(self) -> int:
        return sum(e.count for e in self.entries)


_LINE_RE = re.compile(r"^(\d+)\s*\*\s*\((.*)\)$")
_PLAIN_DECIMAL_RE = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)$")


def parse_recipe(text: str) -> Recipe:
    """Parse recipe text; blank lines are ignored, parameters clamp into bounds."""
    entries = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        m = _LINE_RE.match(line)
        if m is None:
            raise RecipeError(f"malformed entry {line!r}", lineno)
        count = int(m.group(1))
        if count < 1:
            raise RecipeError(f"count must be >= 1, got {count}", lineno)
        tokens = [t.strip() for t in m.group(2).split(",")]
        if len(tokens) != N_PARAMS:
            raise RecipeError(f"expected {N_PARAMS} parameters, got {len(tokens)}", lineno)
        values = []
        for tok in tokens:
            if not _PLAIN_DECIMAL_RE.match(tok):
                raise RecipeError(f"not a plain decimal: {tok!r}", lineno)
            values.append(float(tok))
        entries.append(RecipeEntry(count, KineticParams.from_values(values)))
    if not entries:
        raise RecipeError("no entries")
    return Recipe(tuple(entries))


def format_param(value: float) -> str:
    """Shortest positional decimal that round-trips the exact float."""
    return np.format_float_positional(value, unique=True, trim="0")


def serialize_recipe(recipe: Recipe) -> str:
    lines = []
    for entry in recipe.entries:
        body = ", ".join(format_param(v) for v in entry.params.as_tuple())
        lines.append(f"{entry.count} * ({body})")
    return "\n".join(lines)


def random_params(rng: SeededRng) -> KineticParams:
    values = rng.uniform(np.array(PARAM_MINS), np.array(PARAM_MAXS), size=N_PARAMS)
    return KineticParams.from_values(float(v) for v in values)


def random_recipe(rng: SeededRng, n_types: int, count_per_type: int) -> Recipe:
    """Uniformly random recipe: n_types entries, all with the same count."""
    if n_types < 1:
        raise ValueError("n_types must be >= 1")
    if count_per_type < 1:
        raise ValueError("count_per_type must be >= 1")
    return Recipe(tuple(RecipeEntry(count_per_type, random_params(rng)) for _ in range(n_types)))
