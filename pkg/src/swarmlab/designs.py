"""Example designed recipes for seeding simulations.

These are illustrative stand-ins written for this repository, NOT the
historical designs of the same names; load your own recipe text for faithful
reruns of a particular design.
"""

from __future__ import annotations

from .recipe import Recipe, parse_recipe

EXAMPLE_RECIPES: dict[str, str] = {
    # a heavy cohesive core orbited by a light fast shell
    "swinger": (
        "60 * (120.0, 4.0, 12.0, 0.6, 0.6, 20.0, 0.05, 0.7)\n"
        "40 * (60.0, 12.0, 24.0, 0.25, 0.9, 15.0, 0.15, 0.9)"
    ),
    # one alignment-dominant type that settles into milling
    "rotary": "100 * (100.0, 8.0, 16.0, 0.35, 0.85, 12.0, 0.02, 0.8)",
    # a few fast short-sighted leaders trailed by a cohesive crowd
    "walker_follower": (
        "20 * (40.0, 14.0, 28.0, 0.1, 0.3, 25.0, 0.3, 1.0)\n"
        "80 * (180.0, 6.0, 18.0, 0.7, 0.45, 18.0, 0.02, 0.6)"
    ),
}


def example_recipe(name: str) -> Recipe:
    try:
        return parse_recipe(EXAMPLE_RECIPES[name])
    except KeyError:
        raise ValueError(
            f"unknown example recipe {name!r}; choices: {sorted(EXAMPLE_RECIPES)}"
        ) from None
