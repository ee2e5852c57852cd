import numpy as np
import pytest

from swarmlab.engine import World
from swarmlab.params import KineticParams
from swarmlab.recipe import Recipe, RecipeEntry
from swarmlab.rng import SeededRng


def one_type_recipe(params: KineticParams, count: int = 1) -> Recipe:
    return Recipe((RecipeEntry(count, params),))


def make_custom_world(size, specs, seed=0, cell_size=300.0) -> World:
    """Build a world from (pos, vel, params-or-None) triples; None means passive."""
    world = World(size, len(specs), SeededRng(seed), cell_size=cell_size)
    for i, (pos, vel, params) in enumerate(specs):
        world.pos[i] = pos
        if params is not None:
            world.activate(i, one_type_recipe(params), 0)
            world.vel[i] = vel
    return world


@pytest.fixture
def zero_coeff_params():
    """Active particle with every steering coefficient off: pure ballistic motion."""
    return KineticParams(perception_radius=300.0, normal_speed=5.0, max_speed=40.0,
                         cohesion=0.0, alignment=0.0, separation=0.0,
                         random_steer=0.0, propulsion=0.0)
