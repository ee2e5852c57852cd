"""swarmlab: simulation and evolutionary design of self-organizing particle swarms."""

from .params import KineticParams, PARAM_BOUNDS
from .recipe import (Recipe, RecipeEntry, RecipeError, parse_recipe,
                     random_recipe, serialize_recipe)
from .rng import SeededRng
from .engine import Particle, World, distance_nonwrapping
from .eco import (CompetitorContext, EcoConfig, EcoSimulation, PerturbationConfig,
                  PerturbationEvent, apply_perturbation, compete, condition_preset,
                  detect_collisions, differentiate, make_initial_world, mutate_recipe,
                  resolve_collision, spontaneous_updates)
from .session import Session, SessionConfig, SwarmTile, replay
from .metrics import (SnapshotBitmap, condition_summary, exploration_series,
                      render, structuredness)
from .runner import RunConfig, RunManifest, run_simulation, sweep

__version__ = "0.1.0"
