"""Kinetic parameter sets: the eight per-type values that govern particle motion."""

from __future__ import annotations

from dataclasses import dataclass, fields

# (lower, upper) bounds for each parameter, in recipe text order.
PARAM_BOUNDS: tuple[tuple[float, float], ...] = (
    (0.0, 300.0),  # perception_radius (pixels)
    (0.0, 20.0),   # normal_speed (pixels/step)
    (0.0, 40.0),   # max_speed (pixels/step)
    (0.0, 1.0),    # cohesion
    (0.0, 1.0),    # alignment
    (0.0, 100.0),  # separation
    (0.0, 0.5),    # random_steer probability
    (0.0, 1.0),    # propulsion tendency
)

PARAM_MINS = tuple(lo for lo, _ in PARAM_BOUNDS)
PARAM_MAXS = tuple(hi for _, hi in PARAM_BOUNDS)
PARAM_SPANS = tuple(hi - lo for lo, hi in PARAM_BOUNDS)
N_PARAMS = len(PARAM_BOUNDS)


def clamp_param(index: int, value: float) -> float:
    """Clamp one parameter into its bounds. Idempotent; normalizes -0.0 to 0.0."""
    lo, hi = PARAM_BOUNDS[index]
    v = min(max(float(value), lo), hi)
    return v + 0.0


@dataclass(frozen=True)
class KineticParams:
    """One particle type's kinetic parameters. Values are clamped on construction."""

    perception_radius: float
    normal_speed: float
    max_speed: float
    cohesion: float
    alignment: float
    separation: float
    random_steer: float
    propulsion: float

    def __post_init__(self):
        for i, f in enumerate(fields(self)):
            object.__setattr__(self, f.name, clamp_param(i, getattr(self, f.name)))

    @classmethod
    def from_values(cls, values) -> "KineticParams":
        values = tuple(values)
        if len(values) != N_PARAMS:
            raise ValueError(f"expected {N_PARAMS} parameter values, got {len(values)}")
        return cls(*values)

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.perception_radius,
            self.normal_speed,
            self.max_speed,
            self.cohesion,
            self.alignment,
            self.separation,
            self.random_steer,
            self.propulsion,
        )
