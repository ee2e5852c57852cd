"""Headless run orchestration: run configs, manifests, metric CSVs, batch sweeps."""

from __future__ import annotations

import csv
import json
import os
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace

from . import metrics
from .designs import example_recipe
from .eco import EcoConfig, EcoSimulation, condition_preset, make_initial_world
from .recipe import parse_recipe
from .rng import SeededRng

SNAPSHOT_PREFIX = "snap_"
METRICS_NAME = "metrics.csv"
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class RunConfig:
    """Everything but the seed and step count needed to run one simulation."""

    eco: EcoConfig = field(default_factory=EcoConfig)
    condition: str = "custom"
    size: float = 5000.0
    n_particles: int = 10000
    n_active: int = 100
    init: str = "random"                # "random" | "designed"
    recipe_text: str | None = None      # required for designed inits
    recipe_name: str | None = None      # alternative: a shipped example recipe
    render_width: int = metrics.DEFAULT_RESOLUTION
    render_height: int = metrics.DEFAULT_RESOLUTION

    def initial_recipe(self):
        if self.recipe_text is not None:
            return parse_recipe(self.recipe_text)
        if self.recipe_name is not None:
            return example_recipe(self.recipe_name)
        return None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eco"]["perturbations"]["kinds"] = list(self.eco.perturbations.kinds)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        condition = data.get("condition", "custom")
        if condition != "custom":
            eco = condition_preset(condition)
        else:
            eco = EcoConfig()
        eco_data = dict(data.get("eco", {}))
        pert_data = eco_data.pop("perturbations", None)
        if pert_data is not None:
            pert_data = dict(pert_data)
            if "kinds" in pert_data:
                pert_data["kinds"] = tuple(pert_data["kinds"])
            eco = replace(eco, perturbations=replace(eco.perturbations, **pert_data))
        if eco_data:
            eco = replace(eco, **eco_data)
        kwargs = {k: v for k, v in data.items() if k not in ("eco", "condition")}
        return cls(eco=eco, condition=condition, **kwargs)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def desk_config(condition: str, init: str = "random",
                recipe_name: str | None = None) -> RunConfig:
    """Small-world variant used by tests and quick experiments."""
    return RunConfig(
        eco=condition_preset(condition) if condition != "custom" else EcoConfig(),
        condition=condition,
        size=1500.0, n_particles=1000, n_active=10,
        init=init, recipe_name=recipe_name,
    )


@dataclass
class RunManifest:
    run_id: str
    condition: str
    seed: int
    steps: int
    snapshot_interval: int
    config: dict
    out_dir: str | None
    snapshot_dir: str | None
    metrics_csv: str | None
    start_step: int = 0
    end_step: int = 0

    def save(self, path) -> None:
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2)
        os.replace(tmp, path)  # manifest is the last file written: valid iff present

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(**json.load(fh))


@dataclass
class RunResult:
    manifest: RunManifest
    series: metrics.RunSeries
    final_world: object


def write_metrics_csv(path, series: metrics.RunSeries) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "new_colors", "kl_divergence"])
        for step, colors, kl in zip(series.steps, series.new_colors, series.kl_divergence):
            writer.writerow([step, colors, f"{kl}"])


def read_metrics_csv(path, run_id: str, condition: str) -> metrics.RunSeries:
    steps, colors, kls = [], [], []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            steps.append(int(row["step"]))
            colors.append(int(row["new_colors"]))
            kls.append(float(row["kl_divergence"]))
    return metrics.RunSeries(run_id, condition, steps, colors, kls)


def run_simulation(config: RunConfig, seed: int, steps: int,
                   snapshot_interval: int = 500, out_dir=None,
                   run_id: str | None = None, keep_world: bool = False) -> RunResult:
    """Execute one headless run; snapshots every interval, metrics at the end."""
    if snapshot_interval < 1:
        raise ValueError("snapshot_interval must be >= 1")
    run_id = run_id or f"{config.condition}__{config.init}__s{seed}"
    rng = SeededRng(seed)
    world = make_initial_world(
        config.init, rng, recipe=config.initial_recipe(),
        size=config.size, n_particles=config.n_particles, n_active=config.n_active)
    sim = EcoSimulation(world, config.eco)
    metric_rng = SeededRng(seed)

    snapshot_dir = None
    if out_dir is not None:
        out_dir = str(out_dir)
        snapshot_dir = os.path.join(out_dir, "snapshots")
        os.makedirs(snapshot_dir, exist_ok=True)

    series = metrics.RunSeries(run_id, config.condition, [], [], [])
    seen_colors: set = set()

    def record() -> None:
        bitmap = metrics.render(world, config.render_width, config.render_height)
        if snapshot_dir is not None:
            metrics.write_ppm(bitmap, os.path.join(snapshot_dir, f"{SNAPSHOT_PREFIX}{world.t}.ppm"))
        colors = metrics.snapshot_colors(bitmap)
        series.steps.append(world.t)
        series.new_colors.append(len(colors - seen_colors))
        seen_colors.update(colors)
        try:
            kl = metrics.structuredness(bitmap, metric_rng)
        except ValueError:
            kl = float("nan")
        series.kl_divergence.append(kl)

    record()
    for _ in range(steps):
        sim.step()
        if world.t % snapshot_interval == 0:
            record()

    manifest = RunManifest(
        run_id=run_id, condition=config.condition, seed=seed, steps=steps,
        snapshot_interval=snapshot_interval, config=config.to_dict(),
        out_dir=out_dir, snapshot_dir=snapshot_dir,
        metrics_csv=os.path.join(out_dir, METRICS_NAME) if out_dir else None,
        start_step=0, end_step=world.t)
    if out_dir is not None:
        write_metrics_csv(manifest.metrics_csv, series)
        manifest.save(os.path.join(out_dir, MANIFEST_NAME))
    return RunResult(manifest, series, world if keep_world else None)


def _sweep_task(args) -> tuple[str, str, str | None, metrics.RunSeries | None, str | None]:
    condition, init, seed, steps, snapshot_interval, out_dir, recipe_name, desk = args
    try:
        config = (desk_config(condition, init, recipe_name) if desk else
                  RunConfig(eco=condition_preset(condition), condition=condition,
                            init=init, recipe_name=recipe_name))
        result = run_simulation(config, seed, steps, snapshot_interval, out_dir)
        return result.manifest.run_id, condition, out_dir, result.series, None
    except Exception:
        run_id = f"{condition}__{init}__s{seed}"
        return run_id, condition, out_dir, None, traceback.format_exc()


def sweep(conditions: list[str], seeds: list[int], inits: list[str], steps: int,
          out_dir=None, snapshot_interval: int = 500, jobs: int = 1,
          recipe_name: str | None = None, desk: bool = False,
          summary_window: tuple[int, int] = (10_000, 30_000)):
    """Cartesian-product batch of runs plus the per-condition summary.

    Failed runs are recorded in failures.csv and do not stop the sweep.
    Returns (summary rows, failures list).
    """
    tasks = []
    for condition in conditions:
        for init in inits:
            for seed in seeds:
                run_dir = None
                if out_dir is not None:
                    run_dir = os.path.join(str(out_dir), f"{condition}__{init}__s{seed}")
                    os.makedirs(run_dir, exist_ok=True)
                tasks.append((condition, init, seed, steps, snapshot_interval,
                              run_dir, recipe_name, desk))
    results: list[metrics.RunSeries] = []
    failures: list[tuple[str, str]] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_task, t) for t in tasks]
            for fut in as_completed(futures):
                run_id, condition, run_dir, series, error = fut.result()
                if error is None:
                    results.append(series)
                else:
                    failures.append((run_id, error))
    else:
        for t in tasks:
            run_id, condition, run_dir, series, error = _sweep_task(t)
            if error is None:
                results.append(series)
            else:
                failures.append((run_id, error))

    rows = metrics.condition_summary(results, window=summary_window)
    if out_dir is not None:
        with open(os.path.join(str(out_dir), "summary.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["condition", "run_id", "mean_exploration", "mean_structuredness"])
            for row in rows:
                writer.writerow([row.condition, row.run_id,
                                 f"{row.mean_exploration}", f"{row.mean_structuredness}"])
        if failures:
            with open(os.path.join(str(out_dir), "failures.csv"), "w", newline="",
                      encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["run_id", "error"])
                writer.writerows(failures)
    return rows, failures


def metrics_from_snapshots(snapshot_dir, run_id: str = "reprocessed",
                           condition: str = "custom") -> metrics.RunSeries:
    """Recompute the metric series a posteriori from a directory of snapshots."""
    files = []
    for name in os.listdir(snapshot_dir):
        if name.startswith(SNAPSHOT_PREFIX) and name.endswith(".ppm"):
            step = int(name[len(SNAPSHOT_PREFIX):-4])
            files.append((step, os.path.join(snapshot_dir, name)))
    if not files:
        raise ValueError(f"no {SNAPSHOT_PREFIX}*.ppm files in {snapshot_dir}")
    files.sort()
    series = metrics.RunSeries(run_id, condition, [], [], [])
    seen: set = set()
    metric_rng = SeededRng(metrics._REFERENCE_SEED)
    for step, path in files:
        bitmap = metrics.read_ppm(path, step)
        colors = metrics.snapshot_colors(bitmap)
        series.steps.append(step)
        series.new_colors.append(len(colors - seen))
        seen |= colors
        try:
            series.kl_divergence.append(metrics.structuredness(bitmap, metric_rng))
        except ValueError:
            series.kl_divergence.append(float("nan"))
    return series
