"""Sweep harness: spec parsing, aggregation detection, run records and CSV output."""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .constructions import gen_random
from .continuous import X_STAR, NoiseModel, PhysicsParams, run
from .geometry import MetricsSample, min_dispersion_baseline
from .lattice import DiscreteNoise, random_lattice_world, run_rounds

log = logging.getLogger(__name__)

WORKERS_ENV = "SWARMAGG_WORKERS"
RUN_HEADER = "t,sed_circumference,hull_perimeter,dispersion,cluster_fraction"
SUMMARY_HEADER = "mode,n,param_name,param_value,mean_time,std_time,cutoff_fraction,repeats"
# continuous runs start spread over 4000 cm^2 per robot (200 cm square for n = 10)
AREA_PER_ROBOT = 4000.0
LATTICE_DENSITY = 0.1


class _Cutoff:
    """Marker for a run that never aggregated within its horizon."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "CUTOFF"

    __str__ = __repr__

    def __reduce__(self):
        return (_Cutoff, ())


CUTOFF = _Cutoff()
AggregationTime = Union[float, _Cutoff]


def fmt(x: float) -> str:
    return "%.9g" % x


def arena_side(n: int) -> float:
    return math.sqrt(AREA_PER_ROBOT * n)


def detect_aggregation(series: Sequence[MetricsSample], n: int, threshold: float = 0.15,
                       spacing: float = 2 * 3.7) -> AggregationTime:
    """First sample time with dispersion within ``threshold`` of the packing baseline."""
    if not series:
        raise ValueError("empty metrics series")
    limit = (1.0 + threshold) * min_dispersion_baseline(n, spacing)
    for s in series:
        if s.dispersion <= limit:
            return s.time
    return CUTOFF


# ---------------------------------------------------------------------------
# spec
# ---------------------------------------------------------------------------

class SpecError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"field '{field_name}': {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep.

    ``noise_grid`` holds (motion_noise_max, error_probability) pairs in
    continuous mode and (error_probability, perturbation_threshold) pairs in
    discrete mode, where a threshold of null disables perturbation.
    ``horizon`` and ``sample_cadence`` are seconds or rounds.
    """

    mode: str
    system_sizes: tuple[int, ...]
    noise_grid: Optional[tuple[tuple, ...]] = None
    beta_grid: tuple[float, ...] = (0.0,)
    repeats: int = 1
    horizon: float = 300.0
    seed: int = 0
    aggregation_threshold: float = 0.15
    sample_cadence: float = 1.0

    def __post_init__(self):
        if self.mode not in ("continuous", "discrete"):
            raise SpecError("mode", f"expected 'continuous' or 'discrete', got {self.mode!r}")
        if self.noise_grid is None:
            # noiseless by default: (m*, p) = (0, 0) or (p, d*) = (0, off)
            default = ((0.0, 0.0),) if self.mode == "continuous" else ((0.0, None),)
            object.__setattr__(self, "noise_grid", default)
        if not self.system_sizes or any(not _is_int(n) or n < 1 for n in self.system_sizes):
            raise SpecError("system_sizes", "must be a non-empty list of positive integers")
        if not _is_int(self.repeats) or self.repeats < 1:
            raise SpecError("repeats", "must be an integer >= 1")
        if not _is_num(self.horizon) or self.horizon <= 0:
            raise SpecError("horizon", "must be positive")
        if not _is_int(self.seed):
            raise SpecError("seed", "must be an integer")
        if not _is_num(self.aggregation_threshold) or not 0 < self.aggregation_threshold < 1:
            raise SpecError("aggregation_threshold", "must lie in (0, 1)")
        if not _is_num(self.sample_cadence) or self.sample_cadence <= 0:
            raise SpecError("sample_cadence", "must be positive")
        if not self.noise_grid:
            raise SpecError("noise_grid", "must not be empty")
        if not self.beta_grid:
            raise SpecError("beta_grid", "must not be empty")
        for b in self.beta_grid:
            if not _is_num(b) or not 0 <= b < math.pi:
                raise SpecError("beta_grid", f"beta {b!r} outside [0, pi)")
        for cell in self.noise_grid:
            if len(cell) != 2:
                raise SpecError("noise_grid", f"entry {list(cell)!r} is not a pair")
            try:
                self.noise_for(cell)
            except (TypeError, ValueError) as exc:
                raise SpecError("noise_grid", f"entry {list(cell)!r}: {exc}") from None
        if self.mode == "discrete":
            if self.beta_grid != (0.0,):
                raise SpecError("beta_grid", "has no meaning in discrete mode")
            if not _is_int(self.horizon):
                raise SpecError("horizon", "must be a whole number of rounds in discrete mode")
            if not _is_int(self.sample_cadence):
                raise SpecError("sample_cadence", "must be a whole number of rounds in discrete mode")

    def noise_for(self, cell):
        if self.mode == "continuous":
            return NoiseModel(motion_noise_max=float(cell[0]), error_probability=float(cell[1]))
        d_star = None if cell[1] is None else int(cell[1])
        if cell[1] is not None and d_star != cell[1]:
            raise ValueError("perturbation threshold must be an integer or null")
        return DiscreteNoise(error_probability=float(cell[0]), perturbation_threshold=d_star)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise SpecError("<root>", "spec must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise SpecError(key, "unknown field")
        for key in ("mode", "system_sizes"):
            if key not in data:
                raise SpecError(key, "missing")
        kw = dict(data)
        for key in ("system_sizes", "beta_grid"):
            if key in kw:
                if not isinstance(kw[key], list):
                    raise SpecError(key, "must be a list")
                kw[key] = tuple(kw[key])
        if "noise_grid" in kw:
            grid = kw["noise_grid"]
            if not isinstance(grid, list) or not all(isinstance(c, list) for c in grid):
                raise SpecError("noise_grid", "must be a list of pairs")
            kw["noise_grid"] = tuple(tuple(c) for c in kw["noise_grid"])
        if "beta_grid" in kw:
            kw["beta_grid"] = tuple(float(b) if _is_num(b) else b for b in kw["beta_grid"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError("<root>", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["system_sizes"] = list(self.system_sizes)
        d["noise_grid"] = [list(c) for c in self.noise_grid]
        d["beta_grid"] = list(self.beta_grid)
        return d


def _is_int(x) -> bool:
    if isinstance(x, bool):
        return False
    return isinstance(x, (int, np.integer)) or (isinstance(x, float) and x.is_integer())


def _is_num(x) -> bool:
    return isinstance(x, (int, float, np.number)) and not isinstance(x, bool) and math.isfinite(x)


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    mode: str
    n: int
    seed: int
    index: int
    noise: tuple
    beta: float
    horizon: float
    sample_cadence: float
    threshold: float
    stop_on_aggregation: bool = True

    @property
    def param_names(self) -> tuple[str, ...]:
        if self.mode == "continuous":
            return ("motion_noise_max", "error_probability", "beta")
        return ("error_probability", "perturbation_threshold")

    @property
    def param_values(self) -> tuple:
        if self.mode == "continuous":
            return (float(self.noise[0]), float(self.noise[1]), float(self.beta))
        return (float(self.noise[0]), self.noise[1])


@dataclass
class RunRecord:
    config: RunConfig
    aggregation_time: AggregationTime
    final: Optional[MetricsSample]
    series: list = field(default_factory=list, repr=False)
    contact_overflows: int = 0
    error: Optional[str] = None

    @property
    def seed(self) -> int:
        return self.config.seed


def baseline_spacing(mode: str) -> float:
    return 2 * PhysicsParams().robot_radius if mode == "continuous" else 1.0


def execute(cfg: RunConfig) -> RunRecord:
    """Run one configuration; errors are captured in the record, never raised."""
    try:
        return _execute(cfg)
    except Exception as exc:  # noqa: BLE001 - a sweep must survive any single run
        log.error("run %d (seed %d) failed: %s", cfg.index, cfg.seed, exc)
        return RunRecord(cfg, CUTOFF, None, [], 0, f"{type(exc).__name__}: {exc}")


def _execute(cfg: RunConfig) -> RunRecord:
    spacing = baseline_spacing(cfg.mode)
    limit = (1.0 + cfg.threshold) * min_dispersion_baseline(cfg.n, spacing)
    until = (lambda m: m.dispersion <= limit) if cfg.stop_on_aggregation else None
    rng = np.random.default_rng(cfg.seed)
    overflows = 0
    if cfg.mode == "continuous":
        noise = NoiseModel(motion_noise_max=float(cfg.noise[0]), error_probability=float(cfg.noise[1]))
        world = gen_random(cfg.n, arena_side(cfg.n), rng, params=PhysicsParams(beta=cfg.beta),
                           noise=noise, seed=cfg.seed)
        series, world = run(world, cfg.horizon, cfg.sample_cadence, until)
        overflows = world.contact_overflows
    else:
        d_star = None if cfg.noise[1] is None else int(cfg.noise[1])
        world = random_lattice_world(cfg.n, rng, DiscreteNoise(float(cfg.noise[0]), d_star),
                                     density=LATTICE_DENSITY, seed=cfg.seed)
        series, world = run_rounds(world, int(cfg.horizon), until, int(cfg.sample_cadence))
    agg = detect_aggregation(series, cfg.n, cfg.threshold, spacing)
    return RunRecord(cfg, agg, series[-1], series, overflows)


def expand(spec: ExperimentSpec) -> list[RunConfig]:
    """All runs of a sweep in order; run k gets seed spec.seed + k."""
    configs = []
    for n in spec.system_sizes:
        for cell in spec.noise_grid:
            for beta in spec.beta_grid:
                for _ in range(spec.repeats):
                    k = len(configs)
                    configs.append(RunConfig(spec.mode, int(n), int(spec.seed) + k, k, tuple(cell),
                                             float(beta), float(spec.horizon),
                                             float(spec.sample_cadence), float(spec.aggregation_threshold)))
    return configs


def worker_count(requested: Optional[int] = None) -> int:
    if requested is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise SpecError(WORKERS_ENV, f"not an integer: {env!r}") from None
    cpus = os.cpu_count() or 1
    return max(1, min(cpus, requested) if requested else cpus)


def run_all(configs: Sequence[RunConfig], workers: Optional[int] = None) -> list[RunRecord]:
    workers = worker_count(workers)
    if workers == 1 or len(configs) <= 1:
        return [execute(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(execute, configs))


def sweep(spec: ExperimentSpec, out_dir=None, workers: Optional[int] = None) -> list[RunRecord]:
    """Run the full cross product of a spec; write per-run CSVs and the summary if ``out_dir`` is given."""
    records = run_all(expand(spec), workers)
    if out_dir is not None:
        write_outputs(spec, records, Path(out_dir))
    return records


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def series_csv(series: Sequence[MetricsSample]) -> str:
    lines = [RUN_HEADER]
    for s in series:
        lines.append(",".join(fmt(v) for v in s.as_row()))
    return "\n".join(lines) + "\n"


def sidecar_text(record: RunRecord) -> str:
    cfg = record.config
    lines = [f"mode: {cfg.mode}", f"n: {cfg.n}", f"seed: {cfg.seed}", f"run_index: {cfg.index}"]
    if cfg.mode == "continuous":
        p = PhysicsParams(beta=cfg.beta)
        lines += [f"params: robot_radius={fmt(p.robot_radius)} axle_length={fmt(p.axle_length)} "
                  f"max_wheel_speed={fmt(p.max_wheel_speed)} dt={fmt(p.dt)} beta={fmt(p.beta)} "
                  f"damping={fmt(p.damping)}",
                  f"arena_side: {fmt(arena_side(cfg.n))}",
                  "controller: " + " ".join(fmt(v) for v in X_STAR.as_array()),
                  f"noise: motion_noise_max={fmt(cfg.noise[0])} error_probability={fmt(cfg.noise[1])}"]
    else:
        lines += [f"lattice_density: {fmt(LATTICE_DENSITY)}",
                  f"noise: error_probability={fmt(cfg.noise[0])} perturbation_threshold={cfg.noise[1]}"]
    lines += [f"horizon: {fmt(cfg.horizon)}", f"sample_cadence: {fmt(cfg.sample_cadence)}",
              f"aggregation_threshold: {fmt(cfg.threshold)}",
              f"aggregation_time: {_time_text(record.aggregation_time)}",
              f"contact_overflows: {record.contact_overflows}"]
    if record.error:
        lines.append(f"error: {record.error}")
    return "\n".join(lines) + "\n"


def _time_text(t: AggregationTime) -> str:
    return str(CUTOFF) if t is CUTOFF else fmt(t)


def _param_text(v) -> str:
    return "none" if v is None else fmt(v)


def summarize(records: Sequence[RunRecord]) -> list[dict]:
    """One row per grid cell; CUTOFF and failed runs stay out of the mean."""
    cells: dict[tuple, list[RunRecord]] = {}
    for rec in records:
        cfg = rec.config
        cells.setdefault((cfg.mode, cfg.n, cfg.param_values), []).append(rec)
    rows = []
    for (mode, n, values), recs in cells.items():
        times = [r.aggregation_time for r in recs if r.error is None and r.aggregation_time is not CUTOFF]
        cutoffs = sum(r.aggregation_time is CUTOFF for r in recs)
        mean = float(np.mean(times)) if times else math.nan
        std = float(np.std(times, ddof=1)) if len(times) > 1 else (0.0 if times else math.nan)
        rows.append(dict(mode=mode, n=n, param_name=";".join(recs[0].config.param_names),
                         param_value=";".join(_param_text(v) for v in values),
                         mean_time=mean, std_time=std, cutoff_fraction=cutoffs / len(recs),
                         repeats=len(recs)))
    return rows


def summary_csv(rows: Sequence[dict]) -> str:
    lines = [SUMMARY_HEADER]
    for r in rows:
        lines.append(",".join([r["mode"], str(r["n"]), r["param_name"], r["param_value"],
                               fmt(r["mean_time"]), fmt(r["std_time"]),
                               fmt(r["cutoff_fraction"]), str(r["repeats"])]))
    return "\n".join(lines) + "\n"


def write_run(record: RunRecord, csv_path: Path) -> None:
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(series_csv(record.series), encoding="utf-8")
    csv_path.with_suffix(".txt").write_text(sidecar_text(record), encoding="utf-8")


def write_outputs(spec: ExperimentSpec, records: Sequence[RunRecord], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for rec in records:
        write_run(rec, out_dir / "runs" / f"run_{rec.config.index:05d}.csv")
    (out_dir / "summary.csv").write_text(summary_csv(summarize(records)), encoding="utf-8")
    (out_dir / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8")
