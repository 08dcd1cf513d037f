"""Command line entry point: ``swarm-agg <subcommand>``."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import constructions
from .cone import verify_bound_by_simulation
from .continuous import PhysicsParams, run
from .experiments import (CUTOFF, ExperimentSpec, RunConfig, SpecError, execute, fmt,
                          series_csv, sidecar_text, summarize, summary_csv, sweep)
from .geometry import TOUCH_FRACTION, compute_metrics

log = logging.getLogger("swarm_aggregation")


class CliError(Exception):
    pass


def _floats(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"--{name}: expected comma separated numbers, got {text!r}") from None


def cmd_run(args) -> int:
    if args.mode == "continuous":
        noise = (args.motion_noise, args.p)
        horizon = args.seconds
        cadence = args.sample_every
    else:
        noise = (args.p, args.d_star)
        horizon = args.rounds
        cadence = max(1, int(args.sample_every))
    cfg = RunConfig(args.mode, args.n, args.seed, 0, noise, args.beta, horizon, cadence,
                    args.threshold, stop_on_aggregation=args.stop_on_aggregation)
    try:
        # validates the same way a sweep spec would
        ExperimentSpec(mode=args.mode, system_sizes=(args.n,), noise_grid=(noise,),
                       beta_grid=(args.beta,), horizon=horizon, seed=args.seed,
                       aggregation_threshold=args.threshold, sample_cadence=cadence)
    except SpecError as exc:
        raise CliError(str(exc)) from None
    record = execute(cfg)
    if record.error:
        raise CliError(record.error)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(series_csv(record.series), encoding="utf-8")
        out.with_suffix(".txt").write_text(sidecar_text(record), encoding="utf-8")
    else:
        sys.stdout.write(series_csv(record.series))
    t = record.aggregation_time
    print(f"aggregation_time: {t if t is CUTOFF else fmt(t)}", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    try:
        spec = ExperimentSpec.load(args.spec)
    except SpecError as exc:
        raise CliError(f"{args.spec}: {exc}") from None
    except OSError as exc:
        raise CliError(str(exc)) from None
    try:
        records = sweep(spec, args.out, args.workers)
    except SpecError as exc:
        raise CliError(str(exc)) from None
    sys.stdout.write(summary_csv(summarize(records)))
    failed = sum(r.error is not None for r in records)
    if failed:
        print(f"{failed} run(s) failed; see the sidecar files", file=sys.stderr)
    return 0


def _build_construction(args):
    if args.construction == "even":
        return constructions.gen_deadlock_even(args.n)
    if args.construction == "odd":
        return constructions.gen_deadlock_odd(args.n)
    if args.construction == "ring":
        return constructions.gen_ring_deadlock(args.n)
    return constructions.gen_symmetric_cycle(args.n, args.circumradius)


def cmd_deadlock_demo(args) -> int:
    try:
        world = _build_construction(args)
    except ValueError as exc:
        raise CliError(f"--n: {exc}") from None
    start = world.positions.copy()
    series, world = run(world, args.seconds, 1.0)
    moved = float(np.max(np.hypot(*(world.positions - start).T)))
    disp = [s.dispersion for s in series]
    print(f"construction: {args.construction}")
    print(f"n: {world.n}")
    print(f"seconds: {fmt(args.seconds)}")
    print(f"max_displacement_cm: {moved:.3e}")
    print(f"dispersion_start: {fmt(disp[0])}")
    print(f"dispersion_end: {fmt(disp[-1])}")
    print(f"dispersion_constant: {len(set(disp)) == 1}")
    print(f"cluster_fraction_end: {fmt(series[-1].cluster_fraction)}")
    print(f"contact_overflows: {world.contact_overflows}")
    return 0


def cmd_verify_bounds(args) -> int:
    betas = _floats(args.beta, "beta")
    d0s = _floats(args.d0, "d0")
    if not betas or not d0s:
        raise CliError("--beta and --d0 need at least one value each")
    rows = []
    for beta in betas:
        for d0 in d0s:
            try:
                check = verify_bound_by_simulation(d0, beta)
            except ValueError as exc:
                raise CliError(f"beta={beta} d0={d0}: {exc}") from None
            rows.append(check)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["beta", "d0", "measured_m", "bound_m", "pass"])
        for c in rows:
            w.writerow([fmt(c.beta), fmt(c.d0), c.measured_m, c.bound_m, str(c.passed).lower()])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0 if all(c.passed for c in rows) else 1


def read_points(path) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            cells = [c.strip() for c in row if c.strip()]
            if not cells or cells[0].startswith("#"):
                continue
            try:
                x, y = float(cells[0]), float(cells[1])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header
                raise CliError(f"{path}:{lineno}: expected two numbers x,y") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise CliError(f"{path}:{lineno}: non-finite coordinate")
            rows.append((x, y))
    if not rows:
        raise CliError(f"{path}: no points")
    return np.array(rows)


def cmd_metrics(args) -> int:
    pts = read_points(args.input)
    tol = TOUCH_FRACTION * args.radius if args.touch_tolerance is None else args.touch_tolerance
    m = compute_metrics(pts, args.radius, touch_tolerance=tol, rng=np.random.default_rng(args.seed))
    print("sed_circumference,hull_perimeter,dispersion,cluster_fraction")
    print(",".join(fmt(v) for v in (m.sed_circumference, m.hull_perimeter,
                                    m.dispersion, m.cluster_fraction)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swarm-agg", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one seeded run from a random start")
    p.add_argument("--mode", choices=("continuous", "discrete"), default="continuous")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seconds", type=float, default=300.0)
    p.add_argument("--rounds", type=int, default=5000)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--p", type=float, default=0.0, help="sensor error probability")
    p.add_argument("--motion-noise", type=float, default=0.0, help="m*, newtons")
    p.add_argument("--d-star", type=int, default=None, help="lattice perturbation threshold")
    p.add_argument("--sample-every", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=0.15)
    p.add_argument("--stop-on-aggregation", action="store_true")
    p.add_argument("--out", help="metrics CSV path (sidecar written next to it)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run an experiment spec (JSON)")
    p.add_argument("spec")
    p.add_argument("--out", help="output directory for per-run CSVs and summary.csv")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("deadlock-demo", help="run a deadlock construction and report motion")
    p.add_argument("--construction", choices=("even", "odd", "ring", "cycle"), default="even")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--seconds", type=float, default=60.0)
    p.add_argument("--circumradius", type=float, default=40.0, help="cycle only")
    p.set_defaults(func=cmd_deadlock_demo)

    p = sub.add_parser("verify-bounds", help="simulate the rotation bound on a (beta, d0) grid")
    p.add_argument("--beta", required=True, help="comma separated, radians")
    p.add_argument("--d0", required=True, help="comma separated, cm")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_bounds)

    p = sub.add_parser("metrics", help="aggregation metrics of a point file")
    p.add_argument("--input", required=True, help="CSV of x,y rows (header optional)")
    p.add_argument("--radius", type=float, default=PhysicsParams().robot_radius)
    p.add_argument("--touch-tolerance", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
