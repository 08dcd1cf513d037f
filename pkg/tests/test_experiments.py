import csv
import io
import json
import math

import numpy as np
import pytest

from swarm_aggregation import cli
from swarm_aggregation.experiments import (CUTOFF, WORKERS_ENV, ExperimentSpec, RunConfig,
                                           RunRecord, SpecError, arena_side, detect_aggregation,
                                           execute, expand, run_all, summarize, summary_csv,
                                           sweep, worker_count)
from swarm_aggregation.geometry import (MetricsSample, compute_metrics, min_dispersion_baseline)


def sample(t, disp):
    return MetricsSample(t, 0.0, 0.0, disp, 1.0)


BASE = min_dispersion_baseline(10, 7.4)


# --- detection -----------------------------------------------------------------------

def test_detect_immediate():
    assert detect_aggregation([sample(0.0, BASE)], 10) == 0.0


def test_detect_flat_series_is_cutoff():
    assert detect_aggregation([sample(t, 5 * BASE) for t in range(300)], 10) is CUTOFF


def test_detect_crossing_at_seventh_sample():
    series = [sample(0.5 * k, BASE * (3.0 - 0.3 * k)) for k in range(12)]
    # 3 - 0.3k <= 1.15 first at k = 7
    assert detect_aggregation(series, 10, 0.15) == series[7].time


def test_detect_empty():
    with pytest.raises(ValueError):
        detect_aggregation([], 10)


def test_cutoff_is_singleton_and_prints():
    import pickle
    assert pickle.loads(pickle.dumps(CUTOFF)) is CUTOFF
    assert str(CUTOFF) == "CUTOFF"


def test_arena_rule():
    assert arena_side(10) == pytest.approx(200.0)
    assert arena_side(40) == pytest.approx(400.0)


# --- spec ---------------------------------------------------------------------------------

def test_spec_unknown_field_named():
    with pytest.raises(SpecError, match="noise_gird"):
        ExperimentSpec.from_dict({"mode": "continuous", "system_sizes": [10], "noise_gird": []})


@pytest.mark.parametrize("patch, field", [
    ({"repeats": 0}, "repeats"),
    ({"aggregation_threshold": 1.5}, "aggregation_threshold"),
    ({"horizon": -1}, "horizon"),
    ({"mode": "hybrid"}, "mode"),
    ({"system_sizes": [0]}, "system_sizes"),
    ({"beta_grid": [4.0]}, "beta_grid"),
    ({"noise_grid": [[0.0]]}, "noise_grid"),
    ({"noise_grid": [[0.0, 2.0]]}, "noise_grid"),
])
def test_spec_bad_values_name_field(patch, field):
    data = {"mode": "continuous", "system_sizes": [10]}
    data.update(patch)
    with pytest.raises(SpecError) as err:
        ExperimentSpec.from_dict(data)
    assert err.value.field == field
    assert field in str(err.value)


def test_spec_missing_field():
    with pytest.raises(SpecError, match="system_sizes"):
        ExperimentSpec.from_dict({"mode": "discrete"})


def test_discrete_spec():
    spec = ExperimentSpec.from_dict({"mode": "discrete", "system_sizes": [50],
                                     "noise_grid": [[0.15, None], [0.0, 4]], "horizon": 5000})
    assert spec.noise_for(spec.noise_grid[0]).perturbation_threshold is None
    assert spec.noise_for(spec.noise_grid[1]).d_star == 4
    with pytest.raises(SpecError, match="beta_grid"):
        ExperimentSpec.from_dict({"mode": "discrete", "system_sizes": [5], "beta_grid": [0.3]})
    with pytest.raises(SpecError, match="horizon"):
        ExperimentSpec.from_dict({"mode": "discrete", "system_sizes": [5], "horizon": 10.5})


def test_spec_round_trip(tmp_path):
    spec = ExperimentSpec.from_dict({"mode": "continuous", "system_sizes": [10, 20],
                                     "noise_grid": [[0, 0.05]], "beta_grid": [0, 0.25],
                                     "repeats": 2, "seed": 9})
    path = tmp_path / "s.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert ExperimentSpec.load(path) == spec


def test_spec_invalid_json(tmp_path):
    path = tmp_path / "s.json"
    path.write_text("{mode: continuous")
    with pytest.raises(SpecError, match="invalid JSON"):
        ExperimentSpec.load(path)


# --- expansion and runs ---------------------------------------------------------------

def test_expand_seeds():
    spec = ExperimentSpec(mode="continuous", system_sizes=(10,), repeats=3, seed=40)
    configs = expand(spec)
    assert [c.seed for c in configs] == [40, 41, 42]
    assert [c.index for c in configs] == [0, 1, 2]


def test_expand_cross_product_order():
    spec = ExperimentSpec(mode="continuous", system_sizes=(5, 6), noise_grid=((0, 0), (0, 0.1)),
                          beta_grid=(0.0, 0.5), repeats=2)
    configs = expand(spec)
    assert len(configs) == 16
    assert configs[0].n == 5 and configs[-1].n == 6
    assert configs[2].beta == 0.5 and configs[4].noise == (0, 0.1)


def small_spec(**kw):
    data = dict(mode="continuous", system_sizes=(3,), noise_grid=((0.0, 0.0), (0.0, 0.1)),
                repeats=2, horizon=8.0, seed=5)
    data.update(kw)
    return ExperimentSpec(**data)


def test_errors_recorded_and_sweep_continues():
    good = expand(small_spec(repeats=1))[0]
    bad = RunConfig("continuous", 3, 1, 1, (-1.0, 0.0), 0.0, 5.0, 1.0, 0.15)
    records = run_all([bad, good], workers=1)
    assert records[0].error and "motion_noise_max" in records[0].error
    assert records[1].error is None and records[1].final is not None


def test_sweep_outputs_and_summary(tmp_path):
    spec = small_spec()
    records = sweep(spec, tmp_path, workers=1)
    assert len(records) == 4
    runs = sorted((tmp_path / "runs").glob("run_*.csv"))
    assert len(runs) == 4
    assert all(p.with_suffix(".txt").exists() for p in runs)
    first = runs[0].read_text().splitlines()
    assert first[0] == "t,sed_circumference,hull_perimeter,dispersion,cluster_fraction"
    sidecar = runs[1].with_suffix(".txt").read_text()
    assert "seed: 6" in sidecar and "controller: -0.7 -1 1 -1" in sidecar
    summary = list(csv.DictReader(io.StringIO((tmp_path / "summary.csv").read_text())))
    assert list(summary[0]) == ["mode", "n", "param_name", "param_value", "mean_time",
                                "std_time", "cutoff_fraction", "repeats"]
    assert len(summary) == 2
    assert summary[1]["param_value"] == "0;0.1;0"




def test_summary_mean_matches_run_csvs(tmp_path):
    spec = ExperimentSpec(mode="discrete", system_sizes=(6,), noise_grid=((0.15, None),),
                          repeats=5, horizon=400, seed=3)
    sweep(spec, tmp_path, workers=1)
    times = []
    for p in sorted((tmp_path / "runs").glob("run_*.csv")):
        rows = list(csv.DictReader(open(p)))
        limit = 1.15 * min_dispersion_baseline(6, 1.0)
        hit = [float(r["t"]) for r in rows if float(r["dispersion"]) <= limit]
        if hit:
            times.append(hit[0])
    row = next(csv.DictReader(open(tmp_path / "summary.csv")))
    assert times, "expected at least one aggregated run"
    assert float(row["mean_time"]) == pytest.approx(np.mean(times), abs=1e-9, rel=1e-9)
    assert float(row["cutoff_fraction"]) == pytest.approx(1 - len(times) / 5)


def test_summary_excludes_cutoffs():
    cfg = expand(small_spec(noise_grid=((0.0, 0.0),), repeats=4))
    recs = [RunRecord(c, t, None) for c, t in zip(cfg, [10.0, CUTOFF, 20.0, CUTOFF])]
    (row,) = summarize(recs)
    assert row["mean_time"] == 15.0
    assert row["std_time"] == pytest.approx(math.sqrt(50.0))
    assert row["cutoff_fraction"] == 0.5
    all_cut = summarize([RunRecord(c, CUTOFF, None) for c in cfg])
    assert "nan" in summary_csv(all_cut)


def test_sweep_reproducible_across_worker_counts(tmp_path):
    spec = small_spec()
    sweep(spec, tmp_path / "a", workers=1)
    sweep(spec, tmp_path / "b", workers=2)
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()
    for p in (tmp_path / "a" / "runs").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / "runs" / p.name).read_bytes()


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "1")
    assert worker_count() == 1
    monkeypatch.setenv(WORKERS_ENV, "lots")
    with pytest.raises(SpecError, match=WORKERS_ENV):
        worker_count()
    monkeypatch.delenv(WORKERS_ENV)
    assert worker_count(1) == 1


def test_execute_discrete_until_aggregated():
    cfg = RunConfig("discrete", 8, 2, 0, (0.15, None), 0.0, 3000, 1, 0.15)
    rec = execute(cfg)
    assert rec.error is None
    assert rec.aggregation_time is CUTOFF or rec.aggregation_time == rec.final.time


# --- cli -------------------------------------------------------------------------------

def test_cli_deadlock_demo(capsys):
    assert cli.main(["deadlock-demo", "--construction", "even", "--n", "4", "--seconds", "60"]) == 0
    out = capsys.readouterr().out
    assert "max_displacement_cm: 0.000e+00" in out
    assert "dispersion_constant: True" in out


def test_cli_deadlock_bad_n(capsys):
    assert cli.main(["deadlock-demo", "--construction", "odd", "--n", "4"]) == 2
    assert "--n" in capsys.readouterr().err


def test_cli_verify_bounds(capsys, tmp_path):
    out = tmp_path / "b.csv"
    assert cli.main(["verify-bounds", "--beta", "1.0", "--d0", "50", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert rows == [{"beta": "1", "d0": "50", "measured_m": "2", "bound_m": "16", "pass": "true"}]


def test_cli_verify_bounds_bad_list(capsys):
    assert cli.main(["verify-bounds", "--beta", "a,b", "--d0", "50"]) == 2
    assert "--beta" in capsys.readouterr().err


def test_cli_metrics_pass_through(capsys, tmp_path):
    pts = np.random.default_rng(0).uniform(0, 50, size=(12, 2))
    path = tmp_path / "p.csv"
    path.write_text("x,y\n" + "".join(f"{x:.17g},{y:.17g}\n" for x, y in pts))
    assert cli.main(["metrics", "--input", str(path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    got = [float(v) for v in lines[1].split(",")]
    m = compute_metrics(pts, 3.7)
    want = [m.sed_circumference, m.hull_perimeter, m.dispersion, m.cluster_fraction]
    assert got == pytest.approx(want, rel=1e-8)


def test_cli_metrics_bad_file(capsys, tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("x,y\n1,2\nthree,4\n")
    assert cli.main(["metrics", "--input", str(path)]) == 2
    assert ":3:" in capsys.readouterr().err


def test_cli_sweep_bad_field(capsys, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"mode": "continuous", "system_sizes": [10], "repeats": 0}))
    assert cli.main(["sweep", str(path)]) == 2
    assert "repeats" in capsys.readouterr().err


def test_cli_sweep_writes_summary(capsys, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"mode": "discrete", "system_sizes": [5], "repeats": 2,
                                "noise_grid": [[0.15, None]], "horizon": 50}))
    assert cli.main(["sweep", str(path), "--out", str(tmp_path / "o"), "--workers", "1"]) == 0
    assert capsys.readouterr().out == (tmp_path / "o" / "summary.csv").read_text()


def test_cli_run_deterministic(tmp_path):
    args = ["run", "--n", "5", "--seconds", "10", "--p", "0.1", "--motion-noise", "1", "--seed", "4"]
    assert cli.main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.txt").read_text().startswith("mode: continuous")


def test_cli_run_bad_probability(capsys):
    assert cli.main(["run", "--p", "1.5", "--seconds", "1"]) == 2
    assert "noise_grid" in capsys.readouterr().err
