import csv
import io
import json
import math

import numpy as np
import pytest

from dro_var.errors import ConfigError
from dro_var.experiments import (
    AGGREGATE, SCHEMA_LINE, median_population_risk, paired_one_sided_t, proportion_ci,
    quad_perturb_loss_range, run_coverage, run_median, run_regression_bias, run_simulation,
    simulation_rho,
)
from dro_var.data import gen_uniform_cube, make_rng
from dro_var.geometry import ConstraintSet
from dro_var.losses import LossModel
from dro_var.optimizer import minimize
from dro_var.risk import RobustObjective, certificate


def test_median_risk_formula():
    for delta in (0.0, 0.1, 0.3, 1.0):
        assert median_population_risk(1.0, delta) == pytest.approx(delta, abs=1e-15)
        assert median_population_risk(-1.0, delta) == pytest.approx(delta, abs=1e-15)
        assert median_population_risk(0.0, delta) == 0.0


def test_quad_range_bound_covers_sampled_losses():
    rng = make_rng(1)
    r, d, B = 10.0, 10, 1.0
    v = np.full(d, r / (2 * math.sqrt(d)))
    M = quad_perturb_loss_range(r, d, B)
    lo, hi = math.inf, -math.inf
    for _ in range(2000):
        th = rng.standard_normal(d)
        th *= r * rng.random() / np.linalg.norm(th)
        x = np.where(rng.random(d) < 0.5, -B, B)
        val = 0.5 * (th - v) @ (th - v) + x @ (th - v)
        lo, hi = min(lo, val), max(hi, val)
    assert hi - lo <= M


def test_simulation_rho_rules():
    assert simulation_rho(("fixed", 2.5), 10, 100, 10, 1) == 2.5
    want = math.log(40) + 10 * math.log(2 * 100 * 20 * (30 + math.sqrt(10)))
    assert simulation_rho(("coverage", 0.05), 10, 100, 10, 1) == pytest.approx(want, rel=1e-14)
    with pytest.raises(ConfigError):
        simulation_rho(("bogus", 1), 10, 100, 10, 1)


def test_paired_t():
    t, p = paired_one_sided_t([0.0, 0.1, 0.2, 0.1], [1.0, 1.2, 1.1, 1.0])
    assert t < 0 and p < 0.01
    assert math.isnan(paired_one_sided_t([1, 1], [1, 1])[1])


def test_proportion_ci():
    lo, hi = proportion_ci(200, 200)
    assert hi == 1.0 and 0.98 < lo < 1.0
    lo, hi = proportion_ci(0, 50)
    assert lo == 0.0


def test_simulation_noiseless_zero_risk():
    rep = run_simulation(d=3, n_list=(20,), B_list=(0.0,), reps=3, r=2.0, seed=1)
    for row in rep.replication_rows():
        assert row["risk_erm"] <= 1e-12 and row["risk_rob"] <= 1e-12


def test_simulation_aggregate_is_mean_of_rows():
    rep = run_simulation(d=3, n_list=(30, 60), B_list=(0.5,), reps=5, r=2.0, seed=2,
                         rho_rule=("fixed", 3.0))
    for agg in rep.aggregate_rows():
        cell = [r for r in rep.replication_rows() if r["n"] == agg["n"]]
        assert len(cell) == 5
        assert agg["risk_erm"] == pytest.approx(np.mean([r["risk_erm"] for r in cell]), rel=1e-14)
        assert agg["var_rob"] == pytest.approx(np.var([r["risk_rob"] for r in cell], ddof=1), rel=1e-12)
        assert agg["risk_rob"] == pytest.approx(np.mean([r["risk_rob"] for r in cell]), rel=1e-14)


def test_reports_are_deterministic_and_parseable():
    a = run_simulation(d=2, n_list=(20,), B_list=(1.0,), reps=3, r=1.0, seed=5)
    b = run_simulation(d=2, n_list=(20,), B_list=(1.0,), reps=3, r=1.0, seed=5)
    assert a.to_csv() == b.to_csv() and a.to_json() == b.to_json()
    text = a.to_csv()
    assert text.startswith(SCHEMA_LINE)
    rows = list(csv.DictReader(io.StringIO(text.split("\n", 1)[1])))
    assert len(rows) == 4 and rows[-1]["replication"] == AGGREGATE
    doc = json.loads(a.to_json())
    assert doc["experiment"] == "simulate" and "wall_time" not in doc


def test_threads_do_not_change_bytes():
    a = run_median(n_list=(30,), reps=100, seed=3, threads=1)
    b = run_median(n_list=(30,), reps=100, seed=3, threads=2)
    assert a.to_csv() == b.to_csv()


def test_median_degenerate_delta_one():
    rep = run_median(n_list=(20,), reps=100, seed=1, delta=1.0)
    for row in rep.replication_rows():
        assert row["risk_erm"] == 0.0 and row["risk_rob"] == 0.0


def test_median_requires_reps():
    with pytest.raises(ConfigError):
        run_median(reps=10)
    with pytest.raises(ConfigError):
        run_coverage(reps=10)
    with pytest.raises(ConfigError):
        run_simulation(reps=1)


def test_coverage_fraction_and_ci():
    rep = run_coverage(d=2, n=50, reps=100, B=1.0, r=1.0, seed=4)
    agg = rep.aggregate_rows()[0]
    assert 0.0 <= agg["coverage_flag"] <= 1.0
    assert agg["ci_low"] <= agg["coverage_flag"] <= agg["ci_high"]


def test_certificate_increases_with_rho():
    v = np.full(3, 0.5)
    data = gen_uniform_cube(100, 3, 1.0, seed=6)
    M = quad_perturb_loss_range(2.0, 3, 1.0)
    bounds = []
    for rho in (2.0, 4.0, 8.0):
        obj = RobustObjective(LossModel.quad_linear_perturb(v), data, rho)
        th = minimize(obj, ConstraintSet.l2_ball(2.0)).theta_hat
        bounds.append(certificate(obj, th, M).upper_bound)
    assert bounds[0] < bounds[1] < bounds[2]


def test_regression_bias_small_run():
    rep = run_regression_bias(n=200, reps=10, seed=1)
    agg = rep.aggregate_rows()[0]
    assert agg["status_rob"] == "ok=10"
    assert math.isfinite(agg["max_abs_z"])
