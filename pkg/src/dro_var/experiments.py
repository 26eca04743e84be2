"""Replication harness for the synthetic experiments.

Each replication is a pure function of ``(config, seed, cell, replication)``
and draws from its own Philox stream, so results are identical whether the
replications run sequentially or across worker processes.  Rows are sorted
by key before they are written.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import gen_linear_regression, gen_median_data, gen_uniform_cube
from .errors import ConfigError, LineSearchError, SolverError
from .geometry import ConstraintSet
from .losses import LossModel
from .optimizer import SolverConfig, minimize
from .risk import RobustObjective, bias_term, certificate, rho_for_coverage

SCHEMA_LINE = "# dro-var schema v1"
AGGREGATE = "aggregate"

# stream tags keep the experiments' random streams disjoint
_SIM, _MEDIAN, _COVERAGE, _REGRESSION = 1, 2, 3, 4


@dataclass
class ExperimentReport:
    experiment: str
    columns: list
    rows: list
    seed: int
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def replication_rows(self) -> list:
        return [r for r in self.rows if r["replication"] != AGGREGATE]

    def aggregate_rows(self) -> list:
        return [r for r in self.rows if r["replication"] == AGGREGATE]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"{SCHEMA_LINE} experiment={self.experiment} seed={self.seed}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(row.get(c)) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        # wall_time is left out so identical seeds give identical bytes
        doc = {
            "schema": "dro-var v1",
            "experiment": self.experiment,
            "seed": self.seed,
            "config": self.config,
            "columns": self.columns,
            "rows": [{c: _jsonable(r.get(c)) for c in self.columns} for r in self.rows],
        }
        return json.dumps(doc, indent=2, sort_keys=False, allow_nan=True) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("DRO_VAR_THREADS", "1")))
    except ValueError:
        raise ConfigError("DRO_VAR_THREADS must be an integer") from None


def _run_tasks(fn, tasks, threads):
    if threads <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _float_key(x: float) -> int:
    """Stable integer stream id for a float parameter."""
    return int(np.float64(x).view(np.uint64))


def _fit(objective, cset, config):
    """Run the fitter; a stalled line search still yields its iterate."""
    try:
        res = minimize(objective, cset, config)
        return res.theta_hat, "ok" if res.converged else "max_iter"
    except LineSearchError as exc:
        return exc.theta, "stalled"
    except SolverError:
        return None, "failed"


def _mean_var(xs):
    xs = np.asarray([x for x in xs if x is not None and math.isfinite(x)], dtype=float)
    if xs.size == 0:
        return math.nan, math.nan
    return float(xs.mean()), float(xs.var(ddof=1)) if xs.size > 1 else math.nan


def paired_one_sided_t(better, worse) -> tuple[float, float]:
    """Paired t-test of ``mean(better - worse) < 0``; NaN when undefined."""
    a, b = np.asarray(better, dtype=float), np.asarray(worse, dtype=float)
    ok = np.isfinite(a) & np.isfinite(b)
    a, b = a[ok], b[ok]
    diff = a - b
    if diff.size < 2 or np.all(diff == diff[0]):
        return math.nan, math.nan
    res = stats.ttest_rel(a, b, alternative="less")
    return float(res.statistic), float(res.pvalue)


def proportion_ci(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson interval."""
    if n == 0:
        return math.nan, math.nan
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def _status_summary(rows, key):
    counts = {}
    for r in rows:
        counts[r[key]] = counts.get(r[key], 0) + 1
    return ";".join(f"{k}={counts[k]}" for k in sorted(counts))


# ---------------------------------------------------------------------------
# simulation: quadratic loss with a linear noise term


def quad_perturb_loss_range(r: float, d: int, B: float) -> float:
    """Range bound of 0.5||theta - v||^2 + x^T(theta - v) over ||theta|| <= r.

    With ``||v|| = r / 2`` we have ``||theta - v|| <= 1.5 r`` and
    ``|x^T u| <= sqrt(d) B ||u||``.
    """
    a = 1.5 * r
    lip = math.sqrt(d) * B
    top = 0.5 * a * a + a * lip
    bottom = -min(0.5 * lip * lip, a * lip)
    return top - bottom


def simulation_rho(rule: tuple, d: int, n: int, r: float, B: float) -> float:
    kind = rule[0]
    if kind == "fixed":
        return float(rule[1])
    if kind == "coverage":
        delta = rule[1]
        return rho_for_coverage(delta, d, n, 2.0 * r, 3.0 * r + math.sqrt(d) * B)
    raise ConfigError(f"unknown rho rule {rule!r}")


def _simulate_one(task):
    d, n, B, r, rho_rule, seed, rep, cfg = task
    data = gen_uniform_cube(n, d, B, seed, stream=(_SIM, n, _float_key(B), rep))
    v = np.full(d, r / (2.0 * math.sqrt(d)))
    model = LossModel.quad_linear_perturb(v)
    cset = ConstraintSet.l2_ball(r)
    rho = simulation_rho(rho_rule, d, n, r, B)

    th_erm, st_erm = _fit(RobustObjective(model, data, 0.0), cset, cfg)
    obj = RobustObjective(model, data, rho)
    th_rob, st_rob = _fit(obj, cset, cfg)

    def risk(th):
        return math.nan if th is None else 0.5 * float((th - v) @ (th - v))

    row = {
        "experiment": "simulate", "n": n, "d": d, "B": B, "rho": rho,
        "constraint": cset.describe(), "replication": rep,
        "status_erm": st_erm, "status_rob": st_rob,
        "risk_erm": risk(th_erm), "risk_rob": risk(th_rob),
    }
    if th_rob is not None:
        cert = certificate(obj, th_rob, quad_perturb_loss_range(r, d, B))
        row["certificate"] = cert.upper_bound
        row["coverage_flag"] = bool(row["risk_rob"] <= cert.upper_bound)
    return row


SIM_COLUMNS = [
    "experiment", "n", "d", "B", "rho", "constraint", "replication",
    "status_erm", "status_rob", "risk_erm", "risk_rob", "var_erm", "var_rob",
    "certificate", "coverage_flag", "t_statistic", "p_value",
]


def run_simulation(d=10, n_list=(100, 1000), B_list=(0.01, 1.0), reps=100, r=10.0,
                   rho_rule=("coverage", 0.05), seed=0, threads=1,
                   config: SolverConfig | None = None) -> ExperimentReport:
    if reps < 2:
        raise ConfigError("simulate needs at least 2 replications")
    cfg = config or SolverConfig()
    t0 = time.perf_counter()
    tasks = [(d, n, B, r, tuple(rho_rule), seed, rep, cfg)
             for n in n_list for B in B_list for rep in range(reps)]
    reps_rows = _run_tasks(_simulate_one, tasks, threads)

    rows = []
    for n in sorted(set(n_list)):
        for B in sorted(set(B_list)):
            cell = sorted((x for x in reps_rows if x["n"] == n and x["B"] == B),
                          key=lambda x: x["replication"])
            rows.extend(cell)
            rows.append(_simulation_aggregate(cell))
    cfg_doc = {"d": d, "n_list": list(n_list), "B_list": list(B_list), "reps": reps,
               "r": r, "rho_rule": list(rho_rule)}
    return ExperimentReport("simulate", SIM_COLUMNS, rows, seed, cfg_doc,
                            time.perf_counter() - t0)


def _simulation_aggregate(cell):
    first = cell[0]
    erm = [x["risk_erm"] for x in cell]
    rob = [x["risk_rob"] for x in cell]
    m_erm, v_erm = _mean_var(erm)
    m_rob, v_rob = _mean_var(rob)
    t, p = paired_one_sided_t(rob, erm)
    flags = [x["coverage_flag"] for x in cell if "coverage_flag" in x]
    return {
        "experiment": "simulate", "n": first["n"], "d": first["d"], "B": first["B"],
        "rho": first["rho"], "constraint": first["constraint"], "replication": AGGREGATE,
        "status_erm": _status_summary(cell, "status_erm"),
        "status_rob": _status_summary(cell, "status_rob"),
        "risk_erm": m_erm, "risk_rob": m_rob, "var_erm": v_erm, "var_rob": v_rob,
        "coverage_flag": float(np.mean(flags)) if flags else None,
        "t_statistic": t, "p_value": p,
    }


# ---------------------------------------------------------------------------
# median of a three-point distribution


def median_population_risk(theta: float, delta: float) -> float:
    """Exact risk of |theta - x| - |x| under the {-1, 0, 1} distribution."""
    h = 0.5 * (1.0 - delta)
    return delta * abs(theta) + h * abs(theta - 1.0) + h * abs(theta + 1.0) - (1.0 - delta)


def _median_one(task):
    n, delta, rho, seed, rep, cfg = task
    data = gen_median_data(n, delta, seed, stream=(_MEDIAN, n, _float_key(delta), rep))
    model = LossModel.absolute_median()
    cset = ConstraintSet.box(-1.0, 1.0)
    th_erm, st_erm = _fit(RobustObjective(model, data, 0.0), cset, cfg)
    th_rob, st_rob = _fit(RobustObjective(model, data, rho), cset, cfg)
    r_erm = math.nan if th_erm is None else median_population_risk(float(th_erm[0]), delta)
    r_rob = math.nan if th_rob is None else median_population_risk(float(th_rob[0]), delta)
    bound = 45.0 * math.log(n) / n
    return {
        "experiment": "median", "n": n, "d": 1, "delta": delta, "rho": rho,
        "constraint": cset.describe(), "replication": rep,
        "status_erm": st_erm, "status_rob": st_rob,
        "theta_erm": None if th_erm is None else float(th_erm[0]),
        "theta_rob": None if th_rob is None else float(th_rob[0]),
        "risk_erm": r_erm, "risk_rob": r_rob,
        # excess risk over R(theta*) = 0; 1e-12 absorbs rounding of R(+-1) = delta
        "event_erm": bool(r_erm >= delta - 1e-12),
        "event_rob": bool(r_rob <= bound),
        "bound_rob": bound,
    }


MEDIAN_COLUMNS = [
    "experiment", "n", "d", "delta", "rho", "constraint", "replication",
    "status_erm", "status_rob", "theta_erm", "theta_rob", "risk_erm", "risk_rob",
    "var_erm", "var_rob", "event_erm", "event_rob", "bound_rob",
    "ci_erm_low", "ci_erm_high", "ci_rob_low", "ci_rob_high",
]


def run_median(n_list=(100,), reps=2000, seed=0, threads=1, delta=None, rho=None,
               config: SolverConfig | None = None) -> ExperimentReport:
    """ERM versus robust median estimation on the {-1, 0, 1} distribution.

    Defaults: ``delta = 1/sqrt(n)`` and ``rho = 3 log n``.
    """
    if reps < 100:
        raise ConfigError("median needs at least 100 replications")
    cfg = config or SolverConfig()
    t0 = time.perf_counter()
    tasks = []
    for n in n_list:
        dl = 1.0 / math.sqrt(n) if delta is None else float(delta)
        rh = 3.0 * math.log(n) if rho is None else float(rho)
        tasks += [(n, dl, rh, seed, rep, cfg) for rep in range(reps)]
    reps_rows = _run_tasks(_median_one, tasks, threads)

    rows = []
    for n in sorted(set(n_list)):
        cell = sorted((x for x in reps_rows if x["n"] == n), key=lambda x: x["replication"])
        rows.extend(cell)
        k_erm = sum(x["event_erm"] for x in cell)
        k_rob = sum(x["event_rob"] for x in cell)
        m_erm, v_erm = _mean_var([x["risk_erm"] for x in cell])
        m_rob, v_rob = _mean_var([x["risk_rob"] for x in cell])
        lo_e, hi_e = proportion_ci(k_erm, len(cell))
        lo_r, hi_r = proportion_ci(k_rob, len(cell))
        first = cell[0]
        rows.append({
            "experiment": "median", "n": n, "d": 1, "delta": first["delta"], "rho": first["rho"],
            "constraint": first["constraint"], "replication": AGGREGATE,
            "status_erm": _status_summary(cell, "status_erm"),
            "status_rob": _status_summary(cell, "status_rob"),
            "risk_erm": m_erm, "risk_rob": m_rob, "var_erm": v_erm, "var_rob": v_rob,
            "event_erm": k_erm / len(cell), "event_rob": k_rob / len(cell),
            "bound_rob": first["bound_rob"],
            "ci_erm_low": lo_e, "ci_erm_high": hi_e, "ci_rob_low": lo_r, "ci_rob_high": hi_r,
        })
    cfg_doc = {"n_list": list(n_list), "reps": reps, "delta": delta, "rho": rho}
    return ExperimentReport("median", MEDIAN_COLUMNS, rows, seed, cfg_doc,
                            time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# coverage of the certificate on the simulation problem


def _coverage_one(task):
    d, n, B, r, delta, seed, rep, cfg = task
    data = gen_uniform_cube(n, d, B, seed, stream=(_COVERAGE, n, _float_key(B), rep))
    v = np.full(d, r / (2.0 * math.sqrt(d)))
    model = LossModel.quad_linear_perturb(v)
    cset = ConstraintSet.l2_ball(r)
    rho = simulation_rho(("coverage", delta), d, n, r, B)
    obj = RobustObjective(model, data, rho)
    th, status = _fit(obj, cset, cfg)
    row = {
        "experiment": "coverage", "n": n, "d": d, "B": B, "delta": delta, "rho": rho,
        "constraint": cset.describe(), "replication": rep, "status_rob": status,
    }
    if th is None:
        row.update(risk_rob=math.nan, coverage_flag=False)
        return row
    cert = certificate(obj, th, quad_perturb_loss_range(r, d, B))
    risk = 0.5 * float((th - v) @ (th - v))
    row.update(risk_rob=risk, robust_value=cert.robust_value, certificate=cert.upper_bound,
               coverage_flag=bool(risk <= cert.upper_bound))
    return row


COVERAGE_COLUMNS = [
    "experiment", "n", "d", "B", "delta", "rho", "constraint", "replication", "status_rob",
    "risk_rob", "var_rob", "robust_value", "certificate", "coverage_flag", "ci_low", "ci_high",
]


def run_coverage(d=10, n=1000, reps=200, delta=0.05, B=1.0, r=10.0, seed=0, threads=1,
                 config: SolverConfig | None = None) -> ExperimentReport:
    if reps < 100:
        raise ConfigError("coverage needs at least 100 replications")
    cfg = config or SolverConfig()
    t0 = time.perf_counter()
    tasks = [(d, n, B, r, delta, seed, rep, cfg) for rep in range(reps)]
    rows = sorted(_run_tasks(_coverage_one, tasks, threads), key=lambda x: x["replication"])
    k = sum(x["coverage_flag"] for x in rows)
    lo, hi = proportion_ci(k, len(rows))
    m, var = _mean_var([x["risk_rob"] for x in rows])
    rows.append({
        "experiment": "coverage", "n": n, "d": d, "B": B, "delta": delta, "rho": rows[0]["rho"],
        "constraint": rows[0]["constraint"], "replication": AGGREGATE,
        "status_rob": _status_summary(rows, "status_rob"),
        "risk_rob": m, "var_rob": var,
        "robust_value": _mean_var([x.get("robust_value") for x in rows])[0],
        "certificate": _mean_var([x.get("certificate") for x in rows])[0],
        "coverage_flag": k / reps, "ci_low": lo, "ci_high": hi,
    })
    cfg_doc = {"d": d, "n": n, "reps": reps, "delta": delta, "B": B, "r": r}
    return ExperimentReport("coverage", COVERAGE_COLUMNS, rows, seed, cfg_doc,
                            time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# asymptotic bias in well-specified linear regression


def _regression_one(task):
    theta_star, n, rho, noise, seed, rep, cfg = task
    theta_star = np.asarray(theta_star)
    data = gen_linear_regression(n, theta_star, noise, seed, stream=(_REGRESSION, n, rep))
    model = LossModel.squared()
    th, status = _fit(RobustObjective(model, data, rho), ConstraintSet.unconstrained(), cfg)
    b = bias_term(model, data, theta_star).b_hat
    row = {"experiment": "regression_bias", "n": n, "d": theta_star.size, "rho": rho,
           "constraint": "none", "replication": rep, "status_rob": status}
    for j in range(theta_star.size):
        row[f"theta_{j}"] = math.nan if th is None else float(th[j])
        row[f"bias_{j}"] = float(b[j])
    return row


def run_regression_bias(theta_star=(1.0, -0.5, 0.25), n=2000, reps=200, rho=10.0, noise=1.0,
                        seed=0, threads=1, config: SolverConfig | None = None) -> ExperimentReport:
    """Robust least squares on Gaussian data; reports the mean estimate and its SE."""
    cfg = config or SolverConfig()
    theta_star = tuple(float(t) for t in theta_star)
    d = len(theta_star)
    t0 = time.perf_counter()
    tasks = [(theta_star, n, rho, noise, seed, rep, cfg) for rep in range(reps)]
    rows = sorted(_run_tasks(_regression_one, tasks, threads), key=lambda x: x["replication"])
    agg = {"experiment": "regression_bias", "n": n, "d": d, "rho": rho, "constraint": "none",
           "replication": AGGREGATE, "status_rob": _status_summary(rows, "status_rob")}
    zmax = 0.0
    for j in range(d):
        est = np.array([x[f"theta_{j}"] for x in rows])
        mean = float(est.mean())
        se = float(est.std(ddof=1) / math.sqrt(est.size))
        agg[f"theta_{j}"] = mean
        agg[f"se_{j}"] = se
        agg[f"bias_{j}"] = float(np.mean([x[f"bias_{j}"] for x in rows]))
        zmax = max(zmax, abs(mean - theta_star[j]) / se)
    agg["max_abs_z"] = zmax
    rows.append(agg)
    columns = ["experiment", "n", "d", "rho", "constraint", "replication", "status_rob"]
    columns += [f"theta_{j}" for j in range(d)] + [f"se_{j}" for j in range(d)]
    columns += [f"bias_{j}" for j in range(d)] + ["max_abs_z"]
    cfg_doc = {"theta_star": list(theta_star), "n": n, "reps": reps, "rho": rho, "noise": noise}
    return ExperimentReport("regression_bias", columns, rows, seed, cfg_doc,
                            time.perf_counter() - t0)
