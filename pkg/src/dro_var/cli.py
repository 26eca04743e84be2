"""Command-line entry point: ``dro-var {simulate,median,coverage,fit,probe}``.

Exit codes: 0 success, 2 I/O, 3 parse, 4 config/input, 5 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import experiments as ex
from .chi2_ball import worst_case_distribution
from .data import make_rng, read_dataset
from .errors import ConfigError, DataIOError, DroVarError, ParseError
from .geometry import parse_constraint
from .losses import LossKind, LossModel
from .metrics import binary_report
from .optimizer import SolverConfig, minimize
from .risk import RobustObjective, certificate


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(not v.is_integer() for v in vals):
        raise ConfigError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _clean(obj):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump_json(doc) -> str:
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def _emit(text: str, out: str | None):
    """Write ``text`` atomically to ``out`` (stdout when None)."""
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".dro-var-", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except OSError as exc:
        raise DataIOError(f"cannot write {out}: {exc.strerror or exc}") from exc


def _emit_report(report: ex.ExperimentReport, out: str | None):
    text = report.to_json() if out and out.endswith(".json") else report.to_csv()
    _emit(text, out)
    print(f"{report.experiment}: {len(report.rows)} rows in {report.wall_time:.2f}s",
          file=sys.stderr)


def _solver_config(args) -> SolverConfig:
    kw = {}
    if args.max_iter is not None:
        kw["max_iter"] = args.max_iter
    if args.tol is not None:
        kw["grad_map_tol"] = args.tol
    return SolverConfig(**kw)


def _rho_rule(args):
    if args.rho is not None:
        return ("fixed", args.rho)
    name, _, val = args.rho_rule.partition(":")
    vals = _floats(val)
    if name == "fixed" and len(vals) == 1:
        return ("fixed", vals[0])
    if name == "coverage" and len(vals) <= 1:
        return ("coverage", vals[0] if vals else 0.05)
    raise ConfigError(f"bad rho rule {args.rho_rule!r} (use fixed:RHO or coverage:DELTA)")


def cmd_simulate(args):
    report = ex.run_simulation(
        d=args.d, n_list=_ints(args.n), B_list=_floats(args.B), reps=args.reps, r=args.r,
        rho_rule=_rho_rule(args), seed=args.seed, threads=args.threads,
        config=_solver_config(args),
    )
    _emit_report(report, args.out)


def cmd_median(args):
    report = ex.run_median(
        n_list=_ints(args.n), reps=args.reps, seed=args.seed, threads=args.threads,
        delta=args.delta, rho=args.rho, config=_solver_config(args),
    )
    _emit_report(report, args.out)


def cmd_coverage(args):
    report = ex.run_coverage(
        d=args.d, n=args.n, reps=args.reps, delta=args.delta, B=args.B, r=args.r,
        seed=args.seed, threads=args.threads, config=_solver_config(args),
    )
    _emit_report(report, args.out)


def cmd_fit(args):
    data = read_dataset(args.data, args.format)
    if args.add_bias:
        data = data.with_bias()
    kind = LossKind(args.loss)
    if kind is LossKind.QUAD_LINEAR_PERTURB:
        raise ConfigError("fit supports logistic, squared and absolute_median losses")
    model = LossModel(kind)
    cset = parse_constraint(args.constraint)
    rho = 0.0 if args.rho is None else args.rho
    obj = RobustObjective(model, data, rho)
    res = minimize(obj, cset, _solver_config(args))
    cert = certificate(obj, res.theta_hat, args.M)

    theta = res.theta_hat
    nz = np.flatnonzero(theta)
    doc = {
        "loss": kind.value,
        "rho": rho,
        "constraint": cset.describe(),
        "n": data.n,
        "d": data.d,
        "theta": {"index_base": 1, "entries": [[int(j) + 1, float(theta[j])] for j in nz]},
        "train": {"objective": res.objective},
        "certificate": cert.to_dict(),
        "telemetry": res.telemetry(),
    }
    if kind is LossKind.LOGISTIC:
        doc["train"].update(binary_report(model, theta, data).to_dict())
    if data.metadata.get("bias_column") is not None:
        doc["bias_column"] = data.metadata["bias_column"] + 1
    _emit(_dump_json(doc), args.out)


def _read_z(args) -> np.ndarray:
    sources = sum(x is not None for x in (args.z, args.z_file, args.random))
    if sources != 1:
        raise ConfigError("give exactly one of --z, --z-file, --random")
    if args.z is not None:
        return np.array(_floats(args.z))
    if args.z_file is not None:
        try:
            with open(args.z_file, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise DataIOError(f"cannot read {args.z_file}: {exc.strerror or exc}") from exc
        try:
            return np.array([float(t) for t in text.replace(",", " ").split()])
        except ValueError:
            raise ParseError(f"non-numeric entry in {args.z_file}") from None
    if args.random < 1:
        raise ConfigError("--random needs a positive size")
    return make_rng(args.seed, 0xB0B).standard_normal(args.random)


def cmd_probe(args):
    z = _read_z(args)
    tol = 1e-10 if args.tol is None else args.tol
    t0 = time.perf_counter()
    sol = worst_case_distribution(z, args.rho, tol)
    elapsed = time.perf_counter() - t0
    doc = sol.to_dict(include_weights=not args.omit_weights)
    doc["rho"] = args.rho
    doc["wall_time"] = elapsed
    _emit(_dump_json(doc), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dro-var", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--max-iter", type=int, default=None)
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: $DRO_VAR_THREADS or 1)")

    s = sub.add_parser("simulate", parents=[common], help="quadratic-loss simulation")
    s.add_argument("--d", type=int, default=10)
    s.add_argument("--n", default="100,1000")
    s.add_argument("--B", default="0.01,1")
    s.add_argument("--r", type=float, default=10.0)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--rho", type=float, default=None, help="fixed radius (overrides --rho-rule)")
    s.add_argument("--rho-rule", default="coverage:0.05", help="coverage:DELTA or fixed:RHO")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("median", parents=[common], help="three-point median experiment")
    m.add_argument("--n", default="100")
    m.add_argument("--reps", type=int, default=2000)
    m.add_argument("--delta", type=float, default=None, help="default 1/sqrt(n)")
    m.add_argument("--rho", type=float, default=None, help="default 3 log n")
    m.set_defaults(func=cmd_median)

    c = sub.add_parser("coverage", parents=[common], help="certificate coverage")
    c.add_argument("--d", type=int, default=10)
    c.add_argument("--n", type=int, default=1000)
    c.add_argument("--reps", type=int, default=200)
    c.add_argument("--delta", type=float, default=0.05)
    c.add_argument("--B", type=float, default=1.0)
    c.add_argument("--r", type=float, default=10.0)
    c.set_defaults(func=cmd_coverage)

    f = sub.add_parser("fit", parents=[common], help="single robust fit on a dataset")
    f.add_argument("data")
    f.add_argument("--format", choices=("svmlight", "csv"), default="svmlight")
    f.add_argument("--loss", choices=("logistic", "squared", "absolute_median"), default="logistic")
    f.add_argument("--rho", type=float, default=None)
    f.add_argument("--constraint", default="none", help="none, l2:R, l1:R, en:A1,A2,R, box:LO,HI")
    f.add_argument("--add-bias", action="store_true")
    f.add_argument("--M", type=float, default=None, help="a-priori loss range for the certificate")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("probe", parents=[common], help="solve one worst-case problem")
    pr.add_argument("--z", default=None, help="comma-separated losses")
    pr.add_argument("--z-file", default=None)
    pr.add_argument("--random", type=int, default=None, help="use N standard normal losses")
    pr.add_argument("--rho", type=float, required=True)
    pr.add_argument("--omit-weights", action="store_true")
    pr.set_defaults(func=cmd_probe)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is None:
            args.threads = ex.default_threads()
        args.func(args)
    except DroVarError as exc:
        print(f"dro-var: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
