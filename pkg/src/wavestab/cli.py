"""Command line: ``wavestab {kernel,simulate,resolvent,verify,sweep} CONFIG``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance failure (a run finished but missed its target).
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .coeffs import CoefficientProfile, eval_scalars, remove_first_order
from .config import DEFAULT_CONFIG, load_config, parse_config
from .energy import fit_decay
from .exceptions import (
    ConfigError,
    ContractError,
    ConvergenceError,
    DomainError,
    FitError,
    GridError,
    IterationLimitError,
    NoBracketError,
    NumericalError,
    ParameterError,
    ToleranceError,
)
from .io import check_writable, write_csv, write_json
from .kernel import TriangularGrid, convergence_orders, kernel_table, solve_kernels, trace_table
from .simulate import Disturbance, InitialCondition, SimConfig, run_closed_loop, run_target_direct

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 2, 3, 4

_CONFIG_ERRORS = (ConfigError, ParameterError, ContractError, GridError, DomainError)
_NUMERICAL_ERRORS = (NumericalError, IterationLimitError, ConvergenceError, NoBracketError, ToleranceError)


# builders -----------------------------------------------------------------------

def build_profile(s, N=None):
    N = s.get("grid", "N", int) if N is None else N
    L = s.get("profile", "L")
    lam, beta = s.get("profile", "lambda"), s.get("profile", "beta")
    gamma = s.get("profile", "gamma", default=0.0)
    if s.has("profile", "alpha"):
        p = CoefficientProfile.from_functions(L, N, lam, beta, s.get("profile", "alpha"), gamma)
        p, _ = remove_first_order(p)
        return p
    return CoefficientProfile.from_functions(L, N, lam, beta, None, gamma)


def build_disturbance(s):
    kind = s.get("disturbance", "kind", str, "zero")
    if kind == "zero":
        return Disturbance()
    P = s.get("disturbance", "amplitude", default=s.get("run", "P"))
    omega = s.get("disturbance", "omega", default=2.0 * math.pi)
    mu = s.get("disturbance", "mu", default=0.0)
    table = None
    if kind == "custom_table":
        table = (s.get("disturbance", "times", list), s.get("disturbance", "values", list))
    return Disturbance(kind, P, omega, mu, table)


def build_sim_config(s):
    init = InitialCondition(
        s.get("init", "shape", str, "bump"),
        s.get("init", "amplitude", default=1.0),
        s.get("init", "mode", int, 1),
        s.get("init", "frame", str, "target"),
    )
    return SimConfig(
        case=s.get("run", "case", str),
        profile=build_profile(s),
        d=s.get("run", "d"),
        P=s.get("run", "P"),
        disturbance=build_disturbance(s),
        N=s.get("grid", "N", int),
        T=s.get("horizon", "T"),
        cfl=s.get("horizon", "cfl", default=0.5),
        eps=s.get("run", "eps", default=1e-3 * max(s.get("run", "P"), 1.0)),
        init=init,
        stride=s.get("horizon", "stride", int, 10),
    )


def _sigmas(s):
    vals = s.get("resolvent", "sigmas", list, [10.0**-k for k in range(1, 7)])
    arr = np.array(vals)
    if arr.size < 3 or np.any(arr <= 0) or np.any(np.diff(arr) >= 0):
        raise ConfigError("[resolvent] sigmas must be >= 3 positive, strictly decreasing values",
                          key="resolvent.sigmas")
    return arr


def build_resolvent_problem(s):
    from .acceptance import random_smooth
    from .resolvent import ResolventProblem

    N = s.get("resolvent", "N", int, 2000)
    L = s.get("profile", "L")
    d = s.get("run", "d")
    x = np.linspace(0.0, L, N + 1)
    kind = s.get("resolvent", "data", str, "zero")
    if kind == "zero":
        m, n = np.zeros_like(x), np.zeros_like(x)
    elif kind == "constant":
        if s.get("resolvent", "m", default=0.0) != 0.0:
            raise ConfigError("[resolvent] m must be 0 for constant data (m(0) = 0)", key="resolvent.m")
        m, n = np.zeros_like(x), np.full_like(x, s.get("resolvent", "n", default=0.0))
    elif kind == "random":
        rng = np.random.default_rng(s.get("run", "seed", int, 0))
        m, n = random_smooth(rng, x, L), random_smooth(rng, x, L)
    else:
        raise ConfigError(f"[resolvent] data must be zero, constant or random, got {kind!r}", key="resolvent.data")
    if s.has("resolvent", "hL"):
        hL = s.get("resolvent", "hL")
    else:
        hL = eval_scalars(build_profile(s), d).hL
    return ResolventProblem(s.get("run", "case", str), m, n, d, s.get("run", "P"), hL, 1e-1, L), kind


# commands -------------------------------------------------------------------------

def cmd_kernel(s, out, force=False):
    N = s.get("grid", "N", int)
    d = s.get("run", "d")
    refine = s.get("grid", "refine", int, 8)
    ladder = [int(v) for v in s.get("grid", "ladder", list, [32, 64, 128])]
    files = [out / "kernel.csv", out / "traces.csv", out / "convergence.csv"]
    check_writable(files, force)
    rows = []
    for M in ladder:
        prof = build_profile(s, M)
        kp = solve_kernels(eval_scalars(prof, d), TriangularGrid(prof.L, M), refine=refine)
        rows.append((M, kp.residual[0], kp.residual[1], kp.iterations))
    prof = build_profile(s)
    kp = solve_kernels(eval_scalars(prof, d), TriangularGrid(prof.L, N), refine=refine)
    write_csv(files[0], kernel_table(kp), force=force)
    cols, header = trace_table(kp)
    write_csv(files[1], cols, header, force=force)
    ratio = lambda a, b: a / b if b > 0 else math.nan  # noqa: E731
    conv = {
        "M": [r[0] for r in rows],
        "rk": [r[1] for r in rows],
        "rs": [r[2] for r in rows],
        "ratio_k": [math.nan] + [ratio(a[1], b[1]) for a, b in zip(rows, rows[1:])],
        "ratio_s": [math.nan] + [ratio(a[2], b[2]) for a, b in zip(rows, rows[1:])],
        "iterations": [r[3] for r in rows],
    }
    ok_k, flag_k = convergence_orders(conv["rk"])
    ok_s, flag_s = convergence_orders(conv["rs"])
    conv["order_k"] = [math.nan] + list(ok_k)
    conv["order_s"] = [math.nan] + list(ok_s)
    write_csv(files[2], conv, {"low_order_flag": flag_k or flag_s}, force=force)
    if flag_k or flag_s:
        print("kernel: warning: observed convergence order below 1.5", file=sys.stderr)
    print(f"kernel: M={N}, residual rk={kp.residual[0]:.3e} rs={kp.residual[1]:.3e}, {kp.iterations} iterations")
    return EXIT_OK


def _simulate(s, out, force=False):
    cfg = build_sim_config(s)
    files = [out / "trajectory.csv", out / "report.json"]
    check_writable(files, force)
    mode = s.get("simulate", "mode", str, "plant")
    if mode not in ("plant", "target"):
        raise ConfigError(f"[simulate] mode must be plant or target, got {mode!r}", key="simulate.mode")
    slack = s.get("simulate", "slack", default=0.2)
    tr = run_closed_loop(cfg) if mode == "plant" else run_target_direct(cfg)
    write_csv(files[0], tr.columns(), force=force)
    target = -2.0 * cfg.d + slack
    report = {"case": cfg.case, "mode": mode, "d": cfg.d, "target_slope": target,
              "initial_boundary_residual": tr.init_residual}
    if tr.V[0] == 0.0:
        report.update(slope=None, slope_status="undefined: zero trajectory", passed=True)
    else:
        try:
            rep = fit_decay(tr)
        except FitError as exc:
            report.update(slope=None, slope_status=f"undefined: {exc}", passed=False)
        else:
            report.update(rep.to_dict())
            report.update(slope_status="fitted", passed=bool(rep.slope <= target))
    write_json(files[1], report, force=force)
    return report


def cmd_simulate(s, out, force=False):
    report = _simulate(s, out, force)
    slope = report["slope"]
    shown = "undefined" if slope is None else f"{slope:.4f}"
    print(f"simulate: {report['case']} {report['mode']} slope={shown} (target <= {report['target_slope']:.3f})")
    if slope is None and report["passed"]:
        return EXIT_OK
    if slope is None:
        return EXIT_NUMERICAL
    return EXIT_OK if report["passed"] else EXIT_ACCEPTANCE


def cmd_resolvent(s, out, force=False):
    from .resolvent import resolvent_limit

    prob, kind = build_resolvent_problem(s)
    sigmas = _sigmas(s)
    files = [out / "sweep.csv", out / "verdict.json"]
    check_writable(files, force)
    lim = resolvent_limit(prob, sigmas)
    write_csv(files[0], lim.columns(), force=force)
    verdict = {
        "case": prob.case, "data": kind, "b": lim.b, "argument": lim.arg, "inclusion_ok": lim.inclusion_ok,
        "cauchy_ratio": lim.cauchy_ratio, "uniform_ok": lim.uniform_ok,
        "max_bc_residual": float(max(r[4] for r in lim.rows)), "hL": prob.hL,
    }
    ok = lim.inclusion_ok and lim.uniform_ok
    verdict["passed"] = bool(ok)
    write_json(files[1], verdict, force=force)
    print(f"resolvent: {prob.case} {kind} b={lim.b:.6g} argument={lim.arg:.3g} inclusion_ok={lim.inclusion_ok}")
    return EXIT_OK if ok else EXIT_ACCEPTANCE


def cmd_verify(s, out, force=False, only=None):
    from .acceptance import run_acceptance

    path = out / "verdict.json"
    check_writable([path], force)
    seed = s.get("run", "seed", int, 0)
    try:
        verdicts, runtimes = run_acceptance(only, seed=seed)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    write_json(path, verdicts, force=force)
    for cid, v in verdicts.items():
        flag = "PASS" if v["passed"] else "FAIL"
        print(f"criterion {cid:>2} [{v['name']}]: {flag} ({runtimes[cid]:.1f} s)")
    return EXIT_OK if all(v["passed"] for v in verdicts.values()) else EXIT_ACCEPTANCE


def _sweep_one(args):
    text, overrides, out, force = args
    s = parse_config(text, overrides)
    try:
        rep = _simulate(s, Path(out), force)
    except _NUMERICAL_ERRORS as exc:
        return {"slope": None, "C_empirical": None, "passed": False, "error": type(exc).__name__}
    return {"slope": rep["slope"], "C_empirical": rep.get("C_empirical"), "passed": rep["passed"], "error": ""}


def cmd_sweep(s, out, force=False):
    key = s.get("sweep", "key", str)
    if "." not in key:
        raise ConfigError("[sweep] key must look like section.key", key="sweep.key")
    values = s.get("sweep", "values", list)
    workers = s.get("sweep", "workers", int, 1)
    summary = out / "sweep.csv"
    check_writable([summary], force)
    text = s.text()
    jobs = [(text, [f"{key}={v!r}"], str(out / f"run_{i:03d}"), force) for i, v in enumerate(values)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    nan = lambda v: math.nan if v is None else v  # noqa: E731
    write_csv(summary, {
        "run": list(range(len(values))), "value": values,
        "slope": [nan(r["slope"]) for r in results],
        "C_empirical": [nan(r["C_empirical"]) for r in results],
        "passed": [r["passed"] for r in results],
    }, force=force)
    for v, r in zip(values, results):
        print(f"sweep: {key}={v!r} slope={r['slope']} passed={r['passed']} {r['error']}")
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_ACCEPTANCE


# entry point ----------------------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(prog="wavestab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("kernel", "solve and tabulate the gain kernels"),
                        ("simulate", "closed-loop or target-direct run with energy report"),
                        ("resolvent", "sigma sweep of the regularized resolvent problem"),
                        ("verify", "run the acceptance battery"),
                        ("sweep", "fan out simulate runs over one config key"),
                        ("init", "write the default configuration")):
        p = sub.add_parser(name, help=help_)
        if name == "init":
            p.add_argument("path", help="where to write the config")
            p.add_argument("--force", action="store_true", help="overwrite an existing file")
            continue
        p.add_argument("config", nargs="?", default=None, help="INI config (defaults built in)")
        p.add_argument("-o", "--out", default="out", help="output directory (default: out)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config value; repeatable")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        if name == "verify":
            p.add_argument("--only", action="append", default=None, metavar="ID",
                           help="criterion id to run; repeatable or comma separated")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "init":
            check_writable([args.path], args.force)
            Path(args.path).write_text(DEFAULT_CONFIG)
            return EXIT_OK
        if args.config is None:
            s = parse_config(DEFAULT_CONFIG, args.set)
        else:
            s = load_config(args.config, args.set)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "verify":
            only = None
            if args.only:
                only = [t.strip() for item in args.only for t in item.split(",") if t.strip()]
            return cmd_verify(s, out, args.force, only)
        fn = {"kernel": cmd_kernel, "simulate": cmd_simulate, "resolvent": cmd_resolvent, "sweep": cmd_sweep}
        return fn[args.command](s, out, args.force)
    except _CONFIG_ERRORS as exc:
        print(f"wavestab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"wavestab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
