"""Command-line front end: ``plap {torsion,eigen,solve,region,thresholds,nonexist,sweep,selftest}``.

Configuration is layered: defaults, then ``--config FILE``, then ``--set
section.key=value``, then the dedicated flags. The output directory comes from
``--out``, else ``$PLAP_OUTPUT_DIR``, else ``output.dir``. Every run writes
``manifest.json`` next to its outputs.

Exit codes: 0 success, 1 configuration error, 2 solver non-convergence (reports
are still written), 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .asymptotics import calibrated_constants, check_limits, run_sweep
from .config import RunConfig, build_config, load_config, parse_assignments
from .errors import ConfigError, ConvergenceError, InvariantViolation
from .fixed_point import domain_data, nonexistence_probe, solve_problem_P
from .geometry import Domain, Field, grad_sup, sup_norm
from .reporting import human, versions, write_field_csv, write_json
from .solver import solve_p_poisson, torsion_exact_ball, torsion_function, torsion_grad_exact_ball, torsion_max_bound
from .spectral import check_lbep, principal_eigenpair
from .thresholds import (compute_m_inf, compute_mp_from_constants, compute_Mp_corollary_up, region_verdicts,
                         threshold_report)

log = logging.getLogger("plap_limits")

OUTPUT_ENV = "PLAP_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INVARIANT = 0, 1, 2, 3

# (flag, config key, help)
FLAGS = [
    ("--shape", "domain.shape", "interval, ball or rectangle"),
    ("--R", "domain.R", "ball radius"),
    ("--N", "domain.N", "ball dimension"),
    ("--bounds", "domain.bounds", "comma list: x_lo,x_hi[,y_lo,y_hi]"),
    ("--center", "domain.center", "ball center, comma list"),
    ("--resolution", "domain.resolution", "nodes per axis"),
    ("--p", "params.p", "exponent of the p-Laplacian"),
    ("--lam", "params.lam", "coefficient of u^(q-1)"),
    ("--beta", "params.beta", "coefficient of the convection term"),
    ("--m", "params.m", "coefficient of the exponential term ('auto' = m_fraction * min(m_p, m_inf))"),
    ("--q", "params.q", None), ("--a", "params.a", None), ("--b", "params.b", None),
    ("--l", "params.l", None), ("--alpha", "params.alpha", None), ("--s", "params.s", None),
    ("--c", "thresholds.c", "gradient-estimate constant ('auto' calibrates on the sweep grid)"),
    ("--gamma", "thresholds.gamma", "gradient-estimate exponent (>= 2.5)"),
    ("--kp-endpoint", "thresholds.kp_endpoint", "k_p endpoint used to build the box: upper or lower"),
    ("--M", "thresholds.M", "level M of the supersolution ('auto' = M_p)"),
    ("--p-grid", "sweep.p_grid", "comma list of p values"),
    ("--m-fraction", "sweep.m_fraction", "m = m_fraction * min(m_p, m_inf)"),
    ("--workers", "sweep.workers", "processes for the sweep"),
    ("--method", "solver.method", "auto, direct or newton"),
    ("--newton-tol", "solver.newton_tol", None),
    ("--formats", "output.formats", "comma list of csv,json"),
]


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="file of section.key = value lines")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. solver.eps_reg=1e-12")
    common.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV} and output.dir)")
    common.add_argument("-v", "--verbose", action="store_true")
    for flag, key, text in FLAGS:
        aliases = [flag, "--lambda"] if flag == "--lam" else [flag]
        common.add_argument(*aliases, dest=key, default=None, help=text or key)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plap", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    for name, text in [
        ("torsion", "torsion function phi_p: field CSV and sup/gradient report"),
        ("eigen", "principal eigenpair (lambda_p, e_p)"),
        ("solve", "solve the full problem for one p by Picard iteration"),
        ("region", "membership verdicts for the existence regions"),
        ("thresholds", "M_p, m_p, m_inf and the nonexistence bound"),
        ("nonexist", "nonexistence probe (beta = 0)"),
        ("sweep", "large-p sweep and limits report"),
        ("selftest", "run the built-in oracle checks"),
    ]:
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    lines = list(args.set)
    for _, key, _ in FLAGS:
        v = getattr(args, key)
        if v is not None:
            lines.append(f"{key}={v}")
    env = os.environ.get(OUTPUT_ENV)
    if args.out:
        lines.append(f"output.dir={args.out}")
    elif env:
        lines.append(f"output.dir={env}")
    return build_config(parse_assignments(lines), cfg)


class Run:
    """Output bookkeeping for one command."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.dir = Path(cfg.output.dir)
        self.outputs: list = []
        self.verdicts: dict = {}

    def json(self, obj, name: str):
        if "json" in self.cfg.output.formats:
            self.outputs.append(write_json(obj, self.dir / f"{name}.report.json").name)

    def field(self, f: Field, name: str):
        if "csv" in self.cfg.output.formats:
            self.outputs.append(write_field_csv(f, self.dir / f"{name}.field.csv").name)

    def manifest(self, exit_code: int):
        write_json({"command": self.command, "exit_code": exit_code, "config": self.cfg.to_dict(),
                    "config_text": self.cfg.to_text(), "versions": versions(), "verdicts": self.verdicts,
                    "outputs": sorted(self.outputs)}, self.dir / "manifest.json")


def say(label: str, value) -> None:
    print(f"{label:>28}: {human(value)}")


def _tag(p: float) -> str:
    return f"p{p:g}"


def _ball_dim(domain: Domain) -> int:
    return domain.dimension if domain.shape != "interval" else 1


def resolve_c(cfg: RunConfig, domain: Domain, extra_p=()) -> tuple:
    """``(c, calibrated)``; calibration covers the sweep grid plus ``extra_p``."""
    if cfg.thresholds.c is not None:
        return cfg.thresholds.c, False
    grid = {float(p) for p in (*cfg.sweep.p_grid, *extra_p)}
    return calibrated_constants(domain, grid, cfg.solver, cfg.thresholds.gamma).c, True


def _constants(cfg: RunConfig, p: float):
    c, calibrated = resolve_c(cfg, cfg.domain, (p,))
    data = domain_data(cfg.domain, p, cfg.solver)
    return data, data.constants(cfg.params.b, cfg.ge(c)), {"c": c, "c_calibrated": calibrated,
                                                           "gamma": cfg.thresholds.gamma}


def cmd_torsion(run: Run) -> int:
    cfg, d, p = run.cfg, run.cfg.domain, run.cfg.params.p
    sol = torsion_function(d, p, cfg.solver)
    phi = sol.field
    rep = {"p": p, "domain": d.describe(), "sup": sup_norm(phi), "grad_sup": grad_sup(phi),
           "residual": sol.residual_sup, "iterations": sol.iterations, "converged": sol.converged,
           "method": sol.method, "schwarz_bound": torsion_max_bound(p, _ball_dim(d), d.volume, d.unit_ball_volume)}
    if d.shape == "ball":
        rep["exact_sup"] = float(torsion_exact_ball(d.dimension, d.radius, p, 0.0))
        rep["exact_grad_sup"] = float(torsion_grad_exact_ball(d.dimension, d.radius, p, d.radius))
    run.field(phi, f"torsion_{_tag(p)}")
    run.json(rep, "torsion")
    run.verdicts["converged"] = sol.converged
    for k in ("sup", "grad_sup", "schwarz_bound", "exact_sup", "exact_grad_sup", "residual", "converged"):
        if k in rep:
            say(k, rep[k])
    return EXIT_OK if sol.converged else EXIT_CONVERGENCE


def cmd_eigen(run: Run) -> int:
    cfg, d, p = run.cfg, run.cfg.domain, run.cfg.params.p
    eig = principal_eigenpair(d, p, cfg.solver)
    phi_sup = sup_norm(domain_data(d, p, cfg.solver).torsion.field)
    lbep = check_lbep(eig, phi_sup, p)
    rep = {"p": p, "domain": d.describe(), "lambda_p": eig.lambda_p, "lambda_p_root_p": eig.lambda_p ** (1 / p),
           "residual": eig.rayleigh_residual, "iterations": eig.iterations, "converged": eig.converged,
           "lbep": lbep, "lbep_value": eig.lambda_p ** (1 / (p - 1)) * phi_sup}
    run.field(eig.e_p, f"eigenfunction_{_tag(p)}")
    run.json(rep, "eigen")
    run.verdicts.update(converged=eig.converged, lbep=lbep)
    for k in ("lambda_p", "lambda_p_root_p", "residual", "iterations", "lbep_value", "lbep"):
        say(k, rep[k])
    if not lbep:
        raise InvariantViolation("lambda_p^(1/(p-1)) * max phi_p < 1")
    return EXIT_OK if eig.converged else EXIT_CONVERGENCE


def _level_and_m(cfg: RunConfig, dc, p: float) -> tuple:
    pc = cfg.params
    params = pc.problem(p=p)
    up = cfg.thresholds.kp_endpoint == "upper"
    M = cfg.thresholds.M
    if M is None:
        if not p > max(params.q, params.r, params.l):
            raise ConfigError("M_p needs p > max(q, a+b, l); set thresholds.M explicitly")
        M = compute_Mp_corollary_up(params, dc, up)
    m = pc.m
    if m is None:
        m_p = compute_mp_from_constants(params, M, dc)
        m_inf = compute_m_inf(dc.d_sup, pc.lam, pc.beta, pc.q, pc.a, pc.l, pc.alpha, pc.s)
        m = cfg.sweep.m_fraction * min(m_p, m_inf)
    return params.with_(m=m), M


def cmd_solve(run: Run) -> int:
    cfg, d, p = run.cfg, run.cfg.domain, run.cfg.params.p
    data, dc, cinfo = _constants(cfg, p)
    params, M = _level_and_m(cfg, dc, p)
    rep = solve_problem_P(d, params, M, dc, cfg.solver, cfg.fixed_point)
    out = rep.to_dict()
    out.update(params=params.as_dict(), domain=d.describe(), constants=dc.as_dict(), **cinfo)
    if rep.solution is not None:
        out["u_err_vs_d"] = float(np.max(np.abs(rep.solution.flat - data.distance.flat)))
        run.field(rep.solution, f"solution_{_tag(p)}")
    run.json(out, "solve")
    checks_ok = rep.all_bounds_ok and bool(rep.energy_ok)
    run.verdicts.update(verdict=rep.verdict, bounds_ok=rep.bounds_ok, energy_ok=rep.energy_ok)
    for k in ("verdict", "M", "outer_iterations", "fixed_point_residual", "pde_residual", "grad_sup", "grad_cap",
              "energy_solution", "energy_distance", "u_err_vs_d"):
        if out.get(k) is not None:
            say(k, out[k])
    say("m", params.m)
    say("bounds_ok", str(rep.bounds_ok))
    if rep.verdict != "converged":
        return EXIT_CONVERGENCE
    if not checks_ok:
        raise InvariantViolation(f"converged solution fails its checks: bounds {rep.bounds_ok}, "
                                 f"energy {rep.energy_ok}")
    return EXIT_OK


def cmd_region(run: Run) -> int:
    cfg, p = run.cfg, run.cfg.params.p
    _, dc, cinfo = _constants(cfg, p)
    params = cfg.params.problem(p=p)
    verdicts = region_verdicts(params, dc, cfg.thresholds.M)
    run.json({"params": params.as_dict(), "M": cfg.thresholds.M, "regions": verdicts, **cinfo}, "region")
    run.verdicts["regions"] = verdicts
    for end, v in verdicts.items():
        for name, val in v.items():
            say(f"{end} {name}", "n/a" if val is None else val)
    return EXIT_OK


def cmd_thresholds(run: Run) -> int:
    cfg, p = run.cfg, run.cfg.params.p
    _, dc, cinfo = _constants(cfg, p)
    params = cfg.params.problem(p=p)
    rep = threshold_report(params, dc)
    rep.update(cinfo)
    run.json(rep, "thresholds")
    run.verdicts["m_inf"] = rep["m_inf"]
    say("A_p", dc.A_p)
    say("k_p interval", [dc.kp_lower, dc.kp_upper])
    say("M_p (k_p lower, upper)", [rep["M_p"]["kp_lower"], rep["M_p"]["kp_upper"]])
    say("m_p (k_p lower, upper)", [rep["m_p"]["kp_lower"], rep["m_p"]["kp_upper"]])
    say("m_inf", rep["m_inf"])
    say("nonexistence bound", "n/a" if rep["nonexistence_bound"] is None else rep["nonexistence_bound"])
    say("c", cinfo["c"])
    return EXIT_OK


def cmd_nonexist(run: Run) -> int:
    cfg, p = run.cfg, run.cfg.params.p
    if cfg.params.m is None:
        raise ConfigError("the nonexistence probe needs an explicit params.m")
    params = cfg.params.problem(p=p)
    res = nonexistence_probe(cfg.domain, params, cfg.solver)
    run.json({"params": params.as_dict(), "domain": cfg.domain.describe(), **res.to_dict()}, "nonexist")
    run.verdicts["probe"] = res.verdict
    say("verdict", res.verdict)
    say("iterations", res.iterations)
    say("last sup", res.sup_trace[-1])
    say("nonexistence bound", res.threshold)
    return EXIT_OK


def cmd_sweep(run: Run) -> int:
    cfg, pc = run.cfg, run.cfg.params
    ge = None if cfg.thresholds.c is None else cfg.ge(cfg.thresholds.c)
    table = run_sweep(cfg.domain, pc.lam, pc.beta, pc.q, pc.a, pc.b, pc.l, pc.alpha, pc.s,
                      cfg.sweep.m_fraction, cfg.sweep.p_grid, cfg.solver, ge, cfg.fixed_point, cfg.sweep.workers)
    limits = check_limits(table)
    if "csv" in cfg.output.formats:
        run.outputs.append(table.to_csv(run.dir / "sweep.sweep.csv").name)
    run.json({"table": table.to_dict(), "limits": limits.to_dict()}, "limits")
    run.verdicts.update(rows={f"{r.p:g}": r.verdict for r in table.rows}, limits_passed=limits.passed)
    print(f"{'p':>6} {'max|phi-d|':>12} {'lam^(1/p)d':>12} {'M_p':>25} {'m':>12} {'max|u-d|':>12}  verdict")
    for r in table.rows:
        print(f"{r.p:>6g} {r.torsion_err_vs_d:>12.6g} {r.eig_limit_check:>12.6g} "
              f"{'[' + format(r.M_p_lower, '.6g') + ', ' + format(r.M_p_upper, '.6g') + ']':>25} "
              f"{r.m:>12.6g} {r.u_err:>12.6g}  {r.verdict}")
    for c in limits.checks:
        print(f"  [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}")
    if any(r.verdict != "converged" for r in table.rows):
        return EXIT_CONVERGENCE
    return EXIT_OK


def selftest_checks(cfg: RunConfig) -> list:
    """Quick oracle checks: ``[(name, passed, detail)]``."""
    out = []
    scfg = cfg.solver
    ball = Domain.ball(1.0, 2)
    for p in (2.0, 3.0, 5.0):
        phi = torsion_function(ball, p, scfg).field
        exact = float(torsion_exact_ball(2, 1.0, p, 0.0))
        out.append((f"radial torsion max, p={p:g}", abs(sup_norm(phi) - exact) <= 1e-3,
                    f"{sup_norm(phi):.10g} vs {exact:.10g}"))
        g_exact = float(torsion_grad_exact_ball(2, 1.0, p, 1.0))
        out.append((f"radial torsion gradient, p={p:g}", abs(grad_sup(phi) - g_exact) <= 1e-3,
                    f"{grad_sup(phi):.10g} vs {g_exact:.10g}"))
    iv = Domain.interval()
    for p in (2.0, 5.0):
        g = torsion_function(iv, p, scfg).field
        u1 = solve_p_poisson(iv, p, g, scfg).field
        u4 = solve_p_poisson(iv, p, g * 4.0, scfg).field
        err = float(np.max(np.abs(u4.flat - 4.0 ** (1 / (p - 1)) * u1.flat)))
        out.append((f"homogeneity, p={p:g}", err <= 1e-8 * sup_norm(u1), f"{err:.3e}"))
    rng = np.random.default_rng(0)
    x = iv.mesh.coords[0]
    for p in (2.0, 10.0):
        g1 = np.clip(np.sin(np.pi * x) * rng.uniform(0.2, 0.8), 0, None)
        g2 = np.minimum(g1 + rng.uniform(0, 0.2, x.shape), 1.0)
        u1 = solve_p_poisson(iv, p, Field(iv, g1), scfg).field
        u2 = solve_p_poisson(iv, p, Field(iv, g2), scfg).field
        worst = float(np.max(u1.flat - u2.flat))
        out.append((f"comparison, p={p:g}", worst <= 1e-8, f"max(u1-u2)={worst:.3e}"))
    eig = principal_eigenpair(iv, 2.0, scfg)
    out.append(("interval eigenvalue p=2 vs pi^2", abs(eig.lambda_p / math.pi ** 2 - 1) <= 1e-3,
                f"{eig.lambda_p:.10g}"))
    phi_sup = sup_norm(torsion_function(iv, 2.0, scfg).field)
    out.append(("lambda_p^(1/(p-1)) max phi_p >= 1", check_lbep(eig, phi_sup, 2.0),
                f"{eig.lambda_p * phi_sup:.10g}"))
    return out


def cmd_selftest(run: Run) -> int:
    checks = selftest_checks(run.cfg)
    for name, ok, detail in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    run.json({"checks": [{"name": n, "passed": bool(ok), "detail": d} for n, ok, d in checks]}, "selftest")
    run.verdicts["selftest_passed"] = all(ok for _, ok, _ in checks)
    return EXIT_OK if run.verdicts["selftest_passed"] else EXIT_INVARIANT


COMMANDS = {"torsion": cmd_torsion, "eigen": cmd_eigen, "solve": cmd_solve, "region": cmd_region,
            "thresholds": cmd_thresholds, "nonexist": cmd_nonexist, "sweep": cmd_sweep, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(cfg, args.command)
    try:
        code = COMMANDS[args.command](run)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        code = EXIT_CONVERGENCE
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        code = EXIT_INVARIANT
    run.verdicts["exit_code"] = code
    run.manifest(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
