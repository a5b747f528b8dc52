"""Large-p sweep: torsion, eigenvalue, thresholds and the solution u_p per p.

Each row of the sweep records the finite-p quantities whose limits are known
(``max phi_p -> max d``, ``lambda_p^(1/p) -> 1/max d``, ``k_p -> 1``,
``M_p -> max d``, ``m_p -> m_inf``, ``u_p -> d``); :func:`check_limits` compares
the last row with the limit values.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from .errors import ConfigError
from .fixed_point import FixedPointConfig, domain_data, solve_problem_P
from .geometry import Domain, distance_function, grad_sup, sup_norm
from .reporting import write_rows_csv
from .solver import SolverConfig
from .thresholds import (GradientEstimateConstants, ProblemParams, calibrate_c, compute_m_inf,
                         compute_mp_from_constants, compute_Mp_corollary_up, kp_lower_bound,
                         limit_predictions)

log = logging.getLogger(__name__)

DEFAULT_P_GRID = (4.0, 8.0, 16.0, 32.0, 64.0, 100.0)

COLUMNS = ["p", "torsion_sup", "torsion_err_vs_d", "lambda_p", "eig_limit_check", "kp_lower", "kp_upper",
           "M_p_lower", "M_p_upper", "m_p_lower", "m_p_upper", "ratio_lower", "ratio_upper", "m",
           "u_err", "super_err", "u_vs_super", "sandwich_ok", "outer_iterations", "verdict"]


@dataclass(frozen=True)
class SweepRow:
    p: float
    torsion_sup: float
    torsion_err_vs_d: float
    lambda_p: float
    eig_limit_check: float
    kp_lower: float
    kp_upper: float
    M_p_lower: float
    M_p_upper: float
    m_p_lower: float
    m_p_upper: float
    ratio_lower: float
    ratio_upper: float
    m: float = float("nan")
    u_err: float = float("nan")
    super_err: float = float("nan")
    u_vs_super: float = float("nan")
    sandwich_ok: bool = False
    outer_iterations: int = 0
    verdict: str = ""


@dataclass
class SweepTable:
    rows: list
    params: dict
    m_fraction: float
    d_sup: float
    c: float
    gamma: float
    kp_endpoint: str
    domain: str
    meta: dict = dc_field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self, path):
        return write_rows_csv([asdict(r) for r in self.rows], COLUMNS, path)

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "params": self.params, "m_fraction": self.m_fraction,
                "d_sup": self.d_sup, "c": self.c, "gamma": self.gamma, "kp_endpoint": self.kp_endpoint,
                "domain": self.domain}


def calibrated_constants(domain: Domain, p_grid, cfg: SolverConfig = SolverConfig(),
                         gamma: float = 2.5) -> GradientEstimateConstants:
    """Smallest c keeping the k_p interval non-empty at every p of the grid (p >= 2)."""
    grid = sorted(float(p) for p in p_grid if p >= 2)
    if not grid:
        raise ConfigError("calibration needs at least one p >= 2")
    d_sup = sup_norm(distance_function(domain))
    kls = []
    for p in grid:
        phi = domain_data(domain, p, cfg).torsion.field
        kls.append(kp_lower_bound(sup_norm(phi), grad_sup(phi), d_sup))
    return GradientEstimateConstants(calibrate_c(grid, kls, gamma), gamma)


def _row(domain, p, base, m_fraction, ge, cfg, fp, sandwich_slack):
    data = domain_data(domain, p, cfg)
    dist = data.distance
    d_sup = sup_norm(dist)
    phi = data.torsion.field
    phi_sup = sup_norm(phi)
    lam_p = data.eig.lambda_p
    params = ProblemParams(**{**base, "p": p, "m": 0.0})
    dc = data.constants(params.b, ge)
    M_lo = compute_Mp_corollary_up(params, dc, use_upper_kp=False)
    M_hi = compute_Mp_corollary_up(params, dc, use_upper_kp=True)
    mp_at_lo = compute_mp_from_constants(params, M_lo, dc)
    mp_at_hi = compute_mp_from_constants(params, M_hi, dc)
    m_inf = compute_m_inf(d_sup, params.lam, params.beta, params.q, params.a, params.l, params.alpha, params.s)
    m = m_fraction * min(mp_at_lo, mp_at_hi, m_inf)
    row = dict(
        p=p, torsion_sup=phi_sup, torsion_err_vs_d=float(np.max(np.abs(phi.flat - dist.flat))),
        lambda_p=lam_p, eig_limit_check=lam_p ** (1.0 / p) * d_sup, kp_lower=dc.kp_lower, kp_upper=dc.kp_upper,
        M_p_lower=M_lo, M_p_upper=M_hi, m_p_lower=min(mp_at_lo, mp_at_hi), m_p_upper=max(mp_at_lo, mp_at_hi),
        ratio_lower=(phi_sup / M_hi) ** p, ratio_upper=(phi_sup / M_lo) ** p, m=m)
    M = M_hi if fp.kp_endpoint == "upper" else M_lo
    try:
        rep = solve_problem_P(domain, params.with_(m=m), M, dc, cfg, fp)
    except Exception as exc:  # recorded per row; the sweep continues
        log.warning("sweep row p=%g failed: %s", p, exc)
        return SweepRow(**row, verdict=f"error: {exc}")
    u = rep.solution.flat
    sup = M / phi_sup * phi.flat
    slack = sandwich_slack * d_sup
    sandwich = bool(np.all(d_sup * data.eig.e_p.flat - slack <= u) and np.all(u <= sup + slack))
    verdict = rep.verdict
    if verdict == "converged" and not (rep.all_bounds_ok and rep.energy_ok):
        verdict = "converged_bounds_failed"
    return SweepRow(**row, u_err=float(np.max(np.abs(u - dist.flat))), super_err=float(np.max(np.abs(sup - dist.flat))),
                    u_vs_super=float(np.max(np.abs(u - sup))), sandwich_ok=sandwich,
                    outer_iterations=rep.outer_iterations, verdict=verdict)


def _row_task(args):
    return _row(*args)


def run_sweep(domain: Domain, lam: float, beta: float, q: float, a: float, b: float, l: float,
              alpha: float, s: float, m_fraction: float = 0.5, p_grid=DEFAULT_P_GRID,
              cfg: SolverConfig = SolverConfig(), ge: GradientEstimateConstants | None = None,
              fp: FixedPointConfig = FixedPointConfig(), workers: int = 1,
              sandwich_slack: float = 0.05) -> SweepTable:
    """One row per p. With ``ge=None`` the constant c is calibrated on the grid.

    ``m`` is ``m_fraction * min(m_p at both k_p endpoints, m_inf)``; rows are
    independent and may run in a process pool, the table is ordered by p.
    """
    grid = [float(p) for p in p_grid]
    if not grid or any(b2 <= a2 for a2, b2 in zip(grid, grid[1:])):
        raise ConfigError("p_grid must be strictly increasing")
    if not grid[0] > max(q, a + b, l):
        raise ConfigError(f"every p must exceed max(q, a+b, l) = {max(q, a + b, l)}")
    if not 0 < m_fraction < 1:
        raise ConfigError("m_fraction must lie in (0, 1)")
    base = dict(lam=lam, beta=beta, q=q, a=a, b=b, l=l, alpha=alpha, s=s)
    ProblemParams(**{**base, "p": grid[0]})
    d_sup = sup_norm(distance_function(domain))
    if ge is None:
        ge = calibrated_constants(domain, grid, cfg)
    tasks = [(domain, p, base, m_fraction, ge, cfg, fp, sandwich_slack) for p in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row_task, tasks))
    else:
        rows = [_row_task(t) for t in tasks]
    rows.sort(key=lambda r: r.p)
    return SweepTable(rows, base, m_fraction, d_sup, ge.c, ge.gamma, fp.kp_endpoint, domain.describe())


@dataclass(frozen=True)
class LimitTolerances:
    M_p_abs: float = 0.1
    ratio_abs: float = 0.1
    m_p_rel: float = 0.15
    kp_band: tuple = (0.9, 1.3)
    eig_band: tuple = (0.9, 1.1)
    u_err_rel: float = 0.1


@dataclass
class LimitsReport:
    p: float
    checks: list

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        return {"p": self.p, "passed": self.passed, "checks": self.checks}


def _strictly_decreasing(x) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.all(np.isfinite(x)) and np.all(np.diff(x) < 0))


def triangle_ok(row: SweepRow, tol: float = 1e-12) -> bool:
    """``|u - d| <= |u - sup| + |sup - d|`` on the reported columns."""
    if not np.isfinite(row.u_err):
        return False
    return bool(row.u_err <= row.u_vs_super + row.super_err + tol)


def check_limits(table: SweepTable, tolerances: LimitTolerances = LimitTolerances()) -> LimitsReport:
    """Compare the largest-p row with the limit values; one entry per limit."""
    pr = table.params
    last = table.rows[-1]
    d = table.d_sup
    M_inf, ratio_inf = limit_predictions(pr["lam"], pr["beta"], pr["q"], pr["a"], d)
    m_inf = compute_m_inf(d, pr["lam"], pr["beta"], pr["q"], pr["a"], pr["l"], pr["alpha"], pr["s"])
    t = tolerances
    M_dev = max(abs(last.M_p_lower - M_inf), abs(last.M_p_upper - M_inf))
    m_dev = max(abs(last.m_p_lower - m_inf), abs(last.m_p_upper - m_inf)) / m_inf
    checks = [
        {"name": "M_p -> max d", "value": [last.M_p_lower, last.M_p_upper], "target": M_inf,
         "tolerance": t.M_p_abs, "passed": M_dev <= t.M_p_abs},
        {"name": "(max phi_p / M_p)^p -> 1/(2(lam d^(q-1) + beta d^(a-1)))",
         "value": [last.ratio_lower, last.ratio_upper], "target": ratio_inf, "tolerance": t.ratio_abs,
         "passed": last.ratio_lower - t.ratio_abs <= ratio_inf <= last.ratio_upper + t.ratio_abs},
        {"name": "m_p -> m_inf", "value": [last.m_p_lower, last.m_p_upper], "target": m_inf,
         "tolerance": t.m_p_rel, "passed": m_dev <= t.m_p_rel},
        {"name": "k_p -> 1", "value": [last.kp_lower, last.kp_upper], "target": 1.0, "tolerance": list(t.kp_band),
         "passed": t.kp_band[0] <= last.kp_lower <= last.kp_upper <= t.kp_band[1]},
        {"name": "lambda_p^(1/p) max d -> 1", "value": last.eig_limit_check, "target": 1.0,
         "tolerance": list(t.eig_band), "passed": t.eig_band[0] <= last.eig_limit_check <= t.eig_band[1]},
        {"name": "max|u_p - d| -> 0", "value": last.u_err, "target": 0.0, "tolerance": t.u_err_rel * d,
         "passed": bool(last.u_err <= t.u_err_rel * d)},
        {"name": "max|phi_p - d| strictly decreasing", "value": table.column("torsion_err_vs_d").tolist(),
         "target": None, "tolerance": None, "passed": _strictly_decreasing(table.column("torsion_err_vs_d"))},
        {"name": "max|u_p - d| strictly decreasing", "value": table.column("u_err").tolist(),
         "target": None, "tolerance": None, "passed": _strictly_decreasing(table.column("u_err"))},
        {"name": "sandwich d_sup*e_p - slack <= u_p <= (M_p/max phi_p)*phi_p + slack", "value": last.sandwich_ok,
         "target": True, "tolerance": None, "passed": last.sandwich_ok},
        {"name": "triangle u_err <= u_vs_super + super_err",
         "value": [[r.u_err, r.u_vs_super + r.super_err] for r in table.rows], "target": None,
         "tolerance": 1e-12, "passed": all(triangle_ok(r) for r in table.rows)},
    ]
    for c in checks:
        c["passed"] = bool(c["passed"])
    return LimitsReport(last.p, checks)
