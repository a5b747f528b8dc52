"""Sub/supersolution fixed-point scheme for the full problem.

The map ``T`` freezes the convection and exponential terms at ``u`` and
returns the unique solution ``U`` of ``-Delta_p U = lam U^(q-1) + h(u)``. Fixed
points of ``T`` inside the box ``F`` (between the sub- and supersolution, with
a gradient cap) solve the full problem. Existence of a fixed point is a
theorem; convergence of the plain iteration ``u <- T(u)`` is not, so the
outer loop reports what it observed instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, InvariantViolation
from .geometry import (Domain, EnergySpec, Field, distance_function, energy_Ip, gradient_magnitude,
                       grad_sup, sup_norm)
from .solver import PoissonSolution, SolverConfig, cached_torsion, solve_p_poisson, weak_residual
from .spectral import EigenPair, cached_eigenpair
from .thresholds import (DomainConstants, GradientEstimateConstants, KP_ENDPOINTS, ProblemParams,
                         in_region_E, nonexistence_bound, nonexistence_scale, region_E_sum)

VERDICTS = ("converged", "diverged_above_super", "max_iters")


@dataclass(frozen=True)
class FixedPointConfig:
    """Tolerances of the outer/inner iterations; all are relative to ``M``."""

    outer_tol: float = 1e-8
    max_outer: int = 500
    inner_tol: float = 1e-13
    max_inner: int = 1000
    check_tol: float = 1e-9
    bound_tol: float = 1e-6
    kp_endpoint: str = "upper"

    def __post_init__(self):
        if self.kp_endpoint not in KP_ENDPOINTS:
            raise ConfigError(f"kp_endpoint must be one of {KP_ENDPOINTS}")
        for name in ("outer_tol", "inner_tol", "check_tol", "bound_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ConfigError("iteration limits must be >= 1")


class AboveSupersolution(RuntimeError):
    """An inner iterate left the box through the supersolution."""


@dataclass(frozen=True)
class DomainData:
    """Solved auxiliary objects for one (domain, p): torsion function, eigenpair, distance."""

    domain: Domain
    p: float
    torsion: PoissonSolution
    eig: EigenPair
    distance: Field

    @property
    def torsion_sup(self) -> float:
        return sup_norm(self.torsion.field)

    def constants(self, b: float, ge: GradientEstimateConstants) -> DomainConstants:
        return DomainConstants.build(self.p, b, self.torsion_sup, grad_sup(self.torsion.field),
                                     self.eig.lambda_p, sup_norm(self.distance), ge)


@lru_cache(maxsize=128)
def domain_data(domain: Domain, p: float, cfg: SolverConfig = SolverConfig()) -> DomainData:
    return DomainData(domain, p, cached_torsion(domain, p, cfg), cached_eigenpair(domain, p, cfg),
                      distance_function(domain))


def domain_constants(domain: Domain, p: float, b: float, ge: GradientEstimateConstants,
                     cfg: SolverConfig = SolverConfig()) -> DomainConstants:
    return domain_data(domain, p, cfg).constants(b, ge)


@dataclass(frozen=True)
class BoxF:
    sub: Field
    super: Field
    grad_cap: float
    M: float
    kp_endpoint: str = "upper"


def build_box(domain: Domain, params: ProblemParams, M: float, dc: DomainConstants,
              cfg: SolverConfig = SolverConfig(), kp_endpoint: str = "upper",
              check_tol: float = 1e-9) -> BoxF:
    """Sub- and supersolution and gradient cap at level M.

    Raises ConfigError when (lam, beta, m) is outside E(M) for the chosen
    k_p endpoint, and InvariantViolation when the computed subsolution is not
    below the supersolution.
    """
    if dc.p != params.p:
        raise ConfigError("domain constants were computed for a different p")
    if not M > 0:
        raise ConfigError("M must be positive")
    if not in_region_E(params, dc, M, kp_endpoint == "upper"):
        raise ConfigError(
            f"(lam, beta, m) is not in E(M) at M={M:.10g} (sum {region_E_sum(params, dc, M, kp_endpoint == 'upper'):.10g})")
    data = domain_data(domain, params.p, cfg)
    phi = data.torsion.field
    phi_sup = sup_norm(phi)
    lam_p = data.eig.lambda_p
    sub_scale = (params.lam / lam_p) ** (1.0 / (params.p - params.q)) if params.lam > 0 else 0.0
    sub = data.eig.e_p.with_values(sub_scale * data.eig.e_p.values, "subsolution")
    sup = phi.with_values(M / phi_sup * phi.values, "supersolution")
    bad = sub.flat - sup.flat > check_tol * M
    if np.any(bad):
        i = int(np.argmax(sub.flat - sup.flat))
        raise InvariantViolation(
            f"subsolution exceeds supersolution at node {i} by {sub.flat[i] - sup.flat[i]:.3e}")
    return BoxF(sub, sup, dc.kp(kp_endpoint) * M / phi_sup, M, kp_endpoint)


def _power(u: np.ndarray, e: float) -> np.ndarray:
    # 0**0 == 1 by convention
    if e == 0:
        return np.ones_like(u)
    return np.maximum(u, 0.0) ** e


def frozen_forcing(params: ProblemParams, u: Field) -> np.ndarray:
    """``beta u^(a-1)|grad u|^b + m u^(l-1) exp(alpha u^s)`` at the nodes."""
    v = np.maximum(u.values, 0.0)
    h = np.zeros_like(v)
    if params.beta > 0:
        h += params.beta * _power(v, params.a - 1) * gradient_magnitude(u) ** params.b
    if params.m > 0:
        with np.errstate(divide="ignore"):
            logu = np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), -np.inf)
        if params.l == 1:
            expo = np.zeros_like(v)
        else:
            expo = np.where(v > 0, (params.l - 1) * logu, -np.inf)
        expo = expo + params.alpha * v ** params.s + math.log(params.m)
        with np.errstate(over="ignore"):
            h += np.exp(expo)
    return h


def full_rhs(params: ProblemParams, u: Field) -> np.ndarray:
    return params.lam * _power(np.maximum(u.values, 0.0), params.q - 1) + frozen_forcing(params, u)


def _apply_T(domain, params, u, cfg, box, fp):
    h = frozen_forcing(params, u)
    if not np.all(np.isfinite(h)):
        raise AboveSupersolution("frozen forcing overflowed")
    tol = fp.check_tol * box.M
    if params.lam == 0 or params.q == 1:
        rhs = params.lam * np.ones_like(h) + h
        U = solve_p_poisson(domain, params.p, Field(domain, rhs), cfg).field
        if np.any(U.flat > box.super.flat + tol):
            raise AboveSupersolution("T(u) exceeds the supersolution")
        return U, 1
    U = box.sub
    k = 0
    for k in range(1, fp.max_inner + 1):
        rhs = params.lam * _power(U.values, params.q - 1) + h
        nxt = solve_p_poisson(domain, params.p, Field(domain, rhs), cfg).field
        if np.any(nxt.flat < U.flat - tol):
            i = int(np.argmin(nxt.flat - U.flat))
            raise InvariantViolation(
                f"inner iteration lost monotonicity at node {i} by {U.flat[i] - nxt.flat[i]:.3e}")
        if np.any(nxt.flat > box.super.flat + tol):
            raise AboveSupersolution("inner iterate exceeds the supersolution")
        diff = float(np.max(np.abs(nxt.flat - U.flat)))
        U = nxt
        if diff <= fp.inner_tol * box.M:
            break
    return U, k


def apply_T(domain: Domain, params: ProblemParams, u: Field, cfg: SolverConfig, box: BoxF,
            fp: FixedPointConfig = FixedPointConfig()) -> Field:
    """One application of T: solve the semilinear problem with frozen forcing.

    The inner sequence ``U_{k+1} = solve(lam U_k^(q-1) + h)`` starts at the
    subsolution and increases to the unique solution.
    """
    tol = fp.check_tol * box.M
    if np.any(u.flat < box.sub.flat - tol) or np.any(u.flat > box.super.flat + tol):
        raise ConfigError("apply_T needs u inside the box F")
    return _apply_T(domain, params, u, cfg, box, fp)[0]


@dataclass
class SolveReport:
    verdict: str
    solution: Field | None
    outer_iterations: int
    sup_diffs: list = dc_field(default_factory=list)
    bounds_ok: dict = dc_field(default_factory=dict)
    energy_ok: bool | None = None
    energy_solution: float | None = None
    energy_distance: float | None = None
    fixed_point_residual: float | None = None
    pde_residual: float | None = None
    grad_sup: float | None = None
    grad_cap: float | None = None
    M: float | None = None
    inner_iterations: list = dc_field(default_factory=list)
    message: str = ""

    @property
    def all_bounds_ok(self) -> bool:
        return bool(self.bounds_ok) and all(self.bounds_ok.values())

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "outer_iterations": self.outer_iterations,
            "sup_diffs": list(self.sup_diffs),
            "inner_iterations": list(self.inner_iterations),
            "bounds_ok": dict(self.bounds_ok),
            "energy_ok": self.energy_ok,
            "energy_solution": self.energy_solution,
            "energy_distance": self.energy_distance,
            "fixed_point_residual": self.fixed_point_residual,
            "pde_residual": self.pde_residual,
            "solution_sup": None if self.solution is None else sup_norm(self.solution),
            "grad_sup": self.grad_sup,
            "grad_cap": self.grad_cap,
            "M": self.M,
            "message": self.message,
        }


def solve_problem_P(domain: Domain, params: ProblemParams, M: float, dc: DomainConstants,
                    cfg: SolverConfig = SolverConfig(),
                    fp: FixedPointConfig = FixedPointConfig()) -> SolveReport:
    """Picard iteration ``u <- T(u)`` from the subsolution, then verification.

    On convergence the report carries the bound checks (lower, upper,
    gradient), the energy comparison against the distance function, the
    fixed-point residual ``max|T(u) - u|`` and the weak PDE residual.
    """
    box = build_box(domain, params, M, dc, cfg, fp.kp_endpoint, fp.check_tol)
    u = box.sub
    diffs, inner = [], []
    verdict = "max_iters"
    message = ""
    n = 0
    for n in range(1, fp.max_outer + 1):
        try:
            nxt, k = _apply_T(domain, params, u, cfg, box, fp)
        except AboveSupersolution as exc:
            verdict, message = "diverged_above_super", str(exc)
            break
        inner.append(k)
        diff = float(np.max(np.abs(nxt.flat - u.flat)))
        diffs.append(diff)
        u = nxt
        if diff <= fp.outer_tol * M:
            verdict = "converged"
            break
    report = SolveReport(verdict, u.with_values(u.values, "solution"), n, diffs, inner_iterations=inner,
                         M=M, message=message)
    if verdict != "converged":
        return report

    tol = fp.bound_tol * M
    # gradient cap is verified with the upper k_p endpoint regardless of the box policy
    cap = dc.kp_upper * M / dc.torsion_sup
    g_sup = grad_sup(u)
    report.grad_sup, report.grad_cap = g_sup, cap
    report.bounds_ok = {
        "lower": bool(np.all(box.sub.flat <= u.flat + tol)),
        "upper": bool(np.all(u.flat <= box.super.flat + tol)),
        "gradient": bool(g_sup <= cap + tol),
    }
    Tu, _ = _apply_T(domain, params, u, cfg, box, fp)
    report.fixed_point_residual = float(np.max(np.abs(Tu.flat - u.flat)))
    report.pde_residual = weak_residual(domain, params.p, u.flat, full_rhs(params, u).ravel())
    h = Field(domain, frozen_forcing(params, u), "h_p")
    spec = EnergySpec(params.p, params.q, params.lam, h)
    e_u = energy_Ip(spec, u)
    e_d = energy_Ip(spec, distance_function(domain))
    report.energy_solution, report.energy_distance = e_u, e_d
    report.energy_ok = bool(e_u <= e_d + 1e-12 * max(1.0, abs(e_d)))
    return report


@dataclass(frozen=True)
class ProbeResult:
    verdict: str
    iterations: int
    sup_trace: tuple
    threshold: float
    scale: float
    m: float

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "iterations": self.iterations, "sup_trace": list(self.sup_trace),
                "nonexistence_bound": self.threshold, "scale": self.scale, "m": self.m}


def nonexistence_probe(domain: Domain, params: ProblemParams, cfg: SolverConfig = SolverConfig(), *,
                       max_iters: int = 2000, growth_steps: int = 50, growth_factor: float = 10.0,
                       tol: float = 1e-10) -> ProbeResult:
    """Monotone iteration for ``-Delta_p u = lam u^(q-1) + m u^(l-1) exp(alpha u^s)``.

    Starts from the subsolution (zero when lam = 0). The verdict is
    ``unbounded-growth`` when the sup-norm keeps increasing above
    ``growth_factor`` times the critical level ``((p-l)/(alpha s))^(1/s)`` for
    ``growth_steps`` consecutive steps or the forcing overflows while
    increasing; ``stabilized`` when successive iterates agree to ``tol``;
    ``inconclusive`` if neither happens within ``max_iters``. Numerical
    evidence only.
    """
    if params.beta != 0:
        raise ConfigError("the nonexistence probe needs beta = 0")
    p = params.p
    scale = nonexistence_scale(p, params.l, params.alpha, params.s)
    data = domain_data(domain, p, cfg)
    threshold = nonexistence_bound(data.eig.lambda_p, p, params.l, params.alpha, params.s)
    if params.lam > 0:
        u = data.eig.e_p * (params.lam / data.eig.lambda_p) ** (1.0 / (p - params.q))
    else:
        u = Field.constant(domain, 0.0)
    trace = [sup_norm(u)]
    streak = 0
    for n in range(1, max_iters + 1):
        rhs = full_rhs(params, u)
        if not np.all(np.isfinite(rhs)):
            grew = len(trace) > 1 and trace[-1] > trace[-2]
            return ProbeResult("unbounded-growth" if grew else "inconclusive", n, tuple(trace), threshold,
                               scale, params.m)
        nxt = solve_p_poisson(domain, p, Field(domain, rhs), cfg).field
        s_new = sup_norm(nxt)
        diff = float(np.max(np.abs(nxt.flat - u.flat)))
        if s_new > trace[-1] and s_new > growth_factor * scale:
            streak += 1
        else:
            streak = 0
        trace.append(s_new)
        u = nxt
        if streak >= growth_steps:
            return ProbeResult("unbounded-growth", n, tuple(trace), threshold, scale, params.m)
        if diff <= tol * max(1.0, s_new):
            return ProbeResult("stabilized", n, tuple(trace), threshold, scale, params.m)
    return ProbeResult("inconclusive", max_iters, tuple(trace), threshold, scale, params.m)
