"""Dirichlet solver for ``-div(|grad v|^(p-2) grad v) = g`` and the torsion function.

Two solution paths share one discretization (see :mod:`plap_limits.geometry`):

``direct``
    1D and radial meshes only. The discrete equations are a finite-volume
    flux balance, so the face fluxes follow from a cumulative sum of the load
    and the gradient from inverting ``s -> |s|^(p-2) s``. The interval needs one
    scalar root for the unknown flux constant. No regularization is involved
    and the cost does not depend on p.

``newton``
    Any mesh. Damped Newton on the convex discrete energy with the regularized
    coefficient ``(|grad v|^2 + eps^2)^((p-2)/2)``, driven through a decreasing
    ``eps`` schedule, with continuation in p starting from p = 2.

The right-hand side is always normalized to unit sup-norm before solving and
the solution rescaled afterwards, which keeps gradients O(1) for any p.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from .errors import ConfigError
from .geometry import Domain, Field, sup_norm

log = logging.getLogger(__name__)

METHODS = ("auto", "direct", "newton")


@dataclass(frozen=True)
class SolverConfig:
    eps_reg: float = 1e-10
    eps_schedule: tuple = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10)
    newton_tol: float = 1e-10
    max_newton_iters: int = 200
    p_continuation_step: float = 2.0
    method: str = "auto"

    def __post_init__(self):
        sched = tuple(float(e) for e in self.eps_schedule)
        object.__setattr__(self, "eps_schedule", sched)
        if not self.eps_reg > 0:
            raise ConfigError("eps_reg must be positive")
        if not self.newton_tol > 0:
            raise ConfigError("newton_tol must be positive")
        if self.max_newton_iters < 1:
            raise ConfigError("max_newton_iters must be >= 1")
        if not 0 < self.p_continuation_step <= 2:
            raise ConfigError("p_continuation_step must lie in (0, 2]")
        if not sched or any(b >= a for a, b in zip(sched, sched[1:])):
            raise ConfigError("eps_schedule must be strictly decreasing")
        if not math.isclose(sched[-1], self.eps_reg, rel_tol=1e-12):
            raise ConfigError("eps_schedule must end at eps_reg")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")


@dataclass(frozen=True)
class PoissonSolution:
    field: Field
    residual_sup: float
    iterations: int
    p: float
    converged: bool
    method: str = ""
    notes: tuple = dc_field(default=())


def psi(s: np.ndarray, p: float) -> np.ndarray:
    return np.abs(s) ** (p - 2) * s


def psi_inverse(y: np.ndarray, p: float) -> np.ndarray:
    return np.sign(y) * np.abs(y) ** (1.0 / (p - 1))


def _element_flux(mesh, v: np.ndarray, p: float, eps: float = 0.0) -> np.ndarray:
    """Weighted element flux ``w_e (|G v|^2 + eps^2)^((p-2)/2) G v``, shape ``(n_elem, dim)``."""
    G = mesh.element_gradients(v)
    s2 = np.sum(G * G, axis=1) + eps * eps
    with np.errstate(divide="ignore"):
        coef = np.where(s2 > 0, s2 ** ((p - 2) / 2), 0.0)
    return (mesh.elem_weights * coef)[:, None] * G


def apply_operator(mesh, v: np.ndarray, p: float, eps: float = 0.0) -> np.ndarray:
    """Assembled weak form of ``-Delta_p v``: ``G^T (w_e |Gv|^(p-2) Gv)`` per node."""
    flux = _element_flux(mesh, v, p, eps)
    out = np.zeros(mesh.n_nodes)
    for k, Gk in enumerate(mesh.grad_ops):
        out += Gk.T @ flux[:, k]
    return out


def weak_residual(domain: Domain, p: float, v: np.ndarray, rhs: np.ndarray) -> float:
    """Scaled residual of ``-Delta_p v = rhs`` over the free nodes.

    The assembled residual vector is divided by ``int |rhs|`` so the number is
    dimensionless and insensitive to the mesh width.
    """
    m = domain.mesh
    v = np.asarray(v, dtype=float).ravel()
    rhs = np.asarray(rhs, dtype=float).ravel()
    r = apply_operator(m, v, p) - m.node_weights * rhs
    scale = float(np.dot(m.node_weights, np.abs(rhs)))
    if scale == 0.0:
        scale = 1.0
    return float(np.max(np.abs(r[m.free]))) / scale


def _direct_solve(domain: Domain, p: float, g: np.ndarray) -> np.ndarray:
    m = domain.mesh
    h = m.spacing[0]
    face = m.elem_weights / h
    load = m.node_weights * g
    n = g.size
    v = np.zeros(n)
    if domain.shape == "ball":
        # no flux through r = 0
        J = np.cumsum(load)[:-1]
        Dv = -psi_inverse(J / face, p)
        v[:-1] = -np.cumsum((h * Dv)[::-1])[::-1]
        return v
    S = np.concatenate([[0.0], np.cumsum(load[1:-1])])

    def mismatch(c):
        return float(np.sum(psi_inverse((c + S) / face, p)))

    lo, hi = -S.max(), -S.min()
    if lo == hi:
        c = lo
    else:
        f_lo, f_hi = mismatch(lo), mismatch(hi)
        if f_lo == 0.0:
            c = lo
        elif f_hi == 0.0:
            c = hi
        else:
            c = brentq(mismatch, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    Dv = -psi_inverse((c + S) / face, p)
    # psi^{-1} is steep near zero flux, so close the boundary condition
    # through the element where the flux changes sign
    k = int(np.argmin(np.abs(c + S)))
    Dv[k] = 0.0
    Dv[k] = -np.sum(Dv)
    v[1:] = np.cumsum(h * Dv)
    v[-1] = 0.0
    return v


def _energy(mesh, v, p, eps, load):
    G = mesh.element_gradients(v)
    s2 = np.sum(G * G, axis=1) + eps * eps
    return float(np.dot(mesh.elem_weights, s2 ** (p / 2))) / p - float(np.dot(load, v))


def _hessian(mesh, v, p, eps, free):
    G = mesh.element_gradients(v)
    s2 = np.sum(G * G, axis=1) + eps * eps
    a = mesh.elem_weights * s2 ** ((p - 2) / 2)
    b = mesh.elem_weights * (p - 2) * s2 ** ((p - 4) / 2)
    ops = [Gk[:, free] for Gk in mesh.grad_ops]
    H = None
    for i, Gi in enumerate(ops):
        for j, Gj in enumerate(ops):
            d = b * G[:, i] * G[:, j]
            if i == j:
                d = d + a
            term = Gi.T @ sp.diags(d) @ Gj
            H = term if H is None else H + term
    return H.tocsc()


def _newton_stage(mesh, p, eps, g, v, tol, max_iters):
    free = mesh.free
    load = mesh.node_weights * g
    scale = float(np.dot(mesh.node_weights, np.abs(g))) or 1.0
    its = 0
    res = np.inf
    for its in range(1, max_iters + 1):
        r = (apply_operator(mesh, v, p, eps) - load)[free]
        res = float(np.max(np.abs(r))) / scale
        if res <= tol:
            return v, its - 1, res
        H = _hessian(mesh, v, p, eps, free)
        shift = 1e-14 * float(H.diagonal().max())
        H = H + shift * sp.identity(H.shape[0], format="csc")
        step = -spsolve(H, r)
        if not np.all(np.isfinite(step)):
            break
        e0 = _energy(mesh, v, p, eps, load)
        slope = float(np.dot(r, step))
        t = 1.0
        trial = v.copy()
        accepted = False
        for _ in range(40):
            trial[free] = v[free] + t * step
            e1 = _energy(mesh, trial, p, eps, load)
            if e1 <= e0 + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # no representable decrease left: roundoff floor of the energy
            break
        v = trial
    r = (apply_operator(mesh, v, p, eps) - load)[free]
    res = float(np.max(np.abs(r))) / scale
    return v, its, res


def _continuation_path(p: float, step: float) -> list:
    if abs(p - 2.0) <= step:
        return [p]
    n = int(math.ceil(abs(p - 2.0) / step))
    return [float(x) for x in np.linspace(2.0, p, n + 1)[1:]]


def _newton_solve(domain, p, g, cfg, v0):
    mesh = domain.mesh
    v = np.zeros(mesh.n_nodes) if v0 is None else np.array(v0, dtype=float).ravel()
    v[mesh.boundary] = 0.0
    total = 0
    res = np.inf
    path = [p] if v0 is not None else _continuation_path(p, cfg.p_continuation_step)
    for pk in path:
        final = pk == path[-1]
        schedule = cfg.eps_schedule if final else cfg.eps_schedule[:1]
        for eps in schedule:
            last = final and eps == schedule[-1]
            tol = cfg.newton_tol if last else max(cfg.newton_tol, 1e-6)
            v, its, res = _newton_stage(mesh, pk, eps, g, v, tol, cfg.max_newton_iters)
            total += its
    return v, total


def solve_p_poisson(domain: Domain, p: float, g: Field, cfg: SolverConfig | None = None,
                    initial: Field | None = None) -> PoissonSolution:
    """Solve ``-Delta_p v = g`` in the domain with ``v = 0`` on the boundary.

    Never raises on non-convergence: ``converged`` is False and the best
    iterate is returned.
    """
    cfg = cfg or SolverConfig()
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if g.domain != domain:
        raise ValueError("right-hand side lives on a different domain")
    mesh = domain.mesh
    gvals = g.flat
    gnorm = sup_norm(g)
    if gnorm == 0.0:
        return PoissonSolution(Field(domain, np.zeros(mesh.shape), "p-poisson"), 0.0, 0, p, True, "trivial")
    gt = gvals / gnorm
    amp = gnorm ** (1.0 / (p - 1))
    method = cfg.method
    if method == "auto":
        method = "newton" if domain.shape == "rectangle" else "direct"
    if method == "direct":
        if domain.shape == "rectangle":
            raise ConfigError("the direct path needs a 1D or radial mesh")
        vt = _direct_solve(domain, p, gt)
        its = 1
    else:
        v0 = None if initial is None else initial.flat / amp
        vt, its = _newton_solve(domain, p, gt, cfg, v0)
    res = weak_residual(domain, p, vt, gt)
    converged = bool(np.all(np.isfinite(vt))) and res <= cfg.newton_tol
    if not converged:
        log.warning("p-Poisson solve (p=%g, %s) stopped at residual %.3e", p, method, res)
    v = vt * amp
    v[mesh.boundary] = 0.0
    return PoissonSolution(Field(domain, v.reshape(mesh.shape), "p-poisson"), res, its, p, converged, method)


def torsion_function(domain: Domain, p: float, cfg: SolverConfig | None = None) -> PoissonSolution:
    """The p-torsion function: ``-Delta_p v = 1``, ``v = 0`` on the boundary."""
    sol = solve_p_poisson(domain, p, Field.constant(domain, 1.0), cfg)
    return PoissonSolution(sol.field.with_values(sol.field.values, "torsion"), sol.residual_sup,
                           sol.iterations, p, sol.converged, sol.method)


@lru_cache(maxsize=128)
def cached_torsion(domain: Domain, p: float, cfg: SolverConfig) -> PoissonSolution:
    return torsion_function(domain, p, cfg)


def torsion_exact_ball(N: int, R: float, p: float, r):
    """Closed-form torsion function of the N-ball of radius R at radius r."""
    if not (N >= 1 and R > 0 and p > 1):
        raise ValueError("need N >= 1, R > 0, p > 1")
    r = np.asarray(r, dtype=float)
    if np.any(r > R) or np.any(r < 0):
        raise ValueError("radius outside [0, R]")
    e = p / (p - 1)
    out = (p - 1) / p * N ** (-1.0 / (p - 1)) * (R ** e - r ** e)
    return float(out) if out.ndim == 0 else out


def torsion_grad_exact_ball(N: int, R: float, p: float, r):
    """|grad phi_p| for the N-ball; maximal at r = R."""
    r = np.asarray(r, dtype=float)
    out = N ** (-1.0 / (p - 1)) * r ** (1.0 / (p - 1))
    return float(out) if out.ndim == 0 else out


def torsion_max_bound(p: float, N: int, volume: float, unit_ball_volume: float) -> float:
    """Upper bound for ``max phi_p`` from Schwarz symmetrization; equality on balls."""
    return (p - 1) / p * N ** (-1.0 / (p - 1)) * (volume / unit_ball_volume) ** (p / (N * (p - 1)))
