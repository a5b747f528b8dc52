import math

import numpy as np
import pytest

from plap_limits.errors import ConfigError
from plap_limits.geometry import Domain, Field, grad_sup, sup_norm
from plap_limits.solver import (SolverConfig, solve_p_poisson, torsion_exact_ball, torsion_function,
                                torsion_grad_exact_ball, torsion_max_bound, weak_residual)

import oracle_values as ov


def test_interval_p2_torsion_is_parabola():
    iv = Domain.interval()
    phi = torsion_function(iv, 2.0).field
    x = iv.mesh.coords[0]
    np.testing.assert_allclose(phi.values, x * (1 - x) / 2, atol=1e-12)
    assert sup_norm(phi) == pytest.approx(0.125, abs=1e-12)


def test_ball_p3_torsion_max():
    phi = torsion_function(Domain.ball(1.0, 2), 3.0).field
    assert sup_norm(phi) == pytest.approx(2 / (3 * math.sqrt(2)), abs=1e-4)


@pytest.mark.parametrize("domain", [Domain.interval(), Domain.ball(1.0, 3), Domain.rectangle(resolution=17)])
def test_zero_forcing_gives_zero(domain):
    sol = solve_p_poisson(domain, 4.0, Field.constant(domain, 0.0))
    assert sup_norm(sol.field) == 0.0


def test_ball_p2_torsion_sup_and_gradient():
    phi = torsion_function(Domain.ball(1.0, 2), 2.0).field
    assert sup_norm(phi) == pytest.approx(0.25, abs=1e-12)
    assert grad_sup(phi) == pytest.approx(0.5, abs=1e-3)


def test_interval_p5_matches_one_dimensional_formula():
    phi = torsion_function(Domain.interval(), 5.0).field
    assert sup_norm(phi) == pytest.approx(torsion_exact_ball(1, 0.5, 5.0, 0.0), abs=1e-3)


@pytest.mark.parametrize("N, R, p", [(2, 1.0, 2.0), (3, 2.0, 4.0), (2, 0.5, 7.0)])
def test_ball_torsion_profile_matches_formula(N, R, p):
    d = Domain.ball(R, N)
    phi = torsion_function(d, p).field
    r = d.mesh.coords[0]
    exact = torsion_exact_ball(N, R, p, r)
    assert np.max(np.abs(phi.values - exact)) <= 1e-3 * exact.max()


def test_torsion_exact_ball_examples():
    assert torsion_exact_ball(2, 1.0, 2.0, 0.0) == pytest.approx(0.25)
    assert torsion_exact_ball(2, 1.0, 2.0, 1.0) == 0.0
    assert torsion_exact_ball(1, 1.0, 2.0, 0.0) == pytest.approx(0.5)
    assert torsion_grad_exact_ball(2, 1.0, 2.0, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        torsion_exact_ball(2, 1.0, 2.0, 1.5)


def test_torsion_max_bound_examples():
    assert torsion_max_bound(2.0, 2, math.pi, math.pi) == pytest.approx(0.25)
    assert torsion_max_bound(3.0, 2, 4 * math.pi, math.pi) == pytest.approx(2 / 3 * 2**-0.5 * 4**0.75)
    assert torsion_max_bound(1e6, 2, math.pi, math.pi) == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("p", [2.0, 4.0, 8.0])
def test_rectangle_torsion_below_schwarz_bound(p):
    d = Domain.rectangle(0, 2, 0, 1, resolution=33)
    phi = torsion_function(d, p).field
    assert sup_norm(phi) <= torsion_max_bound(p, 2, d.volume, d.unit_ball_volume)


def test_square_p2_torsion_matches_series():
    phi = torsion_function(Domain.rectangle(resolution=129), 2.0).field
    assert phi.evaluate((0.5, 0.5)) == pytest.approx(ov.SQUARE_TORSION_CENTER, abs=1e-4)


@pytest.mark.parametrize("p", [2.0, 5.0, 10.0])
def test_newton_agrees_with_direct_on_ball(p):
    d = Domain.ball(1.0, 2, resolution=257)
    a = torsion_function(d, p, SolverConfig(method="direct")).field
    b = torsion_function(d, p, SolverConfig(method="newton")).field
    assert np.max(np.abs(a.values - b.values)) <= 1e-7 * sup_norm(a)


@pytest.mark.parametrize("p", [2.0, 10.0, 100.0])
def test_residual_is_small(p):
    d = Domain.ball(1.0, 2)
    sol = torsion_function(d, p)
    assert sol.converged
    assert sol.residual_sup <= 1e-10
    rhs = np.ones(d.mesh.shape).ravel()
    assert weak_residual(d, p, sol.field.flat, rhs) <= 1e-10


def test_solution_is_dirichlet_zero_and_nonnegative():
    d = Domain.rectangle(resolution=33)
    phi = torsion_function(d, 6.0).field
    assert phi.is_dirichlet_zero()
    assert phi.values.min() >= 0.0


def test_solver_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(method="magic")
    with pytest.raises(ConfigError):
        SolverConfig(eps_schedule=(1e-4, 1e-2, 1e-10))
    with pytest.raises(ConfigError):
        SolverConfig(eps_reg=1e-12)
    with pytest.raises(ConfigError):
        SolverConfig(p_continuation_step=3.0)


def test_solve_is_deterministic():
    d = Domain.rectangle(resolution=33)
    g = Field.from_function(d, lambda x, y: 1 + x * y)
    a = solve_p_poisson(d, 5.0, g).field
    b = solve_p_poisson(d, 5.0, g).field
    assert np.array_equal(a.values, b.values)


def test_interval_large_p_with_jump_forcing_is_resolved():
    # zero flux lands inside an element, where psi^{-1} is nearly vertical
    d = Domain.interval(resolution=257)
    x = d.mesh.coords[0]
    g = x + 0.1875 * (x > 0.5)
    sol = solve_p_poisson(d, 20.0, Field(d, g))
    assert weak_residual(d, 20.0, sol.field.flat, g) <= 1e-10
