import math

import numpy as np
import pytest

from plap_limits.geometry import Domain, Field, distance_function, sup_norm
from plap_limits.solver import torsion_function
from plap_limits.spectral import EigenPair, check_lbep, principal_eigenpair, rayleigh_quotient

import oracle_values as ov


def test_interval_p2_is_pi_squared():
    eig = principal_eigenpair(Domain.interval(), 2.0)
    assert eig.lambda_p == pytest.approx(ov.PI_SQUARED, rel=1e-3)
    x = Domain.interval().mesh.coords[0]
    np.testing.assert_allclose(eig.e_p.values, np.sin(np.pi * x), atol=1e-4)


def test_disk_p2_matches_shooting():
    eig = principal_eigenpair(Domain.ball(1.0, 2), 2.0)
    assert eig.lambda_p == pytest.approx(ov.DISK_P2_EIGENVALUE, rel=1e-2)
    assert eig.lambda_p == pytest.approx(ov.DISK_P2_EIGENVALUE, rel=1e-4)


@pytest.mark.parametrize("p, ref", [(3.0, ov.INTERVAL_P3_EIGENVALUE), (5.0, ov.INTERVAL_P5_EIGENVALUE)])
def test_interval_matches_closed_form(p, ref):
    eig = principal_eigenpair(Domain.interval(), p)
    assert eig.lambda_p == pytest.approx(ref, rel=1e-2)


def test_square_p2():
    eig = principal_eigenpair(Domain.rectangle(resolution=33), 2.0)
    assert eig.lambda_p == pytest.approx(2 * math.pi**2, rel=5e-3)


@pytest.mark.parametrize("domain, p", [(Domain.interval(), 2.0), (Domain.ball(1.0, 2), 4.0),
                                       (Domain.ball(1.0, 3), 10.0), (Domain.rectangle(resolution=33), 3.0)])
def test_eigenfunction_normalization_and_residual(domain, p):
    eig = principal_eigenpair(domain, p)
    assert eig.converged
    assert sup_norm(eig.e_p) == 1.0
    assert eig.e_p.is_dirichlet_zero()
    assert np.all(eig.e_p.flat[domain.mesh.free] > 0)
    assert eig.rayleigh_residual <= 1e-6


@pytest.mark.parametrize("domain", [Domain.interval(), Domain.ball(1.0, 2), Domain.rectangle(resolution=33)])
@pytest.mark.parametrize("p", [2.0, 5.0, 20.0])
def test_lbep_holds(domain, p):
    eig = principal_eigenpair(domain, p)
    phi_sup = sup_norm(torsion_function(domain, p).field)
    assert check_lbep(eig, phi_sup, p)


def test_lbep_examples():
    disk = EigenPair(5.7832, Field.constant(Domain.ball(1.0, 2), 0.0), 0.0)
    assert check_lbep(disk, 0.25, 2.0)
    iv = EigenPair(9.8696, Field.constant(Domain.interval(), 0.0), 0.0)
    assert check_lbep(iv, 0.125, 2.0)
    assert not check_lbep(iv, 0.05, 2.0)


@pytest.mark.parametrize("p", [2.0, 6.0])
def test_eigenvalue_minimizes_rayleigh_quotient(p):
    d = Domain.ball(1.0, 2)
    eig = principal_eigenpair(d, p)
    for trial in (distance_function(d), torsion_function(d, p).field,
                  Field.from_function(d, lambda r: np.cos(np.pi * r / 2))):
        assert rayleigh_quotient(trial, p) >= eig.lambda_p * (1 - 1e-9)


def test_large_p_root_tends_to_inverse_inradius():
    d = Domain.ball(1.0, 2)
    roots = [principal_eigenpair(d, p).lambda_p ** (1 / p) for p in (8.0, 32.0, 100.0)]
    assert roots[0] > roots[1] > roots[2] > 1.0
    assert roots[2] == pytest.approx(1.0, abs=0.1)
