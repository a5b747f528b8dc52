import math

import numpy as np
import pytest

from plap_limits.errors import ConfigError
from plap_limits.geometry import (Domain, EnergySpec, Field, distance_function, energy_Ip, grad_sup, integrate,
                                  lp_norm, parse_domain, sup_norm, unit_ball_volume)
from plap_limits.solver import torsion_function

import oracle_values as ov


def test_distance_examples():
    assert distance_function(Domain.interval()).evaluate(0.5) == pytest.approx(0.5)
    assert distance_function(Domain.ball(1.0, 2)).evaluate((0.0, 0.0)) == pytest.approx(1.0)
    assert distance_function(Domain.rectangle(0, 2, 0, 1)).evaluate((1.0, 0.5)) == pytest.approx(0.5)


def test_distance_vanishes_on_boundary():
    for d in (Domain.interval(), Domain.ball(2.0, 3), Domain.rectangle(0, 2, 0, 1, resolution=33)):
        assert distance_function(d).is_dirichlet_zero()


def test_norm_examples():
    disk = Domain.ball(1.0, 2)
    iv = Domain.interval()
    assert sup_norm(distance_function(disk)) == 1.0
    assert grad_sup(distance_function(iv)) == pytest.approx(1.0, abs=1e-12)
    assert lp_norm(Field.constant(iv, 1.0), 2) == pytest.approx(1.0, rel=1e-14)


def test_lp_norm_rejects_small_exponent():
    with pytest.raises(ValueError):
        lp_norm(Field.constant(Domain.interval(), 1.0), 0.5)


def test_lp_norm_large_exponent_approaches_sup():
    d = distance_function(Domain.interval())
    assert lp_norm(d, 400) == pytest.approx(0.5, rel=2e-2)
    assert math.isfinite(lp_norm(d * 1e10, 400))


@pytest.mark.parametrize("domain", [Domain.interval(0, 3), Domain.ball(1.5, 2), Domain.ball(1.0, 3),
                                    Domain.rectangle(0, 2, 0, 1, resolution=17)])
def test_node_weights_sum_to_volume(domain):
    assert integrate(Field.constant(domain, 1.0)) == pytest.approx(domain.volume, rel=1e-12)


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_energy_of_zero_is_zero():
    iv = Domain.interval()
    spec = EnergySpec(2.0, 1.0, 1.0, Field.constant(iv, 0.0))
    assert energy_Ip(spec, Field.constant(iv, 0.0)) == 0.0


def test_energy_of_torsion_on_interval():
    iv = Domain.interval()
    spec = EnergySpec(2.0, 1.0, 1.0, Field.constant(iv, 0.0))
    phi = torsion_function(iv, 2.0).field
    assert energy_Ip(spec, phi) == pytest.approx(ov.INTERVAL_TORSION_ENERGY, rel=1e-5)


def test_energy_requires_dirichlet_zero():
    iv = Domain.interval()
    spec = EnergySpec(3.0, 1.0, 1.0, Field.constant(iv, 0.0))
    with pytest.raises(ValueError):
        energy_Ip(spec, Field.constant(iv, 1.0))


def test_domain_validation():
    with pytest.raises(ConfigError):
        Domain.interval(1.0, 0.0)
    with pytest.raises(ConfigError):
        Domain.ball(-1.0, 2)
    with pytest.raises(ConfigError):
        Domain.rectangle(0, 1, 1, 0)
    with pytest.raises(ConfigError):
        Domain("hexagon", (0.0, 1.0))
    with pytest.raises(ConfigError):
        Domain.interval(resolution=2)


def test_parse_domain_round_trip():
    for d in (Domain.interval(-1, 2, 65), Domain.ball(2.0, 3, resolution=257), Domain.rectangle(0, 2, 0, 1, 33)):
        assert parse_domain(d.to_config()) == d
    text = "shape = ball\nR = 2\nN = 3  # comment\n"
    assert parse_domain(text) == Domain.ball(2.0, 3)


def test_parse_domain_errors():
    with pytest.raises(ConfigError):
        parse_domain("shape = ball\nradius = abc")
    with pytest.raises(ConfigError):
        parse_domain("colour = blue")
    with pytest.raises(ConfigError):
        parse_domain("shape = interval\nbounds = 0,1,2")


def test_field_is_read_only():
    f = Field.constant(Domain.interval(), 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_field_rejects_wrong_shape_and_nan():
    iv = Domain.interval(resolution=11)
    with pytest.raises(ValueError):
        Field(iv, np.zeros(12))
    with pytest.raises(ValueError):
        Field(iv, np.full(11, np.nan))


def test_ball_evaluate_uses_radius():
    disk = Domain.ball(1.0, 2)
    d = distance_function(disk)
    assert d.evaluate((0.6, 0.0)) == pytest.approx(d.evaluate((0.0, -0.6)))
    with pytest.raises(ValueError):
        d.evaluate((1.0, 1.0))
