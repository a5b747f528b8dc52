import json
import math

import numpy as np
from hypothesis import given, settings, strategies as st

from plap_limits.config import ParamsConfig, RunConfig, SweepConfig, parse_config
from plap_limits.geometry import Domain, Field, distance_function, lp_norm, sup_norm
from plap_limits.reporting import dumps
from plap_limits.solver import solve_p_poisson
from plap_limits.thresholds import (DomainConstants, ProblemParams, compute_Mp_corollary_up, in_region_E,
                                    region_E_sum)

IV = Domain.interval(resolution=257)
DISK = Domain.ball(1.0, 2, resolution=257)
X = IV.mesh.coords[0]
R = DISK.mesh.coords[0]

exponents = st.floats(2.0, 20.0)
coef = st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4)


def _profile(domain, c):
    x = domain.mesh.coords[0]
    return c[0] + c[1] * x + c[2] * np.cos(3 * x) ** 2 + c[3] * (x > 0.5)


@settings(max_examples=40, deadline=None)
@given(p=exponents, c1=coef, c2=coef, disk=st.booleans())
def test_comparison_principle(p, c1, c2, disk):
    d = DISK if disk else IV
    g1 = _profile(d, c1)
    g2 = g1 + _profile(d, c2)
    u1 = solve_p_poisson(d, p, Field(d, g1)).field
    u2 = solve_p_poisson(d, p, Field(d, g2)).field
    assert np.all(u1.values <= u2.values + 1e-8 * max(1.0, sup_norm(u2)))
    assert u1.values.min() >= 0.0


@settings(max_examples=40, deadline=None)
@given(p=exponents, c=coef, t=st.floats(1e-3, 1e3))
def test_homogeneity(p, c, t):
    g = Field(DISK, 0.1 + _profile(DISK, c))
    u = solve_p_poisson(DISK, p, g).field
    ut = solve_p_poisson(DISK, p, g * t).field
    assert np.max(np.abs(ut.values - t ** (1 / (p - 1)) * u.values)) <= 1e-9 * sup_norm(ut)


@settings(max_examples=30, deadline=None)
@given(w=st.floats(0.2, 3.0), h=st.floats(0.2, 3.0), data=st.data())
def test_distance_is_one_lipschitz(w, h, data):
    d = Domain.rectangle(0, w, 0, h, resolution=17)
    f = distance_function(d).flat
    X, Y = (c.ravel() for c in d.mesh.coords)
    i = data.draw(st.integers(0, f.size - 1))
    j = data.draw(st.integers(0, f.size - 1))
    assert abs(f[i] - f[j]) <= math.hypot(X[i] - X[j], Y[i] - Y[j]) + 1e-12
    assert f.max() <= min(w, h) / 2 + 1e-12


@settings(max_examples=50, deadline=None)
@given(t=st.floats(1.0, 500.0), c=coef)
def test_lp_norm_below_sup(t, c):
    f = Field(IV, _profile(IV, c))
    assert lp_norm(f, t) <= sup_norm(f) * IV.volume ** (1 / t) * (1 + 1e-12) + 1e-300


def _dc(p):
    sup = (p - 1) / p * 2 ** (-1 / (p - 1))
    return DomainConstants(p, 1.0, sup, 2 ** (-1 / (p - 1)), 5.0, 1.0, 0.9, 1.2)


params_st = st.builds(lambda lam, beta, m, p: ProblemParams(lam=lam, beta=beta, m=m, p=p),
                      st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(4.0, 60.0))


@settings(max_examples=100, deadline=None)
@given(pr=params_st, M=st.floats(0.05, 5.0), shrink=st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3))
def test_region_is_monotone_in_coefficients(pr, M, shrink):
    dc = _dc(pr.p)
    smaller = pr.with_(lam=pr.lam * shrink[0], beta=pr.beta * shrink[1], m=pr.m * shrink[2])
    assert region_E_sum(smaller, dc, M) <= region_E_sum(pr, dc, M) * (1 + 1e-12)
    if in_region_E(pr, dc, M):
        assert in_region_E(smaller, dc, M)


@settings(max_examples=100, deadline=None)
@given(p=st.floats(4.0, 100.0), lam=st.floats(0.01, 5.0), beta=st.floats(0.0, 5.0), k=st.floats(1.0, 3.0))
def test_Mp_grows_with_lambda(p, lam, beta, k):
    dc = _dc(p)
    a = compute_Mp_corollary_up(ProblemParams(lam=lam, beta=beta, p=p), dc)
    b = compute_Mp_corollary_up(ProblemParams(lam=lam * k, beta=beta, p=p), dc)
    assert a <= b * (1 + 1e-12)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(lam=finite, beta=finite, p=st.floats(1.01, 500.0), m=st.none() | finite,
       grid=st.lists(st.floats(2.0, 200.0), min_size=1, max_size=6, unique=True),
       frac=st.floats(0.001, 0.999), workers=st.integers(1, 8))
def test_config_round_trip(lam, beta, p, m, grid, frac, workers):
    cfg = RunConfig(params=ParamsConfig(lam=lam, beta=beta, p=p, m=m),
                    sweep=SweepConfig(tuple(sorted(grid)), frac, workers))
    assert parse_config(cfg.to_text()) == cfg


@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_json_floats_round_trip(x):
    assert json.loads(dumps({"x": x}))["x"] == x
