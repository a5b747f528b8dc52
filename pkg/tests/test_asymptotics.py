import csv
import math
from dataclasses import replace

import pytest

from plap_limits import asymptotics
from plap_limits.asymptotics import COLUMNS, LimitTolerances, check_limits, run_sweep, triangle_ok
from plap_limits.errors import ConfigError
from plap_limits.fixed_point import FixedPointConfig, domain_data
from plap_limits.geometry import Domain
from plap_limits.thresholds import GradientEstimateConstants, ProblemParams, compute_Mp_corollary_up

DISK = Domain.ball(1.0, 2)
ARGS = dict(lam=1, beta=1, q=2, a=2, b=1, l=2, alpha=1, s=1)


@pytest.fixture(scope="module")
def table():
    return run_sweep(DISK, **ARGS)


def test_rows_sorted_and_intervals_ordered(table):
    ps = [r.p for r in table.rows]
    assert ps == sorted(ps) == [4, 8, 16, 32, 64, 100]
    for r in table.rows:
        assert r.kp_lower <= r.kp_upper
        assert r.M_p_lower <= r.M_p_upper
        assert r.m_p_lower <= r.m_p_upper
        assert r.ratio_lower <= r.ratio_upper
        assert r.verdict == "converged"


def test_m_respects_both_thresholds(table):
    m_inf = 2 / math.e
    for r in table.rows:
        assert 0 < r.m < min(r.m_p_lower, m_inf)


def test_interval_columns_contain_endpoint_recomputations(table):
    for r in table.rows:
        data = domain_data(DISK, r.p)
        dc = data.constants(1.0, GradientEstimateConstants(table.c, table.gamma))
        pr = ProblemParams(**ARGS, p=r.p)
        for k in (dc.kp_lower, dc.kp_upper):
            fixed = replace(dc, kp_lower=k, kp_upper=k)
            M = compute_Mp_corollary_up(pr, fixed)
            assert r.M_p_lower * (1 - 1e-12) <= M <= r.M_p_upper * (1 + 1e-12)


def test_torsion_error_decreases(table):
    errs = [r.torsion_err_vs_d for r in table.rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_eigen_limit_and_kp_envelope(table):
    checks = [r.eig_limit_check for r in table.rows]
    assert all(b < a for a, b in zip(checks, checks[1:]))
    widths = [r.kp_upper - r.kp_lower for r in table.rows[1:]]
    assert all(b < a for a, b in zip(widths, widths[1:]))


def test_triangle_on_every_row(table):
    assert all(triangle_ok(r) for r in table.rows)


def test_sandwich_at_large_p(table):
    for r in table.rows:
        if r.p >= 32:
            assert r.sandwich_ok


def test_limits_report(table):
    rep = check_limits(table)
    assert rep.p == 100
    assert rep.passed, [c for c in rep.checks if not c["passed"]]


def test_limits_report_can_fail(table):
    rep = check_limits(table, LimitTolerances(M_p_abs=1e-6, m_p_rel=1e-6))
    failed = {c["name"] for c in rep.checks if not c["passed"]}
    assert "M_p -> max d" in failed and "m_p -> m_inf" in failed
    assert not rep.passed


def test_parallel_sweep_matches_sequential():
    grid = (4.0, 16.0, 64.0)
    seq = run_sweep(DISK, **ARGS, p_grid=grid)
    par = run_sweep(DISK, **ARGS, p_grid=grid, workers=2)
    assert seq.rows == par.rows


def test_csv_output(table, tmp_path):
    path = table.to_csv(tmp_path / "disk.sweep.csv")
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == COLUMNS
    assert [float(r["p"]) for r in rows] == [r.p for r in table.rows]
    assert float(rows[-1]["u_err"]) == table.rows[-1].u_err


def test_bad_grids_are_rejected():
    with pytest.raises(ConfigError):
        run_sweep(DISK, **ARGS, p_grid=(8, 4))
    with pytest.raises(ConfigError):
        run_sweep(DISK, **ARGS, p_grid=(2.5, 4))
    with pytest.raises(ConfigError):
        run_sweep(DISK, **ARGS, m_fraction=1.0)


def test_row_failure_is_recorded(monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(asymptotics, "solve_problem_P", boom)
    tab = run_sweep(DISK, **ARGS, p_grid=(4.0, 8.0))
    assert [r.verdict for r in tab.rows] == ["error: solver exploded"] * 2
    assert math.isnan(tab.rows[0].u_err)


def test_non_convergence_is_a_row_verdict():
    tab = run_sweep(DISK, **ARGS, p_grid=(8.0,), fp=FixedPointConfig(max_outer=1))
    assert tab.rows[0].verdict == "max_iters"
