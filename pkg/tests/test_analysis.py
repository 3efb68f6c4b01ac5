import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradproj.analysis import (
    cap_region,
    check_rate_bound,
    circle_path,
    ffw_contraction_check,
    ffw_local_rate,
    fit_linear_rate,
    h,
    h_ratio,
    lpl_exponent_estimate,
    lpl_mu_estimate,
    stationarity_distance,
    theta_m,
)
from gradproj.errors import (
    DominanceTooWeak,
    InsufficientRange,
    NonPositiveValue,
    NoSamplesInLevel,
    ThetaOutOfRange,
    TooShort,
)
from gradproj.objectives import PROBLEM_IDS, get_problem
from gradproj.solvers import SolverConfig, ffw_run


class TestFitLinearRate:
    def test_exact_geometric(self):
        rep = fit_linear_rate(0.5 ** np.arange(30))
        assert rep.fitted_q == pytest.approx(0.5, rel=1e-12)
        assert rep.residual < 1e-12

    def test_theoretical_echoed(self):
        rep = fit_linear_rate(3.0 * 0.9 ** np.arange(20), theoretical_q=0.95)
        assert rep.theoretical_q == 0.95 and rep.fitted_q == pytest.approx(0.9, rel=1e-12)

    def test_tail_only(self):
        v = np.concatenate([0.1 ** np.arange(10), 1e-9 * 0.5 ** np.arange(1, 11)])
        assert fit_linear_rate(v, tail_fraction=0.4).fitted_q == pytest.approx(0.5, rel=1e-10)

    def test_cut_at_underflow(self):
        v = 0.1 ** np.arange(25)
        rep = fit_linear_rate(v, tail_fraction=1.0)
        assert rep.n_used == 15
        assert rep.fitted_q == pytest.approx(0.1, rel=1e-10)

    def test_too_short(self):
        with pytest.raises(TooShort):
            fit_linear_rate([1.0, 0.5, 0.25])
        with pytest.raises(TooShort):
            fit_linear_rate([1.0, 1e-3, 1e-15, 1e-16, 1e-17])

    @pytest.mark.parametrize("v", [[0.0, 1.0, 2.0, 3.0], [1.0, -0.5, 0.25, 0.1], [1.0, math.nan, 1.0, 1.0]])
    def test_nonpositive(self, v):
        with pytest.raises(NonPositiveValue):
            fit_linear_rate(v)

    @given(st.floats(0.05, 0.99), st.floats(1e-3, 1e3))
    def test_recovers_rate(self, q, c):
        v = c * q ** np.arange(12)
        assert fit_linear_rate(v).fitted_q == pytest.approx(q, rel=1e-9)


class TestCheckRateBound:
    def test_passes(self):
        chk = check_rate_bound(0.5 ** np.arange(10), 0.5)
        assert chk.passed and chk.worst_ratio == 0.5 and chk.n_checked == 9

    def test_fails_and_locates(self):
        seq = [1.0, 0.5, 0.4, 0.2]
        chk = check_rate_bound(seq, 0.5)
        assert not chk.passed and chk.worst_index == 1
        assert chk.worst_ratio == pytest.approx(0.8)

    def test_slack(self):
        assert check_rate_bound([1.0, 0.501], 0.5, slack=0.01).passed

    def test_floor_skips_tail(self):
        chk = check_rate_bound([1.0, 0.5, 1e-12, 1e-12], 0.5, floor=1e-10)
        assert chk.passed and chk.n_checked == 2


class TestThetaCalculator:
    def test_h_endpoints(self):
        assert h(0.0) == 0.0
        assert h(1.0) == math.sqrt(2.0)

    def test_h_frozen(self):
        # 2 sin(arcsin(1/2) / 2), 20 digits
        assert h(0.5) == pytest.approx(0.5176380902050415247, rel=1e-15)

    @given(st.floats(0.0, 1.0))
    def test_h_matches_trig_form(self, t):
        assert h(t) == pytest.approx(2 * math.sin(math.asin(t) / 2), rel=1e-13, abs=1e-300)

    @pytest.mark.parametrize("m, expected", [
        (1.05, 0.58078224375808151351),
        (1.2, 0.9212846639876110692),
        (1.4, 0.99979173174823595845),
    ])
    def test_theta_m_frozen(self, m, expected):
        tm = theta_m(m)
        assert tm == pytest.approx(expected, rel=1e-13)
        assert abs(h_ratio(tm) - m) <= 1e-12

    @given(st.floats(1.0001, 1.41))
    def test_theta_m_closed_form(self, m):
        closed = math.sqrt(1 - (2 / m**2 - 1) ** 2)
        assert theta_m(m) == pytest.approx(closed, abs=1e-7)
        assert abs(h_ratio(theta_m(m)) - m) <= 1e-12

    @pytest.mark.parametrize("m", [math.sqrt(2), 1.5, 10.0])
    def test_theta_m_saturates(self, m):
        assert theta_m(m) == 1.0

    @pytest.mark.parametrize("m", [1.0, 0.5, -1.0])
    def test_weak_dominance(self, m):
        with pytest.raises(DominanceTooWeak):
            theta_m(m)
        with pytest.raises(DominanceTooWeak):
            ffw_local_rate(m, 0.1)

    @given(st.floats(1.001, 3.0), st.floats(0.001, 0.999))
    def test_local_rate_below_one(self, m, frac):
        theta = frac * theta_m(m)
        assert 0 < ffw_local_rate(m, theta) < 1

    @given(st.floats(1.001, 1.4), st.floats(0.01, 0.98))
    def test_local_rate_increasing(self, m, frac):
        tm = theta_m(m)
        a, b = frac * tm, min(frac + 0.01, 0.999) * tm
        assert ffw_local_rate(m, a) <= ffw_local_rate(m, b)

    def test_theta_range(self):
        tm = theta_m(1.2)
        for bad in (0.0, tm, 1.0, -0.1):
            with pytest.raises(ThetaOutOfRange):
                ffw_local_rate(1.2, bad)
        assert ffw_local_rate(2.0, 1.0) == pytest.approx(math.sqrt(2) / 2.0, rel=1e-15)
        with pytest.raises(ThetaOutOfRange):
            h(1.5)


class TestContractionCheck:
    def test_ballwave(self):
        prob = get_problem("ballwave")
        tr = ffw_run(prob.surface, prob.objective, None, prob.x0)
        chk = ffw_contraction_check(tr, floor=1e-9)
        assert chk.passed

    def test_warns_without_dominance(self):
        prob = get_problem("quad")
        tr = ffw_run(prob.surface, prob.objective, SolverConfig("ffw", max_iter=10), prob.x0)
        with pytest.warns(RuntimeWarning):
            assert ffw_contraction_check(tr) is None


class TestLplEstimates:
    def test_quadratic_cap_bound(self):
        prob = get_problem("quad:diag=1,2,10")
        est = lpl_mu_estimate(prob.surface, prob.objective, 1.0, 2.0, n_samples=2000, region=cap_region(0.5))
        assert est.n_samples == 2000
        assert est.mu_hat >= 4 * 0.25 * (2 - 1) - 1e-9
        assert est.worst_point[0] >= 0.5

    def test_repeated_eigenvalue_cap(self):
        prob = get_problem("quad:diag=1,1,3")
        est = lpl_mu_estimate(prob.surface, prob.objective, 1.0, 2.0, n_samples=2000, region=cap_region(0.5, k=2))
        assert est.mu_hat >= 4 * 0.25 * (3 - 1) - 1e-9

    def test_deterministic(self):
        prob = get_problem("quad")
        a = lpl_mu_estimate(prob.surface, prob.objective, 1.0, n_samples=500, seed=3)
        b = lpl_mu_estimate(prob.surface, prob.objective, 1.0, n_samples=500, seed=3)
        assert a.mu_hat == b.mu_hat

    def test_empty_level(self):
        prob = get_problem("quad")
        with pytest.raises(NoSamplesInLevel):
            lpl_mu_estimate(prob.surface, prob.objective, 1.0, beta=0.5, n_samples=100, max_draw_factor=4)

    @pytest.mark.parametrize("p, lo, hi", [("0.5", 1.85, 2.15), ("1", 1.23, 1.43)])
    def test_exponents(self, p, lo, hi):
        prob = get_problem(f"lpl2d:p={p}")
        assert lo <= lpl_exponent_estimate(prob.surface, prob.objective, 0.0, circle_path()) <= hi

    def test_quadratic_exponent_two(self):
        prob = get_problem("quad")
        s = np.geomspace(0.3, 1e-4, 30)
        path = np.stack([np.cos(s), np.sin(s), np.zeros_like(s)], axis=1)
        a = lpl_exponent_estimate(prob.surface, prob.objective, 1.0, path)
        assert a == pytest.approx(2.0, abs=1e-2)

    def test_short_range(self):
        prob = get_problem("lpl2d")
        with pytest.raises(InsufficientRange):
            lpl_exponent_estimate(prob.surface, prob.objective, 0.0, circle_path(0.5, 0.3, 5))
        with pytest.raises(InsufficientRange):
            lpl_exponent_estimate(prob.surface, prob.objective, 0.0, [np.zeros(2), circle_point_safe()])


def circle_point_safe():
    return circle_path(0.5, 0.5, 1)[0]


class TestStationarity:
    @pytest.mark.parametrize("pid", [p for p in PROBLEM_IDS if get_problem(p).minimizer is not None])
    def test_registered_minimizers(self, pid):
        prob = get_problem(pid)
        assert stationarity_distance(prob.surface, prob.objective, prob.minimizer) <= 1e-10
        assert prob.objective.f(prob.minimizer) == pytest.approx(prob.f0, abs=1e-12)

    def test_nonstationary(self):
        prob = get_problem("quad")
        x = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
        assert stationarity_distance(prob.surface, prob.objective, x) == pytest.approx(1.0, rel=1e-12)

    def test_ball_inward_gradient(self):
        prob = get_problem("minstat:r=2")
        x = np.array([0.0, 0.0])
        assert stationarity_distance(prob.surface, prob.objective, x) == 0.0
