"""Acceptance criteria at their stated tolerances.

The whole suite runs once per module; each criterion is then reported as its
own test and prints its PASS/FAIL line to the terminal.
"""

import io
import math

import pytest

from gradproj.acceptance import CRITERION_IDS, TOLERANCES, run_suite
from gradproj.analysis import theta_m
from gradproj.objectives import get_problem
from gradproj.traceio import read_trace


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("suite")
    stream = io.StringIO()
    results, code = run_suite(out_dir=out, stream=stream)
    lines = dict(zip([r.id for r in results], stream.getvalue().splitlines()))
    return {r.id: r for r in results}, code, lines, out


def test_fifteen_criteria():
    assert len(CRITERION_IDS) == 15


@pytest.mark.parametrize("cid", CRITERION_IDS)
def test_criterion(suite, cid, capsys):
    results, _, lines, _ = suite
    with capsys.disabled():
        print("\n" + lines[cid])
    r = results[cid]
    assert r.passed, f"{cid}: measured {r.measured}; expected {r.expected}"


def test_suite_exit_code(suite):
    assert suite[1] == 0


def test_negative_control_fails():
    stream = io.StringIO()
    results, code = run_suite(["eigmin-rate"], tolerances={"q1_margin": -0.2}, stream=stream)
    assert code == 1 and not results[0].passed
    assert stream.getvalue().startswith("FAIL eigmin-rate")


def test_filter_runs_only_selected():
    stream = io.StringIO()
    results, code = run_suite(["eigmin-rate"], stream=stream)
    assert [r.id for r in results] == ["eigmin-rate"] and code == 0
    assert len(stream.getvalue().splitlines()) == 1


def test_unknown_criterion():
    with pytest.raises(KeyError):
        run_suite(["nope"])


def test_tolerances_untouched_by_overrides():
    run_suite(["ffw-theta-calculator"], tolerances={"theta_residual": 1.0})
    assert TOLERANCES["theta_residual"] == 1e-12


class TestHeaderConstants:
    def test_eigmin(self, suite):
        head, _ = read_trace(suite[3] / "eigmin-rate" / "diag-1-2-10.jsonl")
        c = head["constants"]
        lam = [1.0, 2.0, 10.0]
        gap, spread = lam[1] - lam[0], lam[2] - lam[0]
        assert c["L1"] == pytest.approx(2 * max(map(abs, lam)), rel=1e-12)
        assert c["q"] == pytest.approx(1 - c["tau"] ** 2 * gap / spread, rel=1e-12)
        assert c["q1"] == pytest.approx((lam[2] - lam[1]) / spread, rel=1e-12)
        assert c["mu"] == pytest.approx(4 * c["tau"] ** 2 * gap, rel=1e-12)

    def test_gpa2(self, suite):
        head, _ = read_trace(suite[3] / "gpa2-decrease" / "lpl2d-p0.5.jsonl")
        c = head["constants"]
        prob = get_problem("lpl2d:p=0.5")
        L, L1, R = prob.objective.L, prob.objective.L1, prob.surface.R
        t0 = 1 / (L1 + 2 * L / R)
        assert c["t0"] == pytest.approx(t0, rel=1e-12)
        assert c["q_t"] == pytest.approx(t0 - t0**2 * (L1 / 2 + L / R), rel=1e-12)

    def test_ffw(self, suite):
        head, _ = read_trace(suite[3] / "ffw-linear-rate" / "approxlinear.jsonl")
        c = head["constants"]
        g0 = head["constants"]["grad0_norm"]
        assert c["q"] == pytest.approx(c["L1"] / (g0 - c["L1"]), rel=1e-12)

    def test_ballwave_theta(self, suite):
        for path in (suite[3] / "ffw-contraction").glob("*.jsonl"):
            c = read_trace(path)[0]["constants"]
            assert c["m_hat"] > math.sqrt(2) and c["theta_m"] == theta_m(c["m_hat"])
