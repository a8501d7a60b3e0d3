"""Small-delta behavior: sweeps, extrapolation, recovery."""

import math

import pytest

import nlsob as nl
from nlsob.errors import DivergentIntegralError, PreconditionError
from nlsob.limits import (
    check_upper_bound,
    delta_sweep,
    estimate_qn,
    gradient_limit_constant,
    recover_classical_lsi,
)

from conftest import rel_err

DELTAS = [0.2 * 2.0 ** (-k) for k in range(6)]


@pytest.fixture(scope="module")
def gauss_sweep(engine, gauss3):
    return delta_sweep(gauss3, DELTAS, engine)


class TestCandidateConstant:
    def test_values(self):
        assert rel_err(gradient_limit_constant(3), 2.0 * math.pi / 3.0) < 1e-15
        assert rel_err(gradient_limit_constant(4), 2.0 * math.pi ** 2 / 8.0) < 1e-15


class TestDeltaSweep:
    def test_rejects_constant_field(self, engine):
        with pytest.raises(PreconditionError):
            delta_sweep(nl.ConstantField(3, 1.0), DELTAS, engine)

    def test_rejects_oversized_delta(self, engine, gauss3):
        with pytest.raises(PreconditionError):
            delta_sweep(gauss3, [3.0, 1.5], engine)

    def test_rejects_nondecreasing_grid(self, engine, gauss3):
        with pytest.raises(PreconditionError):
            delta_sweep(gauss3, [0.1, 0.2], engine)

    def test_ratios_increase_toward_candidate(self, gauss_sweep):
        r = gauss_sweep.ratios
        assert all(b > a for a, b in zip(r, r[1:]))
        assert rel_err(gauss_sweep.extrapolated_limit,
                       gradient_limit_constant(3)) < 0.02

    def test_drop_coarsest_within_error(self, engine, gauss3, gauss_sweep):
        shorter = delta_sweep(gauss3, DELTAS[1:], engine)
        assert (abs(shorter.extrapolated_limit - gauss_sweep.extrapolated_limit)
                <= gauss_sweep.extrapolation_error)

    def test_dilation_invariance_of_limit(self, engine, gauss3, gauss_sweep):
        other = delta_sweep(gauss3.dilate(2.0), DELTAS, engine)
        tol = gauss_sweep.extrapolation_error + other.extrapolation_error + 1e-3
        assert abs(other.extrapolated_limit - gauss_sweep.extrapolated_limit) <= tol

    def test_diverging_field_aborts(self, engine, indicator3, bump3):
        # the jump field fails the differentiability precondition outright
        with pytest.raises((PreconditionError, DivergentIntegralError)):
            delta_sweep(indicator3, [0.5, 0.25, 0.125], engine)
        # a differentiable field whose nonlocal term diverges aborts too
        spiky = nl.FiniteSumField([bump3, nl.IndicatorField(3, 0.5)])
        assert not spiky.differentiable  # sanity: also caught up front
        with pytest.raises((PreconditionError, DivergentIntegralError)):
            delta_sweep(spiky, [0.5, 0.25, 0.125], engine)


class TestEstimateQn:
    def test_needs_two_fields(self, engine, gauss3):
        with pytest.raises(PreconditionError):
            estimate_qn(3, [gauss3], engine)

    def test_pooled_estimate(self, engine, gauss3):
        est = estimate_qn(3, [gauss3, gauss3.dilate(1.5)], engine, DELTAS)
        assert rel_err(est.value, est.analytic_candidate) < 0.02
        assert est.consistent
        assert "derived" in est.candidate_label


class TestUpperBound:
    def test_sup_finite_and_stable(self, engine, gauss3):
        rep = check_upper_bound(gauss3, [0.2 * 2.0 ** (-k) for k in range(4)], engine)
        assert math.isfinite(rep.sup_ratio)
        assert rep.grid_stable
        assert rep.relative_change < 0.05

    def test_sup_dominates_extrapolated_limit(self, engine, gauss3, gauss_sweep):
        rep = check_upper_bound(gauss3, DELTAS, engine)
        # the grid sup sits within the extrapolation gap of the limit point
        floor = gauss_sweep.extrapolated_limit - max(
            3.0 * gauss_sweep.extrapolation_error,
            0.02 * gauss_sweep.extrapolated_limit)
        assert rep.sup_ratio >= floor

    def test_dilates_share_ratio_curve(self, engine, gauss3):
        a = check_upper_bound(gauss3, [0.2, 0.1, 0.05], engine)
        b = check_upper_bound(gauss3.dilate(2.0), [0.2, 0.1, 0.05], engine)
        for ra, rb in zip(a.ratios, b.ratios):
            assert rel_err(ra, rb) < 5e-3


class TestRecovery:
    def test_delta_term_washes_out(self, engine, gauss3):
        rep = recover_classical_lsi(gauss3, DELTAS, family_constant=0.05,
                                    engine=engine)
        assert rep.dterm_monotone
        assert all(b < a for a, b in zip(rep.residuals, rep.residuals[1:]))
        assert rep.final_gap < 0.01

    def test_lhs_is_delta_independent(self, gauss3):
        # the left side never saw delta; nothing to sweep there
        from nlsob.functionals import entropy_l2
        ent = entropy_l2(gauss3)
        assert ent == entropy_l2(gauss3)
