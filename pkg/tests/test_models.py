import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semcrra.errors import DomainError, InvalidModelError
from semcrra.models import (
    AccuracyModel,
    UserLink,
    accuracy,
    effective_accuracy,
    effective_accuracy_bound,
    q_bound,
    q_function,
    success_probability,
    success_probability_mc,
    tail_argument,
    transmission_delay,
    transmission_rate,
)

# Frozen from scipy.integrate.quad of the normal density (abs err ~1e-15).
Q3_QUAD = 0.0013498980316300946
Q2_QUAD = 0.02275013194817921
# mpmath, 30 digits
QBOUND_1 = 0.3032653298563167
ETA_REF_AT_1 = 0.4852290677630830
ETA_REF_AT_HALF = 0.6237144211570325
# 2 * quad of the density above sqrt(2) - 1
SUCCESS_REF = 0.6787177101893782

REF_BETA = (0.8, -0.5, 0.1, -10.0)


def unit_link(**kw):
    # a = d0/(B t0) = 1, b = P/(N0 B) = 1
    base = dict(d0=1e6, t0=1.0, delta=1.0, n0=1e-6, bandwidth=1e6, power=1.0)
    base.update(kw)
    return UserLink(**base)


class TestQFunction:
    def test_zero(self):
        assert q_function(0.0) == 0.5

    def test_three_matches_quadrature(self):
        assert q_function(3.0) == pytest.approx(Q3_QUAD, rel=1e-12)

    def test_reflection(self):
        assert q_function(-2.0) == pytest.approx(1.0 - Q2_QUAD, rel=1e-12)

    def test_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            q_function(float("nan"))
        with pytest.raises(DomainError):
            q_function(np.inf)

    def test_symmetry_and_strict_decrease(self):
        x = np.arange(-8.0, 8.0 + 1e-9, 1e-2)
        assert np.max(np.abs(q_function(x) + q_function(-x) - 1.0)) < 1e-12
        assert np.all(np.diff(q_function(x)) <= 0)
        # left of -5 the value is within a few ulp of 1.0 in float64
        right = x[x >= -5.0]
        assert np.all(np.diff(q_function(right)) < 0)

    def test_vectorized(self):
        out = q_function(np.array([0.0, 3.0]))
        assert out.shape == (2,)


class TestQBound:
    def test_values(self):
        assert q_bound(0.0) == 0.5
        assert q_bound(1.0) == pytest.approx(QBOUND_1, rel=1e-14)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            q_bound(-0.1)

    @given(st.floats(min_value=0.0, max_value=40.0))
    def test_dominates_q(self, x):
        assert q_bound(x) >= q_function(x)


class TestRateAndDelay:
    def test_zero_gain(self):
        assert transmission_rate(unit_link(), 0.0) == 0.0

    def test_log2_two_and_four(self):
        link = unit_link()  # h*P/(N0 B) == h
        assert transmission_rate(link, 1.0) == pytest.approx(1e6)
        assert transmission_rate(link, 3.0) == pytest.approx(2e6)

    def test_delay_arithmetic(self):
        link = unit_link()
        assert transmission_delay(link, 0.5, 1.0) == pytest.approx(0.5)

    def test_delay_linear_in_payload(self):
        link = unit_link()
        assert transmission_delay(link, 0.2, 2.0) == pytest.approx(
            2 * transmission_delay(link, 0.6, 2.0))

    def test_delay_vanishes_at_full_compression(self):
        assert transmission_delay(unit_link(), 1.0 - 1e-12, 1.0) < 1e-10

    def test_delay_needs_positive_gain(self):
        with pytest.raises(DomainError):
            transmission_delay(unit_link(), 0.5, 0.0)


class TestSuccessProbability:
    def test_reference_case(self):
        link = unit_link()
        assert link.a == pytest.approx(1.0) and link.b == pytest.approx(1.0)
        assert tail_argument(link, 0.5) == pytest.approx(math.sqrt(2) - 1)
        assert success_probability(link, 0.5) == pytest.approx(SUCCESS_REF, rel=1e-12)

    def test_zero_payload_is_certain(self):
        assert success_probability(unit_link(), 1.0) == 1.0
        assert success_probability(unit_link(), 1.0 - 1e-13) == pytest.approx(1.0)

    def test_huge_power(self):
        assert success_probability(unit_link(power=1e9), 0.1) == pytest.approx(1.0, abs=1e-8)

    def test_matches_monte_carlo_reference(self):
        p_mc = success_probability_mc(unit_link(), 0.5, samples=1_000_000, seed=7)
        sigma = math.sqrt(SUCCESS_REF * (1 - SUCCESS_REF) / 1e6)
        assert abs(p_mc - SUCCESS_REF) < 4 * sigma

    def test_mc_deterministic_and_exact_at_zero_payload(self):
        link = unit_link()
        assert success_probability_mc(link, 0.3, 10_000, seed=3) == \
            success_probability_mc(link, 0.3, 10_000, seed=3)
        assert success_probability_mc(link, 1.0, 10_000, seed=11) == 1.0

    def test_mc_rejects_zero_samples(self):
        with pytest.raises(DomainError):
            success_probability_mc(unit_link(), 0.5, 0, seed=0)

    @settings(max_examples=60, deadline=None)
    @given(a=st.floats(0.1, 8.0), b=st.floats(0.05, 50.0), delta=st.floats(0.1, 5.0))
    def test_nondecreasing_in_ratio(self, a, b, delta):
        link = UserLink(d0=a * 1e6 * 1e-3, t0=1e-3, delta=delta, n0=1e-9,
                        bandwidth=1e6, power=b * 1e-9 * 1e6)
        grid = np.arange(0.0, 1.0 + 1e-9, 1e-2)
        p = np.array([success_probability(link, o) for o in grid])
        assert np.all(np.diff(p) >= -1e-15)
        assert np.all((p >= 0) & (p <= 1))

    def test_ratio_out_of_range(self):
        with pytest.raises(DomainError):
            success_probability(unit_link(), 1.5)


class TestAccuracy:
    def test_at_zero(self):
        m = AccuracyModel(*REF_BETA)
        assert accuracy(m, 0.0) == pytest.approx(0.9)

    def test_reference_value(self):
        m = AccuracyModel(*REF_BETA)
        assert accuracy(m, 1.0) == pytest.approx(ETA_REF_AT_1, rel=1e-14)

    def test_constant_curve(self):
        m = AccuracyModel(0.9, 0.0, 0.0, 0.0)
        assert all(accuracy(m, o) == pytest.approx(0.9) for o in (0.0, 0.37, 1.0))

    def test_domain(self):
        with pytest.raises(DomainError):
            accuracy(AccuracyModel(*REF_BETA), -0.01)

    def test_range_check(self):
        with pytest.raises(InvalidModelError):
            AccuracyModel(0.8, 1.0, 0.1, 0.0)
        unchecked = AccuracyModel(0.8, 1.0, 0.1, 0.0, check=False)
        assert not unchecked.in_range()

    def test_nonfinite_parameter(self):
        with pytest.raises(InvalidModelError):
            AccuracyModel(np.nan, 0, 0, 0)


class TestEffectiveAccuracy:
    model = AccuracyModel(*REF_BETA)

    def test_zero_payload(self):
        assert effective_accuracy(unit_link(), 1.0, self.model) == pytest.approx(ETA_REF_AT_1)
        assert effective_accuracy_bound(unit_link(), 1.0, self.model) == pytest.approx(ETA_REF_AT_1)

    def test_vanishing_power(self):
        assert effective_accuracy(unit_link(power=1e-9), 0.5, self.model) < 1e-12

    def test_product_of_oracled_values(self):
        assert effective_accuracy(unit_link(), 0.5, self.model) == pytest.approx(
            SUCCESS_REF * ETA_REF_AT_HALF, rel=1e-12)

    def test_bound_at_unit_argument(self):
        # power chosen so that arg == 1 at o = 0.5
        link = unit_link(power=math.sqrt(2) - 1)
        assert tail_argument(link, 0.5) == pytest.approx(1.0)
        assert effective_accuracy_bound(link, 0.5, self.model) == pytest.approx(
            math.exp(-0.5) * ETA_REF_AT_HALF, rel=1e-12)

    @settings(max_examples=200)
    @given(a=st.floats(0.01, 20.0), b=st.floats(1e-3, 1e3), delta=st.floats(0.05, 10.0),
           o=st.floats(0.0, 1.0))
    def test_bound_dominates_exact(self, a, b, delta, o):
        link = UserLink(d0=a * 1e4, t0=1e-2, delta=delta, n0=1e-12,
                        bandwidth=1e6, power=b * 1e-6)
        assert effective_accuracy_bound(link, o, self.model) >= \
            effective_accuracy(link, o, self.model)

    def test_purity(self):
        link = unit_link(delta=0.7)
        assert effective_accuracy(link, 0.3, self.model) == effective_accuracy(link, 0.3, self.model)


def test_userlink_validation():
    with pytest.raises(DomainError):
        unit_link(bandwidth=0.0)
    with pytest.raises(DomainError):
        unit_link(delta=-1.0)
