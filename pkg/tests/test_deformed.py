from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import comb, gammaln
from scipy.stats import binom

from powerlaw_suff.deformed import (
    ContinuousBox,
    FiniteEnumerable,
    affine_log_residual,
    conditional_weights,
    deformed_conditional,
    deformed_density,
    deformed_expect,
    deformed_joint,
    deformed_marginal_q,
    deformed_normalizer,
    deformed_pmf,
    marginal_q,
    partition,
)
from powerlaw_suff.errors import DivergentNormalizer, EmptyBucket, UnsupportedSpace
from powerlaw_suff.families import (
    bernoulli_as_b_alpha,
    bernoulli_as_m2,
    bernoulli_exponential,
    binomial_exponential,
    density,
    student_alpha,
    student_scale_m_alpha,
)
from powerlaw_suff.likelihoods import LikelihoodKind
from powerlaw_suff.sufficiency import identity_statistic, sum_statistic

from .oracle_values import BERN_DEFORMED_N3_T03_110

J2 = LikelihoodKind.jones(2.0)
LOG = LikelihoodKind.log()


def _w(t: float) -> float:
    return (2 * t - 1) / (1 - t)


def _student_h(nu: float, n: int) -> float:
    """Integral of [mean(1 + b x_i^2)]^(1/(alpha-1)) over R^n, sigma^2 = 1."""
    alpha, b = student_alpha(nu)
    p = 1 / (1 - alpha)
    return math.exp(n / 2 * math.log(n * math.pi / b) + gammaln(p - n / 2) - gammaln(p))


def test_log_likelihood_deformation_is_product():
    spec, _ = bernoulli_exponential()
    dj = deformed_joint(spec, LOG, 3)
    for t in (0.2, 0.7):
        prod = np.prod(density(spec, t, dj.samples), axis=-1)
        assert np.allclose(deformed_pmf(dj, t), prod, rtol=0, atol=1e-15)
        assert deformed_normalizer(dj, t) == pytest.approx(1.0, abs=1e-14)


def test_bernoulli_jones_uniform_at_half():
    spec, _ = bernoulli_as_m2()
    dj = deformed_joint(spec, J2, 2)
    assert np.allclose(deformed_pmf(dj, 0.5), 0.25, atol=1e-15)


def test_bernoulli_jones_closed_form_density():
    spec, _ = bernoulli_as_m2()
    dj = deformed_joint(spec, J2, 3)
    expected = (1 - 0.3) / 4 * (1 + 2 / 3 * _w(0.3))
    val = deformed_density(dj, 0.3, np.array([1.0, 1.0, 0.0]))
    assert val == pytest.approx(expected, abs=1e-14)
    assert val == pytest.approx(BERN_DEFORMED_N3_T03_110, abs=1e-14)


@pytest.mark.parametrize("n,t", [(4, 0.25), (2, 0.6), (5, 0.1), (3, 0.9)])
def test_bernoulli_normalizer_closed_form(n, t):
    spec, _ = bernoulli_as_m2()
    assert deformed_normalizer(deformed_joint(spec, J2, n), t) == pytest.approx(2 ** (n - 1) / (1 - t), rel=1e-13)


@pytest.mark.parametrize("nu,alpha", [(19.0, 0.9), (7 / 3, 0.4)])
def test_student_jones_normalizer_finite(nu, alpha):
    spec, _ = student_scale_m_alpha(nu)
    dj = deformed_joint(spec, LikelihoodKind.jones(alpha), 2)
    assert deformed_normalizer(dj, 1.0) == pytest.approx(_student_h(nu, 2), rel=1e-7)


def test_student_jones_mismatched_alpha_diverges():
    spec, _ = student_scale_m_alpha(3.0)
    with pytest.raises(DivergentNormalizer):
        deformed_normalizer(deformed_joint(spec, LikelihoodKind.jones(1.5), 2), 1.0)


def test_continuous_pstar_normalizes():
    spec, _ = student_scale_m_alpha(19.0)
    dj = deformed_joint(spec, LikelihoodKind.jones(0.9), 2)
    mass = deformed_expect(dj, 1.0, lambda x: np.ones(len(x)))
    assert abs(mass - 1.0) < 1e-6
    assert deformed_expect(dj, 1.0, lambda x: x.mean(-1)) == pytest.approx(0.0, abs=1e-9)


def test_continuous_space_limits():
    spec, _ = student_scale_m_alpha(9.0)
    with pytest.raises(UnsupportedSpace):
        deformed_joint(spec, LikelihoodKind.jones(0.8), 4)
    dj = deformed_joint(spec, LikelihoodKind.jones(0.8), 2)
    with pytest.raises(UnsupportedSpace):
        partition(dj, sum_statistic())


def test_conditional_uniform_over_bucket():
    spec, _ = bernoulli_as_m2()
    dj = deformed_joint(spec, J2, 4)
    sl = deformed_conditional(dj, sum_statistic(), 0.3, np.array([1.0, 1.0, 0.0, 0.0]))
    assert len(sl.members) == 6
    assert np.allclose(sl.weights, 1 / comb(4, 2), atol=1e-15)
    assert np.allclose(sl.members.sum(-1), 2)


def test_conditional_log_matches_classical():
    spec, _ = binomial_exponential(2)
    dj = deformed_joint(spec, LOG, 3)
    x = np.array([0.0, 1.0, 2.0])
    sl = deformed_conditional(dj, sum_statistic(), 0.35, x)
    joint = np.prod(density(spec, 0.35, sl.members), axis=-1)
    assert np.allclose(sl.weights, joint / joint.sum(), atol=1e-14)
    assert sl.q == pytest.approx(binom.pmf(3, 6, 0.35), abs=1e-14)


def test_single_member_bucket_and_empty_bucket():
    spec, _ = bernoulli_as_m2()
    dj = deformed_joint(spec, J2, 3)
    sl = deformed_conditional(dj, sum_statistic(), 0.4, np.array([1.0, 1.0, 1.0]))
    assert sl.weights.tolist() == [1.0]
    with pytest.raises(EmptyBucket):
        deformed_marginal_q(dj, sum_statistic(), 0.4, 7.0)
    with pytest.raises(EmptyBucket):
        deformed_conditional(dj, sum_statistic(), 0.4, np.array([1.0, 1.0, 2.0]))


def test_marginal_q_bernoulli_closed_form():
    spec, _ = bernoulli_as_m2()
    dj = deformed_joint(spec, J2, 3)
    T = sum_statistic()
    for t in range(4):
        expected = comb(3, t) * (1 - 0.3) / 4 * (1 + t / 3 * _w(0.3))
        assert deformed_marginal_q(dj, T, 0.3, float(t)) == pytest.approx(expected, abs=1e-14)


def test_marginal_q_log_is_binomial():
    spec, _ = bernoulli_exponential()
    dj = deformed_joint(spec, LOG, 5)
    assert np.allclose(marginal_q(dj, sum_statistic(), 0.3), binom.pmf(np.arange(6), 5, 0.3), atol=1e-14)


def test_marginal_over_two_point_space():
    spec, _ = bernoulli_as_m2()
    dj = deformed_joint(spec, J2, 1)
    assert marginal_q(dj, sum_statistic(), 0.8).sum() == pytest.approx(1.0, abs=1e-15)


def test_finite_enumerable_explicit():
    spec, _ = bernoulli_as_m2()
    dj = deformed_joint(spec, J2, 2, FiniteEnumerable((0.0, 1.0)))
    assert dj.samples.shape == (4, 2)


@pytest.mark.parametrize("L", [J2, LikelihoodKind.basu(2.0), LikelihoodKind.jones(0.5), LOG], ids=lambda L: L.label)
def test_tower_property(L):
    spec, _ = bernoulli_as_m2()
    dj = deformed_joint(spec, L, 4)
    T = sum_statistic()
    g = lambda x: x[:, 0] * x[:, 1] + 0.3 * x[:, 2] - x[:, 3] ** 2  # noqa: E731
    part = partition(dj, T)
    for t in (0.2, 0.65):
        p = deformed_pmf(dj, t)
        gx = g(dj.samples)
        q = marginal_q(dj, T, t)
        cond = np.bincount(part.index, weights=p * gx) / q
        assert abs(np.dot(q, cond) - deformed_expect(dj, t, g)) < 1e-12


@pytest.mark.parametrize("alpha", [2.0, 0.5, 3.0])
def test_basu_pstar_is_exponential_in_fbar(alpha):
    spec, _ = bernoulli_as_b_alpha(alpha=alpha)
    dj = deformed_joint(spec, LikelihoodKind.basu(alpha), 5)
    for t in (0.15, 0.5, 0.85):
        assert affine_log_residual(dj, t) < 1e-10


def test_jones_pstar_not_exponential_for_m_alpha():
    spec, _ = bernoulli_as_m2()
    dj = deformed_joint(spec, J2, 4)
    assert affine_log_residual(dj, 0.3) > 1e-3


@given(st.floats(0.02, 0.98), st.integers(1, 7), st.sampled_from([0.5, 2.0, 3.0]))
@settings(max_examples=40, deadline=None)
def test_pstar_sums_to_one(t: float, n: int, alpha: float) -> None:
    spec, _ = bernoulli_as_m2()
    for L in (LikelihoodKind.jones(alpha), LikelihoodKind.basu(alpha)):
        dj = deformed_joint(spec, L, n)
        assert abs(deformed_pmf(dj, t).sum() - 1.0) < 1e-12
        assert abs(marginal_q(dj, sum_statistic(), t).sum() - 1.0) < 1e-12


@given(st.floats(0.02, 0.98), st.integers(1, 6))
@settings(max_examples=30, deadline=None)
def test_conditional_weights_normalize(t: float, n: int) -> None:
    spec, _ = bernoulli_as_m2()
    dj = deformed_joint(spec, J2, n)
    for T in (sum_statistic(), identity_statistic(n)):
        part = partition(dj, T)
        w = conditional_weights(dj, T, t)
        assert np.allclose(np.bincount(part.index, weights=w), 1.0, atol=1e-12)


def test_continuous_box_bounds_used():
    spec, _ = student_scale_m_alpha(19.0)
    dj = deformed_joint(spec, LikelihoodKind.jones(0.9), 1, ContinuousBox(bounds=(-50.0, 50.0)))
    full = deformed_normalizer(deformed_joint(spec, LikelihoodKind.jones(0.9), 1), 1.0)
    assert deformed_normalizer(dj, 1.0) < full
