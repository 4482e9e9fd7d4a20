from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from powerlaw_suff.bounds import (
    BoundReport,
    b_alpha_tightness,
    basu_student_location_bound,
    bound_report,
    classical_fisher_info,
    deformed_var,
    gen_fisher_info,
    m_alpha_crlb_check,
    m_alpha_score_identities,
    score_star,
    student_closed_forms,
    student_coefficients,
    tau_star,
    tau_star_prime,
)
from powerlaw_suff.deformed import deformed_expect, deformed_joint
from powerlaw_suff.errors import BoundaryTheta, PreconditionFailed, PsiBiased, ValidityViolated, ZeroCovariance, ZeroInformation
from powerlaw_suff.families import FiniteSupport, bernoulli_as_b_alpha, bernoulli_as_m2, bernoulli_exponential, custom_polynomial_family
from powerlaw_suff.likelihoods import LikelihoodKind
from powerlaw_suff.raoblackwell import EstimatorFn, combine, first_coordinate, sample_mean, scaled
from powerlaw_suff.sufficiency import make_theta_grid

from .oracle_values import BASU_LOC_NU3_MEAN_MU07, BASU_LOC_NU3_VAR, E_MEANX2, VAR_MEANX2, ZINV

J2 = LikelihoodKind.jones(2.0)


def _bern(n: int, L: LikelihoodKind = J2):
    return deformed_joint(bernoulli_as_m2()[0], L, n)


def test_score_has_zero_mean():
    for n in (2, 3, 4):
        dj = _bern(n)
        for t in make_theta_grid(dj.spec, 10):
            assert abs(deformed_expect(dj, t, lambda x: score_star(dj, t, x))) < 1e-8


def test_score_matches_hand_derivative():
    dj = _bern(2)
    t = 0.4
    w = (2 * t - 1) / (1 - t)
    dw = 1 / (1 - t) ** 2
    X = dj.samples
    xbar = X.mean(-1)
    expected = -1 / (1 - t) + dw * xbar / (1 + w * xbar)
    assert np.max(np.abs(score_star(dj, t, X) - expected)) < 1e-8


def test_score_log_likelihood_is_classical():
    dj = deformed_joint(bernoulli_exponential()[0], LikelihoodKind.log(), 3)
    t = 0.35
    X = dj.samples
    expected = (X / t - (1 - X) / (1 - t)).sum(-1)
    assert np.max(np.abs(score_star(dj, t, X) - expected)) < 1e-8


@pytest.mark.parametrize("alpha", [1 - 1e-3, 1 + 1e-3])
def test_gen_fisher_tends_to_classical(alpha):
    dj = deformed_joint(bernoulli_exponential()[0], LikelihoodKind.jones(alpha), 3)
    for t in (0.3, 0.5, 0.7):
        gi, ci = gen_fisher_info(dj, t), classical_fisher_info(dj, t)
        assert abs(gi - ci) / ci < 1e-4


def test_classical_fisher_bernoulli_log():
    for n in (1, 3, 5):
        dj = deformed_joint(bernoulli_exponential()[0], LikelihoodKind.log(), n)
        for t in (0.2, 0.5, 0.9):
            assert classical_fisher_info(dj, t) == pytest.approx(n / (t * (1 - t)), rel=1e-8)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_rb_variance_equals_gen_crlb(n):
    dj = _bern(n)
    for t in (0.2, 0.5, 0.75):
        rep = bound_report(dj, t)
        assert rep.var_of_fbar == pytest.approx(rep.gen_crlb, rel=1e-8)
        assert rep.classical_crlb <= rep.gen_crlb + 1e-10


def test_flat_point_finite():
    dj = _bern(3)
    gi = gen_fisher_info(dj, 0.5)
    assert math.isfinite(gi) and gi > 0


def test_sharpness_on_grid():
    for n in (2, 3, 4):
        dj = _bern(n)
        for t in make_theta_grid(dj.spec, 20):
            assert 1 / classical_fisher_info(dj, t) <= 1 / gen_fisher_info(dj, t) + 1e-10


def test_degenerate_family_has_no_information():
    flat = custom_polynomial_family("exponential", 1.0, h=[0.0], f=[[1.0, 0.0]], w=[[0.0]], support=FiniteSupport((0.0, 1.0)), theta_box=[(0, 1)])
    dj = deformed_joint(flat, LikelihoodKind.log(), 2)
    with pytest.raises(ZeroInformation):
        classical_fisher_info(dj, 0.5)
    dj2 = deformed_joint(flat, LikelihoodKind.jones(2.0), 2)
    with pytest.raises(ZeroCovariance):
        gen_fisher_info(dj2, 0.5)


def test_boundary_theta():
    dj = _bern(2)
    with pytest.raises(BoundaryTheta):
        score_star(dj, 1e-6, dj.samples)


def test_crlb_check_pool():
    spec, _ = bernoulli_as_m2()
    pool = [sample_mean(), first_coordinate(), combine(first_coordinate(), sample_mean(), 0.5, 0.5)]
    res = m_alpha_crlb_check(spec, 0.7, pool, 4)
    assert res.attaining == ["xbar"]
    assert res.violations == []
    for v in res.variances.values():
        assert v >= res.report.gen_crlb - 1e-10


def test_crlb_check_fbar_alone_is_tight():
    spec, _ = bernoulli_as_m2()
    res = m_alpha_crlb_check(spec, 0.7, [sample_mean()], 3)
    assert abs(res.variances["xbar"] - res.report.gen_crlb) < 1e-10


def test_crlb_check_preconditions():
    spec, _ = bernoulli_as_m2()
    with pytest.raises(PsiBiased):
        m_alpha_crlb_check(spec, 0.7, [scaled(sample_mean(), 1.0, 0.05)], 3)
    with pytest.raises(PreconditionFailed):
        m_alpha_crlb_check(spec, 0.3, [sample_mean()], 3)
    with pytest.raises(PreconditionFailed):
        m_alpha_crlb_check(bernoulli_exponential()[0], 0.7, [sample_mean()], 3)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_score_identities(n):
    dj = _bern(n)
    for t in (0.3, 0.6, 0.85):
        chk = m_alpha_score_identities(dj, t)
        assert chk.max_rel_error < 1e-6


@pytest.mark.parametrize("alpha", [2.0, 0.5, 3.0])
def test_b_alpha_tightness(alpha):
    spec, _ = bernoulli_as_b_alpha(alpha=alpha)
    for n in (2, 4):
        for t in (0.25, 0.6):
            assert b_alpha_tightness(spec, t, n).residual < 1e-8


def test_bound_report_serialization():
    rep = bound_report(_bern(2), 0.4)
    assert BoundReport.CSV_HEADER == "theta,var_fbar,gen_crlb,classical_crlb,ratio"
    assert rep.csv_row().split(",")[0] == "0.4"
    assert rep.to_dict()["ratio"] == pytest.approx(rep.ratio)


def test_tau_star_prime_closed_form():
    for n in (2, 5):
        dj = _bern(n)
        assert tau_star_prime(dj, 0.4, first_coordinate()) == pytest.approx(1 / n, rel=1e-8)
        assert tau_star(dj, 0.4, sample_mean()) == pytest.approx(0.4 / n + (n - 1) / (2 * n), abs=1e-13)


def test_student_coefficients():
    A, B, C = student_coefficients(0.8, 3)
    g = 0.2
    assert A == pytest.approx(g * 1 / (2 - 3 * g))
    assert B == pytest.approx(3 * g / (1.6 - 3 * g))
    assert C == pytest.approx(g * 5 / (1.6 + 5 * (0.8 - 1)))
    assert student_coefficients(0.8, 2)[0] == 0.0


@pytest.mark.parametrize("n,nu", [(1, 3.0), (2, 9.0), (3, 11.0), (1, 9.0), (3, 21.0)])
def test_student_normalizer_exact(n, nu):
    cf = student_closed_forms(nu, n)
    assert cf.H_n_exact == pytest.approx(ZINV[(n, nu)], rel=1e-12)


def test_student_h2_quadrature():
    cf = student_closed_forms(9.0, 2, quadrature=True)
    assert abs(cf.H_n_quadrature - cf.H_n_exact) < 1e-5
    assert abs(cf.H_n - cf.H_n_exact) < 1e-5
    assert not cf.flags["H_n"]


def test_student_h3_printed_discrepancy_flagged():
    cf = student_closed_forms(11.0, 3)
    assert cf.flags["H_n"]
    assert cf.H_n / math.sqrt(cf.b) == pytest.approx(cf.H_n_exact, rel=1e-12)


@pytest.mark.parametrize("n,nu", [(1, 9.0), (2, 9.0), (3, 11.0)])
def test_student_moment_exact_and_quadrature(n, nu):
    cf = student_closed_forms(nu, n, quadrature=(n < 3))
    # fields are coefficients of sigma^2/b
    assert cf.E_star_xbar2_exact / cf.b == pytest.approx(E_MEANX2[(n, nu)], rel=1e-12)
    if cf.E_star_xbar2_quadrature is not None:
        assert cf.E_star_xbar2_quadrature == pytest.approx(cf.E_star_xbar2_exact, rel=1e-6)


def test_student_printed_moment_suspect_values():
    two = student_closed_forms(9.0, 2)
    assert two.A_n == 0.0 and two.E_star_xbar2 == 0.0 and two.flags["E_star_xbar2"]
    one = student_closed_forms(9.0, 1)
    assert one.E_star_xbar2 < 0 and one.flags["E_star_xbar2"]


@pytest.mark.parametrize("n,nu", [(1, 9.0), (2, 9.0), (3, 21.0)])
def test_student_crlb_coefficient_exact(n, nu):
    cf = student_closed_forms(nu, n)
    assert cf.gen_crlb_sigma4_coeff_exact / cf.b**2 == pytest.approx(VAR_MEANX2[(n, nu)], rel=1e-12)


def test_student_validity():
    with pytest.raises(ValidityViolated) as exc:
        student_closed_forms(3.0, 4)
    assert exc.value.threshold == "alpha > 1 - 2/n"
    cf = student_closed_forms(3.0, 2)
    assert "alpha > n/(n+2)" in cf.unmet and cf.E_star_xbar2_exact is None


def test_student_moment_grows_near_threshold():
    vals = [student_closed_forms(nu, 1, quadrature=True) for nu in (5.0, 3.0, 2.5)]
    exact = [v.E_star_xbar2_exact for v in vals]
    quad = [v.E_star_xbar2_quadrature for v in vals]
    assert exact[0] < exact[1] < exact[2]
    for e, q in zip(exact, quad):
        assert q == pytest.approx(e, rel=1e-5)


def test_basu_location_bound():
    res = basu_student_location_bound(3.0, mu=0.7)
    assert res.var_coeff == pytest.approx(BASU_LOC_NU3_VAR, rel=1e-12)
    assert res.var_quadrature == pytest.approx(res.var_coeff, rel=1e-6)
    assert abs(res.mean_quadrature - BASU_LOC_NU3_MEAN_MU07) < 1e-6
    assert max(res.affine_residuals.values()) < 1e-10


def test_basu_location_symmetry():
    a = basu_student_location_bound(3.0, mu=1.0)
    b = basu_student_location_bound(3.0, mu=-1.0)
    assert a.var_quadrature == pytest.approx(b.var_quadrature, rel=1e-9)


@given(st.floats(0.05, 0.95), st.integers(2, 5))
@settings(max_examples=20, deadline=None)
def test_sharpness_property(t: float, n: int) -> None:
    rep = bound_report(_bern(n), t)
    assert rep.classical_crlb <= rep.gen_crlb * (1 + 1e-8)
    assert deformed_var(_bern(n), t, EstimatorFn("xbar", lambda x: x.mean(-1))) == pytest.approx(rep.gen_crlb, rel=1e-7)
