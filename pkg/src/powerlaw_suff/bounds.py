"""Generalized score, Fisher information and Cramer-Rao bounds under p*.

All theta-derivatives are central differences with a Richardson check
(scalar theta only). Expectations are exact sums on finite spaces and
quadrature for continuous n <= 3.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .deformed import (
    DeformedJoint,
    deformed_expect,
    deformed_joint,
    deformed_normalizer,
    deformed_pmf,
    log_kernel,
    log_normalizer,
)
from .errors import (
    BoundaryTheta,
    PreconditionFailed,
    PsiBiased,
    ValidityViolated,
    ZeroCovariance,
    ZeroInformation,
)
from .families import FamilyKind, FamilySpec, as_theta, student_alpha, student_norm_const
from .families import student_as_b_alpha, student_scale_m_alpha
from .likelihoods import LikelihoodKind, LikelihoodName
from .numerics import fd_derivative, rng_stream
from .raoblackwell import EstimatorFn
from .sufficiency import canonical_sufficient_statistic

REL_STEP = 1e-5
DEGENERATE_TOL = 1e-14
DISCREPANCY_RTOL = 1e-4


def _scalar_theta(dj: DeformedJoint, theta) -> float:
    if dj.spec.theta_dim != 1:
        raise ValueError("bounds are defined for scalar theta only")
    return as_theta(dj.spec, theta).values[0]


def _step(spec: FamilySpec, t: float) -> float:
    lo, hi = spec.theta_box[0]
    width = hi - lo if math.isfinite(hi - lo) else max(1.0, abs(t))
    h = REL_STEP * width
    if t - 4 * h <= lo or t + 4 * h >= hi:
        raise BoundaryTheta(f"theta={t} is within the finite-difference stencil of the box edge")
    return h


def _alpha(dj: DeformedJoint) -> float:
    return dj.likelihood.alpha if dj.likelihood.name in (LikelihoodName.JONES, LikelihoodName.BASU) else 1.0


def _log_pstar(dj: DeformedJoint, t: float, x: np.ndarray) -> np.ndarray:
    return log_kernel(dj, np.array([t]), x) - log_normalizer(dj, np.array([t]))


def fd_scalar(g: Callable[[float], np.ndarray | float], spec: FamilySpec, t: float):
    """Richardson-checked central difference at the box-scaled step."""
    return fd_derivative(g, t, order=1, h=_step(spec, t)).value


def score_star(dj: DeformedJoint, theta, sample):
    """s*(x, theta) = d/dtheta log p*_theta(x), for one sample or a batch."""
    t = _scalar_theta(dj, theta)
    x = np.asarray(sample, dtype=float)
    return fd_scalar(lambda u: _log_pstar(dj, u, x), dj.spec, t)


def _moments(dj: DeformedJoint, t: float, fns: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """E* of a vector of functions of x (columns of ``fns(x)``)."""
    return np.atleast_1d(deformed_expect(dj, np.array([t]), fns))


def _score_moments(dj: DeformedJoint, t: float) -> tuple[float, float, float]:
    """(Var*[s], Var*[u], Cov*[s, u]) with u = p*^(alpha-1) s."""
    a = _alpha(dj)
    ln = log_normalizer(dj, np.array([t]))

    if dj.finite:
        x = dj.samples
        p = deformed_pmf(dj, np.array([t]))
        s = score_star(dj, t, x)
        u = p ** (a - 1.0) * s
        ms, mu = p @ s, p @ u
        return float(p @ (s - ms) ** 2), float(p @ (u - mu) ** 2), float(p @ ((s - ms) * (u - mu)))

    def cols(x: np.ndarray) -> np.ndarray:
        s = score_star(dj, t, x)
        u = np.exp((a - 1.0) * (log_kernel(dj, np.array([t]), x) - ln)) * s
        return np.column_stack([s, u, s * s, u * u, s * u])

    es, eu, ess, euu, esu = _moments(dj, t, cols)
    return ess - es * es, euu - eu * eu, esu - es * eu


def gen_fisher_info(dj: DeformedJoint, theta) -> float:
    """I*_{alpha,n} = Cov*[s*, p*^(alpha-1) s*]^2 / Var*[p*^(alpha-1) s*]."""
    t = _scalar_theta(dj, theta)
    _, var_u, cov = _score_moments(dj, t)
    if abs(cov) < DEGENERATE_TOL or var_u < DEGENERATE_TOL**2:
        raise ZeroCovariance(f"Cov*[s*, p*^(alpha-1) s*] = {cov:.3e} at theta={t}")
    return cov * cov / var_u


def classical_fisher_info(dj: DeformedJoint, theta) -> float:
    """I_n* = Var*[s*]."""
    t = _scalar_theta(dj, theta)
    var_s, _, _ = _score_moments(dj, t)
    if var_s < DEGENERATE_TOL:
        raise ZeroInformation(f"Var*[s*] = {var_s:.3e} at theta={t}")
    return var_s


def _fbar(spec: FamilySpec) -> EstimatorFn:
    C = canonical_sufficient_statistic(spec)
    return EstimatorFn("fbar", lambda x: C.eval(x)[..., 0])


def tau_star(dj: DeformedJoint, theta, estimator: EstimatorFn) -> float:
    return float(deformed_expect(dj, theta, estimator.eval))


def tau_star_prime(dj: DeformedJoint, theta, estimator: EstimatorFn) -> float:
    t = _scalar_theta(dj, theta)
    return float(fd_scalar(lambda u: tau_star(dj, np.array([u]), estimator), dj.spec, t))


def deformed_var(dj: DeformedJoint, theta, estimator: EstimatorFn) -> float:
    m = tau_star(dj, theta, estimator)
    return float(deformed_expect(dj, theta, lambda x: (estimator.eval(x) - m) ** 2))


@dataclass(frozen=True)
class BoundReport:
    theta: float
    tau_star_prime: float
    gen_fisher: float
    classical_fisher: float
    gen_crlb: float
    classical_crlb: float
    var_of_fbar: float

    CSV_HEADER = "theta,var_fbar,gen_crlb,classical_crlb,ratio"

    @property
    def ratio(self) -> float:
        return self.gen_crlb / self.classical_crlb

    def csv_row(self) -> str:
        return f"{self.theta!r},{self.var_of_fbar!r},{self.gen_crlb!r},{self.classical_crlb!r},{self.ratio!r}"

    def to_dict(self) -> dict:
        return {**asdict(self), "ratio": self.ratio}


def bound_report(dj: DeformedJoint, theta, estimator: EstimatorFn | None = None) -> BoundReport:
    """Both bounds for the deformed mean of ``estimator`` (default f-bar)."""
    t = _scalar_theta(dj, theta)
    fbar = _fbar(dj.spec)
    est = fbar if estimator is None else estimator
    dtau = tau_star_prime(dj, t, est)
    gi = gen_fisher_info(dj, t)
    ci = classical_fisher_info(dj, t)
    return BoundReport(t, dtau, gi, ci, dtau**2 / gi, dtau**2 / ci, deformed_var(dj, t, fbar))


@dataclass(frozen=True)
class CRLBCheck:
    report: BoundReport
    variances: dict[str, float]
    attaining: list[str]
    violations: list[str]


def _local_grid(spec: FamilySpec, t: float, points: int = 5) -> np.ndarray:
    lo, hi = spec.theta_box[0]
    half = min(0.05 * (hi - lo), 0.5 * (t - lo), 0.5 * (hi - t))
    return np.linspace(t - half, t + half, points)


def m_alpha_crlb_check(
    spec: FamilySpec,
    theta,
    estimator_pool: Sequence[EstimatorFn],
    n: int,
    tol: float = 1e-10,
) -> CRLBCheck:
    """Generalized CRLB for the Jones deformation of an M^(alpha) family with h = 1.

    Every pool member must share the deformed mean of f-bar near theta.
    """
    if spec.kind is not FamilyKind.M_ALPHA:
        raise PreconditionFailed("needs an M^(alpha) family")
    dj = deformed_joint(spec, LikelihoodKind.jones(spec.alpha), n)
    if not dj.finite:
        raise PreconditionFailed("needs a finite sample space")
    if np.max(np.abs(np.asarray(spec.h(dj.samples), dtype=float) - 1.0)) > 1e-12:
        raise PreconditionFailed("needs h = 1 on the support")
    t = _scalar_theta(dj, theta)
    grid = _local_grid(spec, t)
    if np.any(np.array([spec.w(np.array([g]))[0] for g in grid]) <= 0):
        raise PreconditionFailed(f"needs w(theta) > 0 around theta={t}")
    fbar = _fbar(spec)
    for est in estimator_pool:
        for g in grid:
            gap = abs(tau_star(dj, g, est) - tau_star(dj, g, fbar))
            if gap > tol:
                raise PsiBiased(f"{est.name} misses the deformed mean of fbar by {gap:.3e} at theta={g}")
    rep = bound_report(dj, t)
    variances = {e.name: deformed_var(dj, t, e) for e in estimator_pool}
    slack = max(1e-8 * rep.gen_crlb, tol)
    attaining = [k for k, v in variances.items() if abs(v - rep.gen_crlb) <= slack]
    violations = [k for k, v in variances.items() if v < rep.gen_crlb - slack]
    return CRLBCheck(rep, variances, attaining, violations)


@dataclass(frozen=True)
class IdentityCheck:
    var_u: float
    var_u_closed: float
    cov_su: float
    cov_su_closed: float

    @property
    def max_rel_error(self) -> float:
        return max(
            abs(self.var_u - self.var_u_closed) / max(abs(self.var_u_closed), 1e-300),
            abs(self.cov_su - self.cov_su_closed) / max(abs(self.cov_su_closed), 1e-300),
        )


def m_alpha_score_identities(dj: DeformedJoint, theta) -> IdentityCheck:
    """Var*[u] = (w~')^2 Var*[fbar]/(alpha-1)^2 and Cov*[s, u] = w~' tau*'/(alpha-1),

    with u = p*^(alpha-1) s* and w~ = N^(alpha-1) w, N^(-1) the deformed normalizer.
    """
    spec = dj.spec
    if spec.kind is not FamilyKind.M_ALPHA or dj.likelihood.name is not LikelihoodName.JONES:
        raise PreconditionFailed("needs the Jones deformation of an M^(alpha) family")
    t = _scalar_theta(dj, theta)
    a = _alpha(dj)

    def w_tilde(u: float) -> float:
        th = np.array([u])
        return (1.0 / deformed_normalizer(dj, th)) ** (a - 1.0) * float(spec.w(th)[0])

    dw = float(fd_scalar(w_tilde, spec, t))
    fbar = _fbar(spec)
    _, var_u, cov = _score_moments(dj, t)
    return IdentityCheck(
        var_u,
        dw**2 * deformed_var(dj, t, fbar) / (a - 1.0) ** 2,
        cov,
        dw * tau_star_prime(dj, t, fbar) / (a - 1.0),
    )


@dataclass(frozen=True)
class TightnessCheck:
    var_fbar: float
    bound: float

    @property
    def residual(self) -> float:
        return abs(self.var_fbar - self.bound)


def b_alpha_tightness(spec: FamilySpec, theta, n: int) -> TightnessCheck:
    """Under the Basu deformation of a B^(alpha) family, Var*[fbar] = tau*'^2 / I_n*."""
    if spec.kind is not FamilyKind.B_ALPHA:
        raise PreconditionFailed("needs a B^(alpha) family")
    dj = deformed_joint(spec, LikelihoodKind.basu(spec.alpha), n)
    t = _scalar_theta(dj, theta)
    fbar = _fbar(spec)
    dtau = tau_star_prime(dj, t, fbar)
    return TightnessCheck(deformed_var(dj, t, fbar), dtau**2 / classical_fisher_info(dj, t))


# ------------------------------------------------------------------ Student


def _coefficient_fns(alpha: float, n: int) -> tuple[Callable[[], float], ...]:
    g = 1.0 - alpha
    return (
        lambda: g * (n - 2) / (2 - n * g),
        lambda: n * g / (2 * alpha - n * g),
        lambda: g * (n + 2) / (2 * alpha + (n + 2) * (alpha - 1)),
    )


def student_coefficients(alpha: float, n: int) -> tuple[float, float, float]:
    """(A_n, B_n, C_n) at the given alpha; raises ZeroDivisionError on a pole."""
    A, B, C = (fn() for fn in _coefficient_fns(alpha, n))
    return A, B, C


def _h_printed(alpha: float, b: float, n: int, A: float) -> float:
    k = n // 2 if n % 2 == 0 else (n - 1) // 2
    lead = (n * math.pi / b) ** (n / 2)
    if n % 2 == 0:
        return lead * (1 - alpha) * A ** (k - 1) / (alpha * math.gamma(n / 2))
    num = math.sqrt(math.pi * b) * lead * math.gamma((1 + alpha) / (2 * (1 - alpha))) * A**k
    return num / (math.gamma(n / 2) * math.gamma(1 / (1 - alpha)))


def _moment_printed(n: int, A: float, B: float) -> float:
    k = n // 2 if n % 2 == 0 else (n - 1) // 2
    return A ** (2 - k) * B ** (k - 1) if n % 2 == 0 else A ** (1 - k) * B**k


def _crlb_printed(n: int, A: float, B: float, C: float) -> float:
    if n % 2 == 0:
        k = n // 2
        return A ** (2 - k) * (C**k - A ** (-k) * B ** (2 * k))
    k = (n - 1) // 2
    return A ** (3 - k) * (C ** (k - 1) - A ** (1 - k) * B ** (2 * k - 1))


def _safe(fn: Callable[[], float]) -> float | None:
    try:
        v = fn()
    except (ZeroDivisionError, ValueError, OverflowError, TypeError):
        return None
    return v if math.isfinite(v) else None


def _disagree(a: float | None, b: float | None) -> bool:
    if a is None or b is None:
        return a is not b
    return abs(a - b) > DISCREPANCY_RTOL * max(abs(b), 1e-300)


@dataclass(frozen=True)
class StudentClosedForms:
    """Scale-family quantities for sigma^2 = 1; scale by sigma^n, sigma^2, sigma^4.

    ``*_printed`` follow the reference parity formulas, ``*_exact`` the Beta-integral
    evaluation, ``*_quadrature`` direct n-dimensional integration when requested.
    ``flags`` marks printed values that disagree with the exact ones.
    """

    alpha: float
    nu: float
    n: int
    b: float
    A_n: float | None
    B_n: float | None
    C_n: float | None
    H_n: float | None
    H_n_exact: float
    E_star_xbar2: float | None
    E_star_xbar2_exact: float | None
    gen_crlb_sigma4_coeff: float | None
    gen_crlb_sigma4_coeff_exact: float | None
    H_n_quadrature: float | None = None
    E_star_xbar2_quadrature: float | None = None
    unmet: list[str] = field(default_factory=list)
    flags: dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def student_closed_forms(nu: float, n: int, quadrature: bool = False) -> StudentClosedForms:
    """H_n, E*[mean x^2] and the generalized CRLB coefficient for the Student scale family.

    The Jones-deformed sample density is Z[1 + (b/sigma^2) mean x^2]^(-p), p = 1/(1-alpha).
    ``ValidityViolated`` is raised when alpha <= 1 - 2/n (no normalizer); the moment and
    CRLB entries are None when their own thresholds fail and are listed in ``unmet``.
    """
    alpha, b = student_alpha(nu)
    if n < 1:
        raise ValueError("n must be at least 1")
    if not alpha > 1 - 2 / n:
        raise ValidityViolated("alpha > 1 - 2/n", f"alpha={alpha:g} fails alpha > 1 - 2/n = {1 - 2 / n:g}")
    p = 1.0 / (1.0 - alpha)
    q = p - n / 2
    a = n / 2
    A, B, C = (_safe(fn) for fn in _coefficient_fns(alpha, n))
    unmet = []
    h_exact = math.exp((n / 2) * math.log(n * math.pi / b) + gammaln(q) - gammaln(p))
    h_printed = _safe(lambda: _h_printed(alpha, b, n, A))
    mom_ok = alpha > n / (n + 2)
    crlb_ok = alpha > (n + 2) / (n + 4)
    if not mom_ok:
        unmet.append("alpha > n/(n+2)")
    if not crlb_ok:
        unmet.append("alpha > (n+2)/(n+4)")
    m_exact = a / (q - 1) if mom_ok else None
    m_printed = _safe(lambda: _moment_printed(n, A, B)) if mom_ok else None
    c_exact = a * (a + 1) / ((q - 1) * (q - 2)) - (a / (q - 1)) ** 2 if crlb_ok else None
    c_printed = _safe(lambda: _crlb_printed(n, A, B, C)) if crlb_ok else None
    h_quad = m_quad = None
    if quadrature:
        spec, th = student_scale_m_alpha(nu, 1.0)
        dj = deformed_joint(spec, LikelihoodKind.jones(alpha), n)
        h_quad = deformed_normalizer(dj, th)
        if mom_ok:
            m_quad = float(deformed_expect(dj, th, lambda x: np.mean(x * x, axis=-1))) * b
    flags = {
        "H_n": _disagree(h_printed, h_exact),
        "E_star_xbar2": mom_ok and _disagree(m_printed, m_exact),
        "gen_crlb": crlb_ok and _disagree(c_printed, c_exact),
    }
    if quadrature:
        flags["H_n_quadrature"] = _disagree(h_quad, h_exact)
        if mom_ok:
            flags["E_star_xbar2_quadrature"] = _disagree(m_quad, m_exact)
    return StudentClosedForms(
        alpha, nu, n, b, A, B, C, h_printed, h_exact, m_printed, m_exact, c_printed, c_exact,
        h_quad, m_quad, unmet, flags,
    )


@dataclass(frozen=True)
class BasuLocationBound:
    nu: float
    var_coeff: float
    var_quadrature: float | None
    mean_quadrature: float | None
    affine_residuals: dict[int, float]


def basu_student_location_bound(nu: float, mu: float = 0.7, verify: bool = True, seed: int = 0) -> BasuLocationBound:
    """Var*[xbar] = (1-alpha)/(2 alpha b N^(alpha-1)) under the Basu deformation, for any n.

    Verified by one-dimensional quadrature at n = 1 and by an exactly quadratic
    log p* (affine in the sufficient statistics) at n = 2, 3.
    """
    if not nu > 2:
        raise ValueError("nu must exceed 2")
    alpha, b = student_alpha(nu)
    coeff = (1 - alpha) / (2 * alpha * b * student_norm_const(nu) ** (alpha - 1))
    var_q = mean_q = None
    resid: dict[int, float] = {}
    if verify:
        spec, th = student_as_b_alpha(nu, mu)
        dj = deformed_joint(spec, LikelihoodKind.basu(alpha), 1)
        mean_q = float(deformed_expect(dj, th, lambda x: x[:, 0]))
        var_q = float(deformed_expect(dj, th, lambda x: (x[:, 0] - mean_q) ** 2))
        rng = rng_stream(seed, "basu-affine")
        for n in (2, 3):
            djn = deformed_joint(spec, LikelihoodKind.basu(alpha), n)
            pts = rng.normal(mu, 3.0, size=(64, n))
            resid[n] = _quadratic_residual(djn, th, pts)
    return BasuLocationBound(nu, coeff, var_q, mean_q, resid)


def _quadratic_residual(dj: DeformedJoint, theta, pts: np.ndarray) -> float:
    """Max residual of log p* fitted on (1, mean x, mean x^2)."""
    y = log_kernel(dj, theta, pts)
    design = np.column_stack([np.ones(len(pts)), pts.mean(axis=1), (pts * pts).mean(axis=1)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(np.max(np.abs(design @ coef - y)) / max(1.0, np.max(np.abs(y))))
