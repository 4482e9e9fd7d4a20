"""Estimating equations: likelihood maximizers, the Student Jones solve and the binomial CS polynomial."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar
from scipy.special import logsumexp
from scipy.stats import qmc
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DegenerateSample, Divergence, NoInteriorMax, PowerLawError
from .families import (
    FamilyKind,
    FamilySpec,
    ThetaPoint,
    as_theta,
    base,
    binomial_exponential,
    gaussian,
    normalizer,
    student_alpha,
    student_as_m_alpha,
)
from .likelihoods import EmpiricalPMF, LikelihoodKind, cauchy_schwarz_likelihood, evaluate, jones_likelihood_from_stats, power_integral
from .numerics import fd_derivative, rng_stream

Objective = Callable[[np.ndarray], float]


@dataclass
class EstimatingProblem:
    spec: FamilySpec
    likelihood: LikelihoodKind
    sample: np.ndarray
    init: ThetaPoint | None = None
    max_iter: int = 4000
    grad_tol: float = 1e-6
    starts: int = 5
    seed: int = 0
    objective: Objective | None = None

    def __post_init__(self) -> None:
        self.sample = np.asarray(self.sample, dtype=float)
        if self.init is not None:
            self.init = as_theta(self.spec, self.init)

    def value(self, theta: np.ndarray) -> float:
        if self.objective is not None:
            return float(self.objective(np.asarray(theta, dtype=float)))
        return float(evaluate(self.likelihood, self.spec, np.asarray(theta, dtype=float), self.sample))


@dataclass(frozen=True)
class EstimateResult:
    theta_hat: np.ndarray
    objective: float
    residual: float
    trace: list[tuple[np.ndarray, float]] = field(default_factory=list)


def _inner_box(spec: FamilySpec, margin: float = 1e-9) -> np.ndarray:
    box = np.array(spec.theta_box, dtype=float)
    width = box[:, 1] - box[:, 0]
    return np.column_stack([box[:, 0] + margin * width, box[:, 1] - margin * width])


def _safe_value(fn: Objective, theta: np.ndarray) -> float:
    try:
        v = fn(theta)
    except (PowerLawError, ValueError, FloatingPointError):
        return -math.inf
    return v if math.isfinite(v) else -math.inf


def _steps(box: np.ndarray, theta: np.ndarray, rel: float) -> np.ndarray:
    width = box[:, 1] - box[:, 0]
    return np.minimum(rel * np.maximum(np.abs(theta), 1e-3 * width), 0.25 * np.minimum(theta - box[:, 0], box[:, 1] - theta))


def fd_gradient(fn: Objective, theta: np.ndarray, box: np.ndarray, rel: float = 1e-4) -> np.ndarray:
    """Richardson-extrapolated central differences."""
    theta = np.asarray(theta, dtype=float)
    h = _steps(box, theta, rel)
    g = np.empty_like(theta)
    for i in range(len(theta)):

        def gi(t: float, i: int = i) -> float:
            v = theta.copy()
            v[i] = t
            return fn(v)

        g[i] = fd_derivative(gi, theta[i], order=1, h=h[i]).value
    return g


def fd_hessian(fn: Objective, theta: np.ndarray, box: np.ndarray, rel: float = 1e-4) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    h = _steps(box, theta, rel)
    k = len(theta)
    H = np.empty((k, k))
    f0 = fn(theta)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        H[i, i] = (fn(theta + ei) - 2 * f0 + fn(theta - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                fn(theta + ei + ej) - fn(theta + ei - ej) - fn(theta - ei + ej) + fn(theta - ei - ej)
            ) / (4 * h[i] * h[j])
    return H


def _newton_polish(fn: Objective, theta: np.ndarray, box: np.ndarray, iters: int = 8) -> np.ndarray:
    """Newton steps on FD derivatives, accepted only when they do not lower the objective."""
    best, fbest = theta, fn(theta)
    for _ in range(iters):
        g = fd_gradient(fn, best, box)
        H = fd_hessian(fn, best, box)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            break
        cand = best + step
        if np.any(cand <= box[:, 0]) or np.any(cand >= box[:, 1]):
            break
        fc = fn(cand)
        if not fc >= fbest - 1e-13 * max(1.0, abs(fbest)):
            break
        converged = np.all(np.abs(step) <= 1e-14 * np.maximum(1.0, np.abs(best)))
        best, fbest = cand, max(fc, fbest)
        if converged:
            break
    return best


def _certify(fn: Objective, theta: np.ndarray, box: np.ndarray, grad_tol: float) -> float:
    outer = np.array(box)
    width = outer[:, 1] - outer[:, 0]
    if np.any(theta - outer[:, 0] <= 1e-7 * width) or np.any(outer[:, 1] - theta <= 1e-7 * width):
        raise NoInteriorMax(f"maximizer {theta} sits on the parameter box edge")
    g = fd_gradient(fn, theta, outer)
    resid = float(np.linalg.norm(g))
    if resid >= grad_tol:
        raise NoInteriorMax(f"gradient norm {resid:.3e} at {theta} exceeds {grad_tol:g}")
    return resid


def maximize_likelihood(problem: EstimatingProblem) -> EstimateResult:
    """Multi-start maximization with Newton polishing and an FD-gradient certificate.

    One parameter: bounded Brent on ``starts`` equal sub-intervals. Several
    parameters: Nelder-Mead from Latin-hypercube starts (plus ``init``).
    """
    spec = problem.spec
    box = _inner_box(spec)
    fn = lambda th: _safe_value(problem.value, th)  # noqa: E731
    if problem.init is not None and not math.isfinite(fn(problem.init.array)):
        raise Divergence(f"objective is not finite at init {problem.init.values}")
    trace: list[tuple[np.ndarray, float]] = []
    if spec.theta_dim == 1:
        edges = np.linspace(box[0, 0], box[0, 1], problem.starts + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            res = minimize_scalar(lambda t: -fn(np.array([t])), bounds=(a, b), method="bounded", options={"xatol": 1e-12 * max(1.0, abs(b - a)), "maxiter": problem.max_iter})
            trace.append((np.array([res.x]), -float(res.fun)))
        if problem.init is not None:
            trace.append((problem.init.array, fn(problem.init.array)))
    else:
        starts = [] if problem.init is None else [problem.init.array]
        lhs = qmc.LatinHypercube(d=spec.theta_dim, seed=rng_stream(problem.seed, "multistart"))
        lo, hi = box[:, 0], box[:, 1]
        span = hi - lo
        starts += list(qmc.scale(lhs.random(problem.starts), lo + 0.02 * span, hi - 0.02 * span))
        for x0 in starts:
            res = minimize(
                lambda th: -fn(th),
                x0,
                method="Nelder-Mead",
                bounds=list(map(tuple, box)),
                options={"xatol": 1e-11, "fatol": 1e-15, "maxiter": problem.max_iter, "maxfev": 2 * problem.max_iter},
            )
            trace.append((np.asarray(res.x, dtype=float), -float(res.fun)))
    finite = [t for t in trace if math.isfinite(t[1])]
    if not finite:
        raise Divergence("objective is not finite at any start")
    theta, _ = max(finite, key=lambda t: t[1])
    theta = _newton_polish(fn, theta, box)
    resid = _certify(fn, theta, np.array(spec.theta_box, dtype=float), problem.grad_tol)
    return EstimateResult(theta, fn(theta), resid, trace)


# ------------------------------------------------------------ Student Jones


def jones_estimate_from_suffstats(sum_x: float, sum_x2: float, n: int, nu: float, grad_tol: float = 1e-8) -> tuple[float, float]:
    """(mu_hat, sigma2_hat) maximizing the Jones likelihood at alpha = (nu-1)/(nu+1).

    Only (sum x, sum x^2, n) enter: the objective is evaluated from the means
    of x and x^2 through the M^(alpha) representation. The solve runs on
    standardized statistics (mean 0, variance 1) and is mapped back, which is
    exact because the maximizer is location-scale equivariant; ``grad_tol``
    applies in standardized units.
    """
    if n < 2 or not sum_x2 > sum_x**2 / n * (1 + 1e-12):
        raise DegenerateSample("need n >= 2 and a positive sample variance")
    m1 = sum_x / n
    var = sum_x2 / n - m1 * m1
    spec, _ = student_as_m_alpha(nu, box=((-50.0, 50.0), (0.0, 100.0)))
    fn = lambda th: jones_likelihood_from_stats(spec, th, 1.0, (1.0, 0.0))  # noqa: E731
    problem = EstimatingProblem(spec, LikelihoodKind.jones(spec.alpha), np.array([0.0, 1.0]), init=(0.0, 1.0), grad_tol=grad_tol, starts=3, objective=fn)
    res = maximize_likelihood(problem)
    return m1 + math.sqrt(var) * float(res.theta_hat[0]), var * float(res.theta_hat[1])


def jones_student_closed_form(sum_x: float, sum_x2: float, n: int, nu: float) -> tuple[float, float]:
    """Stationary point in closed form: mu = mean, sigma2 = b V (3 alpha - 1)/(1 - alpha)."""
    alpha, b = student_alpha(nu)
    m1 = sum_x / n
    var = sum_x2 / n - m1 * m1
    return m1, b * var * (3 * alpha - 1) / (1 - alpha)


# ------------------------------------------------- binomial Cauchy-Schwarz


@dataclass(frozen=True)
class PolynomialEq:
    coefficients: tuple[float, ...]
    domain: tuple[float, float] = (0.0, 1.0)

    @property
    def degenerate(self) -> bool:
        return self.coefficients[0] == 0.0

    def __call__(self, t):
        return np.polyval(self.coefficients, t)

    def roots_in_domain(self, imag_tol: float = 1e-7) -> list[float]:
        """Real roots strictly inside the domain, Newton-polished, ascending."""
        c = np.trim_zeros(np.asarray(self.coefficients, dtype=float), "f")
        if len(c) < 2:
            return []
        d = np.polyder(c)
        out = []
        for r in np.roots(c):
            if abs(r.imag) > imag_tol:
                continue
            x = float(r.real)
            for _ in range(5):
                dv = np.polyval(d, x)
                if dv == 0:
                    break
                x -= np.polyval(c, x) / dv
            lo, hi = self.domain
            if lo < x < hi and all(abs(x - y) > 1e-10 for y in out):
                out.append(x)
        return sorted(out)


def _masses3(p_n: EmpiricalPMF | Sequence[float]) -> tuple[float, float, float]:
    if isinstance(p_n, EmpiricalPMF):
        lookup = dict(zip(p_n.atoms, p_n.masses))
        return tuple(float(lookup.get(v, 0.0)) for v in (0.0, 1.0, 2.0))
    a, b, c = (float(v) for v in p_n)
    return a, b, c


def binomial_cs_polynomial(p_n: EmpiricalPMF | Sequence[float]) -> PolynomialEq:
    """The reference degree-5 coefficient list for the m = 2 Cauchy-Schwarz equation."""
    a, b, c = _masses3(p_n)
    return PolynomialEq((8 * b, 8 * a - 20 * b - 6 * c, -20 * a + 16 * b + 12 * c, 18 * a - 4 * b - 6 * c, -7 * a - 2 * b + c, a + b))


def binomial_cs_polynomial_derived(p_n: EmpiricalPMF | Sequence[float]) -> PolynomialEq:
    """Numerator of dL_cs/dtheta for Binomial(2, theta), cleared of positive factors."""
    a, b, c = _masses3(p_n)
    return PolynomialEq(
        (
            6 * a - 12 * b + 6 * c,
            -24 * a + 30 * b - 6 * c,
            36 * a - 24 * b,
            -26 * a + 6 * b + 2 * c,
            9 * a + 2 * b - c,
            -a - b,
        )
    )


def _cs_pmf(p_n) -> EmpiricalPMF:
    if isinstance(p_n, EmpiricalPMF):
        return p_n
    return EmpiricalPMF((0.0, 1.0, 2.0), tuple(float(v) for v in p_n))


def cs_objective(p_n) -> Callable[[float], float]:
    spec, _ = binomial_exponential(2)
    pmf = _cs_pmf(p_n)
    return lambda t: cauchy_schwarz_likelihood(pmf, spec, np.array([t]))


def cs_stationary_points(p_n, grid: int = 400, h: float = 1e-6) -> list[float]:
    """Zeros of the finite-difference derivative of L_cs in (0, 1), located by bracketing."""
    L = cs_objective(p_n)

    def dL(t: float) -> float:
        return (L(t + h) - L(t - h)) / (2 * h)

    ts = np.linspace(2 * h, 1 - 2 * h, grid)
    vals = np.array([dL(t) for t in ts])
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(brentq(dL, ts[i], ts[i + 1], xtol=1e-14, rtol=1e-14))
    return roots


def cs_estimate(p_n, form: str = "derived") -> float:
    """Best root in (0, 1) by L_cs value, ties to the smallest theta."""
    poly = binomial_cs_polynomial_derived(p_n) if form == "derived" else binomial_cs_polynomial(p_n)
    roots = poly.roots_in_domain()
    if not roots:
        raise NoInteriorMax("no root of the estimating polynomial in (0, 1)")
    L = cs_objective(p_n)
    vals = [L(r) for r in roots]
    best = max(vals)
    return min(r for r, v in zip(roots, vals) if v >= best - 1e-12)


# ---------------------------------------------------------- robustness demo


def _log_density_stable(spec: FamilySpec, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    if spec.kind is not FamilyKind.EXPONENTIAL:
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(base(spec, theta, x), dtype=float) ** (1 / (spec.alpha - 1)) * normalizer(spec, theta))
    return math.log(normalizer(spec, theta)) + base(spec, theta, x)


def jones_objective_logspace(spec: FamilySpec, sample: np.ndarray, alpha: float) -> Objective:
    """Jones likelihood computed from log densities, finite even where p underflows."""
    x = np.asarray(sample, dtype=float)
    n = x.shape[-1]

    def fn(theta: np.ndarray) -> float:
        lp = _log_density_stable(spec, theta, x)
        lse = logsumexp((alpha - 1) * lp) - math.log(n)
        return float(lse / (alpha - 1) - math.log(power_integral(spec, theta, alpha)) / alpha)

    return fn


@dataclass(frozen=True)
class ContaminationRow:
    replication: int
    alpha: float
    mu_hat: float
    sigma2_hat: float
    mle_mu: float
    mle_sigma2: float

    CSV_HEADER = "replication,alpha,mu_hat,sigma2_hat,mle_mu,mle_sigma2"

    def csv_row(self) -> str:
        return f"{self.replication},{self.alpha!r},{self.mu_hat!r},{self.sigma2_hat!r},{self.mle_mu!r},{self.mle_sigma2!r}"


@dataclass(frozen=True)
class ContaminationSummary:
    rows: list[ContaminationRow]
    mu: float

    def win_rate(self, alpha: float) -> float:
        rows = [r for r in self.rows if r.alpha == alpha]
        wins = sum(abs(r.mu_hat - self.mu) < abs(r.mle_mu - self.mu) for r in rows)
        return wins / len(rows)


def contaminated_sample(n: int, eps: float, outlier_value: float, mu: float, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Normal data with round(eps n) points replaced by ``outlier_value``."""
    if not 0.0 <= eps <= 0.3:
        raise ValueError("contamination fraction must lie in [0, 0.3]")
    x = mu + math.sqrt(sigma2) * rng.standard_normal(n)
    m = int(round(eps * n))
    if m:
        x[rng.choice(n, size=m, replace=False)] = outlier_value
    return x


def fit_jones_normal(sample: np.ndarray, alpha: float) -> tuple[float, float]:
    """Jones estimate of (mu, sigma2) for normal data from a median/MAD start."""
    x = np.asarray(sample, dtype=float)
    med = float(np.median(x))
    mad = 1.4826 * float(np.median(np.abs(x - med)))
    s2 = max(mad * mad, 1e-6 * (float(np.var(x)) + 1e-12))
    spec, _ = gaussian(box=((med - 1e3 * math.sqrt(s2) - 1, med + 1e3 * math.sqrt(s2) + 1), (0.0, 1e4 * s2 + 1)))
    fn = jones_objective_logspace(spec, x, alpha)
    res = minimize(lambda th: -_safe_value(fn, th), np.array([med, s2]), method="Nelder-Mead", bounds=list(map(tuple, _inner_box(spec))), options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    return float(res.x[0]), float(res.x[1])


def robust_contamination_demo(
    clean_frac: float = 0.9,
    outlier_value: float = 50.0,
    n: int = 100,
    alpha_list: Sequence[float] = (1.5,),
    seed: int = 0,
    replications: int = 200,
    mu: float = 0.0,
    sigma2: float = 1.0,
) -> ContaminationSummary:
    """Jones fits against the Gaussian MLE on contaminated normal samples."""
    eps = 1.0 - clean_frac
    rows = []
    for r in range(replications):
        x = contaminated_sample(n, eps, outlier_value, mu, sigma2, rng_stream(seed, "contamination", r))
        mle_mu, mle_s2 = float(np.mean(x)), float(np.var(x))
        for a in alpha_list:
            m, s2 = fit_jones_normal(x, a)
            rows.append(ContaminationRow(r, float(a), m, s2, mle_mu, mle_s2))
    return ContaminationSummary(rows, mu)


# ------------------------------------------------------ estimator classes


def basu_objective_logspace(spec: FamilySpec, sample: np.ndarray, alpha: float) -> Objective:
    """Basu likelihood computed from log densities."""
    x = np.asarray(sample, dtype=float)

    def fn(theta: np.ndarray) -> float:
        lp = _log_density_stable(spec, theta, x)
        term = np.mean((alpha * np.exp((alpha - 1) * lp) - 1) / (alpha - 1))
        return float(term - power_integral(spec, theta, alpha))

    return fn


def _data_family(family: str, x: np.ndarray, nu: float) -> tuple[FamilySpec, np.ndarray]:
    med = float(np.median(x))
    mad = 1.4826 * float(np.median(np.abs(x - med)))
    s2 = max(mad * mad, 1e-8 * (float(np.var(x)) + 1.0))
    box = ((med - 1e3 * math.sqrt(s2) - 1, med + 1e3 * math.sqrt(s2) + 1), (0.0, 1e4 * s2 + 1))
    if family == "gaussian":
        spec, _ = gaussian(box=box)
    elif family == "student":
        spec, _ = student_as_m_alpha(nu, box=box)
    else:
        raise ValueError(f"unknown family {family!r}; expected 'gaussian' or 'student'")
    return spec, np.array([med, s2])


class _LikelihoodEstimator(DensityMixin, BaseEstimator):
    """Location-scale fit of a Gaussian or Student family to one-dimensional data."""

    def _objective(self, spec: FamilySpec, x: np.ndarray) -> Objective:
        raise NotImplementedError

    def fit(self, X, y=None):
        x = check_array(np.asarray(X, dtype=float).reshape(-1, 1), ensure_min_samples=2).ravel()
        self.n_features_in_ = 1
        spec, init = _data_family(self.family, x, self.nu)
        problem = EstimatingProblem(spec, LikelihoodKind.log(), x, init=init, starts=self.n_starts, seed=self.random_state, grad_tol=self.grad_tol, objective=self._objective(spec, x))
        res = maximize_likelihood(problem)
        self.theta_ = res.theta_hat
        self.location_, self.scale2_ = float(res.theta_hat[0]), float(res.theta_hat[1])
        self.spec_ = spec
        return self

    def score(self, X, y=None) -> float:
        check_is_fitted(self, "theta_")
        x = check_array(np.asarray(X, dtype=float).reshape(-1, 1)).ravel()
        return float(self._objective(self.spec_, x)(self.theta_))


class JonesEstimator(_LikelihoodEstimator):
    """Maximizer of the Jones likelihood; ``score`` is the Jones likelihood of new data."""

    def __init__(self, family: str = "gaussian", alpha: float = 1.5, nu: float = 3.0, n_starts: int = 5, random_state: int = 0, grad_tol: float = 1e-6):
        self.family = family
        self.alpha = alpha
        self.nu = nu
        self.n_starts = n_starts
        self.random_state = random_state
        self.grad_tol = grad_tol

    def _objective(self, spec, x):
        return jones_objective_logspace(spec, x, self.alpha)


class BasuEstimator(_LikelihoodEstimator):
    """Maximizer of the Basu likelihood; ``score`` is the Basu likelihood of new data."""

    def __init__(self, family: str = "gaussian", alpha: float = 1.5, nu: float = 3.0, n_starts: int = 5, random_state: int = 0, grad_tol: float = 1e-6):
        self.family = family
        self.alpha = alpha
        self.nu = nu
        self.n_starts = n_starts
        self.random_state = random_state
        self.grad_tol = grad_tol

    def _objective(self, spec, x):
        return basu_objective_logspace(spec, x, self.alpha)


class MLEstimator(_LikelihoodEstimator):
    """Maximum likelihood; ``score`` is the mean log-likelihood of new data."""

    def __init__(self, family: str = "gaussian", nu: float = 3.0, n_starts: int = 5, random_state: int = 0, grad_tol: float = 1e-6):
        self.family = family
        self.nu = nu
        self.n_starts = n_starts
        self.random_state = random_state
        self.grad_tol = grad_tol

    def _objective(self, spec, x):
        n = len(x)
        return lambda th: float(np.sum(_log_density_stable(spec, th, x))) / n
