"""Generalized Rao-Blackwellization phi*(T) = E*[theta_hat | T] on finite spaces.

Unbiasedness is always relative to the estimator's own deformed mean
tau*(theta) = E*_theta[theta_hat].
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .deformed import DeformedJoint, deformed_expect, deformed_joint, deformed_pmf, marginal_q, partition
from .errors import EmptyBucket, PsiBiased, ThetaDependenceDetected
from .families import FamilyKind, FamilySpec, as_theta
from .likelihoods import LikelihoodKind
from .sufficiency import StatisticFn, canonical_sufficient_statistic, make_theta_grid
from .numerics import rng_stream

MEASURABILITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EstimatorFn:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]

    def eval(self, samples) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(samples, dtype=float)), dtype=float)


def first_coordinate() -> EstimatorFn:
    return EstimatorFn("x1", lambda x: x[..., 0])


def sample_mean() -> EstimatorFn:
    return EstimatorFn("xbar", lambda x: x.mean(axis=-1))


def product_first_two() -> EstimatorFn:
    return EstimatorFn("x1*x2", lambda x: x[..., 0] * x[..., 1])


def shrink_to_mean(c: float) -> EstimatorFn:
    """xbar + c (x1 - xbar): unbiased for the same target as xbar for exchangeable p*."""
    return EstimatorFn(f"xbar+{c:g}(x1-xbar)", lambda x: x.mean(-1) + c * (x[..., 0] - x.mean(-1)))


def scaled(est: EstimatorFn, scale: float, shift: float = 0.0) -> EstimatorFn:
    return EstimatorFn(f"{shift:g}+{scale:g}*{est.name}", lambda x: shift + scale * est.eval(x))


def combine(a: EstimatorFn, b: EstimatorFn, wa: float, wb: float) -> EstimatorFn:
    return EstimatorFn(f"{wa:g}*{a.name}+{wb:g}*{b.name}", lambda x: wa * a.eval(x) + wb * b.eval(x))


@dataclass(frozen=True)
class RBReport:
    theta: float
    tau_star: float
    var_original: float
    var_rb: float
    improvement: float
    equality_flag: bool
    cov_check: float | None = None

    CSV_HEADER = "theta,tau_star,var_original,var_rb,improvement"

    def csv_row(self) -> str:
        return f"{self.theta!r},{self.tau_star!r},{self.var_original!r},{self.var_rb!r},{self.improvement!r}"

    def to_dict(self) -> dict:
        return asdict(self)


def _grid(dj: DeformedJoint, theta, theta_grid) -> np.ndarray:
    th = as_theta(dj.spec, theta).array
    grid = make_theta_grid(dj.spec, 9) if theta_grid is None else np.asarray(theta_grid, dtype=float)
    return np.vstack([th, grid.reshape(-1, dj.spec.theta_dim)])


def deformed_expectation(dj: DeformedJoint, theta, g: EstimatorFn) -> float:
    return float(deformed_expect(dj, theta, g.eval))


def deformed_variance(dj: DeformedJoint, theta, g: EstimatorFn) -> float:
    m = deformed_expectation(dj, theta, g)
    return float(deformed_expect(dj, theta, lambda x: (g.eval(x) - m) ** 2))


def conditional_expectations(dj: DeformedJoint, T: StatisticFn, theta, g: EstimatorFn) -> np.ndarray:
    """E*_theta[g | T = t] for every bucket, in partition order."""
    part = partition(dj, T)
    p = deformed_pmf(dj, theta)
    q = np.bincount(part.index, weights=p, minlength=len(part.keys))
    return np.bincount(part.index, weights=p * g.eval(dj.samples), minlength=len(part.keys)) / q


def bucket_function(dj: DeformedJoint, T: StatisticFn, table: np.ndarray, name: str) -> EstimatorFn:
    """Estimator that looks up ``table`` by the T-bucket of each sample."""
    part = partition(dj, T)
    table = np.asarray(table, dtype=float)

    def fn(x: np.ndarray) -> np.ndarray:
        keys = T.keys(x)
        flat = keys.reshape(-1, keys.shape[-1])
        try:
            idx = np.array([part.lookup[tuple(int(v) for v in k)] for k in flat])
        except KeyError as exc:
            raise EmptyBucket(f"bucket {exc.args[0]} not in the enumerated space") from exc
        return table[idx].reshape(keys.shape[:-1])

    return EstimatorFn(name, fn)


def is_measurable(dj: DeformedJoint, T: StatisticFn, g: EstimatorFn, tol: float = MEASURABILITY_TOL) -> bool:
    """True if g is constant on every T-bucket."""
    part = partition(dj, T)
    vals = g.eval(dj.samples)
    nb = len(part.keys)
    hi = np.full(nb, -np.inf)
    lo = np.full(nb, np.inf)
    np.maximum.at(hi, part.index, vals)
    np.minimum.at(lo, part.index, vals)
    return bool(np.all(hi - lo <= tol))


def rao_blackwellize(
    dj: DeformedJoint,
    T: StatisticFn,
    theta,
    estimator: EstimatorFn,
    theta_grid=None,
    tol: float = 1e-10,
) -> tuple[EstimatorFn, RBReport]:
    """phi*(T) = E*[estimator | T] with a theta-independence check over a grid."""
    grid = _grid(dj, theta, theta_grid)
    tables = np.array([conditional_expectations(dj, T, th, estimator) for th in grid])
    drift = float(np.max(tables.max(axis=0) - tables.min(axis=0)))
    if drift > tol:
        raise ThetaDependenceDetected(f"E*[{estimator.name}|{T.name}] varies by {drift:.3e} across theta")
    table = tables[0]
    phi = bucket_function(dj, T, table, f"E*[{estimator.name}|{T.name}]")
    part = partition(dj, T)
    p = deformed_pmf(dj, theta)
    vals = estimator.eval(dj.samples)
    tau = float(p @ vals)
    var_orig = float(p @ (vals - tau) ** 2)
    q = marginal_q(dj, T, theta)
    var_rb = float(q @ (table - tau) ** 2)
    equal = bool(np.max(np.abs(vals - table[part.index])) < tol)
    th = as_theta(dj.spec, theta)
    label = th.values[0] if len(th.values) == 1 else th.values
    return phi, RBReport(label, tau, var_orig, var_rb, var_orig - var_rb, equal)


@dataclass(frozen=True)
class DecompositionReport:
    lhs: float
    mse_term: float
    var_psi: float
    cross_term: float
    residual: float

    @property
    def rhs(self) -> float:
        return self.mse_term + self.var_psi + self.cross_term


def _check_unbiased(dj: DeformedJoint, grid: np.ndarray, target: EstimatorFn, cand: EstimatorFn, tol: float) -> None:
    for th in grid:
        gap = abs(deformed_expectation(dj, th, cand) - deformed_expectation(dj, th, target))
        if gap > tol:
            raise PsiBiased(f"{cand.name} misses the deformed mean of {target.name} by {gap:.3e} at theta={th}")


def variance_decomposition_check(
    dj: DeformedJoint,
    T: StatisticFn,
    theta,
    estimator: EstimatorFn,
    psi: EstimatorFn,
    theta_grid=None,
    tol: float = 1e-10,
) -> DecompositionReport:
    """Var[est] = E[(est - psi)^2] + Var[psi] + 2 E[psi (phi - psi)] for T-measurable psi."""
    grid = _grid(dj, theta, theta_grid)
    _check_unbiased(dj, grid, estimator, psi, tol)
    if not is_measurable(dj, T, psi):
        raise ValueError(f"{psi.name} is not a function of {T.name}")
    phi, _ = rao_blackwellize(dj, T, theta, estimator, theta_grid, tol)
    p = deformed_pmf(dj, theta)
    X = dj.samples
    e, s, f = estimator.eval(X), psi.eval(X), phi.eval(X)
    lhs = float(p @ (e - p @ e) ** 2)
    mse = float(p @ (e - s) ** 2)
    var_psi = float(p @ (s - p @ s) ** 2)
    cross = float(2 * p @ (s * (f - s)))
    return DecompositionReport(lhs, mse, var_psi, cross, abs(lhs - (mse + var_psi + cross)))


@dataclass(frozen=True)
class UniquenessVerdict:
    variances: dict[str, float]
    minimizers: list[str]
    unique: bool
    ties_pointwise_equal: bool
    non_measurable: list[str]


def uniqueness_probe(
    dj: DeformedJoint,
    T: StatisticFn,
    theta,
    candidate_pool: Sequence[EstimatorFn],
    theta_grid=None,
    tol: float = 1e-10,
) -> UniquenessVerdict:
    """Among estimators sharing one deformed mean, minimal variance is attained once.

    Members that are not functions of T are listed in ``non_measurable``.
    """
    pool = list(candidate_pool)
    if not pool:
        raise ValueError("empty candidate pool")
    grid = _grid(dj, theta, theta_grid)
    for cand in pool:
        _check_unbiased(dj, grid, pool[0], cand, tol)
    loose = [c.name for c in pool if not is_measurable(dj, T, c)]
    variances = {c.name: deformed_variance(dj, theta, c) for c in pool}
    vmin = min(variances.values())
    tied = [c for c in pool if variances[c.name] <= vmin + tol]
    X = dj.samples
    ref = tied[0].eval(X)
    pointwise = all(np.max(np.abs(c.eval(X) - ref)) < tol for c in tied[1:])
    return UniquenessVerdict(variances, [c.name for c in tied], pointwise, pointwise, loose)


def _affine_match(dj: DeformedJoint, grid: np.ndarray, target: EstimatorFn, fbar: EstimatorFn) -> tuple[float, float] | None:
    """(a, b) with E[a + b fbar] = E[target] across the grid, if such exist."""
    tau = np.array([deformed_expectation(dj, th, target) for th in grid])
    mf = np.array([deformed_expectation(dj, th, fbar) for th in grid])
    design = np.column_stack([np.ones_like(mf), mf])
    coef, *_ = np.linalg.lstsq(design, tau, rcond=None)
    if np.max(np.abs(design @ coef - tau)) > 1e-10:
        return None
    return float(coef[0]), float(coef[1])


def classical_rb_exponential(
    spec: FamilySpec,
    T: StatisticFn,
    theta,
    estimator: EstimatorFn,
    n: int,
    psi: EstimatorFn | None = None,
    theta_grid=None,
) -> RBReport:
    """Classical Rao-Blackwell on an exponential family plus the Cov[psi(fbar), fbar] check.

    By default psi = phi - (a + b fbar), with (a, b) matching the mean function of
    the estimator, so psi has zero mean at every grid theta.
    """
    if spec.kind is not FamilyKind.EXPONENTIAL:
        raise ValueError("classical Rao-Blackwell needs an exponential family")
    dj = deformed_joint(spec, LikelihoodKind.log(), n)
    phi, rep = rao_blackwellize(dj, T, theta, estimator, theta_grid)
    C = canonical_sufficient_statistic(spec)
    fbar = EstimatorFn("fbar", lambda x: C.eval(x)[..., 0])
    if psi is None:
        grid = _grid(dj, theta, theta_grid)
        ab = _affine_match(dj, grid, phi, fbar)
        if ab is None:
            mean_phi = deformed_expectation(dj, theta, phi)
            psi = EstimatorFn("phi-E[phi]", lambda x: phi.eval(x) - mean_phi)
        else:
            a, b = ab
            psi = EstimatorFn("phi-(a+b*fbar)", lambda x: phi.eval(x) - a - b * fbar.eval(x))
    p = deformed_pmf(dj, theta)
    X = dj.samples
    s, f = psi.eval(X), fbar.eval(X)
    cov = float(p @ ((s - p @ s) * (f - p @ f)))
    return RBReport(rep.theta, rep.tau_star, rep.var_original, rep.var_rb, rep.improvement, rep.equality_flag, cov)


def zero_mean_pool(
    dj: DeformedJoint,
    T: StatisticFn,
    theta_grid,
    size: int = 8,
    seed: int = 0,
) -> list[EstimatorFn]:
    """T-measurable psi with E*_theta[psi] = 0 at every grid theta.

    Drawn from the null space of the matrix of q*_theta(t) values; both signs
    of each direction are included, plus psi = 0.
    """
    grid = np.asarray(theta_grid, dtype=float).reshape(-1, dj.spec.theta_dim)
    Q = np.array([marginal_q(dj, T, th) for th in grid])
    _, sv, vt = np.linalg.svd(Q)
    rank = int(np.sum(sv > 1e-12 * sv[0]))
    null = vt[rank:]
    pool = [bucket_function(dj, T, np.zeros(Q.shape[1]), "psi=0")]
    if null.shape[0] == 0:
        return pool
    rng = rng_stream(seed, "zero-mean-pool")
    for i in range(math.ceil((size - 1) / 2)):
        v = rng.standard_normal(null.shape[0]) @ null
        v = v / np.max(np.abs(v))
        pool.append(bucket_function(dj, T, v, f"psi{i}+"))
        pool.append(bucket_function(dj, T, -v, f"psi{i}-"))
    return pool[:size]


def deformed_covariances(dj: DeformedJoint, theta, pool: Sequence[EstimatorFn], target: EstimatorFn) -> dict[str, float]:
    """Cov*_theta[psi, target] for each psi in the pool."""
    p = deformed_pmf(dj, theta)
    X = dj.samples
    t = target.eval(X)
    t = t - p @ t
    out = {}
    for psi in pool:
        s = psi.eval(X)
        out[psi.name] = float(p @ ((s - p @ s) * t))
    return out
