"""Exponential, M^(alpha) and B^(alpha) families with the Student and Bernoulli instances.

An M^(alpha) density is ``Z(theta) [h(x) + w(theta)^T f(x)]^(1/(alpha-1))``.
A B^(alpha) density is ``[h(x) + F(theta) + w(theta)^T f(x)]^(1/(alpha-1))``.
An exponential density is ``Z(theta) exp[h(x) + w(theta)^T f(x)]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.special import betaln, gammaln

from .errors import DivergentIntegral, InsufficientProbes, NonPositiveBase, ThetaOutOfBox
from .numerics import integrate


class FamilyKind(str, Enum):
    EXPONENTIAL = "exponential"
    M_ALPHA = "m_alpha"
    B_ALPHA = "b_alpha"


@dataclass(frozen=True)
class FiniteSupport:
    points: tuple[float, ...]


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)


Support = FiniteSupport | Interval


@dataclass(frozen=True, eq=False)
class FamilySpec:
    """A parametric family stored as callables plus arity metadata.

    ``h(x)`` and ``f(x)`` are vectorized over x (``f`` appends a trailing axis of
    length ``statistic_dim``); ``w(theta)`` maps a length-k array to length s.
    The optional ``closed_*`` hooks supply exact values that quadrature would
    otherwise compute; tests cross-check the two paths.
    """

    name: str
    kind: FamilyKind
    alpha: float
    h: Callable[[np.ndarray], np.ndarray]
    w: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    support: Support
    theta_box: tuple[tuple[float, float], ...]
    statistic_dim: int
    F: Callable[[np.ndarray], float] | None = None
    closed_normalizer: Callable[[np.ndarray], float] | None = None
    closed_power_integral: Callable[[np.ndarray, float], float] | None = None
    sampler: Callable[[np.random.Generator, np.ndarray, int], np.ndarray] | None = None
    meta: Mapping[str, Any] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind is FamilyKind.EXPONENTIAL:
            if self.alpha != 1.0:
                raise ValueError("exponential families carry alpha = 1")
        elif not (self.alpha > 0 and self.alpha != 1.0):
            raise ValueError(f"alpha must be positive and != 1, got {self.alpha}")
        if self.kind is FamilyKind.B_ALPHA and self.F is None:
            raise ValueError("B^(alpha) family requires F(theta)")
        if self.statistic_dim < self.theta_dim:
            raise ValueError("statistic_dim must be >= theta_dim")
        for lo, hi in self.theta_box:
            if not lo < hi:
                raise ValueError(f"empty parameter interval ({lo}, {hi})")

    @property
    def theta_dim(self) -> int:
        return len(self.theta_box)

    @property
    def is_finite(self) -> bool:
        return isinstance(self.support, FiniteSupport)


@dataclass(frozen=True)
class ThetaPoint:
    values: tuple[float, ...]
    box: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.box):
            raise ValueError(f"theta has {len(self.values)} coordinates, box has {len(self.box)}")
        for v, (lo, hi) in zip(self.values, self.box):
            if not lo < v < hi:
                raise ThetaOutOfBox(f"theta coordinate {v} not strictly inside ({lo}, {hi})")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def scalar(self) -> float:
        if len(self.values) != 1:
            raise ValueError("theta is not scalar")
        return self.values[0]


def as_theta(spec: FamilySpec, theta) -> ThetaPoint:
    if isinstance(theta, ThetaPoint):
        values = theta.values
    else:
        values = tuple(float(v) for v in np.atleast_1d(np.asarray(theta, dtype=float)))
    return ThetaPoint(values, spec.theta_box)


def theta_key(theta: ThetaPoint) -> tuple[float, ...]:
    """Exact cache key; rounding would leak stale values into finite differences."""
    return tuple(float(v) for v in theta.values)


def in_support(spec: FamilySpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if isinstance(spec.support, FiniteSupport):
        pts = np.asarray(spec.support.points, dtype=float)
        return np.any(np.isclose(x[..., None], pts, rtol=0, atol=1e-12), axis=-1)
    return (x >= spec.support.lo) & (x <= spec.support.hi)


def base(spec: FamilySpec, theta, x) -> np.ndarray:
    """The bracketed base h + (F) + w^T f, or the exponent for exponential families."""
    th = as_theta(spec, theta)
    x = np.asarray(x, dtype=float)
    val = np.asarray(spec.h(x), dtype=float) + np.asarray(spec.f(x), dtype=float) @ np.asarray(spec.w(th.array), dtype=float)
    if spec.kind is FamilyKind.B_ALPHA:
        val = val + float(spec.F(th.array))
    return val


def _kernel(spec: FamilySpec, theta: ThetaPoint, x: np.ndarray) -> np.ndarray:
    b = base(spec, theta, x)
    inside = in_support(spec, x)
    if spec.kind is FamilyKind.EXPONENTIAL:
        with np.errstate(over="ignore"):
            return np.where(inside, np.exp(b), 0.0)
    if np.any(inside & (b <= 0)):
        bad = np.asarray(x)[inside & (b <= 0)].ravel()[:3]
        raise NonPositiveBase(f"{spec.name}: base <= 0 at x={bad} for theta={theta.values}")
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(inside, np.abs(b) ** (1.0 / (spec.alpha - 1.0)), 0.0)


def _tail_exponent(g: Callable[[np.ndarray], np.ndarray], side: float) -> float | None:
    x = np.array([[side * 1e4], [side * 1e6]])
    v = np.asarray(g(x), dtype=float)
    if not np.all(np.isfinite(v)):
        return math.inf
    if v[1] <= 0 or v[0] <= 0:
        return None
    return float(np.log(v[1] / v[0]) / np.log(100.0))


def integrate_over_support(spec: FamilySpec, g: Callable[[np.ndarray], np.ndarray], rel_tol: float = 1e-11) -> float:
    """Sum over finite support, else adaptive quadrature with a tail-divergence check.

    ``g`` is vectorized over x of any shape.
    """
    if isinstance(spec.support, FiniteSupport):
        pts = np.asarray(spec.support.points, dtype=float)
        return float(np.sum(g(pts)))
    lo, hi = spec.support.lo, spec.support.hi
    for side, bound in ((1.0, hi), (-1.0, lo)):
        if math.isinf(bound):
            e = _tail_exponent(lambda z: g(z[:, 0]), side)
            if e is not None and e >= -1.0 - 1e-3:
                raise DivergentIntegral(f"{spec.name}: integrand decays like |x|^{e:.3f}")
    return integrate(lambda z: g(z[:, 0]), (lo, hi), rel_tol=rel_tol, abs_tol=1e-300).value


def normalizer(spec: FamilySpec, theta, method: str = "auto") -> float:
    """Z(theta) such that the density integrates to one (close to 1 for B^(alpha))."""
    th = as_theta(spec, theta)
    if method not in ("auto", "numeric", "closed"):
        raise ValueError(f"unknown method {method!r}")
    use_closed = spec.closed_normalizer is not None and method in ("auto", "closed")
    if method == "closed" and spec.closed_normalizer is None:
        raise ValueError(f"{spec.name} has no closed-form normalizer")
    key = ("Z", use_closed, theta_key(th))
    if key not in spec._cache:
        if use_closed:
            z = float(spec.closed_normalizer(th.array))
        else:
            z = 1.0 / integrate_over_support(spec, lambda x: _kernel(spec, th, x))
        spec._cache[key] = z
    return spec._cache[key]


def density(spec: FamilySpec, theta, x, method: str = "auto"):
    """p_theta(x), zero outside the support."""
    th = as_theta(spec, theta)
    xa = np.asarray(x, dtype=float)
    k = _kernel(spec, th, xa)
    out = k if spec.kind is FamilyKind.B_ALPHA else normalizer(spec, th, method) * k
    return float(out) if np.ndim(x) == 0 else out


def log_density(spec: FamilySpec, theta, x, method: str = "auto"):
    with np.errstate(divide="ignore"):
        return np.log(density(spec, theta, x, method))


# ---------------------------------------------------------------- regularity


@dataclass(frozen=True)
class RegularityReport:
    w_independent: bool
    f_independent: bool
    one_f_independent: bool | None
    s_equals_k: bool
    support_independent: bool
    w_rank: int
    f_rank: int

    @property
    def regular(self) -> bool:
        return (
            self.w_independent
            and self.f_independent
            and self.one_f_independent is not False
            and self.s_equals_k
            and self.support_independent
        )


def _numerical_rank(m: np.ndarray, rtol: float = 1e-9) -> int:
    norms = np.linalg.norm(m, axis=0)
    m = m / np.where(norms > 0, norms, 1.0)
    sv = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(sv > rtol * max(sv[0], 1e-300)))


def regularity_check(spec: FamilySpec, theta_probe_grid, x_probe_grid) -> RegularityReport:
    """Numerical-rank tests of linear independence of {1, w_i} and {f_i}."""
    s = spec.statistic_dim
    tg = np.asarray(theta_probe_grid, dtype=float).reshape(-1, spec.theta_dim)
    xg = np.asarray(x_probe_grid, dtype=float).ravel()
    n_support = len(spec.support.points) if isinstance(spec.support, FiniteSupport) else math.inf
    if len(tg) < s + 2 or len(xg) < min(s + 2, n_support):
        raise InsufficientProbes(f"need at least {s + 2} probes per grid")
    W = np.column_stack([np.ones(len(tg)), np.array([np.atleast_1d(spec.w(t)) for t in tg])])
    Fm = np.asarray(spec.f(xg), dtype=float).reshape(len(xg), s)
    w_rank = _numerical_rank(W)
    f_rank = _numerical_rank(Fm)
    one_f = None
    if spec.kind is FamilyKind.B_ALPHA:
        one_f = _numerical_rank(np.column_stack([np.ones(len(xg)), Fm])) == s + 1
    return RegularityReport(
        w_independent=w_rank == s + 1,
        f_independent=f_rank == s,
        one_f_independent=one_f,
        s_equals_k=s == spec.theta_dim,
        support_independent=True,
        w_rank=w_rank,
        f_rank=f_rank,
    )


# ----------------------------------------------------------------- instances


def _col(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=float)[..., None]


def _ones(x: np.ndarray) -> np.ndarray:
    return np.ones_like(np.asarray(x, dtype=float))


def _zeros(x: np.ndarray) -> np.ndarray:
    return np.zeros_like(np.asarray(x, dtype=float))


def student_alpha(nu: float) -> tuple[float, float]:
    """(alpha, b_alpha) for Student's t with nu degrees of freedom."""
    alpha = (nu - 1.0) / (nu + 1.0)
    return alpha, (1.0 - alpha) / (1.0 + alpha)


def student_norm_const(nu: float, sigma2: float = 1.0) -> float:
    return math.exp(gammaln((nu + 1) / 2) - gammaln(nu / 2)) / math.sqrt(nu * math.pi * sigma2)


def _student_power_integral(nu: float, sigma2: float, a: float) -> float:
    """Integral of the Student density raised to the power a."""
    shape = a * (nu + 1) / 2 - 0.5
    if shape <= 0:
        raise DivergentIntegral(f"Student nu={nu}: p^{a} is not integrable")
    return student_norm_const(nu, sigma2) ** a * math.sqrt(nu * sigma2) * math.exp(betaln(0.5, shape))


def _student_sampler(nu: float, mu_index: int | None, s2_index: int | None, mu0: float, s20: float):
    def draw(rng: np.random.Generator, th: np.ndarray, n: int) -> np.ndarray:
        mu = th[mu_index] if mu_index is not None else mu0
        s2 = th[s2_index] if s2_index is not None else s20
        z = rng.standard_normal(n)
        chi = rng.chisquare(nu, n)
        return mu + math.sqrt(s2) * z / np.sqrt(chi / nu)

    return draw


def _box(default, box):
    return tuple(tuple(map(float, b)) for b in (box if box is not None else default))


def student_as_m_alpha(nu: float, mu: float = 0.0, sigma2: float = 1.0, box=None) -> tuple[FamilySpec, ThetaPoint]:
    """Student's t with unknown (mu, sigma2) as a two-parameter M^(alpha) family."""
    if not nu > 2:
        raise ValueError("nu must exceed 2")
    alpha, b = student_alpha(nu)

    def w(th: np.ndarray) -> np.ndarray:
        m, s2 = th
        d = s2 + b * m * m
        return np.array([b / d, -2 * m * b / d])

    def z(th: np.ndarray) -> float:
        m, s2 = th
        return student_norm_const(nu, s2) * (1 + m * m * b / s2) ** (1 / (alpha - 1))

    def power(th: np.ndarray, a: float) -> float:
        return _student_power_integral(nu, th[1], a)

    spec = FamilySpec(
        name=f"student{nu:g}_m_alpha",
        kind=FamilyKind.M_ALPHA,
        alpha=alpha,
        h=_ones,
        w=w,
        f=lambda x: np.stack([np.asarray(x, float) ** 2, np.asarray(x, float)], axis=-1),
        support=Interval(),
        theta_box=_box(((-10.0, 10.0), (0.0, 20.0)), box),
        statistic_dim=2,
        closed_normalizer=z,
        closed_power_integral=power,
        sampler=_student_sampler(nu, 0, 1, mu, sigma2),
        meta={"family": "student_m_alpha", "nu": nu, "b": b, "pairing": "moments"},
    )
    return spec, as_theta(spec, (mu, sigma2))


def student_scale_m_alpha(nu: float, sigma2: float = 1.0, box=None) -> tuple[FamilySpec, ThetaPoint]:
    """Zero-mean Student's t with unknown sigma2: one-parameter M^(alpha), w = b/sigma2, f = x^2."""
    if not nu > 2:
        raise ValueError("nu must exceed 2")
    alpha, b = student_alpha(nu)
    spec = FamilySpec(
        name=f"student{nu:g}_scale",
        kind=FamilyKind.M_ALPHA,
        alpha=alpha,
        h=_ones,
        w=lambda th: np.array([b / th[0]]),
        f=lambda x: _col(np.asarray(x, float) ** 2),
        support=Interval(),
        theta_box=_box(((0.0, 100.0),), box),
        statistic_dim=1,
        closed_normalizer=lambda th: student_norm_const(nu, th[0]),
        closed_power_integral=lambda th, a: _student_power_integral(nu, th[0], a),
        sampler=_student_sampler(nu, None, 0, 0.0, sigma2),
        meta={"family": "student_scale", "nu": nu, "b": b, "pairing": "moments"},
    )
    return spec, as_theta(spec, (sigma2,))


def student_location_m_alpha(nu: float, mu: float = 0.0, sigma2: float = 1.0, box=None) -> tuple[FamilySpec, ThetaPoint]:
    """Student's t with known sigma2 written as M^(alpha) in mu alone (s = 2 > k = 1)."""
    full, _ = student_as_m_alpha(nu, mu, sigma2)
    spec = FamilySpec(
        name=f"student{nu:g}_location_m_alpha",
        kind=FamilyKind.M_ALPHA,
        alpha=full.alpha,
        h=_ones,
        w=lambda th: full.w(np.array([th[0], sigma2])),
        f=full.f,
        support=Interval(),
        theta_box=_box(((-10.0, 10.0),), box),
        statistic_dim=2,
        closed_normalizer=lambda th: full.closed_normalizer(np.array([th[0], sigma2])),
        closed_power_integral=lambda th, a: _student_power_integral(nu, sigma2, a),
        sampler=_student_sampler(nu, 0, None, mu, sigma2),
        meta={"family": "student_location_m_alpha", "nu": nu, "b": full.meta["b"], "pairing": "moments"},
    )
    return spec, as_theta(spec, (mu,))


def student_as_b_alpha(nu: float, mu: float = 0.0, sigma2: float = 1.0, box=None) -> tuple[FamilySpec, ThetaPoint]:
    """Student's t with known sigma2 and unknown mu as a one-parameter B^(alpha) family."""
    if not nu > 2:
        raise ValueError("nu must exceed 2")
    alpha, b = student_alpha(nu)
    c = student_norm_const(nu, sigma2) ** (alpha - 1)
    spec = FamilySpec(
        name=f"student{nu:g}_b_alpha",
        kind=FamilyKind.B_ALPHA,
        alpha=alpha,
        h=lambda x: c * b * np.asarray(x, float) ** 2 / sigma2,
        w=lambda th: np.array([-2 * th[0] * c * b / sigma2]),
        f=_col,
        F=lambda th: (1 + b * th[0] ** 2 / sigma2) * c,
        support=Interval(),
        theta_box=_box(((-10.0, 10.0),), box),
        statistic_dim=1,
        closed_normalizer=lambda th: 1.0,
        closed_power_integral=lambda th, a: _student_power_integral(nu, sigma2, a),
        sampler=_student_sampler(nu, 0, None, mu, sigma2),
        meta={"family": "student_b_alpha", "nu": nu, "b": b, "sigma2": sigma2, "pairing": "sum"},
    )
    return spec, as_theta(spec, (mu,))


def bernoulli_as_m2(theta: float = 0.5) -> tuple[FamilySpec, ThetaPoint]:
    """Bernoulli(theta) as M^(2): h = 1, w = (2 theta - 1)/(1 - theta), f = x, Z = 1 - theta."""
    spec = FamilySpec(
        name="bernoulli_m2",
        kind=FamilyKind.M_ALPHA,
        alpha=2.0,
        h=_ones,
        w=lambda th: np.array([(2 * th[0] - 1) / (1 - th[0])]),
        f=_col,
        support=FiniteSupport((0.0, 1.0)),
        theta_box=((0.0, 1.0),),
        statistic_dim=1,
        closed_normalizer=lambda th: 1 - th[0],
        meta={"family": "bernoulli", "form": "m2", "pairing": "sum"},
    )
    return spec, as_theta(spec, theta)


def bernoulli_as_b_alpha(theta: float = 0.5, alpha: float = 2.0) -> tuple[FamilySpec, ThetaPoint]:
    """Bernoulli(theta) as B^(alpha): h = 0, F = (1-theta)^(alpha-1), w = theta^(alpha-1) - F, f = x."""
    spec = FamilySpec(
        name=f"bernoulli_b_alpha{alpha:g}",
        kind=FamilyKind.B_ALPHA,
        alpha=alpha,
        h=_zeros,
        w=lambda th: np.array([th[0] ** (alpha - 1) - (1 - th[0]) ** (alpha - 1)]),
        f=_col,
        F=lambda th: (1 - th[0]) ** (alpha - 1),
        support=FiniteSupport((0.0, 1.0)),
        theta_box=((0.0, 1.0),),
        statistic_dim=1,
        closed_normalizer=lambda th: 1.0,
        meta={"family": "bernoulli", "form": "b_alpha", "pairing": "sum"},
    )
    return spec, as_theta(spec, theta)


def binomial_exponential(m: int, theta: float = 0.5) -> tuple[FamilySpec, ThetaPoint]:
    """Binomial(m, theta) as an exponential family with natural parameter logit(theta)."""
    spec = FamilySpec(
        name=f"binomial{m}",
        kind=FamilyKind.EXPONENTIAL,
        alpha=1.0,
        h=lambda x: gammaln(m + 1) - gammaln(np.asarray(x, float) + 1) - gammaln(m - np.asarray(x, float) + 1),
        w=lambda th: np.array([math.log(th[0] / (1 - th[0]))]),
        f=_col,
        support=FiniteSupport(tuple(float(k) for k in range(m + 1))),
        theta_box=((0.0, 1.0),),
        statistic_dim=1,
        closed_normalizer=lambda th: (1 - th[0]) ** m,
        meta={"family": "binomial", "m": m, "pairing": "sum"},
    )
    return spec, as_theta(spec, theta)


def bernoulli_exponential(theta: float = 0.5) -> tuple[FamilySpec, ThetaPoint]:
    return binomial_exponential(1, theta)


def normal_exponential(mu: float = 0.0) -> tuple[FamilySpec, ThetaPoint]:
    """N(mu, 1) as a one-parameter exponential family."""
    spec = FamilySpec(
        name="normal_unit",
        kind=FamilyKind.EXPONENTIAL,
        alpha=1.0,
        h=lambda x: -0.5 * np.asarray(x, float) ** 2,
        w=lambda th: np.array([th[0]]),
        f=_col,
        support=Interval(),
        theta_box=((-50.0, 50.0),),
        statistic_dim=1,
        closed_normalizer=lambda th: math.exp(-0.5 * th[0] ** 2) / math.sqrt(2 * math.pi),
        closed_power_integral=lambda th, a: (2 * math.pi) ** ((1 - a) / 2) / math.sqrt(a),
        sampler=lambda rng, th, n: th[0] + rng.standard_normal(n),
        meta={"family": "normal_unit", "pairing": "sum"},
    )
    return spec, as_theta(spec, mu)


def gaussian(mu: float = 0.0, sigma2: float = 1.0, box=None) -> tuple[FamilySpec, ThetaPoint]:
    """N(mu, sigma2) with both parameters unknown, as an exponential family."""
    spec = FamilySpec(
        name="gaussian",
        kind=FamilyKind.EXPONENTIAL,
        alpha=1.0,
        h=_zeros,
        w=lambda th: np.array([th[0] / th[1], -0.5 / th[1]]),
        f=lambda x: np.stack([np.asarray(x, float), np.asarray(x, float) ** 2], axis=-1),
        support=Interval(),
        theta_box=_box(((-1e3, 1e3), (0.0, 1e6)), box),
        statistic_dim=2,
        closed_normalizer=lambda th: math.exp(-0.5 * th[0] ** 2 / th[1]) / math.sqrt(2 * math.pi * th[1]),
        closed_power_integral=lambda th, a: (2 * math.pi * th[1]) ** ((1 - a) / 2) / math.sqrt(a),
        sampler=lambda rng, th, n: th[0] + math.sqrt(th[1]) * rng.standard_normal(n),
        meta={"family": "gaussian", "pairing": "moments"},
    )
    return spec, as_theta(spec, (mu, sigma2))


def truncated_exponential_unit(theta: float = 0.0) -> tuple[FamilySpec, ThetaPoint]:
    """Density proportional to exp(theta x) on [0, 1]; uniform at theta = 0."""
    spec = FamilySpec(
        name="truncated_exponential_unit",
        kind=FamilyKind.EXPONENTIAL,
        alpha=1.0,
        h=_zeros,
        w=lambda th: np.array([th[0]]),
        f=_col,
        support=Interval(0.0, 1.0),
        theta_box=((-5.0, 5.0),),
        statistic_dim=1,
        meta={"family": "truncated_exponential_unit", "pairing": "sum"},
    )
    return spec, as_theta(spec, theta)


def m_alpha_from_exponential(exp_spec: FamilySpec, alpha: float) -> FamilySpec:
    """Deform an exponential family: h -> exp(h)^(alpha-1), f -> (alpha-1) f.

    The result tends to the exponential family pointwise as alpha -> 1.
    """
    if exp_spec.kind is not FamilyKind.EXPONENTIAL:
        raise ValueError("expected an exponential family")
    return FamilySpec(
        name=f"{exp_spec.name}_m_alpha{alpha:g}",
        kind=FamilyKind.M_ALPHA,
        alpha=alpha,
        h=lambda x: np.exp(np.asarray(exp_spec.h(x), float)) ** (alpha - 1),
        w=exp_spec.w,
        f=lambda x: (alpha - 1) * np.asarray(exp_spec.f(x), float),
        support=exp_spec.support,
        theta_box=exp_spec.theta_box,
        statistic_dim=exp_spec.statistic_dim,
        meta={"family": "deformed_exponential", "pairing": exp_spec.meta.get("pairing")},
    )


def _poly(coeffs: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    c = np.asarray(coeffs, dtype=float)
    return lambda x: np.polyval(c, np.asarray(x, dtype=float))


def custom_polynomial_family(
    kind: str,
    alpha: float,
    h: Sequence[float],
    f: Sequence[Sequence[float]],
    w: Sequence[Sequence[float]],
    support: Support,
    theta_box: Sequence[Sequence[float]],
    F: Sequence[float] | None = None,
    name: str = "custom",
) -> FamilySpec:
    """Scalar-parameter family whose h, f_i (in x) and w_i, F (in theta) are polynomials.

    Coefficient lists are in descending degree, as for ``numpy.polyval``.
    """
    fk = FamilyKind(kind)
    fs = [_poly(c) for c in f]
    ws = [_poly(c) for c in w]
    if len(fs) != len(ws):
        raise ValueError("f and w must have the same length")
    Fp = _poly(F) if F is not None else None
    return FamilySpec(
        name=name,
        kind=fk,
        alpha=1.0 if fk is FamilyKind.EXPONENTIAL else float(alpha),
        h=_poly(h),
        w=lambda th: np.array([wi(th[0]) for wi in ws], dtype=float),
        f=lambda x: np.stack([fi(x) for fi in fs], axis=-1),
        F=(lambda th: float(Fp(th[0]))) if Fp is not None else None,
        support=support,
        theta_box=tuple(tuple(map(float, b)) for b in theta_box),
        statistic_dim=len(fs),
        meta={"family": "custom"},
    )


def _support_from_json(doc: Any) -> Support:
    if isinstance(doc, Mapping):
        return Interval(float(doc.get("lo", -math.inf)), float(doc.get("hi", math.inf)))
    return FiniteSupport(tuple(float(v) for v in doc))


def family_from_json(doc: Mapping[str, Any] | str | Path) -> tuple[FamilySpec, ThetaPoint]:
    """Load a family from a JSON document, a JSON string, or a path to a JSON file."""
    if isinstance(doc, Path) or (isinstance(doc, str) and not doc.lstrip().startswith("{")):
        doc = json.loads(Path(doc).read_text())
    elif isinstance(doc, str):
        doc = json.loads(doc)
    kind = doc["kind"]
    if kind == "student_m_alpha":
        return student_as_m_alpha(doc["nu"], doc.get("mu", 0.0), doc.get("sigma2", 1.0))
    if kind == "student_b_alpha":
        return student_as_b_alpha(doc["nu"], doc.get("mu", 0.0), doc.get("sigma2", 1.0))
    if kind == "student_scale":
        return student_scale_m_alpha(doc["nu"], doc.get("sigma2", 1.0))
    if kind == "bernoulli":
        form = doc.get("form", "m2")
        theta = doc.get("theta", 0.5)
        if form == "m2":
            return bernoulli_as_m2(theta)
        if form == "b_alpha":
            return bernoulli_as_b_alpha(theta, doc.get("alpha", 2.0))
        if form == "exponential":
            return bernoulli_exponential(theta)
        raise ValueError(f"unknown bernoulli form {form!r}")
    if kind == "binomial":
        return binomial_exponential(int(doc["m"]), doc.get("theta", 0.5))
    if kind == "gaussian":
        return gaussian(doc.get("mu", 0.0), doc.get("sigma2", 1.0))
    if kind == "custom":
        spec = custom_polynomial_family(
            kind=doc["family"],
            alpha=doc.get("alpha", 1.0),
            h=doc["h"],
            f=doc["f"],
            w=doc["w"],
            F=doc.get("F"),
            support=_support_from_json(doc["support"]),
            theta_box=doc["theta_box"],
            name=doc.get("name", "custom"),
        )
        return spec, as_theta(spec, doc["theta"])
    raise ValueError(f"unknown family kind {kind!r}")
