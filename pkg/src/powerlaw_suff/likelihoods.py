"""Log, Jones, Basu and Cauchy-Schwarz likelihoods on i.i.d. samples.

Every evaluator accepts a single sample of shape ``(n,)`` or a batch of shape
``(..., n)`` and returns one value per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DivergentIntegral, DivergentNorm, SampleOutsideSupport, ZeroDensityAtSample
from .families import (
    FamilyKind,
    FamilySpec,
    FiniteSupport,
    as_theta,
    density,
    in_support,
    integrate_over_support,
    normalizer,
    theta_key,
)
from .numerics import fd_derivative


class LikelihoodName(str, Enum):
    LOG = "log"
    JONES = "jones"
    BASU = "basu"
    CAUCHY_SCHWARZ = "cauchy_schwarz"


@dataclass(frozen=True)
class LikelihoodKind:
    name: LikelihoodName
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.name in (LikelihoodName.JONES, LikelihoodName.BASU):
            if self.alpha is None or not (self.alpha > 0 and self.alpha != 1.0):
                raise ValueError(f"{self.name.value} likelihood needs alpha > 0, alpha != 1")

    @classmethod
    def log(cls) -> LikelihoodKind:
        return cls(LikelihoodName.LOG)

    @classmethod
    def jones(cls, alpha: float) -> LikelihoodKind:
        return cls(LikelihoodName.JONES, float(alpha))

    @classmethod
    def basu(cls, alpha: float) -> LikelihoodKind:
        return cls(LikelihoodName.BASU, float(alpha))

    @classmethod
    def cauchy_schwarz(cls) -> LikelihoodKind:
        return cls(LikelihoodName.CAUCHY_SCHWARZ)

    @classmethod
    def parse(cls, name: str, alpha: float | None = None) -> LikelihoodKind:
        key = {"cs": "cauchy_schwarz", "cauchy-schwarz": "cauchy_schwarz"}.get(name.lower(), name.lower())
        return cls(LikelihoodName(key), alpha if key in ("jones", "basu") else None)

    @property
    def label(self) -> str:
        return f"{self.name.value}({self.alpha:g})" if self.alpha is not None else self.name.value


@dataclass(frozen=True)
class EmpiricalPMF:
    atoms: tuple[float, ...]
    masses: tuple[float, ...]

    def __post_init__(self) -> None:
        m = np.asarray(self.masses, dtype=float)
        if len(self.atoms) != len(m):
            raise ValueError("atoms and masses differ in length")
        if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-12:
            raise ValueError("masses must be nonnegative and sum to 1")

    @classmethod
    def from_sample(cls, sample: Sequence[float], atoms: Sequence[float]) -> EmpiricalPMF:
        x = np.asarray(sample, dtype=float)
        counts = [float(np.sum(np.isclose(x, a, rtol=0, atol=1e-12))) for a in atoms]
        if sum(counts) != len(x):
            raise SampleOutsideSupport("sample has values outside the atoms")
        return cls(tuple(float(a) for a in atoms), tuple(c / len(x) for c in counts))


def _sample_density(spec: FamilySpec, theta, sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise ValueError("a sample needs at least one value")
    if not np.all(in_support(spec, x)):
        raise SampleOutsideSupport(f"sample leaves the support of {spec.name}")
    p = density(spec, theta, x)
    if np.any(p <= 0):
        raise ZeroDensityAtSample(f"zero density inside the sample for {spec.name}")
    return p


def power_integral(spec: FamilySpec, theta, a: float, method: str = "auto") -> float:
    """Integral (or sum) of p_theta^a over the support, cached per (theta, a)."""
    th = as_theta(spec, theta)
    use_closed = spec.closed_power_integral is not None and method == "auto"
    key = ("P", float(a), use_closed, theta_key(th))
    if key not in spec._cache:
        try:
            if use_closed:
                val = float(spec.closed_power_integral(th.array, a))
            else:
                val = integrate_over_support(spec, lambda x: density(spec, th, x) ** a)
        except DivergentIntegral as exc:
            raise DivergentNorm(str(exc)) from exc
        spec._cache[key] = val
    return spec._cache[key]


def lp_norm(spec: FamilySpec, theta, alpha: float, method: str = "auto") -> float:
    """(integral of p^alpha)^(1/alpha)."""
    return power_integral(spec, theta, alpha, method) ** (1.0 / alpha)


def log_likelihood(spec: FamilySpec, theta, sample):
    p = _sample_density(spec, theta, sample)
    return np.sum(np.log(p), axis=-1)


def jones_likelihood(spec: FamilySpec, theta, sample, alpha: float, method: str = "auto"):
    """(1/(alpha-1)) log[(1/n) sum p^(alpha-1)] - log ||p||_alpha."""
    p = _sample_density(spec, theta, sample)
    m = np.mean(p ** (alpha - 1.0), axis=-1)
    return np.log(m) / (alpha - 1.0) - math.log(lp_norm(spec, theta, alpha, method))


def jones_likelihood_normalized(spec: FamilySpec, theta, sample, alpha: float, method: str = "auto"):
    """Same value via (1/(alpha-1)) log[(1/n) sum (p/||p||)^(alpha-1)]."""
    p = _sample_density(spec, theta, sample) / lp_norm(spec, theta, alpha, method)
    return np.log(np.mean(p ** (alpha - 1.0), axis=-1)) / (alpha - 1.0)


def jones_likelihood_from_stats(spec: FamilySpec, theta, hbar: float, fbar: Sequence[float]) -> float:
    """Jones likelihood at the family's own alpha from (h-bar, f-bar) alone (M^(alpha) only)."""
    if spec.kind is not FamilyKind.M_ALPHA:
        raise ValueError("only defined for M^(alpha) families")
    th = as_theta(spec, theta)
    a = spec.alpha
    b = hbar + float(np.dot(spec.w(th.array), np.asarray(fbar, dtype=float)))
    if b <= 0:
        return -math.inf
    return math.log(normalizer(spec, th)) + math.log(b) / (a - 1.0) - math.log(lp_norm(spec, th, a))


def basu_likelihood(spec: FamilySpec, theta, sample, alpha: float, method: str = "auto"):
    """(1/n) sum (alpha p^(alpha-1) - 1)/(alpha-1) - integral of p^alpha."""
    p = _sample_density(spec, theta, sample)
    term = np.mean((alpha * p ** (alpha - 1.0) - 1.0) / (alpha - 1.0), axis=-1)
    return term - power_integral(spec, theta, alpha, method)


def cauchy_schwarz_likelihood(empirical: EmpiricalPMF, spec: FamilySpec, theta) -> float:
    """log[sum p_n p_theta / sum p_theta^2] over the finite support."""
    if not isinstance(spec.support, FiniteSupport):
        raise ValueError("Cauchy-Schwarz likelihood needs a finite support")
    pts = np.asarray(spec.support.points, dtype=float)
    p = density(spec, theta, pts)
    pn = np.zeros(len(pts))
    for a, m in zip(empirical.atoms, empirical.masses):
        hit = np.isclose(pts, a, rtol=0, atol=1e-12)
        if not hit.any():
            if m > 0:
                raise SampleOutsideSupport(f"atom {a} outside support")
            continue
        pn[hit] += m
    return float(math.log(np.dot(pn, p) / np.dot(p, p)))


def empirical_masses(spec: FamilySpec, samples) -> np.ndarray:
    """Empirical pmf of each sample over the finite support, shape (..., |S|)."""
    pts = np.asarray(spec.support.points, dtype=float)
    x = np.asarray(samples, dtype=float)
    hits = np.isclose(x[..., None], pts, rtol=0, atol=1e-12)
    if not np.all(hits.any(axis=-1)):
        raise SampleOutsideSupport(f"sample leaves the support of {spec.name}")
    return hits.mean(axis=-2)


def cauchy_schwarz_batch(spec: FamilySpec, theta, samples):
    """Cauchy-Schwarz likelihood for a batch of raw samples."""
    if not isinstance(spec.support, FiniteSupport):
        raise ValueError("Cauchy-Schwarz likelihood needs a finite support")
    pts = np.asarray(spec.support.points, dtype=float)
    p = density(spec, theta, pts)
    pn = empirical_masses(spec, samples)
    with np.errstate(divide="ignore"):
        return np.log(pn @ p / np.dot(p, p))


def evaluate(kind: LikelihoodKind, spec: FamilySpec, theta, samples):
    """Dispatch to the likelihood selected by ``kind``."""
    if kind.name is LikelihoodName.LOG:
        return log_likelihood(spec, theta, samples)
    if kind.name is LikelihoodName.JONES:
        return jones_likelihood(spec, theta, samples, kind.alpha)
    if kind.name is LikelihoodName.BASU:
        return basu_likelihood(spec, theta, samples, kind.alpha)
    return cauchy_schwarz_batch(spec, theta, samples)


def likelihood_gradient(kind: LikelihoodKind, spec: FamilySpec, theta, sample, rel_step: float = 1e-5):
    """Finite-difference gradient in theta; returns (gradient, Richardson-consistent flag)."""
    th = as_theta(spec, theta)
    grad = np.empty(spec.theta_dim)
    consistent = True
    for i, (lo, hi) in enumerate(spec.theta_box):
        width = hi - lo if math.isfinite(hi - lo) else 1.0
        h = min(rel_step * width, 0.25 * (th.values[i] - lo), 0.25 * (hi - th.values[i]))

        def g(t: float, i: int = i) -> float:
            v = th.array.copy()
            v[i] = t
            return float(evaluate(kind, spec, v, sample))

        res = fd_derivative(g, th.values[i], order=1, h=h)
        grad[i] = res.value
        consistent &= res.consistent
    return grad, consistent
