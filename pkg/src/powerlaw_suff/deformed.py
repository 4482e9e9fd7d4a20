"""The deformed n-sample distribution p*_theta proportional to exp L_G(x; theta).

For the Jones likelihood on an M^(alpha) family the theta-only factor
Z(theta)/||p_theta|| is removed from exp L_J, so the stored kernel is
[h-bar + w^T f-bar]^(1/(alpha-1)) and its normalizer is N(theta)^(-1).
Other likelihoods use exp L_G as is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import DivergentNormalizer, EmptyBucket, UnsupportedSpace
from .families import FamilyKind, FamilySpec, FiniteSupport, as_theta, normalizer, theta_key
from .likelihoods import LikelihoodKind, LikelihoodName, _sample_density, evaluate
from .numerics import enumerate_space, integrate
from .sufficiency import StatisticFn

MAX_CONTINUOUS_N = 3
DIVERGENCE_RADII = (1e2, 1e3, 1e4)


@dataclass(frozen=True)
class FiniteEnumerable:
    points: tuple[float, ...]


@dataclass(frozen=True)
class ContinuousBox:
    """Integration region per coordinate; None means the whole real line."""

    bounds: tuple[float, float] | None = None
    rel_tol: float = 1e-8


@dataclass(eq=False)
class DeformedJoint:
    spec: FamilySpec
    likelihood: LikelihoodKind
    n: int
    space: FiniteEnumerable | ContinuousBox
    normalizer_cache: dict = field(default_factory=dict, repr=False)
    _samples: np.ndarray | None = field(default=None, repr=False)
    _partitions: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if isinstance(self.space, ContinuousBox) and self.n > MAX_CONTINUOUS_N:
            raise UnsupportedSpace(f"continuous deformed integrals limited to n <= {MAX_CONTINUOUS_N}")

    @property
    def finite(self) -> bool:
        return isinstance(self.space, FiniteEnumerable)

    @property
    def samples(self) -> np.ndarray:
        """All n-samples of a finite space in lexicographic order."""
        if not self.finite:
            raise UnsupportedSpace("sample enumeration needs a finite space")
        if self._samples is None:
            self._samples = enumerate_space(self.space.points, self.n)
        return self._samples


def deformed_joint(
    spec: FamilySpec,
    likelihood: LikelihoodKind,
    n: int,
    space: FiniteEnumerable | ContinuousBox | None = None,
) -> DeformedJoint:
    if space is None:
        space = FiniteEnumerable(spec.support.points) if isinstance(spec.support, FiniteSupport) else ContinuousBox()
    return DeformedJoint(spec, likelihood, n, space)


def log_kernel(dj: DeformedJoint, theta, samples) -> np.ndarray:
    """log of the unnormalized deformed density at each sample."""
    spec, L = dj.spec, dj.likelihood
    th = as_theta(spec, theta)
    x = np.asarray(samples, dtype=float)
    if L.name is LikelihoodName.JONES:
        p = _sample_density(spec, th, x)
        if spec.kind is FamilyKind.M_ALPHA:
            p = p / normalizer(spec, th)
        a = L.alpha
        return np.log(np.mean(p ** (a - 1.0), axis=-1)) / (a - 1.0)
    return np.asarray(evaluate(L, spec, th, x), dtype=float)


def _continuous_bounds(dj: DeformedJoint) -> list[tuple[float, float]]:
    b = dj.space.bounds or (-math.inf, math.inf)
    return [b] * dj.n


def _check_divergence(dj: DeformedJoint, kernel: Callable[[np.ndarray], np.ndarray]) -> None:
    lo, hi = dj.space.bounds or (-math.inf, math.inf)
    if math.isfinite(lo) and math.isfinite(hi):
        return
    vals = []
    for R in DIVERGENCE_RADII:
        box = [(max(lo, -R), min(hi, R))] * dj.n
        res = integrate(kernel, box, rel_tol=1e-6, strict=False, tan_map=True)
        if not res.converged and not np.isfinite(res.value):
            raise DivergentNormalizer("deformed kernel is not integrable on nested boxes")
        vals.append(res.value)
    d1, d2 = vals[1] - vals[0], vals[2] - vals[1]
    if d2 > 0.5 * max(d1, 0.0) and d2 > 1e-6 * abs(vals[2]):
        raise DivergentNormalizer(
            f"nested-box integrals {vals[0]:.6g}, {vals[1]:.6g}, {vals[2]:.6g} do not settle"
        )


def log_normalizer(dj: DeformedJoint, theta) -> float:
    th = as_theta(dj.spec, theta)
    key = theta_key(th)
    if key not in dj.normalizer_cache:
        if dj.finite:
            val = float(logsumexp(log_kernel(dj, th, dj.samples)))
        else:
            kernel = lambda x: np.exp(log_kernel(dj, th, x))  # noqa: E731
            _check_divergence(dj, kernel)
            res = integrate(kernel, _continuous_bounds(dj), rel_tol=dj.space.rel_tol, abs_tol=1e-300)
            if not (res.value > 0 and np.isfinite(res.value)):
                raise DivergentNormalizer(f"normalizer quadrature returned {res.value}")
            val = math.log(res.value)
        dj.normalizer_cache[key] = val
    return dj.normalizer_cache[key]


def deformed_normalizer(dj: DeformedJoint, theta) -> float:
    """Sum or integral of the deformed kernel over the n-sample space."""
    return math.exp(log_normalizer(dj, theta))


def deformed_density(dj: DeformedJoint, theta, sample):
    """p*_theta at a sample (or batch of samples)."""
    val = np.exp(log_kernel(dj, theta, sample) - log_normalizer(dj, theta))
    return float(val) if np.ndim(val) == 0 else val


def deformed_pmf(dj: DeformedJoint, theta) -> np.ndarray:
    """p* over ``dj.samples`` (finite spaces)."""
    return np.exp(log_kernel(dj, theta, dj.samples) - log_normalizer(dj, theta))


def deformed_expect(dj: DeformedJoint, theta, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray | float:
    """E*_theta[fn(X)] by enumeration or quadrature; ``fn`` maps (m, n) samples to (m,) or (m, k)."""
    if dj.finite:
        out = np.tensordot(deformed_pmf(dj, theta), np.asarray(fn(dj.samples), dtype=float), axes=(0, 0))
        return float(out) if np.ndim(out) == 0 else out
    th = as_theta(dj.spec, theta)
    ln = log_normalizer(dj, th)
    vals = np.asarray(fn(np.zeros((1, dj.n))), dtype=float)
    if vals.ndim > 1:
        return np.array([deformed_expect(dj, th, lambda x, j=j: np.asarray(fn(x))[:, j]) for j in range(vals.shape[1])])
    res = integrate(
        lambda x: np.asarray(fn(x), dtype=float) * np.exp(log_kernel(dj, th, x) - ln),
        _continuous_bounds(dj),
        rel_tol=dj.space.rel_tol,
        abs_tol=1e-13,
    )
    return res.value


# ------------------------------------------------------------ conditionals


@dataclass(frozen=True)
class ConditionalSlice:
    bucket: tuple[int, ...]
    members: np.ndarray
    weights: np.ndarray
    q: float


@dataclass(frozen=True)
class Partition:
    keys: list[tuple[int, ...]]
    index: np.ndarray
    lookup: dict[tuple[int, ...], int]


def partition(dj: DeformedJoint, T: StatisticFn) -> Partition:
    """Bucket index of every enumerated sample under T (cached per statistic)."""
    if not dj.finite:
        raise UnsupportedSpace("conditionals are exact on finite spaces only")
    if T not in dj._partitions:
        keys = T.keys(dj.samples)
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        klist = [tuple(int(v) for v in row) for row in uniq]
        dj._partitions[T] = Partition(klist, inv.ravel(), {k: i for i, k in enumerate(klist)})
    return dj._partitions[T]


def _as_bucket(T: StatisticFn, bucket) -> tuple[int, ...]:
    arr = np.atleast_1d(np.asarray(bucket))
    if np.issubdtype(arr.dtype, np.integer):
        return tuple(int(v) for v in arr)
    return tuple(int(v) for v in np.round(arr / T.quantum).astype(np.int64))


def marginal_q(dj: DeformedJoint, T: StatisticFn, theta) -> np.ndarray:
    """q*_theta(t) for every bucket, in ``partition(dj, T).keys`` order."""
    part = partition(dj, T)
    return np.bincount(part.index, weights=deformed_pmf(dj, theta), minlength=len(part.keys))


def deformed_marginal_q(dj: DeformedJoint, T: StatisticFn, theta, bucket) -> float:
    part = partition(dj, T)
    key = _as_bucket(T, bucket)
    if key not in part.lookup:
        raise EmptyBucket(f"bucket {key} has no members")
    return float(marginal_q(dj, T, theta)[part.lookup[key]])


def deformed_conditional(dj: DeformedJoint, T: StatisticFn, theta, sample) -> ConditionalSlice:
    """p*_theta(x | T(x) = t) on the bucket containing ``sample``."""
    part = partition(dj, T)
    key = T.bucket(sample)
    if key not in part.lookup:
        raise EmptyBucket(f"bucket {key} has no members")
    mask = part.index == part.lookup[key]
    p = deformed_pmf(dj, theta)[mask]
    q = float(p.sum())
    return ConditionalSlice(key, dj.samples[mask], p / q, q)


def conditional_weights(dj: DeformedJoint, T: StatisticFn, theta) -> np.ndarray:
    """p*(x | T(x)) for every enumerated sample."""
    part = partition(dj, T)
    p = deformed_pmf(dj, theta)
    q = np.bincount(part.index, weights=p, minlength=len(part.keys))
    return p / q[part.index]


def affine_log_residual(dj: DeformedJoint, theta, samples: np.ndarray | None = None) -> float:
    """Max residual of the least-squares fit of log p* on (1, h-bar, f-bar).

    The intercept absorbs the normalizer, so the unnormalized kernel is used.
    """
    spec = dj.spec
    if samples is None:
        samples = dj.samples
    x = np.asarray(samples, dtype=float)
    y = log_kernel(dj, theta, x)
    hbar = np.mean(np.asarray(spec.h(x), dtype=float), axis=-1)
    fbar = np.mean(np.asarray(spec.f(x), dtype=float), axis=-2)
    design = np.column_stack([np.ones(len(x)), hbar, fbar])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(np.max(np.abs(design @ coef - y)))

