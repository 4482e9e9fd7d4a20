"""Shared numerical plumbing: quadrature, finite differences, enumeration, seeded RNG."""

from __future__ import annotations

import itertools
import os
import zlib
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np
from scipy.integrate import cubature

from .errors import MaxSubdivisions, NoisyFunction, SpaceTooLarge, UnsupportedSpace

if TYPE_CHECKING:
    from .families import FamilySpec

MAX_SPACE_ENV = "POWERLAW_SUFF_MAX_SPACE"
DEFAULT_MAX_SPACE = 4096


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    subdivisions: int
    converged: bool


def _as_box(bounds) -> list[tuple[float, float]]:
    arr = np.asarray(bounds, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2 or not 1 <= arr.shape[0] <= 3:
        raise ValueError("bounds must be an interval or a box of dimension 1 to 3")
    return [(float(a), float(b)) for a, b in arr]


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    bounds,
    rel_tol: float = 1e-10,
    abs_tol: float = 0.0,
    max_subdivisions: int | None = None,
    strict: bool = True,
    tan_map: bool = False,
) -> QuadratureResult:
    """Integrate a vectorized integrand over an interval or a box of dimension 2 or 3.

    ``f`` receives points of shape ``(m, d)`` and returns ``m`` values.
    Intervals use adaptive Gauss-Kronrod subdivision. Boxes use tensor
    Gauss-Legendre with order doubling, falling back to adaptive cubature.
    Infinite limits are handled by the substitution ``x = tan(u)``; with
    ``tan_map`` the same substitution is applied to finite limits as well.
    """
    box = _as_box(bounds)
    dim = len(box)
    lo = np.empty(dim)
    hi = np.empty(dim)
    mapped = np.zeros(dim, dtype=bool)
    for i, (a, b) in enumerate(box):
        if tan_map or np.isinf(a) or np.isinf(b):
            mapped[i] = True
            lo[i], hi[i] = np.arctan(a), np.arctan(b)
        else:
            lo[i], hi[i] = a, b

    def integrand(u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        x = u.copy()
        jac = np.ones(u.shape[0])
        if mapped.any():
            x[:, mapped] = np.tan(u[:, mapped])
            jac = np.prod(1.0 / np.cos(u[:, mapped]) ** 2, axis=1)
        return np.asarray(f(x), dtype=float) * jac

    if dim == 1:
        limit = max_subdivisions if max_subdivisions is not None else 10000
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            res = cubature(integrand, lo, hi, rtol=rel_tol, atol=abs_tol, max_subdivisions=limit)
        value, err, subdiv = float(res.estimate), float(res.error), int(res.subdivisions)
        converged = res.status == "converged" and np.isfinite(value)
    else:
        value, err, subdiv, converged = _tensor_gauss(integrand, lo, hi, rel_tol, abs_tol)
        if not converged:
            limit = max_subdivisions if max_subdivisions is not None else 2000
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                res = cubature(integrand, lo, hi, rule="gk15", rtol=rel_tol, atol=abs_tol, max_subdivisions=limit)
            value, err, subdiv = float(res.estimate), float(res.error), subdiv + int(res.subdivisions)
            converged = res.status == "converged" and np.isfinite(value)
    if strict and not converged:
        raise MaxSubdivisions(f"quadrature did not converge: value={value}, error={err}")
    return QuadratureResult(value, err, subdiv, bool(converged))


_GAUSS_ORDERS = {2: (32, 64, 128, 256, 512), 3: (24, 48, 96, 192)}
_CHUNK = 1 << 20


def _tensor_gauss(integrand, lo, hi, rel_tol, abs_tol) -> tuple[float, float, int, bool]:
    """Tensor Gauss-Legendre with order doubling; the last difference is the error estimate."""
    dim = len(lo)
    prev = None
    value, err = np.nan, np.inf
    for level, order in enumerate(_GAUSS_ORDERS[dim]):
        xg, wg = np.polynomial.legendre.leggauss(order)
        nodes = [(hi[i] - lo[i]) / 2 * xg + (hi[i] + lo[i]) / 2 for i in range(dim)]
        weights = [(hi[i] - lo[i]) / 2 * wg for i in range(dim)]
        grid = np.stack(np.meshgrid(*nodes, indexing="ij"), axis=-1).reshape(-1, dim)
        wts = weights[0]
        for w in weights[1:]:
            wts = np.multiply.outer(wts, w)
        wts = wts.ravel()
        total = 0.0
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for start in range(0, len(grid), _CHUNK):
                total += float(np.dot(wts[start : start + _CHUNK], integrand(grid[start : start + _CHUNK])))
        value = total
        if prev is not None:
            err = abs(value - prev)
            if np.isfinite(value) and err <= max(abs_tol, rel_tol * abs(value)):
                return value, err, level, True
        prev = value
    return value, err, len(_GAUSS_ORDERS[dim]), False


@dataclass(frozen=True)
class FDResult:
    value: np.ndarray | float
    ratio: np.ndarray | float
    consistent: bool


def fd_derivative(
    g: Callable[[float], np.ndarray | float],
    theta: float,
    order: int = 1,
    h: float = 1e-5,
    strict: bool = False,
) -> FDResult:
    """Central difference of order 1 or 2 with a Richardson consistency check.

    Differences at steps h, h/2, h/4 should shrink by a factor of about 4.
    The returned value is the Richardson extrapolation of the two coarser steps.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")

    def central(step: float) -> np.ndarray:
        gp = np.asarray(g(theta + step), dtype=float)
        gm = np.asarray(g(theta - step), dtype=float)
        if order == 1:
            return (gp - gm) / (2 * step)
        g0 = np.asarray(g(theta), dtype=float)
        return (gp - 2 * g0 + gm) / step**2

    d1, d2, d4 = central(h), central(h / 2), central(h / 4)
    value = (4 * d2 - d1) / 3
    num = d1 - d2
    den = d2 - d4
    scale = np.maximum(np.abs(np.asarray(g(theta), dtype=float)), 1.0)
    floor = 1e3 * np.finfo(float).eps * scale / (h / 4) ** order
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(den) > 0, num / den, np.inf)
    below_noise = (np.abs(num) <= floor) & (np.abs(den) <= floor)
    ok = below_noise | (np.abs(ratio - 4.0) <= 0.8)
    consistent = bool(np.all(ok))
    if strict and not consistent:
        raise NoisyFunction(f"Richardson ratio inconsistent: {ratio}")
    if np.ndim(value) == 0:
        return FDResult(float(value), float(ratio), consistent)
    return FDResult(value, ratio, consistent)


def max_space() -> int:
    raw = os.environ.get(MAX_SPACE_ENV)
    return int(raw) if raw else DEFAULT_MAX_SPACE


def enumerate_space(points: Sequence[float], n: int, cap: int | None = None) -> np.ndarray:
    """All n-samples over ``points`` in lexicographic order, one row per sample."""
    points = list(points)
    size = len(points) ** n
    cap = max_space() if cap is None else cap
    if size > cap:
        raise SpaceTooLarge(f"{len(points)}^{n} = {size} states exceeds cap {cap} (set {MAX_SPACE_ENV})")
    return np.array(list(itertools.product(points, repeat=n)), dtype=float).reshape(size, n)


def rng_stream(seed: int, tag: str = "", index: int = 0) -> np.random.Generator:
    """Independent generator keyed by (seed, purpose tag, index)."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(tag.encode()), index))
    return np.random.Generator(np.random.PCG64(ss))


def sample_family(spec: FamilySpec, theta, n: int, seed: int, tag: str = "sample", index: int = 0) -> np.ndarray:
    """Reproducible i.i.d. sample of size n from the family at theta."""
    from .families import FiniteSupport, as_theta, density

    th = as_theta(spec, theta)
    rng = rng_stream(seed, tag, index)
    if spec.sampler is not None:
        return np.asarray(spec.sampler(rng, th.array, n), dtype=float)
    if isinstance(spec.support, FiniteSupport):
        pts = np.asarray(spec.support.points, dtype=float)
        cdf = np.cumsum(density(spec, th, pts))
        idx = np.searchsorted(cdf / cdf[-1], rng.random(n), side="right")
        return pts[np.minimum(idx, len(pts) - 1)]
    raise UnsupportedSpace(f"no sampler for continuous family {spec.name!r}")
