"""Numerical probes of generalized sufficiency, factorization and minimality.

A statistic T is sufficient for a likelihood L when L(x; theta) - L(y; theta)
does not depend on theta for every pair of samples with T(x) = T(y). The probes
test that constancy over a parameter grid.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.stats import ortho_group

from .errors import PairGenerationFailed, ResidualExceedsTol
from .families import FamilyKind, FamilySpec, FiniteSupport, as_theta, regularity_check
from .likelihoods import LikelihoodKind, evaluate
from .numerics import enumerate_space, rng_stream, sample_family


@dataclass(frozen=True, eq=False)
class StatisticFn:
    """A statistic with a quantized bucket map for equality classing.

    ``fn`` maps samples of shape ``(..., n)`` to ``(..., arity)``. ``pairing``
    names the constructive pair generator that preserves T:
    ``"sum"``, ``"moments"``, ``"symmetric"`` or None for rejection only.
    """

    name: str
    arity: int
    fn: Callable[[np.ndarray], np.ndarray]
    quantum: float = 1e-9
    pairing: str | None = "symmetric"

    def eval(self, samples) -> np.ndarray:
        out = np.asarray(self.fn(np.asarray(samples, dtype=float)), dtype=float)
        return out.reshape(out.shape[:-1] + (self.arity,)) if out.ndim else out.reshape(1)

    def keys(self, samples) -> np.ndarray:
        return np.round(self.eval(samples) / self.quantum).astype(np.int64)

    def bucket(self, sample) -> tuple[int, ...]:
        return tuple(int(k) for k in self.keys(np.asarray(sample, dtype=float)).ravel())


def sum_statistic() -> StatisticFn:
    return StatisticFn("sum", 1, lambda x: np.sum(x, axis=-1, keepdims=True), pairing="sum")


def mean_statistic() -> StatisticFn:
    return StatisticFn("mean", 1, lambda x: np.mean(x, axis=-1, keepdims=True), pairing="sum")


def sums_statistic() -> StatisticFn:
    """(sum x, sum x^2)."""
    return StatisticFn("sums", 2, lambda x: np.stack([x.sum(-1), (x * x).sum(-1)], axis=-1), pairing="moments")


def moments_statistic() -> StatisticFn:
    """(mean of x^2, mean of x)."""
    return StatisticFn("moments", 2, lambda x: np.stack([(x * x).mean(-1), x.mean(-1)], axis=-1), pairing="moments")


def sum_and_first_statistic() -> StatisticFn:
    """(sum x, x_1): finer than the sum."""
    return StatisticFn("sum_first", 2, lambda x: np.stack([x.sum(-1), x[..., 0]], axis=-1), pairing=None)


def identity_statistic(n: int) -> StatisticFn:
    return StatisticFn("identity", n, lambda x: x, pairing=None)


def constant_statistic() -> StatisticFn:
    return StatisticFn("constant", 1, lambda x: np.zeros(x.shape[:-1] + (1,)), pairing="any")


STATISTIC_PRESETS: dict[str, Callable[[], StatisticFn]] = {
    "sum": sum_statistic,
    "mean": mean_statistic,
    "sums": sums_statistic,
    "moments": moments_statistic,
    "sum-first": sum_and_first_statistic,
    "constant": constant_statistic,
}


def canonical_sufficient_statistic(spec: FamilySpec) -> StatisticFn:
    """f-bar / h-bar for M^(alpha); f-bar for B^(alpha) and exponential families."""
    s = spec.statistic_dim

    def fbar(x: np.ndarray) -> np.ndarray:
        return np.mean(np.asarray(spec.f(x), dtype=float), axis=-2)

    if spec.kind is FamilyKind.M_ALPHA:
        probe = np.linspace(-3.0, 3.0, 13) if not spec.is_finite else np.asarray(spec.support.points, float)
        h_const = bool(np.allclose(spec.h(probe), 1.0, rtol=0, atol=1e-14))

        def ratio(x: np.ndarray) -> np.ndarray:
            hbar = np.mean(np.asarray(spec.h(x), dtype=float), axis=-1)
            return fbar(x) / hbar[..., None]

        pairing = spec.meta.get("pairing") if h_const else None
        return StatisticFn(f"{spec.name}:fbar/hbar", s, ratio, pairing=pairing)
    return StatisticFn(f"{spec.name}:fbar", s, fbar, pairing=spec.meta.get("pairing"))


def make_theta_grid(spec: FamilySpec, points: int = 50, margin: float = 0.05) -> np.ndarray:
    """Tensorized interior grid over the parameter box, shape (points, k)."""
    k = spec.theta_dim
    if k == 1:
        per = [points]
    elif k == 2:
        per = [int(math.ceil(points / 5)), 5]
    else:
        per = [int(math.ceil(points ** (1 / k)))] * k
    axes = []
    for (lo, hi), m in zip(spec.theta_box, per):
        pad = margin * (hi - lo)
        axes.append(np.linspace(lo + pad, hi - pad, m))
    return np.array(list(itertools.product(*axes)))[:points]


def default_theta0(spec: FamilySpec) -> np.ndarray:
    return np.array([(lo + hi) / 2 for lo, hi in spec.theta_box])


class Verdict(str, Enum):
    SUFFICIENT = "Sufficient"
    NOT_SUFFICIENT = "NotSufficient"
    INCONCLUSIVE = "Inconclusive"
    MINIMAL = "Minimal"
    NOT_MINIMAL = "NotMinimal"


@dataclass(frozen=True)
class SufficiencyVerdict:
    verdict: Verdict
    max_spread: float
    witness_pair: tuple[np.ndarray, np.ndarray] | None
    theta_grid_size: int
    pairs_tested: int

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "max_spread": self.max_spread,
            "witness_pair": None if self.witness_pair is None else [w.tolist() for w in self.witness_pair],
            "theta_grid_size": self.theta_grid_size,
            "pairs_tested": self.pairs_tested,
        }


def _finite_space(spec: FamilySpec, n: int) -> np.ndarray:
    return enumerate_space(spec.support.points, n)


def _group(keys: np.ndarray) -> dict[tuple[int, ...], list[int]]:
    groups: dict[tuple[int, ...], list[int]] = defaultdict(list)
    for i, k in enumerate(map(tuple, keys)):
        groups[k].append(i)
    return groups


def _helmert_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the complement of the ones vector, shape (n, n-1)."""
    q, _ = np.linalg.qr(np.column_stack([np.ones(n), np.eye(n)[:, : n - 1]]))
    return q[:, 1:]


def _partner(x: np.ndarray, how: str, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    if how == "symmetric" or n == 1:
        return rng.permutation(x)
    if how == "sum":
        d = rng.standard_normal(n)
        return x + (d - d.mean())
    if how == "moments":
        basis = _helmert_basis(n)
        c = basis.T @ (x - x.mean())
        q = ortho_group.rvs(n - 1, random_state=rng) if n > 2 else np.array([[-1.0]])
        return x.mean() + basis @ (q @ c)
    if how == "any":
        return x + rng.standard_normal(n)
    raise PairGenerationFailed(f"no constructive pairing {how!r}")


def generate_pairs(
    spec: FamilySpec,
    T: StatisticFn,
    n: int,
    budget: int,
    seed: int = 0,
    theta0=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Pairs of distinct samples in the same T-bucket, arrays of shape (P, n)."""
    if isinstance(spec.support, FiniteSupport):
        X = _finite_space(spec, n)
        cand = [(i, j) for idx in _group(T.keys(X)).values() for i, j in itertools.combinations(idx, 2)]
        if not cand:
            raise PairGenerationFailed(f"no two samples of size {n} share a {T.name} bucket")
        rng = rng_stream(seed, "pairs")
        if len(cand) > budget:
            cand = [cand[i] for i in np.sort(rng.choice(len(cand), budget, replace=False))]
        ii, jj = np.array(cand).T
        return X[ii], X[jj]
    th0 = default_theta0(spec) if theta0 is None else as_theta(spec, theta0).array
    xs, ys = [], []
    for i in range(budget):
        x = sample_family(spec, th0, n, seed, "pair-base", i)
        if T.pairing is None:
            continue
        y = _partner(x, T.pairing, rng_stream(seed, "pair-partner", i))
        if T.bucket(x) == T.bucket(y) and not np.allclose(x, y, rtol=0, atol=1e-12):
            xs.append(x)
            ys.append(y)
    if not xs:
        raise PairGenerationFailed(f"no matching pair for {T.name} within budget {budget}")
    return np.array(xs), np.array(ys)


def _likelihood_table(L: LikelihoodKind, spec: FamilySpec, grid: np.ndarray, samples: np.ndarray) -> np.ndarray:
    return np.array([np.asarray(evaluate(L, spec, th, samples), dtype=float) for th in grid])


def koopman_probe(
    L: LikelihoodKind,
    spec: FamilySpec,
    T: StatisticFn,
    pair_budget: int = 1000,
    theta_grid: np.ndarray | None = None,
    tol: float = 1e-8,
    *,
    n: int = 4,
    seed: int = 0,
    pairs: tuple[np.ndarray, np.ndarray] | None = None,
) -> SufficiencyVerdict:
    """Test theta-constancy of L(x) - L(y) over pairs with equal T."""
    grid = make_theta_grid(spec) if theta_grid is None else np.atleast_2d(np.asarray(theta_grid, dtype=float)).reshape(-1, spec.theta_dim)
    X, Y = pairs if pairs is not None else generate_pairs(spec, T, n, pair_budget, seed)
    Lx = _likelihood_table(L, spec, grid, X)
    Ly = _likelihood_table(L, spec, grid, Y)
    D = Lx - Ly
    spread = D.max(axis=0) - D.min(axis=0)
    scale = np.maximum(1.0, np.maximum(np.abs(Lx).max(axis=0), np.abs(Ly).max(axis=0)))
    worst = int(np.argmax(spread / scale))
    if spread[worst] > tol * scale[worst]:
        return SufficiencyVerdict(Verdict.NOT_SUFFICIENT, float(spread.max()), (X[worst], Y[worst]), len(grid), len(X))
    return SufficiencyVerdict(Verdict.SUFFICIENT, float(spread.max()), None, len(grid), len(X))


@dataclass(frozen=True)
class FactorizationWitness:
    u: Callable[[np.ndarray, tuple[int, ...]], float]
    v: Callable[[np.ndarray], float]
    residual: float
    buckets: int
    probes: int


def factorization_witness(
    L: LikelihoodKind,
    spec: FamilySpec,
    T: StatisticFn,
    rep_picker: Callable[[np.ndarray], int] | None = None,
    *,
    n: int = 4,
    samples: np.ndarray | None = None,
    theta_grid: np.ndarray | None = None,
    theta0=None,
    tol: float = 1e-10,
    seed: int = 0,
) -> FactorizationWitness:
    """Build u(theta, t) = L(rep_t; theta) and v(x) = L(x; theta0) - L(rep_T(x); theta0).

    Raises ResidualExceedsTol if L(x; theta) != u(theta, T(x)) + v(x) on the probes.
    """
    grid = make_theta_grid(spec, 20) if theta_grid is None else np.asarray(theta_grid, dtype=float).reshape(-1, spec.theta_dim)
    th0 = default_theta0(spec) if theta0 is None else as_theta(spec, theta0).array
    if samples is None:
        if isinstance(spec.support, FiniteSupport):
            samples = _finite_space(spec, n)
        else:
            X, Y = generate_pairs(spec, T, n, 50, seed)
            samples = np.concatenate([X, Y])
    samples = np.asarray(samples, dtype=float)
    pick = rep_picker or (lambda members: 0)
    groups = _group(T.keys(samples))
    rep_of = {k: samples[idx[pick(samples[idx])]] for k, idx in groups.items()}

    def u(theta, t: tuple[int, ...]) -> float:
        return float(evaluate(L, spec, theta, rep_of[tuple(t)]))

    def v(x) -> float:
        rep = rep_of[T.bucket(x)]
        return float(evaluate(L, spec, th0, x) - evaluate(L, spec, th0, rep))

    reps = np.array([rep_of[tuple(k)] for k in T.keys(samples)])
    Lx = _likelihood_table(L, spec, np.vstack([th0, grid]), samples)
    Lr = _likelihood_table(L, spec, np.vstack([th0, grid]), reps)
    D = Lx - Lr
    resid = np.abs(D[1:] - D[0]).max()
    scale = max(1.0, float(np.abs(Lx).max()))
    if resid > tol * scale:
        raise ResidualExceedsTol(f"factorization residual {resid:.3e} exceeds {tol:.1e} for {T.name}")
    return FactorizationWitness(u, v, float(resid), len(groups), len(samples) * len(grid))


@dataclass(frozen=True)
class MinimalityVerdict:
    verdict: Verdict
    witness_pair: tuple[np.ndarray, np.ndarray] | None
    pairs_tested: int
    exhaustive: bool
    regular: bool | None
    by_regularity: bool

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "witness_pair": None if self.witness_pair is None else [w.tolist() for w in self.witness_pair],
            "pairs_tested": self.pairs_tested,
            "exhaustive": self.exhaustive,
            "regular": self.regular,
            "by_regularity": self.by_regularity,
        }


def _matches_canonical(spec: FamilySpec, T: StatisticFn, n: int, seed: int) -> bool:
    C = canonical_sufficient_statistic(spec)
    if C.arity != T.arity:
        return False
    if isinstance(spec.support, FiniteSupport):
        X = _finite_space(spec, n)
    else:
        X = np.array([sample_family(spec, default_theta0(spec), n, seed, "canon", i) for i in range(20)])
    return bool(np.allclose(C.eval(X), T.eval(X), rtol=1e-12, atol=1e-12))


def minimality_probe(
    L: LikelihoodKind,
    spec: FamilySpec,
    T: StatisticFn,
    pair_budget: int = 1000,
    theta_grid: np.ndarray | None = None,
    tol: float = 1e-8,
    *,
    n: int = 4,
    seed: int = 0,
) -> MinimalityVerdict:
    """Search for pairs in different T-buckets whose likelihood difference is theta-free."""
    grid = make_theta_grid(spec) if theta_grid is None else np.asarray(theta_grid, dtype=float).reshape(-1, spec.theta_dim)
    try:
        suff = koopman_probe(L, spec, T, pair_budget, grid, tol, n=n, seed=seed)
    except PairGenerationFailed:
        suff = None
    if suff is not None and suff.verdict is Verdict.NOT_SUFFICIENT:
        return MinimalityVerdict(Verdict.NOT_SUFFICIENT, suff.witness_pair, suff.pairs_tested, False, None, False)

    if isinstance(spec.support, FiniteSupport):
        X = _finite_space(spec, n)
        reps = np.array([X[idx[0]] for idx in _group(T.keys(X)).values()])
        cand = list(itertools.combinations(range(len(reps)), 2))
        exhaustive = len(cand) <= pair_budget
        if not exhaustive:
            rng = rng_stream(seed, "minimality")
            cand = [cand[i] for i in np.sort(rng.choice(len(cand), pair_budget, replace=False))]
        if not cand:
            return MinimalityVerdict(Verdict.MINIMAL, None, 0, True, None, False)
        ii, jj = np.array(cand).T
        A, B = reps[ii], reps[jj]
    else:
        exhaustive = False
        th0 = default_theta0(spec)
        A = np.array([sample_family(spec, th0, n, seed, "min-a", i) for i in range(pair_budget)])
        B = np.array([sample_family(spec, th0, n, seed, "min-b", i) for i in range(pair_budget)])
        keep = np.any(T.keys(A) != T.keys(B), axis=-1)
        A, B = A[keep], B[keep]

    La = _likelihood_table(L, spec, grid, A)
    Lb = _likelihood_table(L, spec, grid, B)
    D = La - Lb
    spread = D.max(axis=0) - D.min(axis=0)
    scale = np.maximum(1.0, np.maximum(np.abs(La).max(axis=0), np.abs(Lb).max(axis=0)))
    const = np.flatnonzero(spread <= tol * scale)
    if const.size:
        i = int(const[0])
        return MinimalityVerdict(Verdict.NOT_MINIMAL, (A[i], B[i]), len(A), exhaustive, None, False)
    if exhaustive:
        return MinimalityVerdict(Verdict.MINIMAL, None, len(A), True, None, False)

    if isinstance(spec.support, FiniteSupport):
        xprobe = np.asarray(spec.support.points, dtype=float)
    else:
        xprobe = np.linspace(-3.0, 3.0, 11)
    regular = regularity_check(spec, grid, xprobe).regular
    if regular and _matches_canonical(spec, T, n, seed):
        return MinimalityVerdict(Verdict.MINIMAL, None, len(A), False, True, True)
    return MinimalityVerdict(Verdict.INCONCLUSIVE, None, len(A), False, regular, False)
