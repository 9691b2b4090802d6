"""Adaptive 1D quadrature and Monte Carlo integration over spheres, balls and annuli.

The 1D engine is a globally adaptive Gauss-Kronrod (7/15) scheme. Its nodes never
touch the interval ends, and flagged singular endpoints get a geometric pre-split
so that integrable singularities of power and log type are resolved.

Monte Carlo sums are accumulated in fixed-size chunks. Each chunk draws from its own
Philox stream keyed by (seed, chunk index), and chunk statistics are merged in index
order, so results depend only on the seed.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DataError, DomainError, SphericalRing, as_point, unit_ball_volume, unit_sphere_area

DEFAULT_TOL = 1e-9
MAX_NODES_1D = 1_000_000
MAX_POINTS_MC = 10_000_000
MIN_BUDGET_MC = 1_000
CHUNK = 1 << 14
SINGULAR_FLOOR = 1e-14
_EPS = np.finfo(float).eps

# Kronrod 15-point abscissae (positive half, descending) and weights.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
])
_WK0 = 0.209482141084727828012999174891714
# Gauss 7-point weights for the odd-indexed Kronrod nodes (0.949.., 0.741.., 0.405..) and the centre.
_WG = np.array([0.129484966168869693270611432679082,
                0.279705391489276667901467771423780,
                0.381830050505118944950369775488975])
_WG0 = 0.417959183673469387755102040816327

_NODES = np.concatenate([-_XK, [0.0], _XK[::-1]])
_KW = np.concatenate([_WK, [_WK0], _WK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5]] = _WG
_GW[7] = _WG0
_GW[[13, 11, 9]] = _WG


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error_estimate: float
    evaluations: int
    converged: bool
    std_error: float | None = None  # Monte Carlo only

    def __float__(self) -> float:
        return self.value


def _gk15(f, lo: float, hi: float):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid + half * _NODES
    y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    if not np.all(np.isfinite(y)):
        bad = int(np.flatnonzero(~np.isfinite(y))[0])
        raise DataError(f"integrand is {y[bad]} at interior node x={x[bad]!r}", point=float(x[bad]))
    k = float(_KW @ y)
    g = float(_GW @ y)
    # QUADPACK error heuristic (qk15): scale |K - G| by the integrand's variation.
    mean = 0.5 * k
    resasc = abs(half) * float(_KW @ np.abs(y - mean))
    resabs = abs(half) * float(_KW @ np.abs(y))
    err = abs((k - g) * half)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > np.finfo(float).tiny / (50 * _EPS):
        err = max(50 * _EPS * resabs, err)
    return half * k, err


def _split_points(a: float, b: float, singular_endpoints) -> list[float]:
    left, right = singular_endpoints
    width = b - a
    floor = SINGULAR_FLOOR * width
    pts = [a, b]
    # Geometric ladder toward each flagged endpoint, down to a width of 1e-14 * (b - a).
    if left:
        w = 0.5 * width if not right else 0.25 * width
        while w > floor:
            pts.append(a + w)
            w *= 0.5
    if right:
        w = 0.5 * width if not left else 0.25 * width
        while w > floor:
            pts.append(b - w)
            w *= 0.5
    if left and right:
        pts.append(a + 0.5 * width)
    return sorted(set(p for p in pts if a <= p <= b))


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    singular_endpoints: tuple[bool, bool] = (False, False),
    max_nodes: int = MAX_NODES_1D,
) -> QuadResult:
    """Integrate ``f`` over [a, b] to absolute tolerance ``tol``.

    ``f`` must accept a 1D numpy array of nodes and return an array of the same shape.
    Running out of node budget, or being unable to split the worst interval further,
    gives ``converged=False`` with the best estimate; it never raises for that.
    Tolerances below the roundoff floor (about 100 ulp of the integral of |f|) are
    raised to that floor.
    A non-finite value at a node raises :class:`DataError`.
    """
    a = float(a)
    b = float(b)
    if not a < b:
        raise DomainError(f"integration requires a < b, got a={a}, b={b}")
    if tol <= 0:
        raise DomainError(f"tolerance must be positive, got {tol}")

    pts = _split_points(a, b, singular_endpoints)
    heap: list[tuple[float, float, float, float]] = []
    err = 0.0
    evals = 0
    frozen_err = 0.0
    frozen_val = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, e = _gk15(f, lo, hi)
        evals += 15
        heapq.heappush(heap, (-e, lo, hi, v))
        err += e

    mag = sum(abs(item[3]) for item in heap)
    floor = lambda: max(tol, 100 * np.finfo(float).eps * mag)
    while err > floor() and heap:
        if evals + 30 > max_nodes:
            break
        neg_e, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        tiny = 8 * np.finfo(float).eps * max(abs(lo), abs(hi))
        if hi - lo <= tiny or not (lo < mid < hi):
            # Cannot refine further; keep its contribution and report honestly.
            frozen_err += -neg_e
            frozen_val += v
            if frozen_err > floor():
                break
            continue
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        evals += 30
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        err += e1 + e2 + neg_e
        mag += abs(v1) + abs(v2) - abs(v)

    total = math.fsum([item[3] for item in heap]) + frozen_val
    err = math.fsum([-item[0] for item in heap]) + frozen_err
    mag = math.fsum([abs(item[3]) for item in heap]) + abs(frozen_val)
    return QuadResult(value=total, abs_error_estimate=err, evaluations=evals, converged=err <= floor())


# --- Monte Carlo ---------------------------------------------------------------


def _rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, chunk])))


def _n_strata(n: int) -> int:
    return 1 << min(n, 3)


def _directions(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """Uniform unit vectors, stratified so point i lies in octant i mod 2^min(n,3)."""
    g = rng.standard_normal((count, n))
    m = min(n, 3)
    idx = np.arange(count) % (1 << m)
    signs = 1.0 - 2.0 * ((idx[:, None] >> np.arange(m)) & 1)
    g[:, :m] = np.abs(g[:, :m]) * signs
    norm = np.sqrt(np.einsum("ij,ij->i", g, g))
    return g / norm[:, None]


@dataclass
class _Moments:
    """Per-stratum count/mean/M2 merged with Chan's pairwise update."""

    count: np.ndarray
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def empty(cls, k: int) -> "_Moments":
        return cls(np.zeros(k), np.zeros(k), np.zeros(k))

    def add_chunk(self, values: np.ndarray, strata: np.ndarray) -> None:
        k = self.count.size
        cnt = np.bincount(strata, minlength=k).astype(float)
        sums = np.bincount(strata, weights=values, minlength=k)
        with np.errstate(invalid="ignore", divide="ignore"):
            mu = np.where(cnt > 0, sums / np.maximum(cnt, 1), 0.0)
        dev = values - mu[strata]
        m2 = np.bincount(strata, weights=dev * dev, minlength=k)
        tot = self.count + cnt
        delta = mu - self.mean
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(tot > 0, cnt / np.maximum(tot, 1), 0.0)
        self.mean = self.mean + delta * frac
        self.m2 = self.m2 + m2 + delta * delta * self.count * frac
        self.count = tot

    def estimate(self) -> tuple[float, float]:
        """Equal-weight stratified mean and its standard error."""
        k = self.count.size
        mean = float(np.mean(self.mean))
        var = np.where(self.count > 1, self.m2 / np.maximum(self.count - 1, 1), 0.0)
        se = math.sqrt(float(np.sum(var / np.maximum(self.count, 1))) / (k * k))
        return mean, se


@dataclass(frozen=True)
class SampleMean:
    mean: float
    std_error: float
    samples: int
    infinite: bool = False


def _check_budget(budget: int) -> int:
    budget = int(budget)
    if budget < MIN_BUDGET_MC:
        raise DomainError(f"Monte Carlo budget must be at least {MIN_BUDGET_MC}, got {budget}")
    return min(budget, MAX_POINTS_MC)


def sample_mean(
    g: Callable[[np.ndarray], np.ndarray],
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    budget: int,
    seed: int,
) -> SampleMean:
    """Stratified sample mean of ``g`` over points from ``sampler``.

    ``sampler(rng, count)`` must return points whose row i lies in stratum i mod 2^min(n,3).
    A +inf sample makes the mean +inf; a NaN raises DataError with the offending point.
    """
    budget = _check_budget(budget)
    k = _n_strata(n)
    budget = -(-budget // k) * k
    moments = _Moments.empty(k)
    done = 0
    chunk = 0
    infinite = False
    while done < budget:
        count = min(CHUNK, budget - done)
        pts = sampler(_rng(seed, chunk), count)
        vals = np.asarray(g(pts), dtype=float)
        if vals.shape != (count,):
            vals = np.broadcast_to(vals, (count,)).astype(float)
        if np.isnan(vals).any():
            i = int(np.flatnonzero(np.isnan(vals))[0])
            raise DataError(f"integrand returned NaN at sample point {pts[i].tolist()}", point=pts[i])
        if np.isposinf(vals).any():
            infinite = True
            vals = np.where(np.isposinf(vals), 0.0, vals)
        if np.isneginf(vals).any():
            i = int(np.flatnonzero(np.isneginf(vals))[0])
            raise DataError(f"integrand returned -inf at sample point {pts[i].tolist()}", point=pts[i])
        moments.add_chunk(vals, np.arange(count) % k)
        done += count
        chunk += 1
    if infinite:
        return SampleMean(math.inf, 0.0, done, infinite=True)
    mean, se = moments.estimate()
    return SampleMean(mean, se, done)


def sphere_sampler(x0: np.ndarray, r: float):
    n = x0.size
    return lambda rng, count: x0 + r * _directions(rng, count, n)


def ball_sampler(x0: np.ndarray, radius: float):
    n = x0.size

    def draw(rng, count):
        d = _directions(rng, count, n)
        u = rng.random(count)
        return x0 + (radius * u ** (1.0 / n))[:, None] * d

    return draw


def annulus_sampler(x0: np.ndarray, r1: float, r2: float):
    n = x0.size
    lo, hi = r1**n, r2**n

    def draw(rng, count):
        d = _directions(rng, count, n)
        u = rng.random(count)
        rad = (lo + u * (hi - lo)) ** (1.0 / n)
        return x0 + rad[:, None] * d

    return draw


def _mc_result(sm: SampleMean, scale: float) -> QuadResult:
    se = scale * sm.std_error
    return QuadResult(
        value=scale * sm.mean if not sm.infinite else math.inf,
        abs_error_estimate=3.0 * se,
        evaluations=sm.samples,
        converged=True,
        std_error=se,
    )


def sphere_integral(g, x0, r: float, n: int, budget: int = 100_000, seed: int = 42) -> QuadResult:
    """Integral of ``g`` over the sphere S(x0, r) with respect to surface measure."""
    if not r > 0:
        raise DomainError(f"sphere radius must be positive, got r={r}")
    x0 = as_point(x0, n)
    sm = sample_mean(g, sphere_sampler(x0, r), n, budget, seed)
    return _mc_result(sm, unit_sphere_area(n) * r ** (n - 1))


def ball_integral(h, x0, radius: float, n: int, budget: int = 100_000, seed: int = 42) -> QuadResult:
    if not radius > 0:
        raise DomainError(f"ball radius must be positive, got {radius}")
    x0 = as_point(x0, n)
    sm = sample_mean(h, ball_sampler(x0, radius), n, budget, seed)
    return _mc_result(sm, unit_ball_volume(n) * radius**n)


def annulus_integral(h, ring: SphericalRing, n: int | None = None, budget: int = 100_000, seed: int = 42) -> QuadResult:
    """Integral of ``h`` over the annulus ``ring``; radii are drawn with density proportional to r^(n-1)."""
    n = ring.n if n is None else n
    x0 = as_point(ring.center, n)
    sm = sample_mean(h, annulus_sampler(x0, ring.r1, ring.r2), n, budget, seed)
    return _mc_result(sm, ring.volume())


def shell_integral(profile, r1: float, r2: float, n: int, tol: float = DEFAULT_TOL,
                   singular_endpoints=(False, False)) -> QuadResult:
    """Integral of a radial function over r1 < |x| < r2 reduced to one dimension."""
    w = unit_sphere_area(n)
    res = integrate_1d(lambda r: w * profile(r) * r ** (n - 1), r1, r2, tol=tol,
                       singular_endpoints=singular_endpoints)
    return res
