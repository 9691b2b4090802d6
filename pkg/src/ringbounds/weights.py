"""Weight functions Q, their spherical and ball means, and mean-oscillation estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import quadrature
from .core import DataError, DomainError, NotConvergedError, as_point

Evaluator = Callable[[np.ndarray], np.ndarray]
Profile = Callable[[np.ndarray], np.ndarray]

DEFAULT_BUDGET = 100_000
DEFAULT_SEED = 42


@dataclass(frozen=True)
class WeightField:
    """A nonnegative weight Q on R^n.

    ``evaluator`` maps an (m, n) array of points to m values in [0, inf]. When Q is
    radial about ``center``, ``radial_profile`` gives its value as a function of the
    distance to ``center``; that profile is then also the exact spherical mean.
    """

    evaluator: Evaluator
    n: int
    radial_profile: Profile | None = None
    center: tuple[float, ...] | None = None
    label: str = "Q"

    def __post_init__(self):
        if self.radial_profile is not None:
            c = (0.0,) * self.n if self.center is None else tuple(float(v) for v in self.center)
            object.__setattr__(self, "center", c)

    def __call__(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        vals = np.asarray(self.evaluator(pts), dtype=float)
        return np.broadcast_to(vals, (pts.shape[0],)).astype(float)

    def is_radial_about(self, x0) -> bool:
        if self.radial_profile is None:
            return False
        return bool(np.allclose(as_point(x0, self.n), self.center, rtol=0.0, atol=1e-15))

    def profile(self, r):
        """Radial profile q(r) with nonnegativity enforced; only valid when radial."""
        vals = np.asarray(self.radial_profile(np.asarray(r, dtype=float)), dtype=float)
        if np.any(vals < 0):
            raise DataError(f"weight {self.label} has a negative radial value")
        return vals

    def scaled(self, factor: float) -> "WeightField":
        ev, prof = self.evaluator, self.radial_profile
        return WeightField(
            evaluator=lambda x: factor * ev(x),
            n=self.n,
            radial_profile=None if prof is None else (lambda r: factor * prof(r)),
            center=self.center,
            label=f"{factor:g}*{self.label}",
        )


def _norm(x, center):
    return np.linalg.norm(np.asarray(x) - np.asarray(center), axis=-1)


def constant_weight(value: float, n: int, center=None) -> WeightField:
    value = float(value)
    if value < 0:
        raise DomainError(f"constant weight must be nonnegative, got {value}")
    center = (0.0,) * n if center is None else tuple(center)
    return WeightField(
        evaluator=lambda x: np.full(np.shape(x)[0], value),
        n=n,
        radial_profile=lambda r: np.full(np.shape(r), value),
        center=center,
        label=f"const({value:g})",
    )


def radial_power_weight(exponent: float, n: int, scale: float = 1.0, center=None) -> WeightField:
    """Q(x) = scale * |x - center|^exponent, with 0^s read as +inf for s < 0."""
    center = (0.0,) * n if center is None else tuple(center)

    def prof(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return scale * np.power(r, exponent)

    return WeightField(
        evaluator=lambda x: prof(_norm(x, center)),
        n=n,
        radial_profile=prof,
        center=center,
        label=f"{scale:g}*|x|^{exponent:g}",
    )


def radial_log_weight(n: int, scale: float = 1.0, center=None) -> WeightField:
    """Q(x) = scale * max(log(1/|x - center|), 0)."""
    center = (0.0,) * n if center is None else tuple(center)

    def prof(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return scale * np.maximum(-np.log(r), 0.0)

    return WeightField(
        evaluator=lambda x: prof(_norm(x, center)),
        n=n,
        radial_profile=prof,
        center=center,
        label=f"{scale:g}*log(1/|x|)",
    )


def pointwise_weight(func: Evaluator, n: int, label: str = "Q") -> WeightField:
    """A weight known only through pointwise evaluation (Monte Carlo paths)."""
    return WeightField(evaluator=func, n=n, label=label)


@dataclass(frozen=True)
class MeanReport:
    value: float
    method: str  # "closed-form", "quadrature" or "monte-carlo"
    std_error: float = 0.0
    samples: int = 1


def spherical_mean(
    Q: WeightField,
    x0,
    r: float,
    budget: int = DEFAULT_BUDGET,
    seed: int = DEFAULT_SEED,
) -> MeanReport:
    """Average of Q over the sphere S(x0, r)."""
    if not r > 0:
        raise DomainError(f"sphere radius must be positive, got r={r}")
    x0 = as_point(x0, Q.n)
    if Q.is_radial_about(x0):
        v = float(Q.profile(np.array([r]))[0])
        if math.isnan(v):
            raise DataError(f"weight {Q.label} is NaN on the sphere of radius {r}", point=r)
        return MeanReport(v, "closed-form", 0.0, 1)
    sm = quadrature.sample_mean(Q, quadrature.sphere_sampler(x0, r), Q.n, budget, seed)
    return MeanReport(sm.mean, "monte-carlo", sm.std_error, sm.samples)


class _InfiniteProfile(Exception):
    pass


def _shell_mean(Q: WeightField, eps: float, transform=None) -> float:
    n = Q.n

    # Substitute r = eps * s so the tolerance is relative to the size of q, not of eps^n.
    def integrand(s):
        q = Q.profile(eps * s)
        if np.isposinf(q).any():
            raise _InfiniteProfile
        if transform is not None:
            q = transform(q)
        return q * s ** (n - 1)

    res = quadrature.integrate_1d(integrand, 0.0, 1.0, tol=1e-11, singular_endpoints=(True, False))
    if not res.converged and res.abs_error_estimate > 1e-8 * abs(res.value):
        raise NotConvergedError(f"shell integral of {Q.label} on (0, {eps}) did not converge", res)
    return n * res.value


def ball_mean(
    Q: WeightField,
    x0,
    eps: float,
    budget: int = DEFAULT_BUDGET,
    seed: int = DEFAULT_SEED,
) -> MeanReport:
    """Average of Q over the ball B(x0, eps).

    Radial weights reduce to n / eps^n * int_0^eps q(r) r^(n-1) dr; others are sampled.
    """
    if not eps > 0:
        raise DomainError(f"ball radius must be positive, got eps={eps}")
    x0 = as_point(x0, Q.n)
    if Q.is_radial_about(x0):
        try:
            return MeanReport(_shell_mean(Q, eps), "quadrature", 0.0, 1)
        except _InfiniteProfile:
            return MeanReport(math.inf, "quadrature", 0.0, 1)
    sm = quadrature.sample_mean(Q, quadrature.ball_sampler(x0, eps), Q.n, budget, seed)
    return MeanReport(sm.mean, "monte-carlo", sm.std_error, sm.samples)


def geometric_grid(eps0: float = 0.5, levels: int = 21, ratio: float = 0.5) -> np.ndarray:
    """eps0 * ratio^k for k = 0..levels-1."""
    return eps0 * ratio ** np.arange(levels)


@dataclass(frozen=True)
class Q0Report:
    value: float
    eps: np.ndarray
    means: np.ndarray
    trend: str  # constant | decreasing | increasing | diverging | mixed


def _trend(values: np.ndarray, rtol: float = 1e-12) -> str:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return "constant"
    scale = np.maximum(np.abs(v[:-1]), np.abs(v[1:]))
    d = np.diff(v)
    flat = np.abs(d) <= rtol * np.maximum(scale, 1e-300)
    if np.all(flat):
        return "constant"
    if np.all((d < 0) | flat):
        return "decreasing"
    if np.all((d > 0) | flat):
        last = v[v.size // 2:]
        if last[0] > 0 and last[-1] / last[0] >= 2.0:
            return "diverging"
        return "increasing"
    return "mixed"


def q0_estimate(Q: WeightField, x0, eps_sequence: Sequence[float] | None = None,
                budget: int = DEFAULT_BUDGET, seed: int = DEFAULT_SEED) -> Q0Report:
    """Finite-grid proxy for liminf of ball means as eps -> 0.

    The proxy is the smallest ball mean on the grid, except that a table which keeps
    growing without bound is reported as +inf.
    """
    eps = geometric_grid() if eps_sequence is None else np.asarray(eps_sequence, dtype=float)
    if eps.size == 0:
        raise DomainError("eps sequence is empty")
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise DomainError("eps sequence must be positive and strictly decreasing")
    means = np.array([ball_mean(Q, x0, e, budget, seed).value for e in eps])
    trend = _trend(means)
    value = math.inf if trend == "diverging" else float(np.min(means))
    return Q0Report(value, eps, means, trend)


@dataclass(frozen=True)
class OscillationReport:
    value: float
    mean: float
    std_error: float
    samples: int


def fmo_oscillation(Q: WeightField, x0, eps: float, budget: int = DEFAULT_BUDGET,
                    seed: int = DEFAULT_SEED) -> OscillationReport:
    """Mean oscillation (1/|B|) int_B |Q - Q_B| over B(x0, eps), by Monte Carlo.

    Both passes (ball mean, then absolute deviation) reuse one sample set.
    """
    if not eps > 0:
        raise DomainError(f"ball radius must be positive, got eps={eps}")
    x0 = as_point(x0, Q.n)
    n = Q.n
    k = 1 << min(n, 3)
    budget = quadrature._check_budget(budget)
    budget = -(-budget // k) * k
    sampler = quadrature.ball_sampler(x0, eps)
    chunks = []
    done = 0
    c = 0
    while done < budget:
        count = min(quadrature.CHUNK, budget - done)
        pts = sampler(quadrature._rng(seed, c), count)
        vals = Q(pts)
        if np.isnan(vals).any():
            i = int(np.flatnonzero(np.isnan(vals))[0])
            raise DataError(f"weight {Q.label} is NaN at {pts[i].tolist()}", point=pts[i])
        chunks.append(vals)
        done += count
        c += 1
    vals = np.concatenate(chunks)
    if np.isinf(vals).any():
        return OscillationReport(math.inf, math.inf, 0.0, done)
    strata = np.arange(done) % k
    # Strata are equally weighted and equally filled, so plain means are stratified means.
    mean = float(np.mean([vals[strata == j].mean() for j in range(k)]))
    dev = np.abs(vals - mean)
    osc = float(np.mean([dev[strata == j].mean() for j in range(k)]))
    var = sum(dev[strata == j].var(ddof=1) / np.count_nonzero(strata == j) for j in range(k)) / k**2
    return OscillationReport(osc, mean, math.sqrt(var), done)


@dataclass(frozen=True)
class FmoReport:
    verdict: str  # finite | diverging | inconclusive
    limsup_proxy: float
    eps: np.ndarray
    oscillation: np.ndarray
    growth_per_decade: float


def fmo_verdict(Q: WeightField, x0, eps_grid: Sequence[float] | None = None,
                budget: int = DEFAULT_BUDGET, seed: int = DEFAULT_SEED) -> FmoReport:
    """Classify the mean oscillation at x0 as finite, diverging or inconclusive.

    finite: every value on the finer half of the grid is at most twice that half's median.
    diverging: the table grows monotonically and by a factor of at least 2 per decade of eps.
    """
    eps = geometric_grid() if eps_grid is None else np.asarray(eps_grid, dtype=float)
    if eps.size < 4 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise DomainError("eps grid must hold at least 4 positive strictly decreasing radii")
    osc = np.array([fmo_oscillation(Q, x0, e, budget, seed).value for e in eps])
    if np.isinf(osc).any():
        return FmoReport("diverging", math.inf, eps, osc, math.inf)
    tail = osc[eps.size // 2:]
    atol = 1e-9 * (1.0 + float(np.max(np.abs(tail))))
    pos = osc > 0
    if np.count_nonzero(pos) >= 2:
        slope = np.polyfit(np.log10(1.0 / eps[pos]), np.log10(osc[pos]), 1)[0]
        growth = float(10.0**slope)
    else:
        growth = 1.0
    if np.all(tail <= 2.0 * np.median(tail) + atol):
        verdict = "finite"
    elif np.all(np.diff(osc) > 0) and growth >= 2.0:
        verdict = "diverging"
    else:
        verdict = "inconclusive"
    limsup = math.inf if verdict == "diverging" else float(np.max(tail))
    return FmoReport(verdict, limsup, eps, osc, growth)


def shell_oscillation(Q: WeightField, eps: float) -> float:
    """Mean oscillation of a radial weight by 1D shell quadrature (no sampling)."""
    m = _shell_mean(Q, eps)
    return _shell_mean(Q, eps, transform=lambda q: np.abs(q - m))


__all__ = [
    "WeightField",
    "MeanReport",
    "Q0Report",
    "OscillationReport",
    "FmoReport",
    "constant_weight",
    "radial_power_weight",
    "radial_log_weight",
    "pointwise_weight",
    "spherical_mean",
    "ball_mean",
    "q0_estimate",
    "fmo_oscillation",
    "fmo_verdict",
    "shell_oscillation",
    "geometric_grid",
]
