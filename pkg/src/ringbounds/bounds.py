"""Radial integral functionals and the distortion-bound evaluators built on them.

Every asymptotic (liminf / limsup) statement is checked on a finite radius grid; the
reports keep the whole table so a reader can judge the trend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import quadrature
from .core import (
    DataError,
    DomainError,
    HypothesisViolated,
    NotConvergedError,
    P_EQUALS_N,
    Params,
    RegimeError,
    SphericalRing,
    as_point,
    validate,
)
from .weights import WeightField, spherical_mean

# 12 geometric points from 1e-1 to 1e-5.
DEFAULT_RADII = 10.0 ** -np.linspace(1, 5, 12)


# --- the functional I --------------------------------------------------------------


def _inverse_radial_factor(params: Params, r: np.ndarray, q: np.ndarray) -> np.ndarray:
    """1 / (r^((n-1)/(p-1)) q^(1/(p-1))) with a/0 = inf and a/inf = 0."""
    with np.errstate(divide="ignore", over="ignore"):
        denom = r ** params.radial_exponent * np.power(q, 1.0 / (params.p - 1))
        out = np.where(denom == 0, np.inf, 1.0 / denom)
    return np.where(np.isposinf(q), 0.0, out)


@dataclass(frozen=True)
class IntegralReport:
    value: float
    abs_error_estimate: float
    converged: bool
    method: str
    diagnostics: tuple[str, ...] = ()


def integral_I_report(params: Params, Q: WeightField, x0, r1: float, r2: float,
                      tol: float = 1e-11, budget: int = 20_000, seed: int = 42) -> IntegralReport:
    SphericalRing(as_point(x0, params.n), r1, r2)
    if Q.is_radial_about(x0):
        def f(r):
            return _inverse_radial_factor(params, r, Q.profile(r))

        # Scale tolerance to the size of the integrand so tiny rings keep relative accuracy.
        probe = f(np.array([0.5 * (r1 + r2)]))[0]
        scale = probe * (r2 - r1) if np.isfinite(probe) and probe > 0 else 1.0
        try:
            res = quadrature.integrate_1d(f, r1, r2, tol=tol * max(scale, 1e-300),
                                          singular_endpoints=(True, True))
        except DataError as exc:
            # q vanishes on a set the nodes hit: I is infinite by the a/0 convention.
            return IntegralReport(math.inf, 0.0, True, "quadrature",
                                  (f"spherical mean vanishes near r={exc.point}; I = inf",))
        return IntegralReport(res.value, res.abs_error_estimate, res.converged, "quadrature")

    # Non-radial weight: Gauss-Legendre in log r with Monte Carlo spherical means at the nodes.
    x, w = np.polynomial.legendre.leggauss(32)
    lo, hi = math.log(r1), math.log(r2)
    t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    r = np.exp(t)
    means = [spherical_mean(Q, x0, ri, budget, seed + i) for i, ri in enumerate(r)]
    q = np.array([m.value for m in means])
    se = np.array([m.std_error for m in means])
    vals = _inverse_radial_factor(params, r, q) * r
    if np.isinf(vals).any():
        return IntegralReport(math.inf, 0.0, True, "monte-carlo",
                              ("spherical mean vanishes at a node; I = inf",))
    value = 0.5 * (hi - lo) * float(w @ vals)
    # Delta method: d/dq of q^(-1/(p-1)) is -(1/(p-1)) q^(-1/(p-1)-1).
    with np.errstate(divide="ignore", invalid="ignore"):
        dv = np.where(q > 0, vals / ((params.p - 1) * q), 0.0)
    err = 3.0 * 0.5 * (hi - lo) * math.sqrt(float(np.sum((w * dv * se) ** 2)))
    return IntegralReport(value, err, True, "monte-carlo", ("32-node log-Gauss rule, sampled means",))


def integral_I(params: Params, Q: WeightField, x0, r1: float, r2: float, **kwargs) -> float:
    """I(x0, r1, r2) = int_{r1}^{r2} dr / (r^((n-1)/(p-1)) q_{x0}(r)^(1/(p-1)))."""
    rep = integral_I_report(params, Q, x0, r1, r2, **kwargs)
    if not rep.converged:
        raise NotConvergedError(
            f"I({r1}, {r2}) did not converge (error estimate {rep.abs_error_estimate:.3g})", rep
        )
    return rep.value


# --- psi and its primitive --------------------------------------------------------


@dataclass(frozen=True)
class Psi:
    """A nonnegative function psi on (0, inf), optionally with a closed-form primitive.

    ``primitive(r, top)`` returns int_r^top psi(t) dt when given.
    """

    func: Callable[[np.ndarray], np.ndarray]
    primitive: Callable[[float, float], float] | None = None
    label: str = "psi"

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))


def inverse_psi() -> Psi:
    """psi(t) = 1/t on (0, 1), with J(r) = log(1/r)."""
    return Psi(
        func=lambda t: np.where((t > 0) & (t < 1), 1.0 / np.where(t > 0, t, 1.0), 0.0),
        primitive=lambda r, top: math.log(top / r),
        label="1/t",
    )


def primitive_J(psi: Psi | Callable, r: float, top: float = 1.0) -> float:
    """J(r) = int_r^top psi(t) dt; raises HypothesisViolated unless 0 < J < inf."""
    if not 0 < r < top:
        raise DomainError(f"need 0 < r < {top}, got r={r}")
    if isinstance(psi, Psi) and psi.primitive is not None:
        value = float(psi.primitive(r, top))
    else:
        f = psi if isinstance(psi, Psi) else (lambda t: np.asarray(psi(np.asarray(t))))
        try:
            res = quadrature.integrate_1d(f, r, top, tol=1e-12, singular_endpoints=(True, True))
        except DataError as exc:
            raise HypothesisViolated(f"J({r}) diverges: psi is not integrable near t={exc.point}") from exc
        if not res.converged and res.abs_error_estimate > 1e-9 * max(abs(res.value), 1.0):
            raise HypothesisViolated(
                f"J({r}) diverges or is not resolvable (estimate {res.value:.6g} +- {res.abs_error_estimate:.3g})"
            )
        value = res.value
    if not (0 < value < math.inf):
        raise HypothesisViolated(f"J({r}) = {value} is not in (0, inf)")
    return value


@dataclass(frozen=True)
class FmoPsi:
    """The logarithmic test function (t log(1/t))^(-n/p) on (eps, eps0) with eps0 < 1/e."""

    params: Params
    eps0: float

    def __post_init__(self):
        if not 0 < self.eps0 < math.exp(-1):
            raise DomainError(f"eps0 must lie in (0, 1/e), got {self.eps0}")

    @property
    def psi(self) -> Psi:
        power = self.params.n / self.params.p
        eps0 = self.eps0

        def func(t):
            t = np.asarray(t, dtype=float)
            inside = (t > 0) & (t < eps0)
            safe = np.where(inside, t, 0.5 * eps0)
            return np.where(inside, (safe * np.log(1.0 / safe)) ** -power, 0.0)

        return Psi(func=func, label=f"(t log 1/t)^-{power:g}")

    def lower_bound(self, eps: float) -> float:
        """log(log(1/eps) / log(1/eps0)), a lower bound for I(eps, eps0)."""
        return math.log(math.log(1.0 / eps) / math.log(1.0 / self.eps0))

    def I(self, eps: float) -> float:
        """int_eps^eps0 psi(t) dt, integrated in u = log(1/t) for scale-free accuracy."""
        if not 0 < eps < self.eps0:
            raise DomainError(f"need 0 < eps < eps0={self.eps0}, got {eps}")
        power = self.params.n / self.params.p
        # dt = -t du, so psi dt = u^(-power) t^(1-power) du with t = e^(-u).
        f = lambda u: u ** -power * np.exp(-(1.0 - power) * u)
        lo, hi = math.log(1.0 / self.eps0), math.log(1.0 / eps)
        scale = float(max(f(np.array([lo]))[0], f(np.array([hi]))[0])) * (hi - lo)
        res = quadrature.integrate_1d(f, lo, hi, tol=1e-12 * scale)
        if not res.converged:
            raise NotConvergedError(f"I({eps}, {self.eps0}) did not converge", res)
        return res.value


def fmo_psi(params: Params, eps0: float = 0.3) -> FmoPsi:
    return FmoPsi(params, eps0)


# --- growth hypotheses -------------------------------------------------------------


@dataclass(frozen=True)
class GrowthHypothesis:
    """Integral growth condition on Q.

    kind "lemma31": int_{r<|x|<1} Q psi^p dm <= c J(r)^alpha.
    kind "cond6xc": int_{r<|x|<1} Q / |x|^p dm <= c log(1/r).
    kind "lemma6":  int_{eps<|x-x0|<eps0} Q psi^p dm <= K I(eps, eps0)^q.
    """

    kind: str
    psi: Psi = field(default_factory=inverse_psi)
    alpha: float = 1.0
    c: float = 1.0
    q_exponent: float = 1.0
    K: float = 1.0
    eps0: float = 1.0
    eps0_prime: float = 1.0


@dataclass
class GrowthCheck:
    min_feasible_c: float
    radii: np.ndarray
    lhs: np.ndarray
    rhs_unit: np.ndarray
    verdict: str
    notes: list[str] = field(default_factory=list)


def _annulus_lhs(params: Params, Q: WeightField, x0, weight: Callable, r_lo: float, r_hi: float,
                 budget: int, seed: int, singular=(False, False)) -> float:
    if Q.is_radial_about(x0):
        def f(t):
            return Q.profile(t) * weight(t) * t ** (params.n - 1)

        probe = f(np.array([math.sqrt(r_lo * r_hi)]))[0]
        scale = max(abs(probe) * (r_hi - r_lo), 1e-300)
        try:
            res = quadrature.integrate_1d(f, r_lo, r_hi, tol=1e-11 * scale, singular_endpoints=singular)
        except DataError as exc:
            raise HypothesisViolated(f"growth integrand is not finite at |x|={exc.point}") from exc
        if not res.converged and res.abs_error_estimate > 1e-7 * abs(res.value):
            raise HypothesisViolated(f"growth integral over ({r_lo}, {r_hi}) diverges or did not converge")
        return params.omega * res.value
    ring = SphericalRing(as_point(x0, params.n), r_lo, r_hi)
    res = quadrature.annulus_integral(
        lambda x: Q(x) * weight(np.linalg.norm(x - np.asarray(ring.center), axis=1)),
        ring, params.n, budget, seed,
    )
    if not math.isfinite(res.value):
        raise HypothesisViolated(f"growth integral over ({r_lo}, {r_hi}) is infinite")
    return res.value


def check_growth_condition(params: Params, Q: WeightField, hyp: GrowthHypothesis,
                           r_grid: Sequence[float] | None = None, x0=None,
                           budget: int = 100_000, seed: int = 42, rtol: float = 1e-9) -> GrowthCheck:
    """Evaluate both sides of a growth condition on a radius grid.

    ``min_feasible_c`` is the smallest constant (c, or K for "lemma6") that makes the
    inequality hold at every grid radius; the verdict compares it with the supplied one.
    """
    x0 = np.zeros(params.n) if x0 is None else as_point(x0, params.n)
    radii = DEFAULT_RADII if r_grid is None else np.asarray(r_grid, dtype=float)
    p = params.p
    notes: list[str] = []
    lhs = np.empty(radii.size)
    rhs = np.empty(radii.size)
    if hyp.kind == "lemma31":
        if hyp.alpha > p:
            raise HypothesisViolated(f"alpha={hyp.alpha} must not exceed p={p}")
        top = 1.0
        weight = lambda t: np.power(hyp.psi(t), p)
        unit = lambda r: primitive_J(hyp.psi, r, top) ** hyp.alpha
        supplied = hyp.c
    elif hyp.kind == "cond6xc":
        top = 1.0
        weight = lambda t: np.power(t, -p)
        unit = lambda r: math.log(1.0 / r)
        supplied = hyp.c
    elif hyp.kind == "lemma6":
        validate(params, "n-1<p<n")
        if hyp.q_exponent >= p:
            raise HypothesisViolated(f"q={hyp.q_exponent} must be smaller than p={p}")
        top = hyp.eps0
        weight = lambda t: np.power(hyp.psi(t), p)
        unit = lambda r: primitive_J(hyp.psi, r, top) ** hyp.q_exponent
        supplied = hyp.K
    else:
        raise ValueError(f"unknown growth hypothesis kind {hyp.kind!r}")

    if np.any(radii <= 0) or np.any(radii >= top):
        raise DomainError(f"probe radii must lie in (0, {top})")
    for i, r in enumerate(radii):
        lhs[i] = _annulus_lhs(params, Q, x0, weight, r, top, budget, seed + i)
        rhs[i] = unit(r)
    ratio = lhs / rhs
    cmin = float(np.max(ratio))
    verdict = "pass" if supplied >= cmin * (1 - rtol) else "fail"
    if verdict == "fail":
        notes.append(f"supplied constant {supplied:.6g} < required {cmin:.6g}")
    return GrowthCheck(cmin, radii, lhs, rhs, verdict, notes)


# --- bound formulas ----------------------------------------------------------------


def beta_constant(params: Params, c: float) -> float:
    n, p = params.n, params.p
    return (n - p) / (p - 1) * (params.omega / c) ** (1.0 / (p - 1))


def gamma_constant(params: Params, c: float) -> float:
    n = params.n
    return n * (params.omega / c) ** (1.0 / (n - 1))


def gamma0_constant(params: Params, c: float) -> float:
    return (params.omega / c) ** (1.0 / (params.n - 1))


def measure_bound(params: Params, alpha: float, c: float, J_r: float, regime: str | None = None) -> float:
    """Upper bound for the measure of the image of B(0, r) in terms of J(r).

    For 1 < p < n: Omega_n (1 + beta J^((p-alpha)/(p-1)))^(-n(p-1)/(n-p)).
    For p = n:     Omega_n exp(-gamma J^((n-alpha)/(n-1))).
    """
    regime = params.regime if regime is None else regime
    if c <= 0:
        raise DomainError(f"constant c must be positive, got {c}")
    if J_r < 0:
        raise DomainError(f"J(r) must be nonnegative, got {J_r}")
    if alpha > params.p:
        raise HypothesisViolated(f"alpha={alpha} must not exceed p={params.p}")
    n, p = params.n, params.p
    Omega = params.Omega
    if regime == P_EQUALS_N:
        validate(params, "p=n")
        return Omega * math.exp(-gamma_constant(params, c) * J_r ** ((n - alpha) / (n - 1)))
    validate(params, "1<p<n")
    if regime not in ("p<n", "n-1<p<n"):
        raise RegimeError(f"unknown regime {regime!r}")
    base = 1.0 + beta_constant(params, c) * J_r ** ((p - alpha) / (p - 1))
    return Omega * base ** (-n * (p - 1) / (n - p))


def comparison_radius(params: Params, alpha: float, c: float, J_r: float) -> float:
    """The comparison function R(r) against which |f(x)| is measured near the origin."""
    n, p = params.n, params.p
    if params.regime == P_EQUALS_N:
        return math.exp(-gamma_constant(params, c) / n * J_r ** ((n - alpha) / (n - 1)))
    validate(params, "1<p<n")
    return (1.0 + beta_constant(params, c) * J_r ** ((p - alpha) / (p - 1))) ** (-(p - 1) / (n - p))


@dataclass
class BoundReport:
    radii: np.ndarray
    bound: np.ndarray
    measured: np.ndarray
    constants: dict
    verdict: str
    notes: list[str] = field(default_factory=list)
    tolerance: float = 1e-9

    @property
    def slack(self) -> np.ndarray:
        return self.bound - self.measured

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.measured / self.bound

    def rows(self) -> list[dict]:
        return [
            {"r": float(r), "bound": float(b), "measured": float(m), "slack": float(b - m)}
            for r, b, m in zip(self.radii, self.bound, self.measured)
        ]


def measure_bound_scan(params: Params, alpha: float, c: float, psi: Psi,
                       image_measure: Callable[[float], float], r_grid: Sequence[float] | None = None,
                       tolerance: float = 1e-9) -> BoundReport:
    """Compare the measure bound with measured image measures on a grid.

    Passes when bound - measured >= -tolerance * bound at every probed radius.
    """
    radii = DEFAULT_RADII if r_grid is None else np.asarray(r_grid, dtype=float)
    bound = np.array([measure_bound(params, alpha, c, primitive_J(psi, r)) for r in radii])
    measured = np.array([image_measure(r) for r in radii])
    ok = np.all(bound - measured >= -tolerance * bound)
    consts = {"c": c, "alpha": alpha}
    if params.regime == P_EQUALS_N:
        consts["gamma"] = gamma_constant(params, c)
    else:
        consts["beta"] = beta_constant(params, c)
    return BoundReport(radii, bound, measured, consts, "pass" if ok else "fail", tolerance=tolerance)


def schwarz_ratio_scan(map_probe: Callable[[float], float], params: Params, alpha: float, c: float,
                       psi: Psi, r_grid: Sequence[float] | None = None, regime: str | None = None,
                       tolerance: float = 1e-9) -> BoundReport:
    """Scan l_f(r) / R(r) on a grid, where l_f(r) = min over |x| = r of |f(x)|.

    The conclusion is a liminf statement, so the verdict passes when the smallest ratio
    on the grid is at most 1 + tolerance. With psi = 1/t, alpha = 1 and p = n the
    comparison function reduces to r^gamma0.
    """
    regime = params.regime if regime is None else regime
    if regime != params.regime:
        raise RegimeError(f"requested regime {regime} but (n, p) is in regime {params.regime}")
    radii = DEFAULT_RADII if r_grid is None else np.asarray(r_grid, dtype=float)
    if alpha > params.p:
        raise HypothesisViolated(f"alpha={alpha} must not exceed p={params.p}")
    consts: dict = {"c": c, "alpha": alpha}
    if params.regime == P_EQUALS_N:
        consts.update(gamma=gamma_constant(params, c), gamma0=gamma0_constant(params, c))
    else:
        validate(params, "1<p<n")
        consts["beta"] = beta_constant(params, c)
    bound = np.array([comparison_radius(params, alpha, c, primitive_J(psi, r)) for r in radii])
    measured = np.array([map_probe(r) for r in radii])
    ratio = measured / bound
    verdict = "pass" if float(np.min(ratio)) <= 1.0 + tolerance else "fail"
    rep = BoundReport(radii, bound, measured, consts, verdict, tolerance=tolerance)
    rep.notes.append(f"min ratio {np.min(ratio):.15g}, max ratio {np.max(ratio):.15g}")
    if not np.all(ratio <= 1.0 + tolerance):
        rep.notes.append("ratio exceeds 1 at some probed radius (allowed: the statement is a liminf)")
    return rep


# --- origin-derivative bound ---------------------------------------------------------------------


def mazya_constant(params: Params) -> float:
    """n Omega_n^(p/n) ((n-p)/(p-1))^(p-1), the constant of the measure-based capacity bound."""
    validate(params, "1<p<n")
    n, p = params.n, params.p
    return n * params.Omega ** (p / n) * ((n - p) / (p - 1)) ** (p - 1)


def theorem1_constant(params: Params) -> float:
    """c0 = Omega_n^(-1/n) (2^n Omega_n / c1)^(1/(n-p)) with c1 the Maz'ya constant.

    Chaining the test-annulus capacity bound on (eps, 2 eps) with the Maz'ya lower
    bound gives m(f(B(0, eps))) <= (2^n Omega_n M(2 eps) / c1)^(n/(n-p)) eps^n, where
    M(2 eps) is the mean of Q over B(0, 2 eps); eps cancels after taking n-th roots.
    """
    validate(params, "1<p<n")
    n, p = params.n, params.p
    Omega = params.Omega
    return Omega ** (-1.0 / n) * (2**n * Omega / mazya_constant(params)) ** (1.0 / (n - p))


def theorem1_bound(params: Params, Q0: float) -> float:
    """c0 * Q0^(1/(n-p)), the bound for liminf |f(x)| / |x| at the origin."""
    validate(params, "1<p<n")
    if Q0 < 0:
        raise DomainError(f"Q0 must be nonnegative, got {Q0}")
    if Q0 == math.inf:
        return math.inf
    return theorem1_constant(params) * Q0 ** (1.0 / (params.n - params.p))


# --- log-Holder envelope --------------------------------------------------------


def holder_exponent(params: Params, q_exponent: float = 1.0) -> float:
    """(q - p)(n - 1)/p; with q = 1 this is the log-Holder exponent (1 - p)(n - 1)/p."""
    return (q_exponent - params.p) * (params.n - 1) / params.p


@dataclass
class HolderReport:
    eps: np.ndarray
    I_values: np.ndarray
    deltas: np.ndarray
    exponent: float
    N: float
    N_first_decade: float
    stability_ratio: float
    stable: bool
    envelope: np.ndarray
    notes: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [
            {"r": float(e), "bound": float(b), "measured": float(d), "slack": float(b - d)}
            for e, b, d in zip(self.eps, self.envelope, self.deltas)
        ]


def holder_envelope(params: Params, eps: Sequence[float], I_values: Sequence[float],
                    deltas: Sequence[float], q_exponent: float = 1.0,
                    stability_factor: float = 2.0) -> HolderReport:
    """Fit the smallest N with |f(x) - f(x0)| <= N I(|x - x0|)^((q-p)(n-1)/p) on the probes.

    ``eps`` must decrease. N is stable when the fit over all probes exceeds the fit over
    the first (largest-radius) decade by at most ``stability_factor``, that is, when
    extending the probes toward x0 does not push the constant up.
    """
    validate(params, "n-1<p<n")
    if q_exponent >= params.p:
        raise HypothesisViolated(f"q={q_exponent} must be smaller than p={params.p}")
    eps = np.asarray(eps, dtype=float)
    I = np.asarray(I_values, dtype=float)
    d = np.asarray(deltas, dtype=float)
    if not (eps.size == I.size == d.size) or eps.size < 2:
        raise DomainError("eps, I_values and deltas must have equal length >= 2")
    if np.any(np.diff(eps) >= 0):
        raise DomainError("eps must be strictly decreasing")
    if np.any(I <= 0) or np.any(np.diff(I) <= 0):
        raise HypothesisViolated("I must be positive and strictly increasing as eps decreases")
    e = holder_exponent(params, q_exponent)
    unit = I**e
    fits = d / unit
    N = float(np.max(fits))
    first = eps >= eps[0] / 10.0 * (1 - 1e-12)
    N0 = float(np.max(fits[first]))
    ratio = N / N0 if N0 > 0 else (1.0 if N == 0 else math.inf)
    rep = HolderReport(eps, I, d, e, N, N0, ratio, ratio <= stability_factor, N * unit)
    span = math.log10(eps[0] / eps[-1])
    if span < 3 - 1e-9:
        rep.notes.append(f"probes span only {span:.2f} decades")
    return rep


__all__ = [
    "BoundReport",
    "FmoPsi",
    "GrowthCheck",
    "GrowthHypothesis",
    "HolderReport",
    "IntegralReport",
    "Psi",
    "beta_constant",
    "check_growth_condition",
    "comparison_radius",
    "fmo_psi",
    "gamma0_constant",
    "gamma_constant",
    "holder_envelope",
    "holder_exponent",
    "integral_I",
    "integral_I_report",
    "inverse_psi",
    "mazya_constant",
    "measure_bound",
    "measure_bound_scan",
    "primitive_J",
    "schwarz_ratio_scan",
    "theorem1_bound",
    "theorem1_constant",
]
