"""p-moduli of spherical ring families, p-capacities of spherical condensers and their bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import quadrature
from .bounds import integral_I
from .core import (
    DegenerateRingError,
    DomainError,
    HypothesisViolated,
    Params,
    RingBoundsError,
    SphericalCondenser,
    as_point,
    unit_ball_volume,
    unit_sphere_area,
    validate,
)
from .weights import WeightField, constant_weight


class ExtremalUndefinedError(RingBoundsError):
    """The extremal density needs 0 < I < inf."""


def power_integral(exponent: float, a: float, b: float) -> float:
    """int_a^b r^(-exponent) dr for 0 < a < b."""
    if abs(exponent - 1.0) < 1e-14:
        return math.log(b / a)
    k = 1.0 - exponent
    return (b**k - a**k) / k


def _check_ring(a: float, b: float) -> None:
    if not (a > 0 and b > 0):
        raise DegenerateRingError(f"ring radii must be positive, got r1={a}, r2={b}")
    if a == b:
        raise DegenerateRingError("degenerate ring r1 == r2")
    if a > b:
        raise DegenerateRingError(f"degenerate ring r1 > r2 ({a} > {b})")


def ring_modulus_exact(n: int, p: float, a: float, b: float) -> float:
    """p-modulus of the curves joining S(x0, a) to S(x0, b) inside the ring.

    omega_{n-1} (int_a^b r^(-(n-1)/(p-1)) dr)^(1-p); for p = n this is
    omega_{n-1} log(b/a)^(1-n).
    """
    params = Params(n, p)
    _check_ring(a, b)
    return params.omega * power_integral(params.radial_exponent, a, b) ** (1.0 - params.p)


@dataclass
class GridDensity:
    """Piecewise-constant radial density: ``values[i]`` on (knots[i], knots[i+1])."""

    knots: np.ndarray
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.knots.ndim != 1 or self.knots.size < 2 or np.any(np.diff(self.knots) <= 0):
            raise DomainError("knots must be a strictly increasing array of at least two radii")
        if self.values.shape != (self.knots.size - 1,):
            raise DomainError(f"need {self.knots.size - 1} cell values, got {self.values.shape}")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise DomainError("density values must be finite and nonnegative")
        if self.normalized and abs(self.integral() - 1.0) > 1e-10:
            raise DomainError(f"density flagged normalized but integrates to {self.integral()!r}")

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.knots)

    def integral(self) -> float:
        return math.fsum(self.values * self.widths)

    def normalize(self) -> "GridDensity":
        return GridDensity(self.knots, self.values / self.integral(), normalized=True)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(self.knots, r, side="right") - 1, 0, self.values.size - 1)
        inside = (r > self.knots[0]) & (r < self.knots[-1])
        return np.where(inside, self.values[idx], 0.0)


def _knots(r1: float, r2: float, grid) -> np.ndarray:
    if np.ndim(grid) == 0:
        m = int(grid)
        if m < 1:
            raise DomainError(f"grid must have at least one cell, got {grid}")
        return np.linspace(r1, r2, m + 1)
    k = np.asarray(grid, dtype=float)
    if abs(k[0] - r1) > 1e-14 * r2 or abs(k[-1] - r2) > 1e-14 * r2:
        raise DomainError("grid knots must span [r1, r2]")
    return k


@dataclass
class ModulusResult:
    value: float
    converged: bool
    grid_size: int
    stationarity: float
    density: GridDensity

    def __float__(self) -> float:
        return self.value


def discrete_ring_modulus(n: int, p: float, a: float, b: float, grid_size: int = 1024) -> ModulusResult:
    """Minimise omega * sum rho_i^p int_cell r^(n-1) dr over piecewise-constant rho >= 0
    with sum rho_i dr_i >= 1.

    A brute-force stand-in for the curve-family modulus, restricted to radial densities.
    The KKT system rho_i = (lam dr_i / (p omega W_i))^(1/(p-1)) is solved for the
    multiplier lam by root finding.
    """
    params = Params(n, p)
    _check_ring(a, b)
    if grid_size < 64:
        raise DomainError(f"grid_size must be at least 64, got {grid_size}")
    knots = np.linspace(a, b, grid_size + 1)
    dr = np.diff(knots)
    W = (knots[1:] ** n - knots[:-1] ** n) / n
    omega, pp = params.omega, params.p
    base = dr / (pp * omega * W)

    def mass(log_lam):
        rho = (math.exp(log_lam) * base) ** (1.0 / (pp - 1))
        return math.log(float(np.sum(rho * dr)))

    lo, hi = -50.0, 50.0
    while mass(lo) > 0:
        lo -= 50.0
    while mass(hi) < 0:
        hi += 50.0
    try:
        log_lam, info = brentq(mass, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                               maxiter=500, full_output=True)
        converged = bool(info.converged)
    except RuntimeError:
        log_lam, converged = 0.5 * (lo + hi), False
    lam = math.exp(log_lam)
    rho = (lam * base) ** (1.0 / (pp - 1))
    rho /= float(np.sum(rho * dr))
    grad = pp * omega * W * rho ** (pp - 1) / dr
    stationarity = float(np.max(np.abs(grad - lam)) / lam)
    value = omega * math.fsum(W * rho**pp)
    density = GridDensity(knots, rho, normalized=True)
    return ModulusResult(value, converged and stationarity < 1e-8, grid_size, stationarity, density)


def cap_lower_bound_measure(n: int, p: float, m_C: float) -> float:
    """n Omega_n^(p/n) ((n-p)/(p-1))^(p-1) m(C)^((n-p)/n), valid for 1 < p < n."""
    params = validate(Params(n, p), "1<p<n")
    if m_C < 0:
        raise DomainError(f"measure must be nonnegative, got {m_C}")
    n, p = params.n, params.p
    return n * params.Omega ** (p / n) * ((n - p) / (p - 1)) ** (p - 1) * m_C ** ((n - p) / n)


def cap_lower_bound_isoperimetric(n: int, p: float, m_C: float, m_gap: float) -> float:
    """(n Omega_n^(1/n) m(C)^((n-1)/n))^p / m(A \\ C)^(p-1).

    The surface-infimum lower bound with the infimum replaced by its isoperimetric
    minorant, which is the only computable form for a general plate.
    """
    params = Params(n, p)
    if m_C < 0 or m_gap <= 0:
        raise DomainError(f"need m(C) >= 0 and m(A \\ C) > 0, got {m_C}, {m_gap}")
    n = params.n
    surface = n * params.Omega ** (1.0 / n) * m_C ** ((n - 1) / n)
    return surface**params.p / m_gap ** (params.p - 1)


def cap_lower_bound_diameter(n: int, p: float, d_C: float, m_A: float, c1: float = 1.0) -> float:
    """(c1 d(C)^p / m(A)^(1-n+p))^(1/(n-1)) for p > n - 1.

    c1 depends only on (n, p) but has no published value; results are meaningful for
    relative comparisons only.
    """
    params = validate(Params(n, p), "p>n-1")
    if d_C <= 0 or m_A <= 0 or c1 <= 0:
        raise DomainError("d(C), m(A) and c1 must be positive")
    n, p = params.n, params.p
    return (c1 * d_C**p / m_A ** (1 - n + p)) ** (1.0 / (n - 1))


def cap_upper_bound_lemma1(params: Params, Q: WeightField, x0, r1: float, r2: float) -> float:
    """omega_{n-1} / I^(p-1), with I = inf giving 0 and I = 0 giving inf."""
    I = integral_I(params, Q, x0, r1, r2)
    if I == math.inf:
        return 0.0
    if I == 0.0:
        return math.inf
    return params.omega / I ** (params.p - 1)


@dataclass
class CapacityBoundReport:
    lower_bounds: list[tuple[str, float]]
    upper_bound_lemma1: float
    exact_or_oracle: float
    exact: float
    consistent: bool
    relative_only: list[tuple[str, float]] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)


def capacity_sandwich(params: Params, r1: float, r2: float, Q: WeightField | None = None,
                      stretch: float = 1.0, grid_size: int = 1024, rtol: float = 0.02,
                      c1: float = 1.0) -> CapacityBoundReport:
    """Lower bounds, discrete oracle and upper bound for cap_p of the image condenser.

    The condenser is (B(0, r2), closed B(0, r1)) and its image under x -> |x|^(a-1) x
    is (B(0, r2^a), closed B(0, r1^a)); ``stretch`` = a = 1 is the identity.
    """
    n, p = params.n, params.p
    Q = constant_weight(1.0, n) if Q is None else Q
    image = SphericalCondenser((0.0,) * n, r1**stretch, r2**stretch)
    m_C, m_gap = image.plate_measure(), image.gap_measure()
    lows = [("isoperimetric", cap_lower_bound_isoperimetric(n, p, m_C, m_gap))]
    if params.regime in ("p<n", "n-1<p<n"):
        lows.append(("mazya", cap_lower_bound_measure(n, p, m_C)))
    rel = []
    if p > n - 1:
        d_C = 2 * image.r_inner
        m_A = unit_ball_volume(n) * image.r_outer**n
        rel.append(("diameter(c1=%g)" % c1, cap_lower_bound_diameter(n, p, d_C, m_A, c1)))
    oracle = discrete_ring_modulus(n, p, image.r_inner, image.r_outer, grid_size)
    exact = ring_modulus_exact(n, p, image.r_inner, image.r_outer)
    upper = cap_upper_bound_lemma1(params, Q, np.zeros(n), r1, r2)
    diag = []
    if not oracle.converged:
        diag.append("discrete modulus oracle did not reach stationarity")
    ok = all(v <= oracle.value * (1 + 1e-12) for _, v in lows) and oracle.value <= upper * (1 + rtol)
    if not ok:
        diag.append("bounds are not ordered lower <= oracle <= upper")
    return CapacityBoundReport(lows, upper, oracle.value, exact, ok, rel, diag)


# --- extremal density ------------------------------------------------------------


def _radial_check(Q: WeightField, x0) -> None:
    if not Q.is_radial_about(x0):
        raise DomainError(
            f"weight {Q.label} has no radial profile about {as_point(x0).tolist()}; "
            "the extremal density needs the spherical means in closed form"
        )


def _eta0_parts(params: Params, Q: WeightField, x0, r1: float, r2: float):
    _radial_check(Q, x0)
    I = integral_I(params, Q, x0, r1, r2)
    if I == 0 or not math.isfinite(I):
        raise ExtremalUndefinedError(f"extremal density undefined: I = {I}")
    e = params.radial_exponent

    def psi(r):
        q = Q.profile(r)
        with np.errstate(divide="ignore"):
            return np.where(np.isposinf(q), 0.0, 1.0 / (r**e * np.power(q, 1.0 / (params.p - 1))))

    return I, psi


def extremal_eta(params: Params, Q: WeightField, x0, r1: float, r2: float, grid=256) -> GridDensity:
    """Cell averages of eta0(r) = 1 / (I r^((n-1)/(p-1)) q(r)^(1/(p-1))) on a grid over [r1, r2]."""
    I, psi = _eta0_parts(params, Q, x0, r1, r2)
    knots = _knots(r1, r2, grid)
    masses = np.array([
        quadrature.integrate_1d(psi, lo, hi, tol=1e-13 * I).value
        for lo, hi in zip(knots[:-1], knots[1:])
    ])
    # Normalise by the sum of cell integrals so the unit-mass constraint holds to rounding.
    total = math.fsum(masses)
    if abs(total - I) > 1e-8 * I:
        raise ExtremalUndefinedError(f"cell integrals sum to {total}, expected I = {I}")
    return GridDensity(knots, masses / (total * np.diff(knots)), normalized=True)


def cell_weights(params: Params, Q: WeightField, knots: np.ndarray) -> np.ndarray:
    """int_cell q(r) r^(n-1) dr for each cell."""
    n = params.n
    f = lambda r: Q.profile(r) * r ** (n - 1)
    out = np.empty(knots.size - 1)
    for i, (lo, hi) in enumerate(zip(knots[:-1], knots[1:])):
        scale = float(np.max(f(np.array([lo, hi]))))
        res = quadrature.integrate_1d(f, lo, hi, tol=1e-13 * max(scale, 1e-300) * (hi - lo))
        out[i] = res.value
    return out


def radial_energy(params: Params, W: np.ndarray, eta: np.ndarray) -> float:
    """omega int q r^(n-1) eta^p dr for a piecewise-constant eta with cell weights W."""
    return params.omega * math.fsum(W * eta**params.p)


@dataclass
class ProjectedGradientResult:
    eta: np.ndarray
    value: float
    iterations: int
    converged: bool


def _project_scaled(y: np.ndarray, D: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """argmin sum D_i (x_i - y_i)^2 over {x >= 0, sum widths_i x_i = 1}."""
    s = widths / D

    def excess(mu):
        return float(np.sum(widths * np.maximum(y - mu * s, 0.0))) - 1.0

    hi = float(np.max(y / s))
    lo = min(0.0, float(np.min(y / s)))
    while excess(lo) < 0:
        lo = lo - max(1.0, abs(lo))
    mu = brentq(excess, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    x = np.maximum(y - mu * s, 0.0)
    return x / float(np.sum(widths * x))


def minimize_radial_energy(params: Params, W: np.ndarray, widths: np.ndarray, eta_start: np.ndarray | None = None,
                           max_iter: int = 10_000, rtol: float = 1e-10) -> ProjectedGradientResult:
    """Projected gradient descent for min omega sum W_i eta_i^p over unit-integral eta >= 0.

    Steps are scaled by the diagonal of the Hessian and projected in the matching metric.
    A fraction-to-boundary rule keeps every cell positive (the minimiser is interior
    whenever q is finite), and Armijo backtracking guards the decrease. Iteration stops
    when the predicted relative decrease falls below ``rtol``.
    """
    p, omega = params.p, params.omega
    eta = np.full(W.size, 1.0 / float(np.sum(widths))) if eta_start is None else eta_start.copy()
    F = omega * float(np.sum(W * eta**p))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = omega * p * W * eta ** (p - 1)
        D = omega * p * (p - 1) * W * eta ** (p - 2)
        D = np.clip(D, 1e-12 * float(np.max(D)), None)
        target = _project_scaled(eta - grad / D, D, widths)
        d = target - eta
        slope = float(grad @ d)
        if slope >= 0 or -slope <= rtol * F:
            converged = True
            break
        shrink = d < 0
        t = min(1.0, float(np.min(0.9 * eta[shrink] / -d[shrink]))) if shrink.any() else 1.0
        while True:
            cand = eta + t * d
            Fc = omega * float(np.sum(W * cand**p))
            if Fc <= F + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        if Fc > F:
            break
        eta, F = cand, Fc
    return ProjectedGradientResult(eta, F, it, converged)


def extremal_energy(params: Params, Q: WeightField, x0, r1: float, r2: float) -> tuple[float, float]:
    """(F(eta0), omega / I^(p-1)), with F(eta) = omega int q r^(n-1) eta^p dr by quadrature."""
    I, psi = _eta0_parts(params, Q, x0, r1, r2)
    n, p, omega = params.n, params.p, params.omega
    bound = omega / I ** (p - 1)

    def energy_density(r):
        return Q.profile(r) * r ** (n - 1) * (psi(r) / I) ** p

    F0 = omega * quadrature.integrate_1d(energy_density, r1, r2, tol=1e-13 * bound / omega,
                                         singular_endpoints=(True, True)).value
    return F0, bound


@dataclass
class ExtremalityReport:
    bound: float  # omega / I^(p-1)
    F_eta0: float
    min_value: float  # projected-gradient minimum on the grid
    uniform_value: float
    worst_violation: float
    attained_by_eta0: bool
    trials: int
    pg_iterations: int
    pg_converged: bool
    notes: list[str] = field(default_factory=list)


def verify_extremality(params: Params, Q: WeightField, x0, r1: float, r2: float, trials: int = 100,
                       seed: int = 42, grid: int = 128) -> ExtremalityReport:
    """Check that eta0 minimises omega int q r^(n-1) eta^p dr over unit-integral eta.

    Competitors are random positive piecewise-constant densities (log-uniform cell values
    and multiplicative perturbations of eta0) plus a projected-gradient minimiser started
    from the uniform density. Cells are geometrically spaced over [r1, r2].
    """
    if trials < 10:
        raise DomainError(f"need at least 10 trials, got {trials}")
    n, p, omega = params.n, params.p, params.omega
    F0, bound = extremal_energy(params, Q, x0, r1, r2)

    eta0 = extremal_eta(params, Q, x0, r1, r2, np.geomspace(r1, r2, int(grid) + 1))
    knots, widths = eta0.knots, eta0.widths
    W = cell_weights(params, Q, knots)
    rng = np.random.default_rng(seed)
    worst = -math.inf
    best = math.inf
    for k in range(trials):
        if k % 2 == 0:
            vals = np.exp(rng.uniform(math.log(1e-2), math.log(1e2), size=W.size))
        else:
            sigma = math.exp(rng.uniform(math.log(1e-3), 0.0))
            vals = eta0.values * np.exp(sigma * rng.standard_normal(W.size))
        vals /= float(np.sum(vals * widths))
        Fk = radial_energy(params, W, vals)
        best = min(best, Fk)
        worst = max(worst, (F0 - Fk) / F0)
    uniform = np.full(W.size, 1.0 / (r2 - r1))
    F_uniform = radial_energy(params, W, uniform)
    pg = minimize_radial_energy(params, W, widths)
    report = ExtremalityReport(
        bound=bound,
        F_eta0=F0,
        min_value=pg.value,
        uniform_value=F_uniform,
        worst_violation=max(worst, (F0 - pg.value) / F0, (F0 - F_uniform) / F0),
        attained_by_eta0=False,
        trials=trials,
        pg_iterations=pg.iterations,
        pg_converged=pg.converged,
    )
    report.attained_by_eta0 = (
        abs(F0 - bound) <= 1e-8 * bound and report.worst_violation <= 1e-6 and min(best, pg.value) >= F0 * (1 - 1e-6)
    )
    if not pg.converged:
        report.notes.append(f"projected gradient stopped after {pg.iterations} iterations without converging")
    return report


__all__ = [
    "CapacityBoundReport",
    "ExtremalUndefinedError",
    "ExtremalityReport",
    "GridDensity",
    "ModulusResult",
    "cap_lower_bound_diameter",
    "cap_lower_bound_isoperimetric",
    "cap_lower_bound_measure",
    "cap_upper_bound_lemma1",
    "capacity_sandwich",
    "cell_weights",
    "discrete_ring_modulus",
    "extremal_energy",
    "extremal_eta",
    "minimize_radial_energy",
    "power_integral",
    "radial_energy",
    "ring_modulus_exact",
    "verify_extremality",
]
