"""Dimensional constants, ring geometry and parameter validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_DIMENSION = 16
REGIME_TOL = 1e-12

# Regime tags. "n-1<p<n" is the most specific tag and wins over "p<n".
P_BELOW_N = "p<n"
P_EQUALS_N = "p=n"
P_NEAR_N = "n-1<p<n"
P_ABOVE_N = "p>n"


class RingBoundsError(Exception):
    """Base class for all library errors."""


class DomainError(RingBoundsError, ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidDimensionError(DomainError):
    pass


class DegenerateRingError(DomainError):
    pass


class RegimeError(DomainError):
    """(n, p) does not satisfy the regime a theorem requires."""


class DataError(RingBoundsError, ValueError):
    """A user-supplied function produced an unusable value (NaN, inf where finite is needed)."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class HypothesisViolated(RingBoundsError):
    """A hypothesis of a bound does not hold on the probed data."""


class NotConvergedError(RingBoundsError):
    """A numerical routine could not reach the requested accuracy."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


def _check_dimension(n, lowest: int) -> int:
    if isinstance(n, bool) or int(n) != n:
        raise InvalidDimensionError(f"dimension must be an integer, got {n!r}")
    n = int(n)
    if n < lowest or n > MAX_DIMENSION:
        raise InvalidDimensionError(
            f"dimension n={n} outside supported range [{lowest}, {MAX_DIMENSION}]"
        )
    return n


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n, pi^(n/2) / Gamma(n/2 + 1)."""
    n = _check_dimension(n, 1)
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def unit_sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^(n-1) in R^n, equal to n times the ball volume."""
    n = _check_dimension(n, 2)
    return n * unit_ball_volume(n)


def regime_of(n: int, p: float) -> str:
    if abs(p - n) <= REGIME_TOL * max(1.0, n):
        return P_EQUALS_N
    if n - 1 < p < n:
        return P_NEAR_N
    if p < n:
        return P_BELOW_N
    return P_ABOVE_N


@dataclass(frozen=True)
class Params:
    n: int
    p: float
    regime: str = field(init=False)

    def __post_init__(self):
        n = _check_dimension(self.n, 2)
        p = float(self.p)
        if not math.isfinite(p) or p <= 1:
            raise DomainError(f"exponent p must satisfy p > 1, got p={self.p}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "regime", regime_of(n, p))

    @property
    def omega(self) -> float:
        """Area of the unit sphere."""
        return unit_sphere_area(self.n)

    @property
    def Omega(self) -> float:
        """Volume of the unit ball."""
        return unit_ball_volume(self.n)

    @property
    def radial_exponent(self) -> float:
        """(n-1)/(p-1), the power of r in the radial integrand of I."""
        return (self.n - 1) / (self.p - 1)


# requirement name -> (predicate, name of the result that needs it, violated inequality)
_REQUIREMENTS = {
    "1<p<n": (
        lambda n, p: p < n and regime_of(n, p) != P_EQUALS_N,
        "measure bound (beta form), origin-derivative bound, distortion bound (p<n branch)",
        "requires p<n",
    ),
    "p=n": (
        lambda n, p: regime_of(n, p) == P_EQUALS_N,
        "measure bound (exponential form), sharp distortion bound",
        "requires p=n",
    ),
    "1<p<=n": (
        lambda n, p: p < n or regime_of(n, p) == P_EQUALS_N,
        "growth-condition measure bound",
        "requires p<=n",
    ),
    "n-1<p<n": (
        lambda n, p: n - 1 < p < n and regime_of(n, p) != P_EQUALS_N,
        "log-Holder envelope and its exponent",
        "requires n-1<p<n",
    ),
    "p>n-1": (
        lambda n, p: p > n - 1,
        "diameter capacity bound",
        "requires p>n-1",
    ),
}


def validate(params: Params, requirement: str) -> Params:
    """Return ``params`` unchanged if (n, p) meets ``requirement``, else raise RegimeError."""
    try:
        predicate, where, violated = _REQUIREMENTS[requirement]
    except KeyError:
        raise ValueError(
            f"unknown regime requirement {requirement!r}; expected one of {sorted(_REQUIREMENTS)}"
        ) from None
    if not predicate(params.n, params.p):
        raise RegimeError(
            f"{where} {violated}; got n={params.n}, p={params.p:g}"
        )
    return params


def as_point(x, n: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if n is not None and arr.size != n:
        raise DomainError(f"expected a point in R^{n}, got shape {np.shape(x)}")
    return arr


@dataclass(frozen=True)
class SphericalRing:
    """Open annulus r1 < |x - center| < r2."""

    center: tuple[float, ...]
    r1: float
    r2: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        _check_radii(self.r1, self.r2, "r1", "r2")

    @property
    def n(self) -> int:
        return len(self.center)

    def volume(self) -> float:
        return unit_ball_volume(self.n) * (self.r2**self.n - self.r1**self.n)


@dataclass(frozen=True)
class SphericalCondenser:
    """The condenser (B(center, r_outer), closure of B(center, r_inner))."""

    center: tuple[float, ...]
    r_inner: float
    r_outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        _check_radii(self.r_inner, self.r_outer, "r_inner", "r_outer")

    @property
    def n(self) -> int:
        return len(self.center)

    def plate_measure(self) -> float:
        """Lebesgue measure of the compact plate."""
        return unit_ball_volume(self.n) * self.r_inner**self.n

    def gap_measure(self) -> float:
        """Measure of the open set minus the plate."""
        return unit_ball_volume(self.n) * (self.r_outer**self.n - self.r_inner**self.n)

    def ring(self) -> SphericalRing:
        return SphericalRing(self.center, self.r_inner, self.r_outer)


def _check_radii(inner, outer, inner_name, outer_name):
    if not (math.isfinite(inner) and math.isfinite(outer)):
        raise DegenerateRingError(f"radii must be finite, got {inner_name}={inner}, {outer_name}={outer}")
    if inner <= 0:
        raise DegenerateRingError(f"degenerate ring {inner_name} <= 0 ({inner_name}={inner})")
    if inner == outer:
        raise DegenerateRingError(f"degenerate ring {inner_name} == {outer_name}")
    if inner > outer:
        raise DegenerateRingError(f"degenerate ring {inner_name} > {outer_name} ({inner} > {outer})")
