"""Radial power stretches x -> |x|^(a-1) x with exact image geometry and derived weights."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import quadrature
from .bounds import BoundReport, HolderReport, holder_envelope, integral_I, theorem1_bound, theorem1_constant
from .core import DomainError, Params, SphericalRing, validate
from .modcap import (
    ExtremalUndefinedError,
    cap_upper_bound_lemma1,
    cell_weights,
    extremal_energy,
    radial_energy,
    ring_modulus_exact,
)
from .weights import Q0Report, WeightField, ball_mean, constant_weight, geometric_grid, q0_estimate, radial_power_weight


def _norm(pts: np.ndarray) -> np.ndarray:
    """Row norms without underflow for tiny coordinates."""
    m = np.max(np.abs(pts), axis=1)
    safe = np.where(m > 0, m, 1.0)
    return m * np.linalg.norm(pts / safe[:, None], axis=1)


@dataclass(frozen=True)
class RadialMap:
    """f(x) = |x|^(a-1) x on the closed unit ball; a = 1 is the identity."""

    a: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise DomainError(f"stretch exponent must be positive, got a={self.a}")
        Params(self.n, 2.0)  # dimension check only

    @property
    def label(self) -> str:
        return "identity" if self.a == 1 else f"stretch(a={self.a:g})"

    def apply(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.n:
            raise DomainError(f"expected points in R^{self.n}, got shape {np.shape(x)}")
        r = _norm(pts)
        if np.any(r > 1.0 + 1e-15):
            raise DomainError(f"point outside the closed unit ball (|x| = {float(np.max(r))})")
        safe = np.where(r > 0, r, 1.0)
        # r^a / r avoids the rounding of a - 1 amplified by log r near zero
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            factor = np.where(r > 0, np.power(safe, self.a) / safe, 0.0)
        out = pts * factor[:, None]
        return out[0] if single else out

    __call__ = apply

    def compose(self, other: "RadialMap") -> "RadialMap":
        """self after other: |x|^(ab - 1) x."""
        if other.n != self.n:
            raise DomainError("cannot compose maps of different dimensions")
        return RadialMap(self.a * other.a, self.n)

    def _check_r(self, r: float) -> float:
        if not 0 < r <= 1:
            raise DomainError(f"radius must lie in (0, 1], got r={r}")
        return float(r)

    def min_modulus(self, r: float) -> float:
        """l_f(r) = min over |x| = r of |f(x)| = r^a."""
        return self._check_r(r) ** self.a

    def image_ball_measure(self, r: float) -> float:
        """m(f(B(0, r))) = Omega_n r^(n a)."""
        return Params(self.n, 2.0).Omega * self._check_r(r) ** (self.n * self.a)

    def preimage(self, y) -> np.ndarray:
        """Inverse map y -> |y|^(1/a - 1) y."""
        return RadialMap(1.0 / self.a, self.n).apply(y)

    def inclusion_check(self, r: float, samples: int = 1000, seed: int = 42) -> "InclusionReport":
        """Sample y with |y| < l_f(r)(1 - 1e-6) and confirm each has a preimage in B(0, r)."""
        rho = self.min_modulus(r) * (1 - 1e-6)
        draw = quadrature.ball_sampler(np.zeros(self.n), rho)
        pts = draw(np.random.Generator(np.random.Philox(seed)), samples)
        pre = self.preimage(pts)
        back = self.apply(pre)
        radius = float(np.max(np.linalg.norm(pre, axis=1)))
        residual = float(np.max(np.linalg.norm(back - pts, axis=1)))
        ok = radius < r and residual <= 1e-12 * max(rho, 1e-300)
        return InclusionReport(ok, radius, residual, samples)

    def image_ring_modulus(self, params: Params, r1: float, r2: float) -> float:
        """M_p of the image of the curves joining the boundary spheres of A(r1, r2, 0)."""
        if params.n != self.n:
            raise DomainError(f"map acts on R^{self.n} but params have n={params.n}")
        SphericalRing((0.0,) * self.n, r1, r2)
        self._check_r(r2)
        return ring_modulus_exact(params.n, params.p, r1**self.a, r2**self.a)


@dataclass(frozen=True)
class InclusionReport:
    passed: bool
    max_preimage_radius: float
    max_residual: float
    samples: int


def identity_map(n: int) -> RadialMap:
    return RadialMap(1.0, n)


def oracle_Q(fmap: RadialMap, params: Params) -> WeightField:
    """q0(r) = a^(1-p) r^(-(a-1)(p-n)), the radial weight for which the capacity upper
    bound is attained by the stretch on every ring centred at 0.

    With this q0 the radial integral I over (r1, r2) equals int_{r1^a}^{r2^a} s^(-(n-1)/(p-1)) ds.
    """
    if params.n != fmap.n:
        raise DomainError(f"map acts on R^{fmap.n} but params have n={params.n}")
    a, n, p = fmap.a, params.n, params.p
    scale = a ** (1.0 - p)
    exponent = -(a - 1.0) * (p - n)
    if exponent == 0.0 or params.regime == "p=n":
        w = constant_weight(scale, n)
    else:
        w = radial_power_weight(exponent, n, scale)
    return WeightField(w.evaluator, n, w.radial_profile, w.center, f"oracle[{fmap.label}, p={p:g}]")


@dataclass
class DefinitionReport:
    left: float  # image ring modulus
    right_eta0: float
    min_right: float
    verdict: str
    equality_gap: float  # |right_eta0 - left| / left
    trials: int
    notes: list[str] = field(default_factory=list)


def verify_ring_pQ(fmap: RadialMap, Q: WeightField, params: Params, ring: SphericalRing,
                   trials: int = 100, seed: int = 42, cells: int = 64, rtol: float = 1e-9) -> DefinitionReport:
    """Test M_p(f(Gamma)) <= int_A Q eta^p dm for eta0 and for random admissible radial eta."""
    if trials < 10:
        raise DomainError(f"need at least 10 trials, got {trials}")
    if ring.n != params.n or fmap.n != params.n:
        raise DomainError("ring, map and params must share the dimension")
    if any(c != 0.0 for c in ring.center):
        raise DomainError("the stretch is centred at 0; the ring must be too")
    if not Q.is_radial_about(ring.center):
        raise DomainError(f"weight {Q.label} must be radial about the ring centre")
    x0 = np.asarray(ring.center)
    left = fmap.image_ring_modulus(params, ring.r1, ring.r2)
    notes: list[str] = []
    try:
        right0, _ = extremal_energy(params, Q, x0, ring.r1, ring.r2)
    except ExtremalUndefinedError as exc:
        # I = inf means the admissible infimum is 0; I = 0 makes it +inf.
        right0 = cap_upper_bound_lemma1(params, Q, x0, ring.r1, ring.r2)
        notes.append(f"eta0 undefined ({exc}); using the infimum {right0}")
    knots = np.geomspace(ring.r1, ring.r2, cells + 1)
    widths = np.diff(knots)
    W = cell_weights(params, Q, knots)
    rng = np.random.default_rng(seed)
    rights = []
    for _ in range(trials):
        vals = np.exp(rng.uniform(math.log(1e-2), math.log(1e2), size=cells))
        vals /= float(np.sum(vals * widths))
        rights.append(radial_energy(params, W, vals))
    min_right = min(min(rights), right0)
    verdict = "pass" if left <= min_right * (1 + rtol) else "fail"
    gap = abs(right0 - left) / left if left > 0 else math.inf
    if verdict == "fail":
        notes.append(f"left {left:.12g} exceeds right side {min_right:.12g}")
    return DefinitionReport(left, right0, min_right, verdict, gap, trials, notes)


@dataclass
class Theorem1Report:
    q0: Q0Report
    c0: float
    liminf_bound: float
    table: BoundReport
    min_ratio: float


def theorem1_scan(fmap: RadialMap, params: Params, Q: WeightField | None = None,
                  eps: Sequence[float] | None = None, budget: int = 100_000, seed: int = 42,
                  tolerance: float = 1e-9) -> Theorem1Report:
    """Compare l_f(eps)/eps with c0 M(2 eps)^(1/(n-p)) on a grid, M being the ball mean of Q.

    Each row is the finite-eps inequality behind the liminf bound; the Q0 table is the
    ball-mean table on the same grid.
    """
    validate(params, "1<p<n")
    Q = oracle_Q(fmap, params) if Q is None else Q
    eps = geometric_grid(0.25, 15) if eps is None else np.asarray(eps, dtype=float)
    if np.any(2 * eps > 1):
        raise DomainError("need 2 eps <= 1 on the whole grid")
    x0 = np.zeros(params.n)
    q0 = q0_estimate(Q, x0, eps, budget, seed)
    c0 = theorem1_constant(params)
    expo = 1.0 / (params.n - params.p)
    bound = np.array([c0 * ball_mean(Q, x0, 2 * e, budget, seed).value ** expo for e in eps])
    measured = np.array([fmap.min_modulus(e) / e for e in eps])
    ok = bool(np.all(measured <= bound * (1 + tolerance)))
    table = BoundReport(eps, bound, measured, {"c0": c0}, "pass" if ok else "fail", tolerance=tolerance)
    return Theorem1Report(q0, c0, theorem1_bound(params, q0.value), table, float(np.min(measured)))


def holder_scan(fmap: RadialMap, params: Params, Q: WeightField | None = None,
                eps: Sequence[float] | None = None, top: float = 1.0, q_exponent: float = 1.0) -> HolderReport:
    """Fit the log-Holder envelope for the stretch at 0 with I(eps) = I(0, eps, top)."""
    validate(params, "n-1<p<n")
    Q = oracle_Q(fmap, params) if Q is None else Q
    eps = np.geomspace(1e-1, 1e-4, 13) if eps is None else np.asarray(eps, dtype=float)
    x0 = np.zeros(params.n)
    I = [integral_I(params, Q, x0, e, top) for e in eps]
    deltas = [fmap.min_modulus(e) for e in eps]  # |f(x) - f(0)| = |x|^a on |x| = eps
    return holder_envelope(params, eps, I, deltas, q_exponent)


__all__ = [
    "DefinitionReport",
    "InclusionReport",
    "RadialMap",
    "Theorem1Report",
    "holder_scan",
    "identity_map",
    "oracle_Q",
    "theorem1_scan",
    "verify_ring_pQ",
]
