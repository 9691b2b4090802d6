"""Numerical bounds for ring (p,Q)-mappings on spherical rings and condensers."""

from __future__ import annotations

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DataError,
    DegenerateRingError,
    DomainError,
    HypothesisViolated,
    InvalidDimensionError,
    NotConvergedError,
    Params,
    RegimeError,
    RingBoundsError,
    SphericalCondenser,
    SphericalRing,
    regime_of,
    unit_ball_volume,
    unit_sphere_area,
    validate,
)
from .weights import (  # noqa: E402
    WeightField,
    ball_mean,
    constant_weight,
    fmo_oscillation,
    fmo_verdict,
    pointwise_weight,
    q0_estimate,
    radial_log_weight,
    radial_power_weight,
    spherical_mean,
)
from .bounds import (  # noqa: E402
    integral_I,
    measure_bound,
    primitive_J,
    schwarz_ratio_scan,
    theorem1_bound,
)
from .modcap import (  # noqa: E402
    cap_upper_bound_lemma1,
    discrete_ring_modulus,
    extremal_eta,
    ring_modulus_exact,
    verify_extremality,
)
from .maps import RadialMap, oracle_Q, verify_ring_pQ  # noqa: E402
