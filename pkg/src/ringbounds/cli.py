"""Command-line interface: one subcommand per bound, JSON reports and CSV tables."""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import re
import sys
from typing import Callable, Sequence

import numpy as np

from . import __version__
from . import bounds, maps, modcap, weights
from .core import (
    DataError,
    DomainError,
    HypothesisViolated,
    NotConvergedError,
    Params,
    RingBoundsError,
    SphericalRing,
    as_point,
)

DEFAULT_SEED = 42
SEED_ENV = "RINGBOUNDS_SEED"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_HYPOTHESIS = 2
EXIT_NOT_CONVERGED = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this reports usage errors as exit 1."""

    def error(self, message):
        raise UsageError(message)


# --- value grammars -------------------------------------------------------------


def float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


_KEYVAL = re.compile(r",(?=\s*[A-Za-z_][A-Za-z_0-9]*\s*=)")


def _parse_kv(body: str) -> dict[str, str]:
    out = {}
    for part in _KEYVAL.split(body):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _take(opts: dict[str, str], allowed: dict[str, Callable], what: str) -> dict:
    unknown = set(opts) - set(allowed)
    if unknown:
        raise UsageError(f"{what}: unknown key(s) {sorted(unknown)}; allowed {sorted(allowed)}")
    try:
        return {k: allowed[k](v) for k, v in opts.items()}
    except ValueError as exc:
        raise UsageError(f"{what}: {exc}") from None


def parse_map(text: str, n: int) -> maps.RadialMap:
    """``identity`` or ``stretch(a=2)`` (also ``stretch:a=2``)."""
    s = text.strip()
    if s == "identity":
        return maps.identity_map(n)
    m = re.fullmatch(r"stretch\s*(?:\((.*)\)|:(.*))", s)
    if not m:
        raise UsageError(f"unknown map {text!r}; expected identity or stretch(a=...)")
    opts = _take(_parse_kv(m.group(1) if m.group(1) is not None else m.group(2)), {"a": float}, "map")
    if "a" not in opts:
        raise UsageError("map stretch needs a=...")
    return maps.RadialMap(opts["a"], n)


def _expression_weight(expr: str, n: int) -> weights.WeightField:
    import sympy

    xs = sympy.symbols(f"x1:{n + 1}", real=True)
    r = sympy.Symbol("r", positive=True)
    try:
        e = sympy.sympify(expr, locals={"r": r, **{str(x): x for x in xs}})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise UsageError(f"cannot parse weight expression {expr!r}: {exc}") from None
    extra = e.free_symbols - set(xs) - {r}
    if extra:
        raise UsageError(f"weight expression uses unknown symbols {sorted(map(str, extra))}")
    radial = not (e.free_symbols & set(xs))
    full = e.subs(r, sympy.sqrt(sum(x**2 for x in xs)))
    point_fn = sympy.lambdify(xs, full, "numpy")

    def evaluator(pts):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.broadcast_to(np.asarray(point_fn(*pts.T), dtype=float), (pts.shape[0],))

    profile = None
    if radial:
        rad_fn = sympy.lambdify(r, e, "numpy")

        def profile(rr):
            rr = np.asarray(rr, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.broadcast_to(np.asarray(rad_fn(rr), dtype=float), rr.shape)

    return weights.WeightField(evaluator, n, profile, None, f"expr({expr})")


def parse_weight(text: str, params: Params) -> weights.WeightField:
    """``kind:key=val,...`` with kinds constant, radial-power, radial-log, stretch-oracle, expression."""
    n = params.n
    kind, _, body = text.strip().partition(":")
    kv = _parse_kv(body)
    if kind == "constant":
        o = _take(kv, {"value": float}, "weight constant")
        return weights.constant_weight(o.get("value", 1.0), n)
    if kind == "radial-power":
        o = _take(kv, {"exponent": float, "scale": float}, "weight radial-power")
        if "exponent" not in o:
            raise UsageError("weight radial-power needs exponent=...")
        return weights.radial_power_weight(o["exponent"], n, o.get("scale", 1.0))
    if kind == "radial-log":
        o = _take(kv, {"scale": float}, "weight radial-log")
        return weights.radial_log_weight(n, o.get("scale", 1.0))
    if kind == "stretch-oracle":
        o = _take(kv, {"a": float}, "weight stretch-oracle")
        return maps.oracle_Q(maps.RadialMap(o.get("a", 1.0), n), params)
    if kind == "expression":
        o = _take(kv, {"expr": str}, "weight expression")
        if "expr" not in o:
            raise UsageError("weight expression needs expr=...")
        return _expression_weight(o["expr"], n)
    raise UsageError(
        f"unknown weight kind {kind!r}; expected constant, radial-power, radial-log, stretch-oracle or expression"
    )


def parse_psi(name: str, params: Params, eps0: float) -> bounds.Psi:
    if name in ("inverse", "1/t"):
        return bounds.inverse_psi()
    if name == "fmo":
        return bounds.fmo_psi(params, eps0).psi
    raise UsageError(f"unknown psi {name!r}; expected inverse or fmo")


# --- report plumbing ------------------------------------------------------------


def _clean(obj):
    """Make a structure JSON-safe: numpy scalars to Python, inf/nan to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


class Report:
    def __init__(self, command: str, config: dict, seed: int, params: Params | None):
        self.command = command
        self.config = config
        self.seed = seed
        self.constants: dict[str, float | None] = dict.fromkeys(("omega", "Omega", "beta", "gamma", "gamma0", "c0"))
        if params is not None:
            self.constants["omega"] = params.omega
            self.constants["Omega"] = params.Omega
        self.results: dict = {}
        self.tags: dict[str, str] = {}
        self.tables: list[dict] = []
        self.verdict = "pass"
        self.diagnostics: list[str] = []

    def put(self, name: str, value, tag: str) -> None:
        self.results[name] = value
        self.tags[name] = tag

    def as_dict(self) -> dict:
        return _clean({
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": __version__,
            "constants": self.constants,
            "results": self.results,
            "tables": self.tables,
            "verdict": self.verdict,
            "diagnostics": self.diagnostics,
            "tags": self.tags,
        })


def _bound_rows(radii, bound, measured, **extra) -> list[dict]:
    rows = []
    for i, (r, b, m) in enumerate(zip(radii, bound, measured)):
        row = {"r": float(r), "bound": float(b), "measured": float(m), "slack": float(b) - float(m)}
        for k, col in extra.items():
            row[k] = float(col[i])
        rows.append(row)
    return rows


def _params(args) -> Params:
    if args.n is None:
        raise UsageError("--n is required")
    return Params(args.n, float(args.n) if args.p is None else args.p)


def _x0(args, n: int) -> np.ndarray:
    return np.zeros(n) if args.x0 is None else as_point(args.x0, n)


def _weight(args, params: Params, default: str | None = None) -> weights.WeightField:
    text = args.weight or default
    if text is None:
        raise UsageError("--weight is required")
    return parse_weight(text, params)


# --- subcommands ----------------------------------------------------------------


def cmd_modulus(args, rep: Report) -> None:
    params = _params(args)
    exact = modcap.ring_modulus_exact(params.n, params.p, args.r1, args.r2)
    oracle = modcap.discrete_ring_modulus(params.n, params.p, args.r1, args.r2, args.grid)
    rep.put("value", exact, "ring_modulus_closed_form")
    rep.put("discrete_oracle", oracle.value, "discrete_radial_modulus")
    rep.put("relative_gap", oracle.value / exact - 1.0, "discrete_vs_closed_form")
    if not oracle.converged:
        rep.diagnostics.append(f"discrete oracle stationarity {oracle.stationarity:.3g}")
        raise NotConvergedError("discrete modulus oracle did not converge")
    if abs(oracle.value / exact - 1.0) > 0.02:
        rep.verdict = "fail"
        rep.diagnostics.append("discrete oracle deviates from the closed form by more than 2%")


def cmd_capacity(args, rep: Report) -> None:
    params = _params(args)
    fmap = parse_map(args.map, params.n)
    Q = _weight(args, params, f"stretch-oracle:a={fmap.a!r}")
    sw = modcap.capacity_sandwich(params, args.r1, args.r2, Q, stretch=fmap.a, grid_size=args.grid, c1=args.c1)
    for name, v in sw.lower_bounds:
        rep.put(f"lower_{name}", v, f"capacity_lower_bound_{name}")
    for name, v in sw.relative_only:
        rep.put(f"relative_{name}", v, "capacity_lower_bound_diameter_relative")
    rep.put("oracle", sw.exact_or_oracle, "discrete_radial_modulus")
    rep.put("exact", sw.exact, "ring_modulus_closed_form")
    rep.put("upper", sw.upper_bound_lemma1, "capacity_upper_bound")
    rep.diagnostics.extend(sw.diagnostics)
    rep.verdict = "pass" if sw.consistent else "fail"


def cmd_qmean(args, rep: Report) -> None:
    params = _params(args)
    Q = _weight(args, params)
    x0 = _x0(args, params.n)
    eps = np.asarray(args.eps if args.eps else weights.geometric_grid(), dtype=float)
    q0 = weights.q0_estimate(Q, x0, eps, args.budget, rep.seed)
    sph = [weights.spherical_mean(Q, x0, e, args.budget, rep.seed).value for e in eps]
    nan = np.full(eps.size, math.nan)
    rep.tables = _bound_rows(eps, nan, q0.means, sphere_mean=sph)
    rep.put("Q0", q0.value, "liminf_ball_mean_proxy")
    rep.put("trend", q0.trend, "ball_mean_trend")


def cmd_integral_i(args, rep: Report) -> None:
    params = _params(args)
    Q = _weight(args, params)
    x0 = _x0(args, params.n)
    r = bounds.integral_I_report(params, Q, x0, args.r1, args.r2, tol=args.tol, budget=args.budget, seed=rep.seed)
    rep.put("I", r.value, "radial_integral_I")
    rep.put("abs_error_estimate", r.abs_error_estimate, "radial_integral_I_error")
    rep.put("method", r.method, "radial_integral_I_method")
    rep.diagnostics.extend(r.diagnostics)
    if not r.converged:
        raise NotConvergedError(f"I did not converge (estimate {r.value}, error {r.abs_error_estimate})")
    upper = 0.0 if r.value == math.inf else (math.inf if r.value == 0 else params.omega / r.value ** (params.p - 1))
    rep.put("capacity_upper_bound", upper, "capacity_upper_bound")


def cmd_extremal(args, rep: Report) -> None:
    params = _params(args)
    Q = _weight(args, params)
    x0 = _x0(args, params.n)
    eta = modcap.extremal_eta(params, Q, x0, args.r1, args.r2, args.grid)
    r = modcap.verify_extremality(params, Q, x0, args.r1, args.r2, args.trials, rep.seed, args.grid)
    rep.tables = [
        {"r": float(0.5 * (lo + hi)), "bound": math.nan, "measured": float(v), "slack": math.nan}
        for lo, hi, v in zip(eta.knots[:-1], eta.knots[1:], eta.values)
    ]
    rep.put("bound", r.bound, "capacity_upper_bound")
    rep.put("F_eta0", r.F_eta0, "extremal_energy")
    rep.put("min_value", r.min_value, "projected_gradient_minimum")
    rep.put("uniform_value", r.uniform_value, "uniform_density_energy")
    rep.put("worst_violation", r.worst_violation, "extremality_violation")
    rep.put("attained_by_eta0", r.attained_by_eta0, "extremality_flag")
    rep.diagnostics.extend(r.notes)
    rel = abs(r.min_value - r.bound) / r.bound
    rep.put("pg_relative_gap", rel, "projected_gradient_vs_bound")
    if not r.attained_by_eta0 or rel > 0.01:
        rep.verdict = "fail"
    if not r.pg_converged:
        raise NotConvergedError(f"projected gradient stopped after {r.pg_iterations} iterations")


def _growth_c(args, params: Params, Q, psi, radii) -> float:
    if args.c is not None:
        return args.c
    hyp = bounds.GrowthHypothesis("lemma31", psi=psi, alpha=args.alpha)
    g = bounds.check_growth_condition(params, Q, hyp, r_grid=radii, budget=args.budget, seed=args.seed_value)
    return g.min_feasible_c


def _scan_setup(args):
    params = _params(args)
    fmap = parse_map(args.map, params.n)
    Q = _weight(args, params, f"stretch-oracle:a={fmap.a!r}")
    psi = parse_psi(args.psi, params, args.eps0)
    radii = np.asarray(args.radii if args.radii else bounds.DEFAULT_RADII, dtype=float)
    return params, fmap, Q, psi, radii


def _fill_constants(rep: Report, params: Params, c: float) -> None:
    if params.regime == "p=n":
        rep.constants["gamma"] = bounds.gamma_constant(params, c)
        rep.constants["gamma0"] = bounds.gamma0_constant(params, c)
    elif params.p < params.n:
        rep.constants["beta"] = bounds.beta_constant(params, c)


def cmd_measure_bound(args, rep: Report) -> None:
    params, fmap, Q, psi, radii = _scan_setup(args)
    c = _growth_c(args, params, Q, psi, radii)
    r = bounds.measure_bound_scan(params, args.alpha, c, psi, fmap.image_ball_measure, radii, args.tolerance)
    _fill_constants(rep, params, c)
    rep.put("c", c, "growth_constant")
    rep.tables = r.rows()
    rep.verdict = r.verdict
    rep.diagnostics.extend(r.notes)


def cmd_schwarz(args, rep: Report) -> None:
    params, fmap, Q, psi, radii = _scan_setup(args)
    c = _growth_c(args, params, Q, psi, radii)
    r = bounds.schwarz_ratio_scan(fmap.min_modulus, params, args.alpha, c, psi, radii, tolerance=args.tolerance)
    _fill_constants(rep, params, c)
    rep.put("c", c, "growth_constant")
    rep.put("min_ratio", float(np.min(r.ratio)), "liminf_ratio_proxy")
    rep.tables = _bound_rows(r.radii, r.bound, r.measured, ratio=r.ratio)
    rep.verdict = r.verdict
    rep.diagnostics.extend(r.notes)


def cmd_theorem1(args, rep: Report) -> None:
    params = _params(args)
    fmap = parse_map(args.map, params.n)
    Q = _weight(args, params, f"stretch-oracle:a={fmap.a!r}")
    eps = None if not args.eps else args.eps
    r = maps.theorem1_scan(fmap, params, Q, eps, args.budget, rep.seed, args.tolerance)
    rep.constants["c0"] = r.c0
    rep.put("Q0", r.q0.value, "liminf_ball_mean_proxy")
    rep.put("Q0_trend", r.q0.trend, "ball_mean_trend")
    rep.put("liminf_bound", r.liminf_bound, "origin_derivative_bound")
    rep.put("min_ratio", r.min_ratio, "liminf_ratio_proxy")
    rep.tables = _bound_rows(r.table.radii, r.table.bound, r.table.measured, ball_mean=r.q0.means)
    rep.verdict = r.table.verdict


def cmd_hoelder(args, rep: Report) -> None:
    params = _params(args)
    fmap = parse_map(args.map, params.n)
    Q = _weight(args, params, f"stretch-oracle:a={fmap.a!r}")
    r = maps.holder_scan(fmap, params, Q, args.eps or None, args.top, args.q)
    rep.put("exponent", r.exponent, "log_holder_exponent")
    rep.put("N", r.N, "fitted_holder_constant")
    rep.put("N_first_decade", r.N_first_decade, "fitted_holder_constant_first_decade")
    rep.put("stability_ratio", r.stability_ratio, "holder_constant_stability")
    rep.tables = _bound_rows(r.eps, r.envelope, r.deltas, I=r.I_values)
    rep.diagnostics.extend(r.notes)
    rep.verdict = "pass" if r.stable else "fail"


def cmd_fmo(args, rep: Report) -> None:
    params = _params(args)
    Q = _weight(args, params)
    x0 = _x0(args, params.n)
    eps = args.eps or None
    r = weights.fmo_verdict(Q, x0, eps, args.budget, rep.seed)
    nan = np.full(len(r.eps), math.nan)
    rep.tables = _bound_rows(r.eps, nan, r.oscillation)
    rep.put("fmo_verdict", r.verdict, "finite_mean_oscillation")
    rep.put("limsup_proxy", r.limsup_proxy, "finite_mean_oscillation")
    rep.put("growth_per_decade", r.growth_per_decade, "finite_mean_oscillation")
    if r.verdict == "inconclusive":
        rep.diagnostics.append("oscillation table neither settles nor clearly diverges")


def cmd_verify_definition(args, rep: Report) -> None:
    params = _params(args)
    fmap = parse_map(args.map, params.n)
    Q = _weight(args, params, f"stretch-oracle:a={fmap.a!r}")
    if args.scale != 1.0:
        Q = Q.scaled(args.scale)
    ring = SphericalRing((0.0,) * params.n, args.r1, args.r2)
    r = maps.verify_ring_pQ(fmap, Q, params, ring, args.trials, rep.seed)
    rep.put("left", r.left, "image_ring_modulus")
    rep.put("right_eta0", r.right_eta0, "extremal_energy")
    rep.put("min_right", r.min_right, "admissible_energy_minimum")
    rep.put("equality_gap", r.equality_gap, "definition_equality_gap")
    rep.diagnostics.extend(r.notes)
    rep.verdict = r.verdict


def cmd_sharpness(args, rep: Report) -> None:
    n = args.n if args.n is not None else 3
    params = Params(n, float(n))
    a = 1.0 if args.case == "identity" else args.a
    fmap = maps.RadialMap(a, n)
    c = params.omega * a ** (1 - n)
    radii = np.asarray(args.radii if args.radii else 10.0 ** -np.arange(1, 6), dtype=float)
    psi = bounds.inverse_psi()
    mb = bounds.measure_bound_scan(params, 1.0, c, psi, fmap.image_ball_measure, radii)
    sw = bounds.schwarz_ratio_scan(fmap.min_modulus, params, 1.0, c, psi, radii)
    g0 = bounds.gamma0_constant(params, c)
    _fill_constants(rep, params, c)
    measure_err = float(np.max(np.abs(mb.measured / mb.bound - 1.0)))
    ratio_err = float(np.max(np.abs(sw.ratio - 1.0)))
    rep.put("c", c, "growth_constant")
    rep.put("gamma0_minus_a", g0 - a, "sharp_exponent")
    rep.put("max_measure_rel_error", measure_err, "sharp_measure_bound")
    rep.put("max_ratio_error", ratio_err, "sharp_distortion_ratio")
    rep.tables = _bound_rows(radii, sw.bound, sw.measured, ratio=sw.ratio,
                             measure_bound=mb.bound, image_measure=mb.measured)
    if ratio_err > args.tolerance or measure_err > 1e-10 or abs(g0 - a) > 1e-12 * a:
        rep.verdict = "fail"


COMMANDS: dict[str, tuple[Callable, str]] = {
    "modulus": (cmd_modulus, "closed-form ring modulus and its discrete oracle"),
    "capacity": (cmd_capacity, "capacity bounds for a spherical condenser and its stretch image"),
    "qmean": (cmd_qmean, "spherical and ball means of a weight, Q0 table"),
    "integral-i": (cmd_integral_i, "the radial integral I and the capacity upper bound"),
    "extremal": (cmd_extremal, "extremal density check"),
    "measure-bound": (cmd_measure_bound, "image-measure bound scan"),
    "schwarz": (cmd_schwarz, "distortion ratio scan l_f(r)/R(r)"),
    "theorem1": (cmd_theorem1, "origin-derivative bound for 1<p<n"),
    "hoelder": (cmd_hoelder, "log-Holder envelope fit"),
    "fmo": (cmd_fmo, "mean oscillation table and verdict"),
    "verify-definition": (cmd_verify_definition, "ring (p,Q) definition check for a stretch"),
    "sharpness": (cmd_sharpness, "sharp p=n cases for the stretch family"),
}

# Options each subcommand accepts beyond the common ones.
_EXTRA = {
    "modulus": ("ring", "grid"),
    "capacity": ("ring", "grid", "map", "c1"),
    "qmean": ("eps",),
    "integral-i": ("ring", "tol"),
    "extremal": ("ring", "grid", "trials"),
    "measure-bound": ("scan",),
    "schwarz": ("scan",),
    "theorem1": ("map", "eps", "tolerance"),
    "hoelder": ("map", "eps", "top", "q"),
    "fmo": ("eps",),
    "verify-definition": ("ring", "map", "trials", "scale"),
    "sharpness": ("case", "radii", "tolerance"),
}


def _add_options(sp: argparse.ArgumentParser, name: str) -> None:
    sp.add_argument("--config", help="INI file with a [common] section and one section per subcommand")
    sp.add_argument("--out", help="write the JSON report here instead of stdout")
    sp.add_argument("--csv", help="also write the report table as CSV")
    sp.add_argument("--seed", type=int, help=f"random seed (default ${SEED_ENV} or {DEFAULT_SEED})")
    sp.add_argument("--n", type=int, help="dimension")
    sp.add_argument("--p", type=float, help="exponent p > 1 (default n)")
    sp.add_argument("--weight", help="kind:key=val,... e.g. radial-power:exponent=-1")
    sp.add_argument("--x0", type=float_list, help="centre point, comma separated (default origin)")
    sp.add_argument("--budget", type=int, default=100_000, help="Monte Carlo sample budget")
    extra = _EXTRA[name]
    if "ring" in extra:
        sp.add_argument("--r1", type=float, required=False, help="inner radius")
        sp.add_argument("--r2", type=float, required=False, help="outer radius")
    if "grid" in extra:
        sp.add_argument("--grid", type=int, default=1024 if name != "extremal" else 128, help="number of cells")
    if "map" in extra or "scan" in extra:
        sp.add_argument("--map", default="identity", help="identity or stretch(a=...)")
    if "c1" in extra:
        sp.add_argument("--c1", type=float, default=1.0, help="constant of the diameter bound")
    if "eps" in extra:
        sp.add_argument("--eps", type=float_list, help="decreasing radii, comma separated")
    if "tol" in extra:
        sp.add_argument("--tol", type=float, default=1e-11, help="quadrature tolerance")
    if "trials" in extra:
        sp.add_argument("--trials", type=int, default=100, help="random competitors")
    if "scale" in extra:
        sp.add_argument("--scale", type=float, default=1.0, help="multiply the weight by this factor")
    if "top" in extra:
        sp.add_argument("--top", type=float, default=1.0, help="outer radius of I(eps, top)")
    if "q" in extra:
        sp.add_argument("--q", type=float, default=1.0, help="growth exponent q < p")
    if "scan" in extra:
        sp.add_argument("--psi", default="inverse", help="inverse (1/t) or fmo")
        sp.add_argument("--eps0", type=float, default=0.3, help="cut-off of the fmo psi")
        sp.add_argument("--alpha", type=float, default=1.0, help="growth exponent alpha <= p")
        sp.add_argument("--c", type=float, help="growth constant (default: smallest feasible on the grid)")
        sp.add_argument("--radii", type=float_list, help="probe radii, comma separated")
    if "tolerance" in extra or "scan" in extra:
        sp.add_argument("--tolerance", type=float, default=1e-12 if name == "sharpness" else 1e-9,
                        help="relative tolerance of the verdict")
    if "case" in extra:
        sp.add_argument("--case", choices=("stretch", "identity"), default="stretch")
        sp.add_argument("--a", type=float, default=2.0, help="stretch exponent")
        sp.add_argument("--radii", type=float_list, help="probe radii, comma separated")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ringbounds", description="Bounds for ring (p,Q)-mappings on spherical rings.")
    parser.add_argument("--version", action="version", version=f"ringbounds {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        _add_options(sp, name)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        if name in action.choices:
            return action.choices[name]
    raise UsageError(f"unknown command {name!r}")


def _config_tokens(path: str, command: str, sp: argparse.ArgumentParser) -> list[str]:
    """Turn the [common] and [command] sections of an INI file into argv tokens."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        cp.read_string(text, source=path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise UsageError(f"config {path}: {' '.join(str(exc).split())}") from None
    known = {s for s in COMMANDS} | {"common"}
    for section in cp.sections():
        if section not in known:
            raise UsageError(f"config {path}: unknown section [{section}]")
    options = sp._option_string_actions  # noqa: SLF001
    tokens: list[str] = []
    for section in ("common", command):
        if not cp.has_section(section):
            continue
        for key, value in cp.items(section):
            flag = "--" + key.replace("_", "-")
            if flag not in options or key in ("config", "out", "csv", "help"):
                line = _line_of(text, key)
                raise UsageError(f"config {path}:{line}: [{section}] unknown key '{key}'")
            tokens += [flag, value]
    return tokens


def _line_of(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return i
    return 0


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def _write_csv(path: str, rows: list[dict]) -> None:
    fields: list[str] = []
    for row in rows:
        fields += [k for k in row if k not in fields]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields or ["r", "bound", "measured", "slack"])
        w.writeheader()
        for row in _clean(rows):
            w.writerow(row)


def _diag(kind: str, message: str) -> None:
    print(f"ringbounds: {kind}: {' '.join(str(message).split())}", file=sys.stderr)


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        first = parser.parse_args(argv)
        if first.command is None:
            raise UsageError("a command is required; see --help")
        if first.config:
            sp = _subparser(parser, first.command)
            tokens = _config_tokens(first.config, first.command, sp)
            idx = argv.index(first.command)
            # Flags after the file's tokens win, so precedence is defaults < file < flags.
            argv = argv[: idx + 1] + tokens + argv[idx + 1:]
            args = parser.parse_args(argv)
        else:
            args = first
        args.seed_value = _resolve_seed(args)
    except UsageError as exc:
        _diag("usage error", exc)
        return EXIT_USAGE

    resolved = {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "out", "csv", "seed_value")}
    resolved["seed"] = args.seed_value
    params = None
    try:
        if args.command != "sharpness" and args.n is not None:
            params = _params(args)
        elif args.command == "sharpness":
            n = args.n if args.n is not None else 3
            params = Params(n, float(n))
    except (DomainError, UsageError) as exc:
        _diag("usage error", exc)
        return EXIT_USAGE
    rep = Report(args.command, resolved, args.seed_value, params)
    func = COMMANDS[args.command][0]
    code = EXIT_OK
    try:
        if hasattr(args, "r1") and (args.r1 is None or args.r2 is None):
            raise UsageError("--r1 and --r2 are required")
        func(args, rep)
        if rep.verdict == "fail":
            code = EXIT_HYPOTHESIS
    except (UsageError, DomainError) as exc:
        _diag("usage error", exc)
        return EXIT_USAGE
    except (HypothesisViolated, DataError) as exc:
        rep.verdict = "hypothesis-violated"
        rep.diagnostics.append(" ".join(str(exc).split()))
        _diag("hypothesis violated", exc)
        code = EXIT_HYPOTHESIS
    except NotConvergedError as exc:
        rep.verdict = "not-converged"
        rep.diagnostics.append(" ".join(str(exc).split()))
        _diag("not converged", exc)
        code = EXIT_NOT_CONVERGED
    except RingBoundsError as exc:
        _diag("error", exc)
        return EXIT_USAGE

    text = json.dumps(rep.as_dict(), indent=2, allow_nan=False)
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        if args.csv:
            _write_csv(args.csv, rep.tables)
    except OSError as exc:
        _diag("usage error", f"cannot write output: {exc}")
        return EXIT_USAGE
    return code


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
