"""Batch command-line front end: ``clcons {check-system,generate,analyze,sweep}``.

Every command reads an optional JSON config (``--config``); flags given on
the command line override the file.  Unknown config keys are rejected.
Each run writes a JSON report that embeds the fully resolved config, the
package version and, where a field is involved, the grid metadata and the
snapped epsilon values.

Exit codes: 0 pass, 1 analysis threshold failure, 2 configuration error,
3 runtime domain violation (including solver aborts).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.integrate import quad

from . import __version__
from .analysis import (
    ScalingReport,
    commutator_scaling,
    companion_residual_mollified,
    companion_residual_scaling,
    companion_weak_residual,
    dissipation_density,
    flux_commutator,
    gradient_scaling,
    integration_by_parts_bound,
    mollification_error_scaling,
    quadrature_tolerance,
    vmo_modulus,
    vmo_scaling,
)
from .generators import GeneratorSpec, SolverAbort, generate
from .grid import (Field, Grid, TestFunction, field_norm_p, make_grid, make_region, read_clf,
                   write_clf)
from .mollify import dyadic_epsilons, make_kernel, mollified_derivative, mollify, snap_epsilon
from .systems import (
    DomainError,
    SystemSpec,
    compatibility_residual,
    finite_difference_check,
    flux_gradient_holder_estimate,
    growth_check,
    make_system,
    random_states,
)

EXIT_OK, EXIT_THRESHOLD, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3

COMMANDS = ("check-system", "generate", "analyze", "sweep")
QUANTITIES = ("mollification_error", "gradient_norm", "vmo_modulus", "commutator_norm",
              "companion_residual", "weak_residual")

_NESTED_KEYS = {
    "system": {"name", "parameters", "path"},
    "generator": {"kind", "parameters"},
    "grid": {"points", "extent", "periodic", "origin"},
    "dyadic": {"lo", "hi"},
    "exponents": {"p", "q", "s", "gamma"},
    "test_function": {"center", "radius", "amplitude"},
}
_THRESHOLD_KEYS = {
    "compatibility": {"max"},
    "finite_difference": {"max"},
    "growth": {"constant"},
    "holder": {"max"},
    **{q: {"min_slope", "max_slope", "min_ratio_slope", "max_value", "min_value",
           "target_factor", "rel_tol"} for q in QUANTITIES},
}
DEFAULT_THRESHOLDS = {"compatibility": {"max": 1e-8}, "finite_difference": {"max": 1e-5}}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (exit code 2)."""


@dataclass
class RunConfig:
    """Everything a run needs; serialised verbatim into its report."""

    command: str
    system: dict = dc_field(default_factory=lambda: {"name": "burgers", "parameters": {}})
    generator: dict | None = None
    grid: dict | None = None
    epsilons: list | None = None
    dyadic: dict | None = None
    exponents: dict = dc_field(default_factory=dict)
    region_margin: float | list | None = None
    test_function: dict | None = None
    quantities: list = dc_field(default_factory=list)
    thresholds: dict = dc_field(default_factory=dict)
    input: str | None = None
    output: str | None = None
    seed: int = 0
    samples: int = 1000
    jobs: int = 1
    kernel_profile: str = "bump"
    scaling_only: bool = False
    force: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, allowed in _NESTED_KEYS.items():
            sub = data.get(key)
            if sub is None:
                continue
            if not isinstance(sub, dict):
                raise ConfigError(f"config key {key!r} must be an object")
            bad = set(sub) - allowed
            if bad:
                raise ConfigError(f"unknown keys in {key!r}: {sorted(bad)}")
        for name, spec in (data.get("thresholds") or {}).items():
            if name not in _THRESHOLD_KEYS:
                raise ConfigError(f"unknown threshold target {name!r}")
            bad = set(spec) - _THRESHOLD_KEYS[name]
            if bad:
                raise ConfigError(f"unknown keys in thresholds[{name!r}]: {sorted(bad)}")
        if "command" not in data:
            raise ConfigError("config lacks 'command'")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for q in self.quantities:
            if q not in QUANTITIES:
                raise ConfigError(f"unknown quantity {q!r}; choose from {QUANTITIES}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.epsilons is not None and self.dyadic is not None:
            raise ConfigError("give either 'epsilons' or 'dyadic', not both")
        if "name" not in self.system:
            raise ConfigError("system needs a 'name'")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# --- argument parsing ---------------------------------------------------------

def _json_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _key_values(items: Sequence[str] | None, flag: str) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"{flag} expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = _json_value(v)
    return out


def _bool_list(items):
    table = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}
    try:
        return [table[str(x).lower()] for x in items]
    except KeyError as exc:
        raise ConfigError(f"cannot read {exc.args[0]!r} as a boolean") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; flags override its entries")
    common.add_argument("--system", help="burgers | euler | psystem | custom")
    common.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help="system parameter (value parsed as JSON when possible)")
    common.add_argument("--system-file", help="JSON description of a custom system")
    common.add_argument("--generator", help="generator kind")
    common.add_argument("--gen-param", action="append", metavar="KEY=VALUE",
                        help="generator parameter")
    common.add_argument("--points", type=int, nargs="+", help="grid points per axis")
    common.add_argument("--extent", type=float, nargs="+", help="grid extent per axis")
    common.add_argument("--periodic", nargs="+", help="periodicity per axis (true/false)")
    common.add_argument("--origin", type=float, nargs="+", help="grid origin per axis")
    common.add_argument("--epsilons", type=float, nargs="+", help="explicit epsilon list")
    common.add_argument("--dyadic", type=float, nargs=2, metavar=("LO", "HI"),
                        help="dyadic epsilon window")
    common.add_argument("--p", type=float, help="integrability exponent p")
    common.add_argument("--q", type=float, help="commutator exponent q")
    common.add_argument("--s", type=float, help="smoothness exponent s")
    common.add_argument("--gamma", type=float, help="override the system's Holder exponent")
    common.add_argument("--margin", type=float, nargs="+", help="interior region margin")
    common.add_argument("--tf-center", type=float, nargs="+", help="test function centre")
    common.add_argument("--tf-radius", type=float, nargs="+", help="test function radii")
    common.add_argument("--quantities", nargs="+", help=f"any of {', '.join(QUANTITIES)}")
    common.add_argument("--threshold", action="append", metavar="TARGET.KEY=VALUE",
                        help="threshold, e.g. commutator_norm.min_slope=0.6")
    common.add_argument("--input", help="input .clf field")
    common.add_argument("--output", help="output path (file, or directory for sweep)")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int, help="random states for check-system")
    common.add_argument("--jobs", type=int, help="parallel sweep points (default $CLCONS_JOBS or 1)")
    common.add_argument("--kernel-profile", choices=("bump", "tensor_bump"))
    common.add_argument("--scaling-only", action="store_true", default=None,
                        help="label residual sweeps on synthetic (non-solution) fields")
    common.add_argument("--force", action="store_true", default=None,
                        help="overwrite existing outputs")

    parser = argparse.ArgumentParser(prog="clcons", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"clcons {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check-system", parents=[common],
                   help="validate compatibility, growth and flux regularity of a system")
    sub.add_parser("generate", parents=[common], help="write a generated field to .clf")
    sub.add_parser("analyze", parents=[common], help="evaluate quantities at a single epsilon")
    sub.add_parser("sweep", parents=[common], help="sweep quantities over epsilon and fit slopes")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge config file and flags (flags win)."""
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if data.get("command", args.command) != args.command:
            raise ConfigError(f"config is for {data['command']!r}, not {args.command!r}")
    data["command"] = args.command

    system = dict(data.get("system") or {"name": "burgers"})
    system.setdefault("parameters", {})
    if args.system:
        if args.system != system.get("name"):
            system = {"name": args.system, "parameters": {}}
    if args.param:
        system["parameters"] = {**system["parameters"], **_key_values(args.param, "--param")}
    if args.system_file:
        system["path"] = args.system_file
    data["system"] = system

    if args.generator or args.gen_param:
        gen = dict(data.get("generator") or {})
        if args.generator:
            if args.generator != gen.get("kind"):
                gen = {"kind": args.generator, "parameters": {}}
        gen.setdefault("parameters", {})
        gen["parameters"] = {**gen["parameters"], **_key_values(args.gen_param, "--gen-param")}
        data["generator"] = gen

    grid_flags = {"points": args.points, "extent": args.extent, "origin": args.origin,
                  "periodic": _bool_list(args.periodic) if args.periodic else None}
    if any(v is not None for v in grid_flags.values()):
        grid = dict(data.get("grid") or {})
        grid.update({k: v for k, v in grid_flags.items() if v is not None})
        data["grid"] = grid

    if args.epsilons is not None:
        data["epsilons"], data["dyadic"] = args.epsilons, None
    if args.dyadic is not None:
        data["dyadic"], data["epsilons"] = {"lo": args.dyadic[0], "hi": args.dyadic[1]}, None

    exps = dict(data.get("exponents") or {})
    for k in ("p", "q", "s", "gamma"):
        if getattr(args, k) is not None:
            exps[k] = getattr(args, k)
    data["exponents"] = exps

    if args.margin is not None:
        data["region_margin"] = args.margin[0] if len(args.margin) == 1 else args.margin
    if args.tf_center is not None or args.tf_radius is not None:
        tf = dict(data.get("test_function") or {})
        if args.tf_center is not None:
            tf["center"] = args.tf_center
        if args.tf_radius is not None:
            tf["radius"] = args.tf_radius
        data["test_function"] = tf
    if args.quantities is not None:
        data["quantities"] = args.quantities
    if args.threshold:
        th = {k: dict(v) for k, v in (data.get("thresholds") or {}).items()}
        for key, value in _key_values(args.threshold, "--threshold").items():
            target, _, name = key.partition(".")
            if not name:
                raise ConfigError(f"--threshold expects TARGET.KEY=VALUE, got {key!r}")
            th.setdefault(target, {})[name] = value
        data["thresholds"] = th

    for flag, key in (("input", "input"), ("output", "output"), ("seed", "seed"),
                      ("samples", "samples"), ("kernel_profile", "kernel_profile"),
                      ("scaling_only", "scaling_only"), ("force", "force"), ("jobs", "jobs")):
        v = getattr(args, flag)
        if v is not None:
            data[key] = v
    if "jobs" not in data:
        env = os.environ.get("CLCONS_JOBS")
        if env:
            try:
                data["jobs"] = int(env)
            except ValueError:
                raise ConfigError(f"CLCONS_JOBS must be an integer, got {env!r}") from None
    return RunConfig.from_dict(data)


# --- shared helpers -------------------------------------------------------------

def _build_system(cfg: RunConfig) -> SystemSpec:
    s = cfg.system
    params = dict(s.get("parameters") or {})
    if s["name"] == "custom" and "path" in s:
        params.setdefault("path", s["path"])
    try:
        system = make_system(s["name"], **params)
    except (ValueError, TypeError, KeyError, OSError) as exc:
        raise ConfigError(f"cannot build system {s['name']!r}: {exc}") from None
    gamma = cfg.exponents.get("gamma")
    if gamma is not None:
        system = dataclasses.replace(system, gamma=float(gamma))
    return system


def _build_grid(cfg: RunConfig) -> Grid | None:
    g = cfg.grid
    if g is None:
        return None
    if "points" not in g:
        raise ConfigError("grid needs 'points'")
    points = list(g["points"])
    extent = list(g.get("extent") or [1.0] * len(points))
    periodic = g.get("periodic")
    periodic = [True] * len(points) if periodic is None else _bool_list(periodic)
    try:
        return make_grid(points, extent, periodic, g.get("origin"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad grid: {exc}") from None


def _load_field(cfg: RunConfig) -> Field:
    if not cfg.input:
        raise ConfigError("this command needs an input field (--input)")
    try:
        return read_clf(cfg.input)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read field {cfg.input}: {exc}") from None


def _resolve_epsilons(cfg: RunConfig, grid: Grid) -> list[float]:
    if cfg.epsilons is not None:
        raw = [float(e) for e in cfg.epsilons]
    elif cfg.dyadic is not None:
        raw = dyadic_epsilons(grid, cfg.dyadic.get("lo"), cfg.dyadic.get("hi"))
    else:
        raw = dyadic_epsilons(grid)
    if not raw:
        raise ConfigError("no epsilon values")
    return sorted({snap_epsilon(grid, e) for e in raw}, reverse=True)


def _region(cfg: RunConfig, grid: Grid, epsilons: Sequence[float]):
    margin = max(epsilons) if cfg.region_margin is None else cfg.region_margin
    return make_region(grid, margin)


def _test_function(cfg: RunConfig, grid: Grid) -> TestFunction:
    """Configured bump, or the standard one: centred, radius a quarter of each extent."""
    tf = cfg.test_function or {}
    center = tf.get("center") or [o + 0.5 * L for o, L in zip(grid.origin_per_axis,
                                                               grid.extent_per_axis)]
    radius = tf.get("radius") or [0.25 * L for L in grid.extent_per_axis]
    if len(center) != grid.dim_count or len(radius) != grid.dim_count:
        raise ConfigError("test function centre/radius must match the grid dimension")
    return TestFunction(center, radius, tf.get("amplitude", 1.0))


def centre_line_integral(tf: TestFunction) -> float:
    """``int phi(t, x_c) dt`` along the first axis through the bump centre."""
    r = tf.radius_per_axis[0]
    psi = quad(lambda y: math.exp(-1.0 / (1.0 - y * y)), -1.0, 1.0, epsabs=1e-14)[0]
    return tf.amplitude * r * psi * math.exp(-(len(tf.center) - 1))


def _check_component_count(field: Field, system: SystemSpec) -> None:
    if field.component_count != system.n:
        raise ConfigError(f"field has {field.component_count} components but "
                          f"{system.name} needs {system.n}")


def _write_json(path: Path, payload: dict, force: bool) -> None:
    if path.exists() and not force:
        raise ConfigError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, default=_jsonable))


def _jsonable(obj):
    if isinstance(obj, (np.generic,)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _envelope(cfg: RunConfig, **extra) -> dict:
    return {"version": __version__, "config": cfg.to_dict(), **extra}


def _emit(cfg: RunConfig, payload: dict) -> None:
    if cfg.output:
        _write_json(Path(cfg.output), payload, cfg.force)
    else:
        print(json.dumps(payload, indent=2, default=_jsonable))


def _apply_value_thresholds(name: str, value: float, th: dict, failures: list[str]) -> None:
    if "max_value" in th and not value <= th["max_value"]:
        failures.append(f"{name}: value {value:.6g} > max_value {th['max_value']}")
    if "min_value" in th and not value >= th["min_value"]:
        failures.append(f"{name}: value {value:.6g} < min_value {th['min_value']}")


# --- commands --------------------------------------------------------------------

def cmd_check_system(cfg: RunConfig) -> int:
    system = _build_system(cfg)
    box = system.sample_box
    states = random_states(box, cfg.samples, cfg.seed)
    compat, worst = compatibility_residual(system, states, return_worst=True)
    fd = finite_difference_check(system, states)
    th = {**DEFAULT_THRESHOLDS, **cfg.thresholds}
    growth = growth_check(system, states, constant=th.get("growth", {}).get("constant"))

    # pairs at separations spanning several decades, kept inside the sample box
    rng = np.random.default_rng(cfg.seed + 1)
    dirs = rng.normal(size=states.shape)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    scales = 10.0 ** -rng.integers(1, 7, size=len(states))
    partners = box.clamp(states + dirs * scales[:, None])
    keep = np.linalg.norm(partners - states, axis=1) > 0
    pairs = np.stack([states[keep], partners[keep]], axis=1)
    holder = flux_gradient_holder_estimate(system, pairs)

    failures = []
    if compat > th["compatibility"]["max"]:
        failures.append(f"compatibility residual {compat:.3e} at j={worst['j']}, "
                        f"alpha={worst['alpha']}, state={worst['state']}")
    fd_worst = max(fd.values())
    if fd_worst > th["finite_difference"]["max"]:
        failures.append(f"finite-difference gradient mismatch {fd_worst:.3e}")
    if not growth.passed:
        failures.append(f"growth ratio {growth.max_ratio:.4g} exceeds constant {growth.constant:.4g}")
    holder_max = th.get("holder", {}).get("max", math.inf)
    if not (math.isfinite(holder) and holder <= holder_max):
        failures.append(f"flux-gradient Holder estimate {holder:.4g} exceeds {holder_max}")

    report = _envelope(
        cfg, system=system.describe(),
        compatibility={"max_residual": compat, "worst": worst,
                       "threshold": th["compatibility"]["max"]},
        finite_difference={**fd, "threshold": th["finite_difference"]["max"]},
        growth=dataclasses.asdict(growth),
        holder={"estimate": holder, "gamma": system.gamma, "pairs": int(len(pairs)),
                "threshold": holder_max},
        failures=failures, passed=not failures)
    _emit(cfg, report)
    for f in failures:
        print(f"FAIL: {f}", file=sys.stderr)
    return EXIT_THRESHOLD if failures else EXIT_OK


def cmd_generate(cfg: RunConfig) -> int:
    if not cfg.generator or "kind" not in cfg.generator:
        raise ConfigError("generate needs a generator kind (--generator)")
    if not cfg.output:
        raise ConfigError("generate needs --output")
    out = Path(cfg.output)
    meta = out.with_name(out.name + ".json")
    if not cfg.force:
        for p in (out, meta):
            if p.exists():
                raise ConfigError(f"{p} exists; pass --force to overwrite")
    params = dict(cfg.generator.get("parameters") or {})
    kind = cfg.generator["kind"]
    if kind in ("weierstrass", "smooth_modes"):
        params.setdefault("seed", cfg.seed)
    grid = _build_grid(cfg)
    system = _build_system(cfg) if kind == "fv_solve" else None
    if kind != "fv_solve" and grid is None:
        raise ConfigError(f"generator {kind!r} needs a grid (--points/--extent/--periodic)")
    try:
        spec = GeneratorSpec(kind, params)
        field = generate(spec, grid, system)
    except (DomainError, SolverAbort):
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"generator {kind!r}: {exc}") from None
    write_clf(field, out, overwrite=True)
    _write_json(meta, _envelope(cfg, grid=field.grid.to_dict(),
                                component_count=field.component_count), force=True)
    return EXIT_OK


def _quantity_at(name: str, cfg: RunConfig, system: SystemSpec, field: Field, eps: float,
                 region, tf: TestFunction | None) -> dict:
    p = float(cfg.exponents.get("p", 3.0))
    q = float(cfg.exponents.get("q", 1.5))
    prof = cfg.kernel_profile
    if name == "weak_residual":
        return _weak_residual_entry(system, field, tf)
    k = make_kernel(field.grid, eps, prof)
    if name == "mollification_error":
        m = mollify(field, k, region)
        diff = Field(m.grid, m.values - field.values[region.slices])
        return {"value": float(field_norm_p(diff, p)), "p": p}
    if name == "gradient_norm":
        g = max(float(field_norm_p(mollified_derivative(field, k, a, region), p))
                for a in range(field.grid.dim_count))
        bound = vmo_modulus(field, p, eps, region) ** (1 / p) * eps ** (-(1 - 1 / p))
        return {"value": g, "bound": bound, "p": p}
    if name == "vmo_modulus":
        return {"value": vmo_modulus(field, p, eps, region), "p": p}
    if name == "commutator_norm":
        C = flux_commutator(system, field, k, region)
        pv = q * (system.gamma + 1)
        return {"value": float(np.max(field_norm_p(C, q, per_component=True))),
                "bound": (eps * vmo_modulus(field, pv, eps, region)) ** (1 / q), "q": q}
    if name == "companion_residual":
        r = companion_residual_mollified(system, field, k, tf, region)
        dis = dissipation_density(system, field, k, region).integrate(tf)
        return {"value": r, "dissipation_integral": dis,
                "integration_by_parts_bound": integration_by_parts_bound(system, field, k, tf, region)}
    raise ConfigError(f"unknown quantity {name!r}")


def _weak_residual_entry(system: SystemSpec, field: Field, tf: TestFunction) -> dict:
    return {"value": companion_weak_residual(system, field, tf),
            "quadrature_tolerance": quadrature_tolerance(system, field, tf),
            "centre_line_integral": centre_line_integral(tf),
            "test_function": {"center": list(tf.center), "radius": list(tf.radius_per_axis),
                              "amplitude": tf.amplitude}}


def _weak_residual_thresholds(entry: dict, th: dict, failures: list[str]) -> None:
    _apply_value_thresholds("weak_residual", entry["value"], th, failures)
    if "target_factor" in th:
        target = th["target_factor"] * entry["centre_line_integral"]
        rel = abs(entry["value"] - target) / abs(target) if target else math.inf
        entry["target"], entry["relative_error"] = target, rel
        if rel > th.get("rel_tol", 0.02):
            failures.append(f"weak_residual: {entry['value']:.6g} differs from target "
                            f"{target:.6g} by {rel:.3%}")


def _field_setup(cfg: RunConfig):
    field = _load_field(cfg)
    system = _build_system(cfg)
    _check_component_count(field, system)
    quantities = cfg.quantities or ["gradient_norm"]
    needs_tf = {"companion_residual", "weak_residual"} & set(quantities)
    if needs_tf and field.grid.dim_count != system.d + 1:
        raise ConfigError(f"{sorted(needs_tf)} need a space-time field with "
                          f"{system.d + 1} axes; input has {field.grid.dim_count}")
    tf = _test_function(cfg, field.grid) if needs_tf else None
    return field, system, quantities, tf


def cmd_analyze(cfg: RunConfig) -> int:
    field, system, quantities, tf = _field_setup(cfg)
    eps_list = _resolve_epsilons(cfg, field.grid)
    if cfg.epsilons is None or len(eps_list) != 1:
        raise ConfigError("analyze evaluates a single epsilon; pass exactly one with --epsilons")
    eps = eps_list[0]
    region = _region(cfg, field.grid, eps_list)
    if tf is not None:
        tf.check_inside(region)
    results, failures = {}, []
    for name in quantities:
        entry = _quantity_at(name, cfg, system, field, eps, region, tf)
        th = cfg.thresholds.get(name, {})
        if name == "weak_residual":
            _weak_residual_thresholds(entry, th, failures)
        else:
            _apply_value_thresholds(name, abs(entry["value"]), th, failures)
        results[name] = entry
    _emit(cfg, _envelope(cfg, grid=field.grid.to_dict(), epsilon=eps, region=region.describe(),
                         results=results, failures=failures, passed=not failures))
    return EXIT_THRESHOLD if failures else EXIT_OK


def _sweep_quantity(name: str, cfg: RunConfig, system: SystemSpec, field: Field,
                    eps: list[float], region, tf: TestFunction | None) -> ScalingReport:
    p = float(cfg.exponents.get("p", 3.0))
    q = float(cfg.exponents.get("q", 1.5))
    kw = dict(region=region, snap=False, jobs=cfg.jobs)
    prof = cfg.kernel_profile
    if name == "mollification_error":
        return mollification_error_scaling(field, p, eps, prof, **kw)
    if name == "gradient_norm":
        return gradient_scaling(field, p, prof, eps, **kw)
    if name == "vmo_modulus":
        return vmo_scaling(field, p, eps, **kw)
    if name == "commutator_norm":
        return commutator_scaling(system, field, q, eps, kernel_profile=prof, **kw)
    if name == "companion_residual":
        return companion_residual_scaling(system, field, tf, eps, kernel_profile=prof,
                                          scaling_only=cfg.scaling_only, **kw)
    raise ConfigError(f"unknown quantity {name!r}")


def _slope_thresholds(rep: ScalingReport, th: dict, failures: list[str]) -> None:
    name = rep.quantity_name
    if rep.degenerate:
        return
    for key, slope, cmp in (("min_slope", rep.slope, lambda a, b: a >= b),
                            ("max_slope", rep.slope, lambda a, b: a <= b),
                            ("min_ratio_slope", rep.ratio_slope, lambda a, b: a >= b)):
        if key in th:
            if slope is None or not cmp(slope, th[key]):
                failures.append(f"{name}: {key} {th[key]} violated (slope {slope})")
    if rep.passed is False:
        failures.append(f"{name}: ratio to its bound degrades (ratio slope {rep.ratio_slope:.3f})")


def cmd_sweep(cfg: RunConfig) -> int:
    field, system, quantities, tf = _field_setup(cfg)
    eps = _resolve_epsilons(cfg, field.grid)
    if cfg.region_margin is None and not all(field.grid.periodic_per_axis):
        for k, per in enumerate(field.grid.periodic_per_axis):
            if not per and 2 * max(eps) >= field.grid.extent_per_axis[k]:
                raise ConfigError(f"region too small for max epsilon {max(eps):g} on axis {k}")
    region = _region(cfg, field.grid, eps)
    if tf is not None:
        tf.check_inside(region)
    outdir = Path(cfg.output) if cfg.output else None
    if outdir is not None and (outdir / "report.json").exists() and not cfg.force:
        raise ConfigError(f"{outdir / 'report.json'} exists; pass --force to overwrite")
    results, failures = {}, []
    for name in quantities:
        th = cfg.thresholds.get(name, {})
        if name == "weak_residual":
            entry = _weak_residual_entry(system, field, tf)
            _weak_residual_thresholds(entry, th, failures)
            results[name] = entry
            continue
        rep = _sweep_quantity(name, cfg, system, field, eps, region, tf)
        _slope_thresholds(rep, th, failures)
        if outdir is not None:
            outdir.mkdir(parents=True, exist_ok=True)
            rep.to_csv(outdir / f"{name}.csv")
        results[name] = rep.to_dict()
    payload = _envelope(cfg, grid=field.grid.to_dict(), epsilons=eps, region=region.describe(),
                        results=results, failures=failures, passed=not failures)
    if outdir is not None:
        _write_json(outdir / "report.json", payload, force=True)
    else:
        print(json.dumps(payload, indent=2, default=_jsonable))
    for f in failures:
        print(f"FAIL: {f}", file=sys.stderr)
    return EXIT_THRESHOLD if failures else EXIT_OK


COMMAND_TABLE = {"check-system": cmd_check_system, "generate": cmd_generate,
                 "analyze": cmd_analyze, "sweep": cmd_sweep}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMAND_TABLE[cfg.command](cfg)
    except (DomainError, SolverAbort) as exc:
        msg = str(exc)
        when = getattr(exc, "time", None)
        if when is not None and "t=" not in msg:
            msg = f"{msg} (t={when:.6g})"
        if not msg.startswith("domain violation"):
            msg = f"domain violation: {msg}"
        print(msg, file=sys.stderr)
        return EXIT_DOMAIN
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError, FileExistsError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
