"""Regularity moduli, flux commutators and companion-law residuals.

Every epsilon-dependent quantity here is a discrete analogue of an integral
over an interior region kept at least epsilon away from bounded edges, and
ends up in a :class:`ScalingReport` when swept over epsilon.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .grid import Field, InteriorRegion, TestFunction, field_norm_p, make_region, shift_field
from .mollify import Kernel, make_kernel, mollified_derivative, mollify, snap_epsilon
from .systems import SystemSpec, _check_support_in_grid

__all__ = [
    "LogLogFit",
    "ScalingReport",
    "BesovEstimate",
    "DissipationField",
    "fit_loglog_exponent",
    "besov_seminorm",
    "vmo_modulus",
    "ball_offsets",
    "gradient_scaling",
    "mollification_error_scaling",
    "vmo_scaling",
    "flux_commutator",
    "commutator_scaling",
    "companion_residual_mollified",
    "companion_residual_scaling",
    "companion_weak_residual",
    "quadrature_tolerance",
    "dissipation_density",
    "integration_by_parts_bound",
]

ZERO_TOL = 1e-12
RATIO_SLOPE_FLOOR = -0.1


class LogLogFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


def fit_loglog_exponent(pairs: Sequence[tuple[float, float]]) -> LogLogFit:
    """Least-squares line through ``(log eps, log value)`` for positive values."""
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    arr = arr[(arr[:, 0] > 0) & (arr[:, 1] > 0)]
    if len(arr) < 3:
        raise ValueError("need at least 3 pairs with positive values")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((y - intercept - slope * x) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return LogLogFit(slope, intercept, r2)


@dataclass
class ScalingReport:
    """Measured quantity against epsilon, with optional bound and fits.

    ``pairs`` are sorted by epsilon, largest first.
    """

    quantity_name: str
    epsilons: list[float]
    values: list[float]
    bounds: list[float] | None = None
    fit: LogLogFit | None = None
    ratio_fit: LogLogFit | None = None
    region: dict = dc_field(default_factory=dict)
    parameters: dict = dc_field(default_factory=dict)
    flags: list[str] = dc_field(default_factory=list)
    passed: bool | None = None

    def __post_init__(self):
        order = np.argsort(self.epsilons)[::-1]
        self.epsilons = [float(self.epsilons[i]) for i in order]
        self.values = [float(self.values[i]) for i in order]
        if self.bounds is not None:
            self.bounds = [float(self.bounds[i]) for i in order]
        if any(not math.isfinite(v) or v < 0 for v in self.values):
            raise ValueError("report values must be finite and non-negative")

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.epsilons, self.values))

    @property
    def ratios(self) -> list[float] | None:
        if self.bounds is None:
            return None
        return [v / b if b > 0 else math.nan for v, b in zip(self.values, self.bounds)]

    @property
    def degenerate(self) -> bool:
        return max(self.values, default=0.0) <= ZERO_TOL

    @property
    def slope(self) -> float | None:
        return None if self.fit is None else self.fit.slope

    @property
    def ratio_slope(self) -> float | None:
        return None if self.ratio_fit is None else self.ratio_fit.slope

    def refit(self) -> "ScalingReport":
        """Fill ``fit`` / ``ratio_fit`` and degeneracy flags from the data."""
        if self.degenerate:
            if "degenerate: identically zero" not in self.flags:
                self.flags.append("degenerate: identically zero")
            self.fit = self.ratio_fit = None
            return self
        try:
            self.fit = fit_loglog_exponent(self.pairs)
        except ValueError as exc:
            self.flags.append(f"no fit: {exc}")
        if self.bounds is not None:
            rp = [(e, r) for e, r in zip(self.epsilons, self.ratios) if math.isfinite(r)]
            try:
                self.ratio_fit = fit_loglog_exponent(rp)
            except ValueError as exc:
                self.flags.append(f"no ratio fit: {exc}")
        return self

    def to_dict(self) -> dict:
        fit = lambda f: None if f is None else f._asdict()  # noqa: E731
        return {
            "quantity_name": self.quantity_name,
            "pairs": [{"epsilon": e, "value": v, "bound": b, "ratio": r}
                      for e, v, b, r in self._rows()],
            "fit": fit(self.fit),
            "ratio_fit": fit(self.ratio_fit),
            "region": self.region,
            "parameters": self.parameters,
            "flags": list(self.flags),
            "passed": self.passed,
        }

    def _rows(self):
        bounds = self.bounds or [None] * len(self.values)
        ratios = self.ratios or [None] * len(self.values)
        return list(zip(self.epsilons, self.values, bounds, ratios))

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, default=_json_default)
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "value", "bound", "ratio"])
            for row in self._rows():
                w.writerow(["" if x is None else repr(float(x)) for x in row])


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


# --- Besov and VMO moduli -----------------------------------------------------

class BesovEstimate(NamedTuple):
    seminorm: float
    worst_shift: tuple[int, ...]


def _lattice_offsets(grid, radius: float, include_zero: bool) -> np.ndarray:
    h = np.asarray(grid.spacing_per_axis)
    r = [int(math.floor(radius / hk * (1 + 1e-12))) for hk in h]
    axes = [np.arange(-rk, rk + 1) for rk in r]
    offs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.dim_count)
    length = np.sqrt(np.sum((offs * h) ** 2, axis=1))
    keep = length <= radius * (1 + 1e-12)
    if not include_zero:
        keep &= length > 0
    return offs[keep]


def ball_offsets(grid, epsilon: float) -> np.ndarray:
    """Lattice offsets in the closed epsilon ball, centre included."""
    return _lattice_offsets(grid, epsilon, include_zero=True)


def besov_seminorm(field: Field, p: float, s: float, region: InteriorRegion | None = None,
                   max_shift_length: float | None = None) -> BesovEstimate:
    """``max |x'|^(-s) ||u - u(. - x')||_p`` over lattice shifts ``0 < |x'| <= max_shift``.

    On bounded axes the norm only counts points where both samples exist.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    grid = field.grid
    if max_shift_length is None:
        max_shift_length = min(grid.extent_per_axis) / 4
    if max_shift_length < min(grid.spacing_per_axis) * (1 - 1e-12):
        raise ValueError("max_shift_length below grid spacing: empty shift set")
    offs = _lattice_offsets(grid, max_shift_length, include_zero=False)
    if len(offs) == 0:
        raise ValueError("empty shift set")
    h = np.asarray(grid.spacing_per_axis)
    best, worst = -1.0, None
    for off in offs:
        sh = shift_field(field, off)
        diff = Field(grid, field.values - sh.values, sh.mask)
        val = float(field_norm_p(diff, p, region)) / float(np.linalg.norm(off * h)) ** s
        if val > best:
            best, worst = val, tuple(int(o) for o in off)
    return BesovEstimate(best, worst)


def _roll(values, off):
    out = values
    for k, o in enumerate(off):
        if o:
            out = np.roll(out, int(o), axis=k)
    return out


def vmo_modulus(field: Field, p: float, epsilon: float,
                region: InteriorRegion | None = None) -> float:
    """``(1/eps) sum_x vol * mean_{|y-x|<=eps} |u(x) - u(y)|^p`` over the region.

    The ball average runs over all lattice points of the closed ball,
    centre included.
    """
    grid = field.grid
    if region is None:
        region = make_region(grid, epsilon)
    offs = ball_offsets(grid, epsilon)
    if len(offs) < 2:
        raise ValueError("epsilon ball contains fewer than 2 lattice points")
    reach = np.abs(offs).max(axis=0)
    for k in range(grid.dim_count):
        if not grid.periodic_per_axis[k] and region.index_margin(k) < reach[k]:
            raise ValueError(f"region margin too small for epsilon on axis {k}")
    u = field.values
    sl = region.slices
    centre = u[sl]
    acc = np.zeros(region.shape)
    for off in offs:
        d = centre - _roll(u, -off)[sl]
        acc += np.linalg.norm(d, axis=-1) ** p
    return float(acc.sum() / len(offs) * grid.cell_volume / epsilon)


# --- sweeps -------------------------------------------------------------------

def _sweep(fn: Callable[[float], tuple], epsilons, jobs: int):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, epsilons))
    return [fn(e) for e in epsilons]


def _prepare_sweep(field: Field, epsilons, region, snap: bool):
    eps = sorted({snap_epsilon(field.grid, e) if snap else float(e) for e in epsilons}, reverse=True)
    if region is None:
        region = make_region(field.grid, max(eps))
    return eps, region


def _finish(report: ScalingReport) -> ScalingReport:
    report.refit()
    if report.degenerate:
        report.passed = True
    elif report.ratio_fit is not None:
        report.passed = report.ratio_fit.slope >= RATIO_SLOPE_FLOOR
    return report


def gradient_scaling(field: Field, p: float, kernel_profile: str = "bump",
                     epsilons: Sequence[float] = (), region: InteriorRegion | None = None,
                     snap: bool = True, jobs: int = 1) -> ScalingReport:
    """Largest ``||d_alpha (u * eta^eps)||_p`` over axes, against
    ``omega(eps)^(1/p) eps^(-1/p')``."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    eps, region = _prepare_sweep(field, epsilons, region, snap)

    def one(e):
        k = make_kernel(field.grid, e, kernel_profile)
        g = max(float(field_norm_p(mollified_derivative(field, k, a, region), p))
                for a in range(field.grid.dim_count))
        bound = vmo_modulus(field, p, e, region) ** (1 / p) * e ** (-(1 - 1 / p))
        return g, bound

    res = _sweep(one, eps, jobs)
    return _finish(ScalingReport(
        "gradient_norm", eps, [r[0] for r in res], [r[1] for r in res],
        region=region.describe(), parameters={"p": p, "kernel_profile": kernel_profile}))


def mollification_error_scaling(field: Field, p: float, epsilons: Sequence[float],
                                kernel_profile: str = "bump", region: InteriorRegion | None = None,
                                snap: bool = True, jobs: int = 1) -> ScalingReport:
    """``||u * eta^eps - u||_p`` on the region."""
    eps, region = _prepare_sweep(field, epsilons, region, snap)

    def one(e):
        k = make_kernel(field.grid, e, kernel_profile)
        m = mollify(field, k, region)
        diff = Field(m.grid, m.values - field.values[region.slices])
        return float(field_norm_p(diff, p)), None

    res = _sweep(one, eps, jobs)
    rep = ScalingReport("mollification_error", eps, [r[0] for r in res], region=region.describe(),
                        parameters={"p": p, "kernel_profile": kernel_profile})
    return rep.refit()


def vmo_scaling(field: Field, p: float, epsilons: Sequence[float],
                region: InteriorRegion | None = None, snap: bool = True,
                jobs: int = 1) -> ScalingReport:
    eps, region = _prepare_sweep(field, epsilons, region, snap)
    vals = _sweep(lambda e: vmo_modulus(field, p, e, region), eps, jobs)
    rep = ScalingReport("vmo_modulus", eps, vals, region=region.describe(),
                        parameters={"p": p},
                        flags=["the condition only needs liminf omega -> 0; "
                               "the full dyadic sequence is reported"])
    return rep.refit()


# --- commutators and companion residuals --------------------------------------

def _mollified_states(system: SystemSpec, field: Field, kernel: Kernel,
                      region: InteriorRegion) -> Field:
    ue = mollify(field, kernel, region)
    ok = system.state_domain.contains(ue.values)
    if not np.all(ok):
        warnings.warn(f"{system.name}: mollified states left the state domain by roundoff; "
                      "clamping", RuntimeWarning, stacklevel=3)
        ue = ue.with_values(system.state_domain.clamp(ue.values))
    return ue


def _commutator_parts(system: SystemSpec, field: Field, kernel: Kernel,
                      region: InteriorRegion):
    if field.component_count != system.n:
        raise ValueError(f"field has {field.component_count} components, system needs {system.n}")
    system.check_states(field.values, "field value")
    ue = _mollified_states(system, field, kernel, region)
    G = system.flux(field.values).reshape(field.grid.shape + (-1,))
    Ge = mollify(Field(field.grid, G), kernel, region).values
    C = system.flux(ue.values).reshape(ue.grid.shape + (-1,)) - Ge
    return ue, C.reshape(ue.grid.shape + (system.n, system.d + 1))


def flux_commutator(system: SystemSpec, field: Field, kernel: Kernel,
                    region: InteriorRegion | None = None) -> Field:
    """``G_{i alpha}(u * eta) - G_{i alpha}(u) * eta``; component ``i * (d+1) + alpha``."""
    if region is None:
        region = make_region(field.grid, kernel.epsilon)
    ue, C = _commutator_parts(system, field, kernel, region)
    return Field(ue.grid, C.reshape(ue.grid.shape + (-1,)))


def commutator_scaling(system: SystemSpec, field: Field, q: float, epsilons: Sequence[float],
                       region: InteriorRegion | None = None, kernel_profile: str = "bump",
                       snap: bool = True, jobs: int = 1) -> ScalingReport:
    """Largest ``||C_{i alpha}||_q`` against ``(eps * omega(eps))^(1/q)`` with
    omega taken at ``p = q (gamma + 1)``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    eps, region = _prepare_sweep(field, epsilons, region, snap)
    p_vmo = q * (system.gamma + 1.0)

    def one(e):
        k = make_kernel(field.grid, e, kernel_profile)
        C = flux_commutator(system, field, k, region)
        norms = field_norm_p(C, q, per_component=True)
        bound = (e * vmo_modulus(field, p_vmo, e, region)) ** (1 / q)
        return float(np.max(norms)), bound

    res = _sweep(one, eps, jobs)
    return _finish(ScalingReport(
        "commutator_norm", eps, [r[0] for r in res], [r[1] for r in res],
        region=region.describe(),
        parameters={"q": q, "gamma": system.gamma, "vmo_p": p_vmo, "system": system.name,
                    "kernel_profile": kernel_profile}))


def _residual_setup(system: SystemSpec, field: Field, kernel: Kernel,
                    test_function: TestFunction, region: InteriorRegion | None):
    if field.grid.dim_count != system.d + 1:
        raise ValueError(f"{system.name} needs a grid with {system.d + 1} axes")
    if region is None:
        region = make_region(field.grid, kernel.epsilon)
    test_function.check_inside(region)
    ue, C = _commutator_parts(system, field, kernel, region)
    sub = ue.grid
    du = np.stack([mollified_derivative(field, kernel, a, region).values
                   for a in range(field.grid.dim_count)], axis=-1)  # (..., n, D)
    return region, sub, ue, C, du


def companion_residual_mollified(system: SystemSpec, field: Field, kernel: Kernel,
                                 test_function: TestFunction,
                                 region: InteriorRegion | None = None,
                                 return_terms: bool = False):
    """``R_eps = int phi B_i(u^eps) d_alpha C_{i alpha}`` in integrated-by-parts form.

    Computed as ``-int d_alpha phi B_i C_{i alpha} - int phi (DB_i . d_alpha u^eps) C_{i alpha}``
    with ``d_alpha u^eps`` from the differentiated kernel.  For a weak
    solution this equals ``int phi d_alpha Q_alpha(u^eps)``, which tends to
    minus the dissipation measure paired with phi.
    """
    region, sub, ue, C, du = _residual_setup(system, field, kernel, test_function, region)
    phi = test_function.values(sub)
    dphi = test_function.gradient(sub)
    B = system.multipliers(ue.values)
    DB = system.multiplier_gradient(ue.values)
    vol = sub.cell_volume
    t1 = -float(np.sum(dphi[..., None, :] * B[..., :, None] * C) * vol)
    chain = np.einsum("...ij,...ja->...ia", DB, du)
    t2 = -float(np.sum(phi[..., None, None] * chain * C) * vol)
    if return_terms:
        return t1 + t2, (t1, t2)
    return t1 + t2


def companion_residual_scaling(system: SystemSpec, field: Field, test_function: TestFunction,
                               epsilons: Sequence[float], region: InteriorRegion | None = None,
                               kernel_profile: str = "bump", snap: bool = True,
                               jobs: int = 1, scaling_only: bool = False) -> ScalingReport:
    """``|R_eps|`` across epsilon; signed values go in ``parameters['signed']``."""
    eps, region = _prepare_sweep(field, epsilons, region, snap)

    def one(e):
        k = make_kernel(field.grid, e, kernel_profile)
        return companion_residual_mollified(system, field, k, test_function, region)

    signed = _sweep(one, eps, jobs)
    flags = ["scaling-only: synthetic field, not a weak solution"] if scaling_only else []
    rep = ScalingReport("companion_residual", eps, [abs(r) for r in signed],
                        region=region.describe(),
                        parameters={"system": system.name, "signed": signed,
                                    "kernel_profile": kernel_profile,
                                    "test_function": _tf_dict(test_function)},
                        flags=flags)
    return rep.refit()


def _tf_dict(tf: TestFunction) -> dict:
    return {"center": list(tf.center), "radius": list(tf.radius_per_axis),
            "amplitude": tf.amplitude}


def companion_weak_residual(system: SystemSpec, field: Field, test_function: TestFunction) -> float:
    """``sum_alpha int Q_alpha(u) d_alpha phi dx``.

    Positive for an entropy-dissipating shock: it equals ``int phi d mu``
    where ``-mu`` is the distributional divergence of Q.
    """
    if field.grid.dim_count != system.d + 1:
        raise ValueError(f"{system.name} needs a grid with {system.d + 1} axes")
    _check_support_in_grid(field, test_function)
    system.check_states(field.values, "field value")
    dphi = test_function.gradient(field.grid)
    Q = system.companion(field.values)
    return float(np.sum(Q * dphi) * field.grid.cell_volume)


def quadrature_tolerance(system: SystemSpec, field: Field, test_function: TestFunction) -> float:
    """A posteriori error estimate for :func:`companion_weak_residual`.

    Difference between the full lattice sum and the sum on every other
    lattice point (in each axis), plus a rounding floor.
    """
    dphi = test_function.gradient(field.grid)
    integrand = np.einsum("...a,...a->...", system.companion(field.values), dphi)
    vol = field.grid.cell_volume
    fine = integrand.sum() * vol
    coarse_sl = tuple(slice(0, None, 2) for _ in range(field.grid.dim_count))
    coarse = integrand[coarse_sl].sum() * vol * 2 ** field.grid.dim_count
    rounding = 64 * np.finfo(float).eps * np.abs(integrand).sum() * vol
    return float(abs(fine - coarse) + rounding)


# --- dissipation density -------------------------------------------------------

def _centered_difference(values: np.ndarray, grid, axis: int) -> np.ndarray:
    h = grid.spacing_per_axis[axis]
    if grid.periodic_per_axis[axis]:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2 * h)
    return np.gradient(values, h, axis=axis, edge_order=2)


def _third_difference(values: np.ndarray, grid, axis: int) -> np.ndarray:
    """Centred third difference (not divided by h^3); zero at bounded edges."""
    r = lambda k: np.roll(values, -k, axis=axis)  # noqa: E731
    out = 0.5 * (r(2) - 2 * r(1) + 2 * r(-1) - r(-2))
    if not grid.periodic_per_axis[axis]:
        edge = [slice(None)] * values.ndim
        for s in (slice(0, 2), slice(-2, None)):
            edge[axis] = s
            out[tuple(edge)] = 0.0
    return out


@dataclass(frozen=True, eq=False)
class DissipationField:
    grid: object
    values: np.ndarray
    epsilon: float
    system_name: str

    def integrate(self, test_function: TestFunction) -> float:
        phi = test_function.values(self.grid)
        return float(np.sum(phi * self.values) * self.grid.cell_volume)

    def band_integral(self, axis: int, center: float, half_width: float) -> np.ndarray:
        """Integral over ``|x_axis - center| <= half_width``, one value per
        slice along the remaining axes (e.g. per time level)."""
        x = self.grid.axis_coordinates(axis)
        if self.grid.periodic_per_axis[axis]:
            L = self.grid.extent_per_axis[axis]
            dist = np.abs((x - center + 0.5 * L) % L - 0.5 * L)
        else:
            dist = np.abs(x - center)
        sel = dist <= half_width
        h = self.grid.spacing_per_axis[axis]
        return np.compress(sel, self.values, axis=axis).sum(axis=axis) * h


def dissipation_density(system: SystemSpec, field: Field, kernel: Kernel,
                        region: InteriorRegion | None = None) -> DissipationField:
    """``D^eps = sum_{i,alpha} B_i(u^eps) d_alpha C_{i alpha}``, with centred
    differences of the commutator on the region lattice."""
    if field.grid.dim_count != system.d + 1:
        raise ValueError(f"{system.name} needs a grid with {system.d + 1} axes")
    if region is None:
        region = make_region(field.grid, kernel.epsilon)
    ue, C = _commutator_parts(system, field, kernel, region)
    sub = ue.grid
    B = system.multipliers(ue.values)
    D = np.zeros(sub.shape)
    for a in range(sub.dim_count):
        dC = _centered_difference(C[..., a], sub, a)
        D += np.einsum("...i,...i->...", B, dC)
    return DissipationField(sub, D, kernel.epsilon, system.name)


def integration_by_parts_bound(system: SystemSpec, field: Field, kernel: Kernel,
                               test_function: TestFunction,
                               region: InteriorRegion | None = None) -> float:
    """Estimated discretization gap between ``int D^eps phi`` and ``R_eps``.

    Sum of (a) the leading centred-difference truncation term
    ``h^2/6 |d^3(phi B_i)|`` and (b) the mismatch between centred and
    kernel derivatives of ``u^eps`` in the chain-rule term, each weighted by
    ``|C_{i alpha}|``.
    """
    region, sub, ue, C, du = _residual_setup(system, field, kernel, test_function, region)
    phi = test_function.values(sub)
    g = phi[..., None] * system.multipliers(ue.values)
    DB = system.multiplier_gradient(ue.values)
    vol = sub.cell_volume
    total = 0.0
    for a in range(sub.dim_count):
        h = sub.spacing_per_axis[a]
        trunc = np.abs(_third_difference(g, sub, a)) / (6.0 * h)
        cd = _centered_difference(ue.values, sub, a)
        mismatch = np.abs(phi[..., None] * np.einsum("...ij,...j->...i", DB, cd - du[..., a]))
        total += float(np.sum((trunc + mismatch) * np.abs(C[..., a])) * vol)
    return total
