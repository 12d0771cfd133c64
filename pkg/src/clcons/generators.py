"""Input fields with known regularity or known dissipation.

Synthetic fields (lacunary Weierstrass series, smooth modes, steps) probe
scaling laws; exact Burgers solutions and a Rusanov finite-volume solver
give genuine weak solutions with and without shocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Field, Grid, TestFunction, make_grid
from .systems import DomainError, SystemSpec

__all__ = [
    "GeneratorSpec",
    "SolverAbort",
    "weierstrass_field",
    "smooth_modes_field",
    "step_field",
    "burgers_riemann",
    "burgers_riemann_profile",
    "check_wrap_clearance",
    "burgers_smooth",
    "cell_grid",
    "riemann_initial",
    "fv_solve",
    "generate",
]


class SolverAbort(RuntimeError):
    """The finite-volume solver stopped (time step fell below its floor)."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


def _periodic_axes(grid: Grid) -> list[int]:
    return [k for k in range(grid.dim_count) if grid.periodic_per_axis[k]]


def weierstrass_field(grid: Grid, s: float, mode_count: int, seed: int = 0,
                      component_count: int = 1, random_phases: bool = True) -> Field:
    """Lacunary series ``sum_k 2^(-k s) cos(2 pi 2^k x_{e_k} / L + theta_k)``.

    Mode k runs along the k-th periodic axis in cyclic order.  The field is in
    B^s_{p,inf} uniformly in the mode count.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    if mode_count < 1:
        raise ValueError("mode_count must be >= 1")
    axes = _periodic_axes(grid)
    if not axes:
        raise ValueError("weierstrass_field needs at least one periodic axis")
    for ax in set(axes[k % len(axes)] for k in range(mode_count)):
        if 2 ** mode_count > grid.points_per_axis[ax]:
            raise ValueError(f"top mode 2^{mode_count - 1} unresolved on axis {ax} "
                             f"({grid.points_per_axis[ax]} points)")
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(component_count, mode_count))
    if not random_phases:
        phases[:] = 0.0
    coords = grid.coordinates()
    out = np.zeros(grid.shape + (component_count,))
    for c in range(component_count):
        acc = np.zeros(grid.shape)
        for k in range(mode_count):
            ax = axes[k % len(axes)]
            arg = 2.0 * np.pi * 2.0 ** k * coords[ax] / grid.extent_per_axis[ax] + phases[c, k]
            acc = acc + 2.0 ** (-k * s) * np.cos(arg)
        out[..., c] = acc
    return Field(grid, out)


def smooth_modes_field(grid: Grid, mode_count: int = 3, seed: int = 0,
                       component_count: int = 1, amplitude: float = 1.0,
                       mean: float = 0.0) -> Field:
    """A few low Fourier modes with seeded coefficients along periodic axes."""
    axes = _periodic_axes(grid)
    if not axes:
        raise ValueError("smooth_modes_field needs at least one periodic axis")
    rng = np.random.default_rng(seed)
    coords = grid.coordinates()
    out = np.full(grid.shape + (component_count,), float(mean))
    for c in range(component_count):
        for m in range(1, mode_count + 1):
            for ax in axes:
                a, th = rng.normal(), rng.uniform(0, 2 * np.pi)
                arg = 2 * np.pi * m * coords[ax] / grid.extent_per_axis[ax] + th
                out[..., c] = out[..., c] + amplitude * a / m ** 2 * np.cos(arg)
    return Field(grid, out)


def step_field(grid: Grid, low: float, high: float, interface: float,
               axis: int | None = None) -> Field:
    """Two-valued field along a periodic axis: ``high`` on
    ``[interface - L/2, interface)``, ``low`` on ``[interface, interface + L/2)``.
    """
    if axis is None:
        axes = _periodic_axes(grid)
        if not axes:
            raise ValueError("step_field needs a periodic axis")
        axis = axes[-1]
    if not grid.periodic_per_axis[axis]:
        raise ValueError(f"axis {axis} is not periodic")
    L = grid.extent_per_axis[axis]
    xi = _wrap(grid.coordinates()[axis] - interface, L)
    vals = np.where(xi < 0.0, float(high), float(low))
    return Field(grid, np.broadcast_to(vals, grid.shape)[..., None])


def _wrap(x, L):
    """Map into ``[-L/2, L/2)``."""
    return (x + 0.5 * L) % L - 0.5 * L


def burgers_riemann_profile(x, t, u_left: float, u_right: float, x0: float, period: float):
    """Entropy solution of the Burgers Riemann problem around ``x0``.

    Positions are read periodically in ``[x0 - L/2, x0 + L/2)``, so a static
    jump back from ``u_right`` to ``u_left`` sits at ``x0 + L/2``.
    """
    xi = _wrap(np.asarray(x, dtype=float) - x0, period)
    t = np.asarray(t, dtype=float)
    xi, t = np.broadcast_arrays(xi, t)
    if u_left > u_right:
        speed = 0.5 * (u_left + u_right)
        return np.where(xi < speed * t, u_left, u_right).astype(float)
    out = np.where(xi < u_left * t, u_left, u_right).astype(float)
    fan = (xi >= u_left * t) & (xi <= u_right * t) & (t > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(fan, xi / np.where(t > 0, t, 1.0), out)
    return out


def _spacetime_axes(grid: Grid) -> tuple[int, int]:
    if grid.dim_count != 2 or grid.periodic_per_axis[0] or not grid.periodic_per_axis[1]:
        raise ValueError("expected a (bounded time) x (periodic space) grid")
    return 0, 1


def burgers_riemann(grid: Grid, u_left: float, u_right: float, x0: float) -> Field:
    """Exact Burgers Riemann solution sampled on a space-time grid.

    A static compensating jump sits at ``x0 + L/2``; test functions must stay
    clear of it (see :func:`check_wrap_clearance`).
    """
    _spacetime_axes(grid)
    if u_left == u_right:
        raise ValueError("degenerate Riemann datum: u_left == u_right")
    L = grid.extent_per_axis[1]
    t_end = grid.origin_per_axis[0] + grid.extent_per_axis[0]
    if u_left > u_right:
        reach = abs(0.5 * (u_left + u_right)) * t_end
    else:
        reach = max(abs(u_left), abs(u_right)) * t_end
    if reach >= 0.5 * L:
        raise ValueError(f"Riemann wave reaches the periodic wrap jump at x0 + L/2 "
                         f"before t = {t_end:g}")
    t, x = grid.coordinates()
    return Field(grid, burgers_riemann_profile(x, t, u_left, u_right, x0, L)[..., None])


def check_wrap_clearance(grid: Grid, x0: float, test_function: TestFunction,
                         margin: float = 0.0) -> None:
    """Raise if the test function support (plus margin) touches ``x0 + L/2``."""
    L = grid.extent_per_axis[1]
    c = test_function.center[1]
    dist = abs(_wrap(c - (x0 + 0.5 * L), L))
    if dist <= test_function.radius_per_axis[1] + margin:
        raise ValueError("test function support overlaps the periodic wrap jump")


def burgers_smooth(grid: Grid, amplitude: float, end_time: float | None = None,
                   tol: float = 1e-13, max_iter: int = 100) -> Field:
    """Classical Burgers solution from ``u0 = a sin(2 pi x)`` via characteristics.

    Solves ``u = a sin(2 pi (x - u t))`` pointwise by Newton's method
    safeguarded by bisection on ``[-|a|, |a|]``.  Requires the grid to end
    before the shock time ``1 / (2 pi |a|)``.
    """
    _spacetime_axes(grid)
    a = float(amplitude)
    t_end = grid.origin_per_axis[0] + grid.extent_per_axis[0]
    if end_time is not None and not math.isclose(end_time, t_end, rel_tol=1e-9):
        raise ValueError(f"end_time {end_time} does not match grid time extent {t_end}")
    if a != 0.0 and t_end >= 1.0 / (2 * np.pi * abs(a)):
        raise ValueError(f"end time {t_end} is past the shock time {1 / (2 * np.pi * abs(a)):g}")
    t, x = grid.coordinates()
    t, x = np.broadcast_arrays(t, x)
    if a == 0.0:
        return Field(grid, np.zeros(grid.shape + (1,)))
    k = 2 * np.pi / grid.extent_per_axis[1]
    u = a * np.sin(k * x)
    lo = np.full(u.shape, -abs(a))
    hi = np.full(u.shape, abs(a))
    for _ in range(max_iter):
        arg = k * (x - u * t)
        g = u - a * np.sin(arg)
        if np.max(np.abs(g)) < tol:
            break
        hi = np.where(g > 0, u, hi)
        lo = np.where(g <= 0, u, lo)
        dg = 1.0 + a * k * t * np.cos(arg)
        step = u - g / dg
        bad = ((step <= lo) | (step >= hi)) & (g != 0)
        u = np.where(bad, 0.5 * (lo + hi), step)
    else:
        raise RuntimeError("characteristics solve did not converge")
    return Field(grid, u[..., None])


# --- finite volumes ---------------------------------------------------------

def cell_grid(cells: int, extent: float = 1.0) -> Grid:
    """Periodic 1D grid whose points are cell centres."""
    return make_grid([cells], [extent], [True], [0.5 * extent / cells])


def riemann_initial(grid: Grid, left_state, right_state, x0: float) -> Field:
    """Piecewise-constant 1D data: ``left_state`` on ``[x0 - L/2, x0)``."""
    left = np.atleast_1d(np.asarray(left_state, dtype=float))
    right = np.atleast_1d(np.asarray(right_state, dtype=float))
    L = grid.extent_per_axis[0]
    xi = _wrap(grid.axis_coordinates(0) - x0, L)
    vals = np.where((xi < 0)[:, None], left[None, :], right[None, :])
    return Field(grid, vals)


def fv_solve(system: SystemSpec, initial_field: Field, end_time: float, cfl: float = 0.5,
             dt_floor: float = 1e-9, return_diagnostics: bool = False):
    """First-order Rusanov (local Lax-Friedrichs) scheme on a periodic 1D grid.

    Returns a space-time field (bounded time axis first) with a snapshot at
    every output level.  Output levels are uniform; each interval is split
    into as many sub-steps as the current wave speed requires.
    """
    grid = initial_field.grid
    if system.d != 1:
        raise ValueError("fv_solve handles one space dimension only")
    if grid.dim_count != 1 or not grid.periodic_per_axis[0]:
        raise ValueError("initial field must live on a periodic 1D grid")
    if system.wave_speed is None or system.conserved_to_state is None:
        raise ValueError(f"{system.name} lacks a wave-speed bound or conserved-variable map")
    if not 0.0 < cfl <= 1.0:
        raise ValueError("cfl must lie in (0, 1]")
    if end_time <= 0:
        raise ValueError("end_time must be positive")
    h = grid.spacing_per_axis[0]
    states = initial_field.values
    system.check_states(states, "initial state")
    U = system.time_flux(states)

    a0 = float(system.wave_speed(states).max())
    levels = max(3, math.ceil(end_time * a0 / (cfl * h))) if a0 > 0 else 3
    dt_out = end_time / levels
    snaps = [states]
    totals = [U.sum(axis=0) * h]
    max_drift = np.zeros(system.n)
    substeps = []
    t = 0.0
    for lev in range(levels):
        s = system.conserved_to_state(U)
        a = float(system.wave_speed(s).max())
        m = max(1, math.ceil(dt_out * a / (cfl * h) - 1e-12))
        dt = dt_out / m
        if dt < dt_floor:
            raise SolverAbort(f"time step {dt:g} fell below floor {dt_floor:g} at t={t:g}", t)
        substeps.append(m)
        for _ in range(m):
            before = U.sum(axis=0)
            U = _rusanov_step(system, U, dt, h, t)
            max_drift = np.maximum(max_drift, np.abs(U.sum(axis=0) - before) * h)
            t += dt
        s = system.conserved_to_state(U)
        try:
            system.check_states(s, "state")
        except DomainError as exc:
            raise DomainError(f"domain violation at t={t:.6g}: {exc}", exc.state, exc.where, t) from None
        snaps.append(s)
        totals.append(U.sum(axis=0) * h)
    out_grid = make_grid([levels + 1, grid.points_per_axis[0]], [end_time, grid.extent_per_axis[0]],
                         [False, True], [0.0, grid.origin_per_axis[0]])
    field = Field(out_grid, np.stack(snaps))
    if not return_diagnostics:
        return field
    return field, {"levels": levels, "substeps": substeps, "conserved_totals": np.array(totals),
                   "max_step_drift": max_drift, "dt_out": dt_out}


def _rusanov_step(system: SystemSpec, U: np.ndarray, dt: float, h: float, t: float) -> np.ndarray:
    s = system.conserved_to_state(U)
    if not np.all(np.isfinite(s)):
        raise DomainError(f"non-finite state at t={t:.6g}", time=t)
    try:
        system.check_states(s, "state")
    except DomainError as exc:
        raise DomainError(f"domain violation at t={t:.6g}: {exc}", exc.state, exc.where, t) from None
    F = system.flux(s)[..., :, 1]
    c = system.wave_speed(s)
    Up, Fp, cp = np.roll(U, -1, axis=0), np.roll(F, -1, axis=0), np.roll(c, -1)
    a = np.maximum(c, cp)[:, None]
    Fh = 0.5 * (F + Fp) - 0.5 * a * (Up - U)
    return U - dt / h * (Fh - np.roll(Fh, 1, axis=0))


# --- dispatch ----------------------------------------------------------------

GENERATOR_KINDS = ("weierstrass", "smooth_modes", "step", "burgers_riemann",
                   "burgers_smooth", "fv_solve")


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    parameters: dict

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        p = self.parameters
        if self.kind == "weierstrass" and not 0 < p.get("s", 0.5) < 1:
            raise ValueError("weierstrass exponent s must lie in (0, 1)")
        if self.kind == "fv_solve" and not 0 < p.get("cfl", 0.5) <= 1:
            raise ValueError("cfl must lie in (0, 1]")


def generate(spec: GeneratorSpec, grid: Grid | None = None, system: SystemSpec | None = None) -> Field:
    """Run a generator from its spec (the CLI entry point)."""
    p = dict(spec.parameters)
    k = spec.kind
    if k == "weierstrass":
        return weierstrass_field(grid, p["s"], p["mode_count"], p.get("seed", 0),
                                 p.get("component_count", 1), p.get("random_phases", True))
    if k == "smooth_modes":
        return smooth_modes_field(grid, p.get("mode_count", 3), p.get("seed", 0),
                                  p.get("component_count", 1), p.get("amplitude", 1.0),
                                  p.get("mean", 0.0))
    if k == "step":
        return step_field(grid, p["low"], p["high"], p["interface"], p.get("axis"))
    if k == "burgers_riemann":
        return burgers_riemann(grid, p["u_left"], p["u_right"], p.get("x0", 0.5))
    if k == "burgers_smooth":
        return burgers_smooth(grid, p["amplitude"], p.get("end_time"))
    if system is None:
        raise ValueError("fv_solve needs a system")
    g = cell_grid(p["cells"], p.get("extent", 1.0))
    init = riemann_initial(g, p["left_state"], p["right_state"], p.get("x0", 0.5 * p.get("extent", 1.0)))
    return fv_solve(system, init, p["end_time"], p.get("cfl", 0.5), p.get("dt_floor", 1e-9))
