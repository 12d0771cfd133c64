"""Sampled fields on rectangular space-time lattices.

Axes may be periodic (a torus direction) or bounded (closed interval with
samples at both endpoints).  Axis 0 is time whenever a field is analysed
against a system of conservation laws.

Field values are stored with shape ``(*points_per_axis, n)`` in C order, so
the component index runs fastest and each lattice point owns a contiguous
state vector.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "InteriorRegion",
    "TestFunction",
    "make_grid",
    "make_region",
    "sample_function",
    "shift_field",
    "field_norm_p",
    "write_clf",
    "read_clf",
    "write_csv",
    "read_csv",
]

MIN_POINTS = 4
MAX_AXES = 4
CLF_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Grid:
    points_per_axis: tuple[int, ...]
    extent_per_axis: tuple[float, ...]
    periodic_per_axis: tuple[bool, ...]
    origin_per_axis: tuple[float, ...] = ()

    def __post_init__(self):
        n = len(self.points_per_axis)
        if not self.origin_per_axis:
            object.__setattr__(self, "origin_per_axis", (0.0,) * n)
        if not (len(self.extent_per_axis) == len(self.periodic_per_axis)
                == len(self.origin_per_axis) == n):
            raise ValueError("per-axis lists must have equal length")
        if n < 1 or n > MAX_AXES:
            raise ValueError(f"grid must have 1..{MAX_AXES} axes, got {n}")
        for k, (pts, ext) in enumerate(zip(self.points_per_axis, self.extent_per_axis)):
            if pts < MIN_POINTS:
                raise ValueError(f"axis {k}: too few points ({pts} < {MIN_POINTS})")
            if not (ext > 0 and math.isfinite(ext)):
                raise ValueError(f"axis {k}: extent must be positive, got {ext}")

    @property
    def dim_count(self) -> int:
        return len(self.points_per_axis)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.points_per_axis)

    @property
    def size(self) -> int:
        return int(np.prod(self.points_per_axis))

    @property
    def spacing_per_axis(self) -> tuple[float, ...]:
        return tuple(
            ext / pts if per else ext / (pts - 1)
            for pts, ext, per in zip(self.points_per_axis, self.extent_per_axis,
                                     self.periodic_per_axis))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing_per_axis))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        h = self.spacing_per_axis[axis]
        return self.origin_per_axis[axis] + h * np.arange(self.points_per_axis[axis])

    def coordinates(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis (``np.ix_`` style)."""
        return list(np.ix_(*[self.axis_coordinates(k) for k in range(self.dim_count)]))

    def meshgrid(self) -> np.ndarray:
        """Dense array of lattice points, shape ``(*shape, dim_count)``."""
        mesh = np.meshgrid(*[self.axis_coordinates(k) for k in range(self.dim_count)],
                           indexing="ij")
        return np.stack(mesh, axis=-1)

    def to_dict(self) -> dict:
        return {
            "points_per_axis": list(self.points_per_axis),
            "extent_per_axis": list(self.extent_per_axis),
            "periodic_per_axis": list(self.periodic_per_axis),
            "origin_per_axis": list(self.origin_per_axis),
            "spacing_per_axis": list(self.spacing_per_axis),
        }


def make_grid(points_per_axis: Sequence[int], extent_per_axis: Sequence[float],
              periodic_per_axis: Sequence[bool],
              origin_per_axis: Sequence[float] | None = None) -> Grid:
    """Build a uniform lattice.

    Periodic axes have spacing ``extent / points``; bounded axes sample both
    endpoints of ``[origin, origin + extent]`` and have spacing
    ``extent / (points - 1)``.
    """
    if not (len(points_per_axis) == len(extent_per_axis) == len(periodic_per_axis)):
        raise ValueError("dimension mismatch between points, extents and periodicity")
    if origin_per_axis is not None and len(origin_per_axis) != len(points_per_axis):
        raise ValueError("dimension mismatch between points and origins")
    return Grid(
        tuple(int(p) for p in points_per_axis),
        tuple(float(e) for e in extent_per_axis),
        tuple(bool(b) for b in periodic_per_axis),
        tuple(float(o) for o in origin_per_axis) if origin_per_axis is not None else (),
    )


@dataclass(frozen=True, eq=False)
class Field:
    """Values of a map into R^n sampled on a grid.

    ``mask`` marks valid samples; ``None`` means every sample is valid.
    Invalid samples hold 0.0 and are skipped by norms.
    """

    grid: Grid
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape[:-1] != self.grid.shape or values.ndim != self.grid.dim_count + 1:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool).copy()
            if mask.shape != self.grid.shape:
                raise ValueError("mask shape does not match grid")
            mask.setflags(write=False)
            object.__setattr__(self, "mask", mask)

    @property
    def component_count(self) -> int:
        return self.values.shape[-1]

    def component(self, i: int) -> np.ndarray:
        return self.values[..., i]

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values, self.mask)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class InteriorRegion:
    """An index box ``lo[k] <= i < hi[k]`` kept a physical margin away from
    the ends of every bounded axis.  Periodic axes are always covered fully."""

    grid: Grid
    margin_per_axis: tuple[float, ...]
    lo: tuple[int, ...]
    hi: tuple[int, ...]

    @property
    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(a, b) for a, b in zip(self.lo, self.hi))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def index_margin(self, axis: int) -> int:
        return min(self.lo[axis], self.grid.points_per_axis[axis] - self.hi[axis])

    def subgrid(self) -> Grid:
        """Grid of the region itself; bounded axes keep their spacing."""
        g = self.grid
        points, extents, origins = [], [], []
        for k in range(g.dim_count):
            if g.periodic_per_axis[k]:
                points.append(g.points_per_axis[k])
                extents.append(g.extent_per_axis[k])
                origins.append(g.origin_per_axis[k])
            else:
                h = g.spacing_per_axis[k]
                npts = self.hi[k] - self.lo[k]
                points.append(npts)
                extents.append(h * (npts - 1))
                origins.append(g.origin_per_axis[k] + h * self.lo[k])
        return Grid(tuple(points), tuple(extents), g.periodic_per_axis, tuple(origins))

    def physical_bounds(self, axis: int) -> tuple[float, float]:
        coords = self.grid.axis_coordinates(axis)
        return float(coords[self.lo[axis]]), float(coords[self.hi[axis] - 1])

    def contains_box(self, lower: Sequence[float], upper: Sequence[float]) -> bool:
        for k in range(self.grid.dim_count):
            if self.grid.periodic_per_axis[k]:
                continue
            a, b = self.physical_bounds(k)
            tol = 1e-12 * self.grid.extent_per_axis[k]
            if lower[k] < a - tol or upper[k] > b + tol:
                return False
        return True

    def describe(self) -> dict:
        return {"margin_per_axis": list(self.margin_per_axis),
                "lo": list(self.lo), "hi": list(self.hi)}


def make_region(grid: Grid, margin: float | Sequence[float] = 0.0) -> InteriorRegion:
    """Interior region with the given physical margin on bounded axes.

    A scalar margin applies to every bounded axis; periodic axes get 0.
    """
    if np.ndim(margin) == 0:
        margins = [0.0 if per else float(margin) for per in grid.periodic_per_axis]
    else:
        margins = [float(m) for m in margin]
        if len(margins) != grid.dim_count:
            raise ValueError("one margin per axis required")
    lo, hi = [], []
    for k in range(grid.dim_count):
        m = margins[k]
        if m < 0:
            raise ValueError("margins must be non-negative")
        if grid.periodic_per_axis[k]:
            if m != 0:
                raise ValueError(f"axis {k} is periodic; margin must be 0")
            lo.append(0)
            hi.append(grid.points_per_axis[k])
            continue
        h = grid.spacing_per_axis[k]
        # small slack so that margins equal to a lattice multiple land on it
        cut = int(math.ceil(m / h - 1e-9))
        lo.append(cut)
        hi.append(grid.points_per_axis[k] - cut)
    if any(b <= a for a, b in zip(lo, hi)):
        raise ValueError("interior region is empty; margin too large for the grid")
    return InteriorRegion(grid, tuple(margins), tuple(lo), tuple(hi))


def sample_function(grid: Grid, evaluator: Callable[[np.ndarray], np.ndarray],
                    vectorized: bool = True) -> Field:
    """Sample ``evaluator`` at every lattice point.

    With ``vectorized=True`` the evaluator receives the whole point array of
    shape ``(*shape, dim_count)`` and must return ``(*shape, n)`` or
    ``(*shape,)``; otherwise it is called once per point.
    """
    pts = grid.meshgrid()
    if vectorized:
        vals = np.asarray(evaluator(pts), dtype=np.float64)
        if vals.shape == grid.shape:
            vals = vals[..., None]
    else:
        flat = pts.reshape(-1, grid.dim_count)
        out = [np.atleast_1d(np.asarray(evaluator(x), dtype=np.float64)) for x in flat]
        vals = np.stack(out).reshape(grid.shape + (-1,))
    if not np.all(np.isfinite(vals)):
        raise ValueError("evaluator returned a non-finite value")
    return Field(grid, vals)


def shift_field(field: Field, lattice_offset: Sequence[int]) -> Field:
    """Translate by an integer lattice vector: ``out[x] = field[x - offset]``.

    Periodic axes wrap.  On bounded axes the samples that would come from
    outside the grid are marked invalid.
    """
    grid = field.grid
    if len(lattice_offset) != grid.dim_count:
        raise ValueError("offset must have one entry per axis")
    vals = field.values
    mask = np.ones(grid.shape, dtype=bool) if field.mask is None else field.mask
    any_invalid = field.mask is not None
    for k, off in enumerate(lattice_offset):
        off = int(off)
        n = grid.points_per_axis[k]
        if grid.periodic_per_axis[k]:
            off %= n
            if off:
                vals = np.roll(vals, off, axis=k)
                mask = np.roll(mask, off, axis=k)
            continue
        if off == 0:
            continue
        vals = np.roll(vals, off, axis=k)
        mask = np.roll(mask, off, axis=k)
        cut = [slice(None)] * grid.dim_count
        cut[k] = slice(0, off) if off > 0 else slice(n + off, n)
        vals = vals.copy()
        mask = mask.copy()
        if abs(off) >= n:
            vals[...] = 0.0
            mask[...] = False
        else:
            vals[tuple(cut)] = 0.0
            mask[tuple(cut)] = False
        any_invalid = True
    return Field(grid, vals, mask if any_invalid else None)


def _region_view(field: Field, region: InteriorRegion | None):
    if region is None:
        return field.values, field.mask
    if region.grid != field.grid:
        raise ValueError("region belongs to a different grid")
    sl = region.slices
    return field.values[sl], (None if field.mask is None else field.mask[sl])


def field_norm_p(field: Field, p: float, region: InteriorRegion | None = None,
                 per_component: bool = False):
    """Discrete L^p norm ``(sum |u(x)|^p * cell_volume)^(1/p)`` over a region.

    ``|u(x)|`` is the Euclidean norm across components, or each component on
    its own when ``per_component`` is set (an array is returned then).
    Invalid samples contribute nothing; the volume is not renormalized.
    ``p = inf`` gives the max norm.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    vals, mask = _region_view(field, region)
    if vals.size == 0:
        raise ValueError("empty region")
    mag = np.abs(vals) if per_component else np.linalg.norm(vals, axis=-1)
    if mask is not None:
        mag = np.where(mask[..., None] if per_component else mask, mag, 0.0)
    axes = tuple(range(field.grid.dim_count))
    if math.isinf(p):
        return mag.max(axis=axes)
    vol = field.grid.cell_volume
    return (np.sum(mag ** p, axis=axes) * vol) ** (1.0 / p)


# --- test functions -------------------------------------------------------

def _bump(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


def _bump_log_derivative(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = -2.0 * ti / (1.0 - ti * ti) ** 2
    return out


@dataclass(frozen=True)
class TestFunction:
    """Product bump ``prod_k psi((x_k - c_k) / r_k)``, ``psi(t) = exp(-1/(1-t^2))``.

    Distances along periodic axes use the nearest periodic image, so the
    support box must be shorter than the period.
    """

    __test__ = False  # not a pytest class

    center: tuple[float, ...]
    radius_per_axis: tuple[float, ...]
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius_per_axis", tuple(float(r) for r in self.radius_per_axis))
        if len(self.center) != len(self.radius_per_axis):
            raise ValueError("center and radius must have the same length")
        if any(r <= 0 for r in self.radius_per_axis):
            raise ValueError("radii must be positive")

    @property
    def support_lower(self) -> tuple[float, ...]:
        return tuple(c - r for c, r in zip(self.center, self.radius_per_axis))

    @property
    def support_upper(self) -> tuple[float, ...]:
        return tuple(c + r for c, r in zip(self.center, self.radius_per_axis))

    def _scaled(self, grid: Grid) -> list[np.ndarray]:
        if grid.dim_count != len(self.center):
            raise ValueError("test function dimension does not match grid")
        out = []
        for k in range(grid.dim_count):
            x = grid.axis_coordinates(k) - self.center[k]
            if grid.periodic_per_axis[k]:
                L = grid.extent_per_axis[k]
                if 2 * self.radius_per_axis[k] >= L:
                    raise ValueError(f"support wider than the period on axis {k}")
                x = (x + 0.5 * L) % L - 0.5 * L
            out.append(x / self.radius_per_axis[k])
        return out

    def values(self, grid: Grid) -> np.ndarray:
        factors = [_bump(t) for t in self._scaled(grid)]
        return self.amplitude * _outer(factors)

    def gradient(self, grid: Grid) -> np.ndarray:
        """All first partials, shape ``(*grid.shape, dim_count)``."""
        scaled = self._scaled(grid)
        factors = [_bump(t) for t in scaled]
        parts = []
        for k in range(grid.dim_count):
            fk = list(factors)
            fk[k] = factors[k] * _bump_log_derivative(scaled[k]) / self.radius_per_axis[k]
            parts.append(self.amplitude * _outer(fk))
        return np.stack(parts, axis=-1)

    def inside(self, region: InteriorRegion) -> bool:
        return region.contains_box(self.support_lower, self.support_upper)

    def check_inside(self, region: InteriorRegion) -> None:
        if not self.inside(region):
            raise ValueError("test function support leaves the interior region")


def _outer(factors: list[np.ndarray]) -> np.ndarray:
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


# --- file formats ---------------------------------------------------------

def write_clf(field: Field, path: str | Path, overwrite: bool = True) -> None:
    """Write a field as one JSON header line followed by raw f64le values."""
    path = Path(path)
    if path.exists() and not overwrite:
        raise FileExistsError(path)
    g = field.grid
    header = {
        "format_version": CLF_FORMAT_VERSION,
        "points_per_axis": list(g.points_per_axis),
        "extent_per_axis": list(g.extent_per_axis),
        "periodic_per_axis": list(g.periodic_per_axis),
        "component_count": field.component_count,
        "dtype": "f64le",
    }
    if any(o != 0.0 for o in g.origin_per_axis):
        header["origin_per_axis"] = list(g.origin_per_axis)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_clf(path: str | Path) -> Field:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        payload = fh.read()
    if header.get("format_version") != CLF_FORMAT_VERSION:
        raise ValueError(f"unsupported .clf version {header.get('format_version')}")
    if header.get("dtype") != "f64le":
        raise ValueError(f"unsupported dtype {header.get('dtype')}")
    grid = make_grid(header["points_per_axis"], header["extent_per_axis"],
                     header["periodic_per_axis"], header.get("origin_per_axis"))
    n = int(header["component_count"])
    vals = np.frombuffer(payload, dtype="<f8")
    if vals.size != grid.size * n:
        raise ValueError("payload size does not match header")
    return Field(grid, vals.reshape(grid.shape + (n,)).astype(np.float64))


def write_csv(field: Field, path: str | Path) -> None:
    g = field.grid
    pts = g.meshgrid().reshape(-1, g.dim_count)
    vals = field.values.reshape(-1, field.component_count)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k}" for k in range(g.dim_count)]
                   + [f"u{i}" for i in range(field.component_count)])
        for x, u in zip(pts, vals):
            w.writerow([repr(float(c)) for c in x] + [repr(float(c)) for c in u])


def read_csv(path: str | Path, grid: Grid) -> Field:
    """Read a CSV written by :func:`write_csv` back onto ``grid``.

    Rows must appear in storage order; coordinates are checked against the grid.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != grid.size:
        raise ValueError("row count does not match grid")
    coords = data[:, :grid.dim_count]
    if not np.allclose(coords, grid.meshgrid().reshape(-1, grid.dim_count), rtol=0, atol=1e-9):
        raise ValueError("CSV coordinates do not match grid")
    vals = data[:, grid.dim_count:]
    return Field(grid, vals.reshape(grid.shape + (vals.shape[1],)))
