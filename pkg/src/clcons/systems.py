"""Systems of conservation laws ``d_alpha G_{i alpha}(u) = 0`` with a companion law.

A :class:`SystemSpec` carries vectorized evaluators.  For states of shape
``(..., n)`` they return

* ``flux``               ``(..., n, d+1)``      G[i, alpha]
* ``flux_gradient``      ``(..., n, d+1, n)``   dG[i, alpha] / du_j
* ``companion``          ``(..., d+1)``         Q[alpha]
* ``companion_gradient`` ``(..., d+1, n)``      dQ[alpha] / du_j
* ``multipliers``        ``(..., n)``           B[i]
* ``multiplier_gradient````(..., n, n)``        dB[i] / du_j

Index ``alpha = 0`` is always time.  The companion flux is tied to the
system by ``dQ_alpha/du_j = B_i dG_{i alpha}/du_j``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .grid import Field, TestFunction

__all__ = [
    "Box",
    "DomainError",
    "SystemSpec",
    "GrowthReport",
    "burgers_system",
    "euler_system",
    "psystem_elasticity",
    "linear_system",
    "system_from_config",
    "make_system",
    "compatibility_residual",
    "growth_check",
    "flux_gradient_holder_estimate",
    "finite_difference_check",
    "weak_residual",
    "random_states",
]

Evaluator = Callable[[np.ndarray], np.ndarray]


class DomainError(ValueError):
    """A state lies outside the system's state domain."""

    def __init__(self, message: str, state=None, where=None, time=None):
        super().__init__(message)
        self.state = state
        self.where = where
        self.time = time


@dataclass(frozen=True)
class Box:
    """Closed box ``lower <= u <= upper``; infinite bounds describe half-spaces."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds must have equal length")
        if any(a > b for a, b in zip(self.lower, self.upper)):
            raise ValueError("box lower bound exceeds upper bound")

    @property
    def finite(self) -> bool:
        return all(math.isfinite(a) and math.isfinite(b) for a, b in zip(self.lower, self.upper))

    def contains(self, states: np.ndarray) -> np.ndarray:
        s = np.asarray(states)
        return np.all((s >= np.asarray(self.lower)) & (s <= np.asarray(self.upper)), axis=-1)

    def clamp(self, states: np.ndarray) -> np.ndarray:
        return np.clip(states, self.lower, self.upper)

    def to_dict(self) -> dict:
        enc = lambda x: None if not math.isfinite(x) else x  # noqa: E731
        return {"lower": [enc(a) for a in self.lower], "upper": [enc(b) for b in self.upper]}


def _unbounded(n: int) -> Box:
    return Box((-math.inf,) * n, (math.inf,) * n)


@dataclass(frozen=True, eq=False)
class SystemSpec:
    name: str
    n: int
    d: int
    flux: Evaluator
    flux_gradient: Evaluator
    companion: Evaluator
    companion_gradient: Evaluator
    multipliers: Evaluator
    multiplier_gradient: Evaluator
    gamma: float
    growth_constant: float
    state_domain: Box
    sample_box: Box
    wave_speed: Evaluator | None = None
    conserved_to_state: Evaluator | None = None
    parameters: dict = dc_field(default_factory=dict)

    def time_flux(self, states: np.ndarray) -> np.ndarray:
        """Conserved quantities ``G_{i0}(u)``."""
        return self.flux(states)[..., :, 0]

    def check_states(self, states: np.ndarray, what: str = "state") -> None:
        states = np.asarray(states)
        if states.shape[-1] != self.n:
            raise ValueError(f"{self.name}: expected {self.n} components, got {states.shape[-1]}")
        ok = self.state_domain.contains(states)
        if not np.all(ok):
            bad = np.argwhere(~ok)[0]
            s = states[tuple(bad)]
            raise DomainError(f"{self.name}: {what} {s.tolist()} at index {bad.tolist()} "
                              f"outside state domain {self.state_domain.to_dict()}",
                              state=s, where=tuple(bad))

    def describe(self) -> dict:
        return {"name": self.name, "n": self.n, "d": self.d, "gamma": self.gamma,
                "growth_constant": self.growth_constant,
                "state_domain": self.state_domain.to_dict(),
                "sample_box": self.sample_box.to_dict(), "parameters": dict(self.parameters)}


def random_states(box: Box, count: int, seed: int = 0) -> np.ndarray:
    if not box.finite:
        raise ValueError("random states need a finite box")
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    return lo + (hi - lo) * rng.random((count, len(lo)))


def _default_growth_constant(companion: Evaluator, box: Box, gamma: float,
                             per_axis: int = 33) -> float:
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    ratio = _growth_ratio(companion(pts), pts, gamma)
    return float(1.05 * ratio.max()) if ratio.size else 0.0


def _growth_ratio(Q: np.ndarray, states: np.ndarray, gamma: float) -> np.ndarray:
    mag = np.linalg.norm(states, axis=-1)
    return np.abs(Q).max(axis=-1) / (1.0 + mag ** (2.0 + gamma))


# --- built-in systems ------------------------------------------------------

def burgers_system(state_box: tuple[float, float] = (-10.0, 10.0),
                   growth_constant: float = 1.0) -> SystemSpec:
    """Inviscid Burgers with the entropy pair (u^2/2, u^3/3) and multiplier B = u."""

    def flux(s):
        u = s[..., 0]
        return np.stack([u, 0.5 * u * u], axis=-1)[..., None, :]

    def flux_gradient(s):
        u = s[..., 0]
        return np.stack([np.ones_like(u), u], axis=-1)[..., None, :, None]

    def companion(s):
        u = s[..., 0]
        return np.stack([0.5 * u * u, u ** 3 / 3.0], axis=-1)

    def companion_gradient(s):
        u = s[..., 0]
        return np.stack([u, u * u], axis=-1)[..., :, None]

    def multipliers(s):
        return s[..., :1].copy()

    def multiplier_gradient(s):
        return np.ones(s.shape[:-1] + (1, 1))

    return SystemSpec(
        "burgers", 1, 1, flux, flux_gradient, companion, companion_gradient,
        multipliers, multiplier_gradient, gamma=1.0, growth_constant=growth_constant,
        state_domain=_unbounded(1), sample_box=Box((state_box[0],), (state_box[1],)),
        wave_speed=lambda s: np.abs(s[..., 0]),
        conserved_to_state=lambda U: U.copy(),
    )


def linear_system(A: np.ndarray, box_half_width: float = 10.0) -> SystemSpec:
    """Flux ``G_{i alpha}(u) = A[i, alpha, :] . u`` with a zero companion law.

    Useful as the degenerate case where mollification commutes with the flux.
    """
    A = np.asarray(A, dtype=float)
    n, dp1 = A.shape[0], A.shape[1]
    if A.shape[2] != n:
        raise ValueError("A must have shape (n, d+1, n)")

    def flux(s):
        return np.einsum("iaj,...j->...ia", A, s)

    def flux_gradient(s):
        return np.broadcast_to(A, s.shape[:-1] + A.shape).copy()

    zeros_q = lambda s: np.zeros(s.shape[:-1] + (dp1,))  # noqa: E731
    zeros_dq = lambda s: np.zeros(s.shape[:-1] + (dp1, n))  # noqa: E731
    zeros_b = lambda s: np.zeros(s.shape[:-1] + (n,))  # noqa: E731
    zeros_db = lambda s: np.zeros(s.shape[:-1] + (n, n))  # noqa: E731
    box = Box((-box_half_width,) * n, (box_half_width,) * n)
    return SystemSpec("linear", n, dp1 - 1, flux, flux_gradient, zeros_q, zeros_dq,
                      zeros_b, zeros_db, gamma=1.0, growth_constant=1.0,
                      state_domain=_unbounded(n), sample_box=box)


def euler_system(d: int = 1, kappa: float = 1.0, gamma0: float = 1.5,
                 state_box: dict | None = None) -> SystemSpec:
    """Isentropic Euler in the variables (rho, v_1..v_d), pressure ``kappa rho^gamma0``.

    The companion law is total energy with pressure potential
    ``P(rho) = kappa (rho^gamma0 - rho) / (gamma0 - 1)``.  ``state_box`` takes
    ``{"rho": [rho_min, rho_max], "v": [v_min, v_max]}``; densities below
    ``rho_min`` or above ``rho_max`` are outside the state domain.
    """
    if not 1.0 < gamma0 < 2.0:
        raise ValueError(f"gamma0 must lie in (1, 2), got {gamma0}")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    box = {"rho": [0.1, 10.0], "v": [-5.0, 5.0]}
    box.update(state_box or {})
    rho_min, rho_max = map(float, box["rho"])
    v_min, v_max = map(float, box["v"])
    if rho_min <= 0:
        raise ValueError("rho_min must be positive")
    n = d + 1
    g0 = gamma0
    eye = np.eye(d)

    def p(rho):
        return kappa * rho ** g0

    def dp(rho):
        return kappa * g0 * rho ** (g0 - 1.0)

    def P(rho):
        return kappa * (rho ** g0 - rho) / (g0 - 1.0)

    def dP(rho):
        return kappa * (g0 * rho ** (g0 - 1.0) - 1.0) / (g0 - 1.0)

    def d2P(rho):
        return kappa * g0 * rho ** (g0 - 2.0)

    def flux(s):
        rho, v = s[..., 0], s[..., 1:]
        G = np.empty(s.shape[:-1] + (n, n))
        G[..., 0, 0] = rho
        G[..., 0, 1:] = rho[..., None] * v
        G[..., 1:, 0] = rho[..., None] * v
        G[..., 1:, 1:] = (rho[..., None, None] * v[..., :, None] * v[..., None, :]
                          + p(rho)[..., None, None] * eye)
        return G

    def flux_gradient(s):
        rho, v = s[..., 0], s[..., 1:]
        DG = np.zeros(s.shape[:-1] + (n, n, n))
        DG[..., 0, 0, 0] = 1.0
        # G_{0j} = rho v_j
        DG[..., 0, 1:, 0] = v
        DG[..., 0, 1:, 1:] = rho[..., None, None] * eye
        # G_{i0} = rho v_i
        DG[..., 1:, 0, 0] = v
        DG[..., 1:, 0, 1:] = rho[..., None, None] * eye
        # G_{ij} = rho v_i v_j + p delta_ij
        DG[..., 1:, 1:, 0] = v[..., :, None] * v[..., None, :] + dp(rho)[..., None, None] * eye
        # d/dv_k (rho v_i v_j) = rho (delta_ik v_j + v_i delta_jk)
        DG[..., 1:, 1:, 1:] = rho[..., None, None, None] * (
            eye[:, None, :] * v[..., None, :, None] + v[..., :, None, None] * eye[None, :, :])
        return DG

    def companion(s):
        rho, v = s[..., 0], s[..., 1:]
        E = 0.5 * rho * np.sum(v * v, axis=-1) + P(rho)
        Q = np.empty(s.shape[:-1] + (n,))
        Q[..., 0] = E
        Q[..., 1:] = (E + p(rho))[..., None] * v
        return Q

    def companion_gradient(s):
        rho, v = s[..., 0], s[..., 1:]
        v2 = np.sum(v * v, axis=-1)
        E = 0.5 * rho * v2 + P(rho)
        DQ = np.empty(s.shape[:-1] + (n, n))
        DQ[..., 0, 0] = 0.5 * v2 + dP(rho)
        DQ[..., 0, 1:] = rho[..., None] * v
        DQ[..., 1:, 0] = (0.5 * v2 + dP(rho) + dp(rho))[..., None] * v
        DQ[..., 1:, 1:] = (rho[..., None, None] * v[..., :, None] * v[..., None, :]
                           + (E + p(rho))[..., None, None] * eye)
        return DQ

    def multipliers(s):
        rho, v = s[..., 0], s[..., 1:]
        B = np.empty(s.shape[:-1] + (n,))
        B[..., 0] = -0.5 * np.sum(v * v, axis=-1) + dP(rho)
        B[..., 1:] = v
        return B

    def multiplier_gradient(s):
        rho, v = s[..., 0], s[..., 1:]
        DB = np.zeros(s.shape[:-1] + (n, n))
        DB[..., 0, 0] = d2P(rho)
        DB[..., 0, 1:] = -v
        DB[..., 1:, 1:] = eye
        return DB

    def wave_speed(s):
        rho, v = s[..., 0], s[..., 1:]
        return np.abs(v).max(axis=-1) + np.sqrt(dp(np.maximum(rho, 0.0)))

    def conserved_to_state(U):
        s = np.empty_like(U)
        s[..., 0] = U[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            s[..., 1:] = U[..., 1:] / U[..., :1]
        return s

    domain = Box((rho_min,) + (-math.inf,) * d, (rho_max,) + (math.inf,) * d)
    sample = Box((rho_min,) + (v_min,) * d, (rho_max,) + (v_max,) * d)
    gamma = g0 - 1.0
    return SystemSpec(
        "euler", n, d, flux, flux_gradient, companion, companion_gradient, multipliers,
        multiplier_gradient, gamma=gamma,
        growth_constant=_default_growth_constant(companion, sample, gamma),
        state_domain=domain, sample_box=sample, wave_speed=wave_speed,
        conserved_to_state=conserved_to_state,
        parameters={"kappa": kappa, "gamma0": g0, "rho_range": [rho_min, rho_max],
                    "v_range": [v_min, v_max], "gamma_halfspace": gamma,
                    "gamma_box": 1.0},
    )


def psystem_elasticity(stored_energy: dict | None = None,
                       state_box: dict | None = None) -> SystemSpec:
    """1D elastodynamics ``d_t v = d_x W'(F)``, ``d_t F = d_x v`` with energy companion.

    ``stored_energy`` is ``{"kind": "power", "gamma": g}`` for
    ``W(F) = |F|^(2+g) / ((2+g)(1+g))`` (so ``W'`` is C^{1,g} but not C^2 at
    F = 0), or ``{"kind": "custom", "gamma": g, "W": f, "dW": f', "d2W": f''}``.
    Time flux (v, F), space flux (-W'(F), -v), Q = (v^2/2 + W(F), -v W'(F)),
    B = (v, W'(F)).
    """
    spec = {"kind": "power", "gamma": 0.5}
    spec.update(stored_energy or {})
    g = float(spec["gamma"])
    if not 0.0 < g < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {g}")
    if spec["kind"] == "power":
        c = 1.0 / ((2.0 + g) * (1.0 + g))

        def W(F):
            return c * np.abs(F) ** (2.0 + g)

        def dW(F):
            return np.sign(F) * np.abs(F) ** (1.0 + g) / (1.0 + g)

        def d2W(F):
            return np.abs(F) ** g
    elif spec["kind"] == "custom":
        W, dW, d2W = spec["W"], spec["dW"], spec["d2W"]
    else:
        raise ValueError(f"unknown stored energy kind {spec['kind']!r}")
    box = {"v": [-2.0, 2.0], "F": [-2.0, 2.0]}
    box.update(state_box or {})

    def flux(s):
        v, F = s[..., 0], s[..., 1]
        G = np.empty(s.shape[:-1] + (2, 2))
        G[..., 0, 0] = v
        G[..., 1, 0] = F
        G[..., 0, 1] = -dW(F)
        G[..., 1, 1] = -v
        return G

    def flux_gradient(s):
        F = s[..., 1]
        DG = np.zeros(s.shape[:-1] + (2, 2, 2))
        DG[..., 0, 0, 0] = 1.0
        DG[..., 1, 0, 1] = 1.0
        DG[..., 0, 1, 1] = -d2W(F)
        DG[..., 1, 1, 0] = -1.0
        return DG

    def companion(s):
        v, F = s[..., 0], s[..., 1]
        return np.stack([0.5 * v * v + W(F), -v * dW(F)], axis=-1)

    def companion_gradient(s):
        v, F = s[..., 0], s[..., 1]
        DQ = np.empty(s.shape[:-1] + (2, 2))
        DQ[..., 0, 0] = v
        DQ[..., 0, 1] = dW(F)
        DQ[..., 1, 0] = -dW(F)
        DQ[..., 1, 1] = -v * d2W(F)
        return DQ

    def multipliers(s):
        return np.stack([s[..., 0], dW(s[..., 1])], axis=-1)

    def multiplier_gradient(s):
        DB = np.zeros(s.shape[:-1] + (2, 2))
        DB[..., 0, 0] = 1.0
        DB[..., 1, 1] = d2W(s[..., 1])
        return DB

    sample = Box((float(box["v"][0]), float(box["F"][0])), (float(box["v"][1]), float(box["F"][1])))
    return SystemSpec(
        "psystem", 2, 1, flux, flux_gradient, companion, companion_gradient, multipliers,
        multiplier_gradient, gamma=g,
        growth_constant=_default_growth_constant(companion, sample, g),
        state_domain=_unbounded(2), sample_box=sample,
        wave_speed=lambda s: np.sqrt(d2W(s[..., 1])),
        conserved_to_state=lambda U: U.copy(),
        parameters={"stored_energy": {k: v for k, v in spec.items() if not callable(v)}},
    )


# --- custom systems from JSON ---------------------------------------------

def _term_eval(term: dict, s: np.ndarray):
    """Value and gradient of ``coef * prod_j f_j(u_j)``.

    ``f_j(x) = |x|^p`` or, for odd factors, ``sign(x) |x|^p``.  Odd
    defaults to True for odd integer powers so plain monomials come out right.
    """
    n = s.shape[-1]
    powers = [float(p) for p in term["powers"]]
    if len(powers) != n:
        raise ValueError("term powers must have one entry per component")
    odd = term.get("odd")
    if odd is None:
        odd = [float(p).is_integer() and int(p) % 2 == 1 for p in powers]
    coef = float(term.get("coef", 1.0))
    facs, dfacs = [], []
    for j in range(n):
        x, p = s[..., j], powers[j]
        if p == 0:
            facs.append(np.ones_like(x))
            dfacs.append(np.zeros_like(x))
            continue
        ax = np.abs(x)
        sg = np.sign(x)
        if odd[j]:
            facs.append(sg * ax ** p)
            dfacs.append(p * ax ** (p - 1.0) if p != 1 else np.ones_like(x))
        else:
            facs.append(ax ** p)
            dfacs.append(p * sg * ax ** (p - 1.0) if p != 1 else sg)
    val = coef * np.prod(np.stack(facs, axis=-1), axis=-1)
    grads = []
    for j in range(n):
        others = [facs[k] for k in range(n) if k != j]
        rest = np.prod(np.stack(others, axis=-1), axis=-1) if others else 1.0
        grads.append(coef * dfacs[j] * rest)
    return val, np.stack(grads, axis=-1)


def _terms_eval(terms: list, s: np.ndarray):
    val = np.zeros(s.shape[:-1])
    grad = np.zeros(s.shape)
    for t in terms:
        v, g = _term_eval(t, s)
        val = val + v
        grad = grad + g
    return val, grad


CUSTOM_KEYS = {"name", "n", "d", "gamma", "growth_constant", "state_domain", "sample_box",
               "flux", "companion", "multipliers", "wave_speed_bound"}


def system_from_config(config: dict | str | Path) -> SystemSpec:
    """Build a system from polynomial/power terms.

    Schema (JSON)::

        {"name": str, "n": int, "d": int, "gamma": float,
         "flux":        [[terms G_00, ..., terms G_0d], ... n rows],
         "companion":   [terms Q_0, ..., terms Q_d],
         "multipliers": [terms B_1, ..., terms B_n],
         "state_domain": {"lower": [...], "upper": [...]},   # null = unbounded
         "sample_box":   {"lower": [...], "upper": [...]},   # finite
         "growth_constant": float, "wave_speed_bound": float}

    where a term is ``{"coef": c, "powers": [p_1..p_n], "odd": [bool..]}``.
    """
    if not isinstance(config, dict):
        config = json.loads(Path(config).read_text())
    unknown = set(config) - CUSTOM_KEYS
    if unknown:
        raise ValueError(f"unknown keys in system config: {sorted(unknown)}")
    n, d = int(config["n"]), int(config["d"])
    flux_terms = config["flux"]
    if len(flux_terms) != n or any(len(row) != d + 1 for row in flux_terms):
        raise ValueError("flux must be an n x (d+1) table of term lists")
    q_terms = config["companion"]
    b_terms = config["multipliers"]
    if len(q_terms) != d + 1 or len(b_terms) != n:
        raise ValueError("companion needs d+1 entries and multipliers n entries")

    def table(rows, s):
        vals = [[_terms_eval(t, s) for t in row] for row in rows]
        V = np.stack([np.stack([v for v, _ in r], axis=-1) for r in vals], axis=-2)
        D = np.stack([np.stack([g for _, g in r], axis=-2) for r in vals], axis=-3)
        return V, D

    def vec(entries, s):
        vals = [_terms_eval(t, s) for t in entries]
        return np.stack([v for v, _ in vals], axis=-1), np.stack([g for _, g in vals], axis=-2)

    def box(key, default):
        b = config.get(key)
        if b is None:
            return default
        lo = [-math.inf if x is None else float(x) for x in b["lower"]]
        hi = [math.inf if x is None else float(x) for x in b["upper"]]
        return Box(tuple(lo), tuple(hi))

    domain = box("state_domain", _unbounded(n))
    sample = box("sample_box", Box((-1.0,) * n, (1.0,) * n))
    gamma = float(config.get("gamma", 1.0))
    companion = lambda s: vec(q_terms, s)[0]  # noqa: E731
    speed = config.get("wave_speed_bound")
    return SystemSpec(
        config.get("name", "custom"), n, d,
        flux=lambda s: table(flux_terms, s)[0],
        flux_gradient=lambda s: table(flux_terms, s)[1],
        companion=companion,
        companion_gradient=lambda s: vec(q_terms, s)[1],
        multipliers=lambda s: vec(b_terms, s)[0],
        multiplier_gradient=lambda s: vec(b_terms, s)[1],
        gamma=gamma,
        growth_constant=float(config.get("growth_constant")
                              or _default_growth_constant(companion, sample, gamma)),
        state_domain=domain, sample_box=sample,
        wave_speed=(lambda s: np.full(s.shape[:-1], float(speed))) if speed else None,
        parameters={"config": config},
    )


def make_system(name: str, **params) -> SystemSpec:
    """Construct a system by its CLI/config name."""
    if name == "burgers":
        return burgers_system(**params)
    if name == "euler":
        return euler_system(**params)
    if name == "psystem":
        return psystem_elasticity(**params)
    if name == "custom":
        return system_from_config(params.get("config") or params["path"])
    raise ValueError(f"unknown system {name!r}")


# --- structural checks ------------------------------------------------------

def compatibility_residual(system: SystemSpec, sample_states, return_worst: bool = False):
    """``max |dQ_alpha/du_j - B_i dG_{i alpha}/du_j|`` over samples, j and alpha.

    With ``return_worst`` a dict locating the maximum is returned as well.
    """
    s = np.atleast_2d(np.asarray(sample_states, dtype=float))
    system.check_states(s, "sample state")
    DQ = system.companion_gradient(s)
    rhs = np.einsum("...i,...iaj->...aj", system.multipliers(s), system.flux_gradient(s))
    err = np.abs(DQ - rhs)
    value = float(err.max())
    if not return_worst:
        return value
    k, a, j = np.unravel_index(int(np.argmax(err)), err.shape)
    return value, {"state": s[k].tolist(), "alpha": int(a), "j": int(j), "residual": value}


@dataclass(frozen=True)
class GrowthReport:
    max_ratio: float
    passed: bool
    constant: float
    gamma: float


def growth_check(system: SystemSpec, sample_states, gamma: float | None = None,
                 constant: float | None = None) -> GrowthReport:
    """Largest ``|Q_alpha(u)| / (1 + |u|^(2+gamma))`` over the samples."""
    s = np.atleast_2d(np.asarray(sample_states, dtype=float))
    system.check_states(s, "sample state")
    g = system.gamma if gamma is None else float(gamma)
    C = system.growth_constant if constant is None else float(constant)
    ratio = float(_growth_ratio(system.companion(s), s, g).max())
    return GrowthReport(ratio, ratio <= C, C, g)


def flux_gradient_holder_estimate(system: SystemSpec, sample_pairs,
                                  gamma: float | None = None) -> float:
    """``max |DG_{i alpha}(s1) - DG_{i alpha}(s2)| / |s1 - s2|^gamma`` over pairs."""
    pairs = np.asarray(sample_pairs, dtype=float)
    if pairs.ndim == 2:
        pairs = pairs[None]
    if pairs.shape[1:] != (2, system.n):
        raise ValueError(f"pairs must have shape (m, 2, {system.n})")
    s1, s2 = pairs[:, 0], pairs[:, 1]
    system.check_states(s1)
    system.check_states(s2)
    dist = np.linalg.norm(s1 - s2, axis=-1)
    if np.any(dist == 0):
        raise ValueError("coincident state pair")
    g = system.gamma if gamma is None else float(gamma)
    diff = np.linalg.norm(system.flux_gradient(s1) - system.flux_gradient(s2), axis=-1)
    return float((diff.max(axis=(-2, -1)) / dist ** g).max())


def finite_difference_check(system: SystemSpec, states, step: float = 1e-5) -> dict:
    """Worst mixed relative error of DG, DQ, DB against central differences.

    Error is ``|fd - exact| / max(1, |exact|)`` entrywise.
    """
    s = np.atleast_2d(np.asarray(states, dtype=float))
    out = {}
    for name, f, df in (("flux", system.flux, system.flux_gradient),
                        ("companion", system.companion, system.companion_gradient),
                        ("multipliers", system.multipliers, system.multiplier_gradient)):
        exact = df(s)
        fd = np.empty_like(exact)
        for j in range(system.n):
            e = np.zeros(system.n)
            e[j] = step
            fd[..., j] = (f(s + e) - f(s - e)) / (2 * step)
        out[name] = float((np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))).max())
    return out


def _check_support_in_grid(field: Field, tf: TestFunction) -> None:
    g = field.grid
    for k in range(g.dim_count):
        if g.periodic_per_axis[k]:
            continue
        a = g.origin_per_axis[k]
        b = a + g.extent_per_axis[k]
        if tf.support_lower[k] < a or tf.support_upper[k] > b:
            raise ValueError(f"test function support leaves the grid on axis {k}")


def weak_residual(system: SystemSpec, field: Field, test_function: TestFunction) -> np.ndarray:
    """``sum_alpha int G_{i alpha}(u) d_alpha phi dx`` for each equation i.

    Rectangle-rule quadrature over the lattice (identical to the trapezoid
    rule because phi vanishes near the boundary).
    """
    if field.grid.dim_count != system.d + 1:
        raise ValueError(f"{system.name} needs a grid with {system.d + 1} axes")
    if field.component_count != system.n:
        raise ValueError(f"field has {field.component_count} components, system needs {system.n}")
    _check_support_in_grid(field, test_function)
    system.check_states(field.values, "field value")
    dphi = test_function.gradient(field.grid)
    G = system.flux(field.values)
    axes = tuple(range(field.grid.dim_count))
    return np.einsum("...ia,...a->...i", G, dphi).sum(axis=axes) * field.grid.cell_volume
