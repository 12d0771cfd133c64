import math

import numpy as np
import pytest
from scipy.integrate import quad

from clcons.grid import Field, field_norm_p, make_grid, make_region, sample_function
from clcons.mollify import (
    convolve_taps,
    dyadic_epsilons,
    make_kernel,
    mollified_derivative,
    mollify,
    snap_epsilon,
)


def psi(y):
    return math.exp(-1.0 / (1.0 - y * y)) if abs(y) < 1 else 0.0


def symbol_oracle(eps, k=1):
    """Continuous Fourier coefficient of the 1D normalised bump at wavenumber k."""
    num = quad(lambda y: psi(y) * math.cos(2 * math.pi * k * eps * y), -1, 1, epsabs=1e-15)[0]
    return num / quad(psi, -1, 1, epsabs=1e-15)[0]


def torus(n=1024):
    return make_grid([n], [1.0], [True])


def sine(g):
    return sample_function(g, lambda x: np.sin(2 * np.pi * x[..., 0]))


GRIDS = [
    make_grid([256], [1.0], [True]),
    make_grid([64, 48], [1.0, 1.0], [False, True]),
    make_grid([40, 40], [1.0, 2.0], [True, True]),
    make_grid([24, 24, 24], [1.0, 1.0, 1.0], [False, True, True]),
]


class TestKernel:
    @pytest.mark.parametrize("grid", GRIDS, ids=lambda g: str(g.shape))
    @pytest.mark.parametrize("profile", ["bump", "tensor_bump"])
    def test_invariants(self, grid, profile):
        eps = 4 * max(grid.spacing_per_axis)
        k = make_kernel(grid, eps, profile)
        assert abs(k.mass() - 1) <= 1e-12
        assert np.all(k.weights >= 0)
        lengths = np.linalg.norm(k.offsets * np.asarray(grid.spacing_per_axis), axis=1)
        assert lengths.max() <= eps
        # symmetric: w(-o) == w(o) exactly
        lookup = {tuple(o): w for o, w in zip(k.offsets, k.weights)}
        assert all(lookup[tuple(-np.array(o))] == w for o, w in lookup.items())
        # derivative taps annihilate constants
        assert np.abs(k.derivative_weights.sum(axis=0)).max() <= 1e-12 * np.abs(
            k.derivative_weights).sum()

    def test_too_small_and_too_large(self):
        g = torus(64)
        with pytest.raises(ValueError):
            make_kernel(g, 1.5 / 64)
        with pytest.raises(ValueError):
            make_kernel(g, 0.5)
        with pytest.raises(ValueError):
            make_kernel(g, 0.1, profile="gaussian")

    def test_discrete_symbol_matches_quadrature(self):
        g = torus(1024)
        k = make_kernel(g, 1 / 16)
        assert k.symbol(0, 1) == pytest.approx(symbol_oracle(1 / 16), abs=1e-10)


class TestMollify:
    @pytest.mark.parametrize("grid", GRIDS, ids=lambda g: str(g.shape))
    def test_constants_preserved(self, grid):
        k = make_kernel(grid, 4 * max(grid.spacing_per_axis))
        f = Field(grid, np.full(grid.shape + (2,), 1.0))
        out = mollify(f, k)
        assert np.abs(out.values - 1).max() <= 1e-12
        d = mollified_derivative(f, k, 0)
        assert np.abs(d.values).max() <= 1e-12

    def test_linear_field_on_bounded_axis(self):
        g = make_grid([201], [1.0], [False])
        f = sample_function(g, lambda x: 3 * x[..., 0] - 1)
        k = make_kernel(g, 0.05)
        r = make_region(g, 0.05)
        out = mollify(f, k, r)
        np.testing.assert_allclose(out.values, f.values[r.slices], atol=1e-12)

    def test_sine_attenuation(self):
        g = torus(1024)
        eps = 1 / 16
        m = symbol_oracle(eps)
        assert 0 < m < 1
        out = mollify(sine(g), make_kernel(g, eps))
        expected = m * np.sin(2 * np.pi * g.axis_coordinates(0))
        assert np.abs(out.values[:, 0] - expected).max() <= 1e-10

    def test_sine_derivative(self):
        g = torus(1024)
        eps = 1 / 16
        m = symbol_oracle(eps)
        d = mollified_derivative(sine(g), make_kernel(g, eps), 0).values[:, 0]
        expected = 2 * np.pi * m * np.cos(2 * np.pi * g.axis_coordinates(0))
        assert np.abs(d - expected).max() / np.abs(expected).max() <= 1e-3

    def test_derivative_antisymmetry_under_reflection(self):
        g = torus(256)
        rng = np.random.default_rng(4)
        vals = rng.normal(size=(256, 1))
        refl = np.roll(vals[::-1], 1, axis=0)  # u(-x) on the lattice
        k = make_kernel(g, 8 / 256)
        d = mollified_derivative(Field(g, vals), k, 0).values
        dr = mollified_derivative(Field(g, refl), k, 0).values
        np.testing.assert_allclose(dr, -np.roll(d[::-1], 1, axis=0), atol=1e-12)

    def test_linear_flux_commutes(self):
        g = make_grid([64, 64], [1.0, 1.0], [False, True])
        rng = np.random.default_rng(2)
        u = Field(g, rng.normal(size=(64, 64, 2)))
        A = rng.normal(size=(3, 2))
        k = make_kernel(g, 0.1)
        lhs = mollify(u, k).values @ A.T
        rhs = mollify(Field(g, u.values @ A.T), k).values
        assert np.abs(lhs - rhs).max() <= 1e-12

    def test_margin_too_small(self):
        g = make_grid([64], [1.0], [False])
        k = make_kernel(g, 0.1)
        with pytest.raises(ValueError):
            mollify(Field(g, np.zeros((64, 1))), k, make_region(g, 0.05))

    def test_field_with_invalid_samples(self):
        g = torus(64)
        f = Field(g, np.zeros((64, 1)), np.arange(64) > 2)
        with pytest.raises(ValueError):
            mollify(f, make_kernel(g, 0.1))

    @pytest.mark.parametrize("grid", GRIDS, ids=lambda g: str(g.shape))
    def test_fft_path_matches_direct(self, grid):
        rng = np.random.default_rng(7)
        vals = rng.normal(size=grid.shape + (2,))
        eps = 5 * max(grid.spacing_per_axis)
        k = make_kernel(grid, eps)
        r = make_region(grid, eps)
        a = convolve_taps(vals, grid, k.offsets, k.weights, r, "direct")
        b = convolve_taps(vals, grid, k.offsets, k.weights, r, "fft")
        assert np.abs(a - b).max() <= 1e-12

    def test_young_inequality(self):
        g = make_grid([128, 32], [1.0, 1.0], [True, True])
        f = Field(g, np.random.default_rng(3).standard_cauchy(size=(128, 32, 1)).clip(-50, 50))
        out = mollify(f, make_kernel(g, 0.1))
        for p in (1, 2, 3):
            assert field_norm_p(out, p) <= (1 + 1e-10) * field_norm_p(f, p)


class TestEpsilonHelpers:
    def test_snap(self):
        g = torus(100)
        assert snap_epsilon(g, 0.033) == pytest.approx(0.03)
        assert snap_epsilon(g, 0.001) == pytest.approx(0.02)

    def test_dyadic_default_window(self):
        g = torus(4096)
        eps = dyadic_epsilons(g)
        assert eps[0] == 2.0**-3 and eps[-1] == 2.0**-10
        assert eps == sorted(eps, reverse=True)

    def test_dyadic_explicit(self):
        assert dyadic_epsilons(torus(4096), 2.0**-8, 2.0**-4) == [2.0**-j for j in range(4, 9)]

    def test_empty_window(self):
        with pytest.raises(ValueError):
            dyadic_epsilons(torus(64), 0.2, 0.1)
