import dataclasses
import json
import math

import numpy as np
import pytest

from clcons.analysis import (
    ScalingReport,
    besov_seminorm,
    commutator_scaling,
    companion_residual_mollified,
    companion_weak_residual,
    dissipation_density,
    fit_loglog_exponent,
    flux_commutator,
    gradient_scaling,
    integration_by_parts_bound,
    quadrature_tolerance,
    vmo_modulus,
)
from clcons.generators import burgers_riemann, burgers_smooth, step_field
from clcons.grid import Field, TestFunction, make_grid, sample_function
from clcons.mollify import make_kernel
from clcons.systems import burgers_system, euler_system, linear_system


class TestFit:
    eps = [2.0**-j for j in range(2, 9)]

    def test_exact_power(self):
        f = fit_loglog_exponent([(e, e**2) for e in self.eps])
        assert f.slope == pytest.approx(2.0, abs=1e-12)
        assert f.r_squared == pytest.approx(1.0)

    def test_constant(self):
        assert fit_loglog_exponent([(e, 3.0) for e in self.eps]).slope == pytest.approx(0, abs=1e-12)

    def test_noisy(self):
        rng = np.random.default_rng(5)
        pairs = [(e, e**0.7 * (1 + 0.01 * rng.normal())) for e in self.eps]
        assert fit_loglog_exponent(pairs).slope == pytest.approx(0.7, abs=0.02)

    def test_too_few(self):
        with pytest.raises(ValueError):
            fit_loglog_exponent([(0.1, 1.0), (0.2, 2.0), (0.3, 0.0)])


class TestScalingReport:
    def test_sorted_and_serialised(self, tmp_path):
        r = ScalingReport("x", [0.1, 0.4, 0.2], [1.0, 4.0, 2.0], [2.0, 8.0, 4.0]).refit()
        assert r.epsilons == [0.4, 0.2, 0.1]
        assert r.ratios == [0.5, 0.5, 0.5]
        assert r.slope == pytest.approx(1.0)
        assert r.ratio_slope == pytest.approx(0.0, abs=1e-12)
        r.to_csv(tmp_path / "x.csv")
        lines = (tmp_path / "x.csv").read_text().splitlines()
        assert lines[0] == "epsilon,value,bound,ratio"
        assert [float(v) for v in lines[1].split(",")] == [0.4, 4.0, 8.0, 0.5]
        d = json.loads(r.to_json())
        assert d["pairs"][0] == {"epsilon": 0.4, "value": 4.0, "bound": 8.0, "ratio": 0.5}

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ScalingReport("x", [0.1, 0.2], [1.0, -1.0])

    def test_degenerate(self):
        r = ScalingReport("x", [0.1, 0.2, 0.3], [0.0, 0.0, 0.0]).refit()
        assert r.degenerate and r.fit is None
        assert "degenerate: identically zero" in r.flags


def torus(n):
    return make_grid([n], [1.0], [True])


class TestBesov:
    def test_constant(self):
        f = Field(torus(64), np.ones((64, 1)))
        assert besov_seminorm(f, 3, 0.4).seminorm == 0.0

    @pytest.mark.parametrize("p, s", [(2, 0.3), (3, 0.5)])
    def test_sawtooth_against_direct_sum(self, p, s):
        n = 256
        g = torus(n)
        f = sample_function(g, lambda x: x[..., 0])
        h = 1 / n
        max_shift = 0.125
        est = besov_seminorm(f, p, s, max_shift_length=max_shift)

        def shift_norm(k):  # |x - (x - kh) mod 1| is kh on n-k points and 1-kh on k points
            return ((n - k) * (k * h) ** p * h + k * (1 - k * h) ** p * h) ** (1 / p)

        ks = range(1, int(max_shift * n) + 1)
        oracle = max(shift_norm(k) / (k * h) ** s for k in ks)
        assert est.seminorm == pytest.approx(oracle, rel=1e-12)

    def test_sawtooth_critical_exponent(self):
        # the jump contributes |x'|^(1/p - s): bounded for s <= 1/p, and for s > 1/p
        # the supremum sits at the smallest lattice shift and grows like h^(1/p - s)
        p = 2

        def est(n, s):
            f = sample_function(torus(n), lambda x: x[..., 0])
            return besov_seminorm(f, p, s, max_shift_length=0.1)

        below = [est(n, 0.4).seminorm for n in (256, 4096)]
        assert below[1] == pytest.approx(below[0], rel=0.05)
        coarse, fine = est(256, 0.7), est(4096, 0.7)
        assert abs(coarse.worst_shift[0]) == 1 and abs(fine.worst_shift[0]) == 1
        assert fine.seminorm / coarse.seminorm == pytest.approx(16**0.2, rel=0.05)

    def test_empty_shift_set(self):
        with pytest.raises(ValueError):
            besov_seminorm(Field(torus(64), np.zeros((64, 1))), 2, 0.5, max_shift_length=1e-3)


class TestVMO:
    def test_constant(self):
        assert vmo_modulus(Field(torus(64), np.ones((64, 1))), 3, 4 / 64) == 0.0

    @pytest.mark.parametrize("r", [4, 8, 16, 32])
    def test_step_exact_count(self, r):
        n = 1024
        g = torus(n)
        f = step_field(g, -1.0, 1.0, 0.5)
        eps = r / n
        # two jumps of size 2; at offset o exactly |o| centre points straddle each jump
        oracle = (1 / eps) * (1 / n) * 8 * 2 * r * (r + 1) / (2 * r + 1)
        assert vmo_modulus(f, 3, eps) == pytest.approx(oracle, rel=1e-12)
        assert oracle == pytest.approx(16 * (r + 1) / (2 * r + 1))

    def test_crude_bound(self):
        rng = np.random.default_rng(0)
        f = Field(torus(128), rng.uniform(-2, 2, size=(128, 1)))
        eps = 6 / 128
        assert vmo_modulus(f, 3, eps) <= 2**3 * np.abs(f.values).max() ** 3 / eps

    def test_ball_too_small(self):
        g = make_grid([16, 4], [1.0, 1.0], [True, True])
        with pytest.raises(ValueError):
            vmo_modulus(Field(g, np.zeros((16, 4, 1))), 2, 0.03)


class TestCommutator:
    def test_linear_flux_vanishes(self):
        g = make_grid([32, 64], [1.0, 1.0], [False, True])
        u = Field(g, np.random.default_rng(0).normal(size=(32, 64, 2)))
        sys_ = linear_system(np.random.default_rng(1).normal(size=(2, 2, 2)))
        C = flux_commutator(sys_, u, make_kernel(g, 0.1))
        assert np.abs(C.values).max() <= 1e-12

    def test_constant_field_vanishes(self):
        g = torus(128)
        C = flux_commutator(burgers_system(), Field(g, np.full((128, 1), 0.3)),
                            make_kernel(g, 0.05))
        assert np.abs(C.values).max() <= 1e-12

    @pytest.mark.parametrize("r", [4, 16, 64])
    def test_burgers_straddle_variance(self, r):
        n = 1024
        g = torus(n)
        a, b = 1.5, -0.5  # jump H = 2
        f = step_field(g, b, a, 0.5)
        k = make_kernel(g, r / n)
        C = flux_commutator(burgers_system(), f, k).values[:, 1]  # G_01 = u^2/2
        i = n // 2  # first point on the low side of the jump
        m = k.weights[k.offsets[:, 0] > 0].sum() * g.cell_volume  # mass reaching the high side
        exact = -0.5 * m * (1 - m) * (a - b) ** 2
        assert C[i] == pytest.approx(exact, abs=1e-12)
        # the symmetric straddle limit -H^2/8, up to the lattice offset of the centre tap
        assert abs(C[i] + (a - b) ** 2 / 8) <= 0.5 * (m - 0.5) ** 2 * (a - b) ** 2 + 1e-14

    def test_linear_scaling_report_is_degenerate(self):
        g = torus(512)
        u = sample_function(g, lambda x: np.sin(2 * np.pi * x[..., 0]))
        rep = commutator_scaling(linear_system(np.ones((1, 2, 1))), u, 1.5,
                                 [2.0**-j for j in range(4, 7)])
        assert rep.degenerate and "degenerate: identically zero" in rep.flags
        assert rep.passed is True

    def test_constant_gradient_report_passes(self):
        g = torus(256)
        rep = gradient_scaling(Field(g, np.ones((256, 1))), 3, "bump", [1 / 8, 1 / 16, 1 / 32])
        assert rep.passed and rep.degenerate


def shock_field(n):
    return burgers_riemann(make_grid([n, n], [1.0, 1.0], [False, True]), 1.0, -1.0, 0.5)


class TestResiduals:
    def test_constant_field(self):
        g = make_grid([128, 128], [1.0, 1.0], [False, True])
        f = Field(g, np.full((128, 128, 1), 0.4))
        tf = TestFunction((0.5, 0.5), (0.25, 0.25))
        k = make_kernel(g, 1 / 16)
        assert abs(companion_residual_mollified(burgers_system(), f, k, tf)) <= 1e-12
        assert abs(companion_weak_residual(burgers_system(), f, tf)) <= 1e-12
        D = dissipation_density(burgers_system(), f, k)
        assert np.abs(D.values).max() <= 1e-12

    def test_weak_residual_linear_in_amplitude_and_companion(self):
        f = shock_field(128)
        s = burgers_system()
        tf = TestFunction((0.5, 0.5), (0.25, 0.25))
        r = companion_weak_residual(s, f, tf)
        assert companion_weak_residual(s, f, dataclasses.replace(tf, amplitude=-3.0)) == \
            pytest.approx(-3 * r, rel=1e-14)
        s2 = dataclasses.replace(s, companion=lambda u: 2.5 * s.companion(u))
        assert companion_weak_residual(s2, f, tf) == pytest.approx(2.5 * r, rel=1e-14)

    def test_weak_residual_locality(self):
        f = shock_field(256)
        tf = TestFunction((0.5, 0.2), (0.2, 0.1))  # entirely on the u = 1 side
        s = burgers_system()
        assert abs(companion_weak_residual(s, f, tf)) <= quadrature_tolerance(s, f, tf)

    def test_shock_weak_residual_value(self):
        f = shock_field(512)
        tf = TestFunction((0.5, 0.5), (0.25, 0.25))
        from scipy.integrate import quad
        it = quad(lambda t: math.exp(-1 / (1 - ((t - 0.5) / 0.25) ** 2)) if abs(t - 0.5) < 0.25
                  else 0.0, 0.25, 0.75, epsabs=1e-14)[0] * math.exp(-1)
        assert companion_weak_residual(burgers_system(), f, tf) == pytest.approx(
            2 / 3 * it, rel=0.02)

    def test_dissipation_matches_residual_on_smooth_solution(self):
        g = make_grid([257, 256], [0.5, 1.0], [False, True])
        f = burgers_smooth(g, 0.1)
        s = burgers_system()
        tf = TestFunction((0.25, 0.5), (0.15, 0.3))
        k = make_kernel(g, 1 / 32)
        r = companion_residual_mollified(s, f, k, tf)
        dint = dissipation_density(s, f, k).integrate(tf)
        bound = integration_by_parts_bound(s, f, k, tf)
        h = max(g.spacing_per_axis)
        assert abs(dint - r) <= 10 * (h**2 + bound)

    def test_dissipation_vanishes_for_smooth_solution(self):
        g = make_grid([513, 512], [0.5, 1.0], [False, True])
        f = burgers_smooth(g, 0.1)
        sups = [np.abs(dissipation_density(burgers_system(), f, make_kernel(g, e)).values).max()
                for e in (1 / 16, 1 / 32, 1 / 64)]
        assert sups[0] > sups[1] > sups[2]

    def test_residual_requires_interior_support(self):
        f = shock_field(64)
        with pytest.raises(ValueError):
            companion_residual_mollified(burgers_system(), f, make_kernel(f.grid, 0.125),
                                         TestFunction((0.2, 0.5), (0.15, 0.2)))

    def test_band_integral_shape(self):
        f = shock_field(128)
        D = dissipation_density(burgers_system(), f, make_kernel(f.grid, 1 / 16))
        band = D.band_integral(1, 0.5, 0.15)
        assert band.shape == (D.grid.shape[0],)

    def test_euler_mollified_states_clamped_with_warning(self):
        # data sitting exactly on the density floor can leave the box by rounding
        g = make_grid([64, 64], [1.0, 1.0], [False, True])
        vals = np.zeros((64, 64, 2))
        vals[..., 0] = 0.1
        vals[:, ::3, 0] = 0.1 + 3e-17
        f = Field(g, vals)
        e = euler_system(1)
        k = make_kernel(g, 0.1)
        with pytest.warns(RuntimeWarning, match="clamping"):
            C = flux_commutator(e, f, k)
        assert np.all(np.isfinite(C.values))
