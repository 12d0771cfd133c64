import math

import numpy as np
import pytest

from clcons.grid import (
    Field,
    TestFunction,
    field_norm_p,
    make_grid,
    make_region,
    read_clf,
    read_csv,
    sample_function,
    shift_field,
    write_clf,
    write_csv,
)


def sine(grid):
    return sample_function(grid, lambda x: np.sin(2 * np.pi * x[..., 0]))


class TestMakeGrid:
    def test_torus_spacing(self):
        g = make_grid([256], [1.0], [True])
        assert g.spacing_per_axis == (1 / 256,)
        assert g.shape == (256,)

    def test_bounded_axis_includes_both_endpoints(self):
        g = make_grid([64, 128], [1.0, 2.0], [False, True])
        assert g.spacing_per_axis[0] == pytest.approx(1 / 63, abs=0)
        assert g.spacing_per_axis[1] == 2 / 128
        t = g.axis_coordinates(0)
        assert t[0] == 0.0 and t[-1] == pytest.approx(1.0, abs=1e-15)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            make_grid([2], [1.0], [True])

    @pytest.mark.parametrize("args", [([8, 8], [1.0], [True, True]),
                                      ([8], [0.0], [True]),
                                      ([8], [-1.0], [True])])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            make_grid(*args)

    def test_origin_shifts_coordinates(self):
        g = make_grid([8], [1.0], [True], origin_per_axis=[0.5])
        assert g.axis_coordinates(0)[0] == 0.5


class TestSampleFunction:
    def test_constant(self):
        g = make_grid([16, 8], [1.0, 1.0], [True, False])
        f = sample_function(g, lambda x: np.full(x.shape[:-1] + (2,), 3.5))
        assert f.component_count == 2
        assert np.all(f.values == 3.5)

    def test_sine_at_quarter(self):
        f = sine(make_grid([256], [1.0], [True]))
        assert f.values[64, 0] == pytest.approx(1.0, abs=1e-15)

    def test_nan_rejected(self):
        g = make_grid([16], [1.0], [True])
        with pytest.raises(ValueError):
            sample_function(g, lambda x: np.where(x[..., 0] > 0.5, np.nan, 0.0))

    def test_pointwise_mode_matches_vectorized(self):
        g = make_grid([12, 5], [1.0, 2.0], [True, False])
        ev = lambda x: np.stack([x[..., 0] * x[..., 1], np.cos(x[..., 1])], axis=-1)  # noqa: E731
        a = sample_function(g, ev)
        b = sample_function(g, ev, vectorized=False)
        np.testing.assert_array_equal(a.values, b.values)

    def test_values_are_read_only(self):
        f = sine(make_grid([16], [1.0], [True]))
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0


class TestShift:
    def test_zero_and_full_period(self):
        f = sine(make_grid([32], [1.0], [True]))
        np.testing.assert_array_equal(shift_field(f, [0]).values, f.values)
        np.testing.assert_array_equal(shift_field(f, [32]).values, f.values)

    def test_definition(self):
        f = sine(make_grid([32], [1.0], [True]))
        np.testing.assert_array_equal(shift_field(f, [3]).values[5], f.values[2])

    def test_bounded_axis_marks_invalid(self):
        g = make_grid([10], [1.0], [False])
        f = Field(g, np.ones((10, 1)))
        s = shift_field(f, [2])
        assert s.mask is not None
        assert not s.mask[:2].any() and s.mask[2:].all()
        # invalid samples contribute nothing and the volume is not renormalised
        assert field_norm_p(s, 1) == pytest.approx(8 * g.cell_volume)


class TestNorm:
    def test_constant(self):
        g = make_grid([64], [1.0], [True])
        assert field_norm_p(Field(g, np.full((64, 1), 2.0)), 3) == pytest.approx(2.0, rel=1e-14)

    def test_zero(self):
        g = make_grid([64], [1.0], [True])
        assert field_norm_p(Field(g, np.zeros((64, 1))), 2) == 0.0

    def test_sine_l2(self):
        assert field_norm_p(sine(make_grid([1024], [1.0], [True])), 2) == pytest.approx(
            1 / math.sqrt(2), abs=1e-6)

    def test_euclidean_across_components(self):
        g = make_grid([8], [1.0], [True])
        f = Field(g, np.tile([3.0, 4.0], (8, 1)))
        assert field_norm_p(f, 2) == pytest.approx(5.0)
        np.testing.assert_allclose(field_norm_p(f, 2, per_component=True), [3.0, 4.0])

    def test_region_restriction(self):
        g = make_grid([11], [1.0], [False])
        vals = np.zeros((11, 1))
        vals[0] = vals[-1] = 100.0
        r = make_region(g, 0.1)
        assert field_norm_p(Field(g, vals), 1, r) == 0.0

    def test_p_below_one(self):
        with pytest.raises(ValueError):
            field_norm_p(sine(make_grid([8], [1.0], [True])), 0.5)


class TestRegion:
    def test_margin_only_on_bounded_axes(self):
        g = make_grid([101, 64], [1.0, 1.0], [False, True])
        r = make_region(g, 0.1)
        assert r.lo == (10, 0) and r.hi == (91, 64)
        sub = r.subgrid()
        assert sub.shape == (81, 64)
        assert sub.axis_coordinates(0)[0] == pytest.approx(0.1)

    def test_periodic_margin_rejected(self):
        g = make_grid([16], [1.0], [True])
        with pytest.raises(ValueError):
            make_region(g, [0.1])

    def test_empty_region(self):
        g = make_grid([11], [1.0], [False])
        with pytest.raises(ValueError):
            make_region(g, 0.6)


class TestTestFunction:
    def test_zero_outside_support(self):
        g = make_grid([41, 64], [1.0, 1.0], [False, True])
        tf = TestFunction((0.5, 0.25), (0.2, 0.1))
        X = g.meshgrid()
        outside = (np.abs(X[..., 0] - 0.5) >= 0.2) | (np.abs(X[..., 1] - 0.25) >= 0.1)
        assert np.all(tf.values(g)[outside] == 0.0)
        assert np.all(tf.gradient(g)[outside] == 0.0)

    def test_centre_value_and_gradient(self):
        g = make_grid([41], [1.0], [False])
        tf = TestFunction((0.5,), (0.25,), amplitude=2.0)
        assert tf.values(g)[20] == pytest.approx(2 * math.exp(-1))
        assert tf.gradient(g)[20, 0] == pytest.approx(0.0, abs=1e-14)

    def test_gradient_matches_closed_form(self):
        g = make_grid([2001], [1.0], [False])
        tf = TestFunction((0.4,), (0.3,))
        t = (g.axis_coordinates(0) - 0.4) / 0.3
        inside = np.abs(t) < 1
        expected = np.zeros_like(t)
        ti = t[inside]
        expected[inside] = np.exp(-1 / (1 - ti**2)) * (-2 * ti / (1 - ti**2) ** 2) / 0.3
        np.testing.assert_allclose(tf.gradient(g)[:, 0], expected, rtol=1e-13, atol=1e-300)

    def test_gradient_matches_finite_difference(self):
        g = make_grid([2001], [1.0], [False])
        tf = TestFunction((0.4,), (0.3,))
        v, dv = tf.values(g), tf.gradient(g)[:, 0]
        h = g.spacing_per_axis[0]
        fd = (v[2:] - v[:-2]) / (2 * h)
        # central differences carry an O(h^2 f''') error, largest near the support edge
        np.testing.assert_allclose(dv[1:-1], fd, atol=1e-3)

    def test_periodic_nearest_image(self):
        g = make_grid([64], [1.0], [True])
        tf = TestFunction((0.0,), (0.1,))
        v = tf.values(g)
        assert v[0] > 0 and v[-1] == pytest.approx(v[1])

    def test_region_containment(self):
        g = make_grid([101, 32], [1.0, 1.0], [False, True])
        r = make_region(g, 0.2)
        assert TestFunction((0.5, 0.5), (0.25, 0.2)).inside(r)
        assert not TestFunction((0.5, 0.5), (0.35, 0.2)).inside(r)


class TestFiles:
    def test_clf_round_trip(self, tmp_path):
        g = make_grid([6, 5], [1.0, 2.0], [False, True])
        f = Field(g, np.random.default_rng(0).normal(size=(6, 5, 2)))
        write_clf(f, tmp_path / "f.clf")
        back = read_clf(tmp_path / "f.clf")
        assert back.grid == g
        np.testing.assert_array_equal(back.values, f.values)

    def test_clf_header(self, tmp_path):
        g = make_grid([4], [1.0], [True])
        write_clf(Field(g, np.arange(4.0)[:, None]), tmp_path / "f.clf")
        raw = (tmp_path / "f.clf").read_bytes()
        header, payload = raw.split(b"\n", 1)
        assert b'"dtype": "f64le"' in header and b'"format_version": 1' in header
        assert np.frombuffer(payload, "<f8").tolist() == [0.0, 1.0, 2.0, 3.0]

    def test_clf_origin_round_trip(self, tmp_path):
        g = make_grid([4, 8], [1.0, 1.0], [False, True], [0.25, 0.0])
        f = Field(g, np.zeros((4, 8, 1)))
        write_clf(f, tmp_path / "o.clf")
        assert read_clf(tmp_path / "o.clf").grid.origin_per_axis == (0.25, 0.0)

    def test_clf_no_overwrite(self, tmp_path):
        g = make_grid([4], [1.0], [True])
        f = Field(g, np.zeros((4, 1)))
        write_clf(f, tmp_path / "f.clf")
        with pytest.raises(FileExistsError):
            write_clf(f, tmp_path / "f.clf", overwrite=False)

    def test_clf_truncated_payload(self, tmp_path):
        g = make_grid([4], [1.0], [True])
        write_clf(Field(g, np.zeros((4, 1))), tmp_path / "f.clf")
        p = tmp_path / "f.clf"
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(ValueError):
            read_clf(p)

    def test_csv_round_trip(self, tmp_path):
        g = make_grid([5, 4], [1.0, 1.0], [False, True])
        f = Field(g, np.random.default_rng(1).normal(size=(5, 4, 2)))
        write_csv(f, tmp_path / "f.csv")
        back = read_csv(tmp_path / "f.csv", g)
        np.testing.assert_array_equal(back.values, f.values)
        assert (tmp_path / "f.csv").read_text().splitlines()[0] == "x0,x1,u0,u1"
