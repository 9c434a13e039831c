import math

import numpy as np
import pytest

from multiwave.boundary import (BoundaryTrace, GammaMask, n_perimeter, perimeter_arclength,
                                perimeter_coordinates, resample_trace, side_slices)
from multiwave.fields import (GridError, GridSpec, interior_cutoff, make_grid, make_speed,
                              relative_error, render_gaussians, render_shepp_logan,
                              shepp_logan_value, weighted_norm)

from conftest import smooth_field


class TestMakeGrid:
    def test_stable_grid(self):
        g = make_grid(201, T=4, c_max=1.5)
        assert g.dx == pytest.approx(0.01, abs=1e-15)
        assert g.dt == pytest.approx(0.01 / (1.5 * math.sqrt(2)), rel=1e-14)
        assert g.nt == 849
        assert g.T == pytest.approx(g.nt * g.dt)

    def test_minimal_grid(self):
        g = make_grid(3, T=1 / math.sqrt(2), c_max=1)
        assert (g.dx, g.nt) == (1.0, 1)
        assert g.dt == pytest.approx(1 / math.sqrt(2))

    def test_unstable_grid(self):
        g = make_grid(101, T=1.8, c_max=1)
        assert g.dx == pytest.approx(0.02)
        assert g.dt == pytest.approx(0.014142, abs=1e-6)
        assert g.nt == 128

    @pytest.mark.parametrize("kw", [dict(extent=(-1, 1, -1, 2)), dict(c_max=0), dict(c_max=-1),
                                    dict(T=0), dict(nx=2)])
    def test_rejects(self, kw):
        args = dict(nx=11, T=1.0, c_max=1.0)
        args.update(kw)
        with pytest.raises(GridError):
            make_grid(**args)

    def test_explicit_dt_cfl(self):
        with pytest.raises(GridError):
            make_grid(11, T=1, c_max=1, dt=0.2)
        assert make_grid(11, T=1, c_max=1, dt=0.1).dt == 0.1

    def test_cfl_invariant(self):
        for model in ("constant", "trig", "square-jump"):
            probe = make_grid(41)
            c = make_speed(probe, model)
            g = make_grid(41, T=1, c_max=float(c.max()))
            g.check_cfl(c)

    def test_roundtrip_dict(self):
        g = make_grid(31, T=2.0, c_max=1.5)
        assert GridSpec.from_dict(g.to_dict()) == g


class TestPhantoms:
    def test_shepp_logan_range(self):
        f = render_shepp_logan(make_grid(101))
        assert f.min() >= -0.1 and f.max() <= 1.1

    def test_supersample_difference(self):
        g = make_grid(201)
        f1 = render_shepp_logan(g, 1)
        f4 = render_shepp_logan(g, 4)
        d = np.linalg.norm(f1 - f4) / np.linalg.norm(f4)
        assert 0 < d < 0.2

    def test_skull_interior_value(self):
        # inside the inner skull ellipse, away from every small feature
        assert shepp_logan_value(0.45, -0.35) == pytest.approx(0.2)
        g = make_grid(201)
        f = render_shepp_logan(g)
        j, i = np.argmin(np.abs(g.y + 0.35)), np.argmin(np.abs(g.x - 0.45))
        assert f[j, i] == pytest.approx(0.2)

    def test_deterministic(self):
        g = make_grid(51)
        assert np.array_equal(render_shepp_logan(g), render_shepp_logan(g))

    def test_gaussians(self):
        g = make_grid(101)
        assert not render_gaussians(g, []).any()
        one = render_gaussians(g, [((0, 0), 0.2, 1.0)])
        assert one[50, 50] == pytest.approx(1.0)
        X, Y = g.mesh()
        assert np.all(one[np.hypot(X, Y) >= 0.4] < math.exp(-2) + 1e-15)
        two = render_gaussians(g, [((0, 0), 0.2, 1.0), ((0.6, 0.6), 0.1, -2.0)])
        assert np.allclose(two, one + render_gaussians(g, [((0.6, 0.6), 0.1, -2.0)]), atol=1e-15)
        with pytest.raises(GridError):
            render_gaussians(g, [((0, 0), 0.0, 1.0)])


class TestSpeed:
    def test_trig_range(self):
        g = make_grid(201)
        c = make_speed(g, "trig")
        assert c.min() == pytest.approx(0.5) and c.max() == pytest.approx(1.5)
        j, i = np.argmin(np.abs(g.y)), np.argmin(np.abs(g.x - 0.5))
        assert c[j, i] == pytest.approx(1.5)

    def test_constant_and_jump(self):
        g = make_grid(41)
        assert np.all(make_speed(g, "constant") == 1.0)
        c = make_speed(g, "square-jump", c_in=1.0, c_out=1.5, half_side=0.5)
        X, Y = g.mesh()
        inside = (abs(X) <= 0.5) & (abs(Y) <= 0.5)
        assert np.all(c[inside] == 1.0) and np.all(c[~inside] == 1.5)

    def test_rejects(self):
        g = make_grid(11)
        with pytest.raises(GridError):
            make_speed(g, "constant", c0=0.0)
        with pytest.raises(GridError):
            make_speed(g, "nope")


class TestCutoffAndNorms:
    def test_cutoff(self):
        g = make_grid(101)
        chi = interior_cutoff(g, 0.03)
        assert chi.sum() == 95 * 95
        assert set(np.unique(chi)) == {0.0, 1.0}
        assert np.array_equal(chi * chi, chi)
        assert np.all(interior_cutoff(g, 0.0) == 1)
        with pytest.raises(GridError):
            interior_cutoff(g, 0.5)

    def test_norm_of_one(self):
        g = make_grid(41)
        one = np.ones(g.shape)
        assert weighted_norm(one, one, g) ** 2 == pytest.approx(4.0, rel=1e-14)
        assert weighted_norm(np.zeros(g.shape), one, g) == 0

    def test_relative_error(self, rng):
        g = make_grid(31)
        c = make_speed(g, "trig")
        f = smooth_field(g, rng)
        assert relative_error(f, f, c, g) == 0
        with pytest.raises(GridError):
            relative_error(f, np.zeros(g.shape), c, g)

    def test_norm_axioms(self, rng):
        g = make_grid(31)
        c = make_speed(g, "trig")
        for _ in range(10):
            f, h = rng.standard_normal((2,) + g.shape)
            a = rng.uniform(-3, 3)
            assert weighted_norm(a * f, c, g) == pytest.approx(abs(a) * weighted_norm(f, c, g))
            assert weighted_norm(f + h, c, g) <= weighted_norm(f, c, g) + weighted_norm(h, c, g)


class TestBoundary:
    def test_perimeter_layout(self):
        g = make_grid(5)
        x, y = perimeter_coordinates(g)
        assert n_perimeter(g) == 16
        # counterclockwise from the bottom-left corner, each node once
        assert (x[0], y[0]) == (-1, -1)
        assert len(set(zip(x.round(9), y.round(9)))) == 16
        sl = side_slices(g)
        assert np.all(y[sl["bottom"]] == -1) and np.all(x[sl["right"]] == 1)
        assert np.all(y[sl["top"]] == 1) and np.all(x[sl["left"]] == -1)

    def test_gamma_sides(self):
        g = make_grid(101, T=1.8)
        gam = GammaMask.from_sides(g, ("bottom", "left"), 0.2)
        x, y = perimeter_coordinates(g)
        on_right = np.isclose(x, 1) & (y > -1)
        assert gam.side_fully_inside(g, "bottom") and gam.side_fully_inside(g, "left")
        # 20% of the right side (length 2) from the bottom corner: y <= -0.6
        assert np.all(gam.flags[on_right] == (y[on_right] <= -0.6 + 1e-12))
        assert GammaMask.full(g).is_full()
        with pytest.raises(GridError):
            GammaMask(np.zeros(10, dtype=bool))

    def test_trace_zero_outside_gamma(self, rng):
        g = make_grid(21, T=0.5)
        gam = GammaMask.from_sides(g, ("top",))
        tr = BoundaryTrace(g, rng.standard_normal((g.nt + 1, n_perimeter(g))), gam)
        assert not tr.values[:, ~gam.flags].any()


class TestResample:
    def test_constant(self):
        coarse = make_grid(21, T=1.0)
        fine = make_grid(41, T=coarse.T, dt=0.01)
        tr = BoundaryTrace(fine, np.full((fine.nt + 1, n_perimeter(fine)), 2.5))
        out = resample_trace(tr, coarse)
        assert np.allclose(out.values, 2.5, atol=1e-14)

    def test_identity(self, rng):
        g = make_grid(21, T=1.0)
        tr = BoundaryTrace(g, rng.standard_normal((g.nt + 1, n_perimeter(g))))
        assert np.max(np.abs(resample_trace(tr, g).values - tr.values)) <= 1e-12

    def test_sinusoid_time_refinement(self):
        coarse = make_grid(101, T=1.0)
        fine = GridSpec(101, 101, coarse.dt / 7.41, math.ceil(coarse.T / (coarse.dt / 7.41)))
        s_f = perimeter_arclength(fine)
        vals = np.sin(2 * np.pi * 3 * fine.t)[:, None] * np.cos(np.pi * s_f)[None, :]
        out = resample_trace(BoundaryTrace(fine, vals), coarse)
        exact = np.sin(2 * np.pi * 3 * coarse.t)[:, None] * np.cos(np.pi * perimeter_arclength(coarse))[None, :]
        rms = np.sqrt(np.mean((out.values - exact) ** 2)) / np.sqrt(np.mean(exact**2))
        assert rms < 0.01

    def test_rejects_extrapolation(self):
        fine = make_grid(41, T=0.5, dt=0.01)
        coarse = make_grid(21, T=1.0)
        with pytest.raises(GridError):
            resample_trace(BoundaryTrace(fine, np.zeros((fine.nt + 1, n_perimeter(fine)))), coarse)
