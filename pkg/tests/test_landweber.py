import math

import numpy as np
import pytest

from multiwave.landweber import (IterationLog, LandweberConfig, LandweberDivergence, SpectralBounds,
                                 StoppingRule, contraction_norm, convergence_rate, estimate_bounds,
                                 g_N, g_N_curve, g_N_max, gamma_star, iterate, iterate_with_guess)


def matrix_ops(A):
    return (lambda f: A @ f), (lambda g: A.T @ g)


class TestIterate:
    def test_zero_data(self):
        fwd, adj = matrix_ops(np.diag([1.0, 2.0]))
        f, log = iterate(np.zeros(2), LandweberConfig(0.3, 10), fwd, adj)
        assert not f.any() and len(log) == 11 and log.steps[0] == 0

    def test_diagonal_oracle(self):
        A = np.diag([1.0, 2.0])
        truth = np.array([3.0, 5.0])
        fwd, adj = matrix_ops(A)
        f, log = iterate(A @ truth, LandweberConfig(0.3, 100), fwd, adj, truth=truth)
        assert np.max(np.abs(f - np.linalg.pinv(A) @ (A @ truth))) <= 1e-8
        # closed form per component: error_j = (1 - gamma s_j^2)^k truth_j
        k = 7
        e = np.hypot(0.7**k * 3, (-0.2) ** k * 5) / np.hypot(3, 5)
        assert log.error_at(k) == pytest.approx(e, rel=1e-12)

    def test_fixed_point(self, rng):
        A = rng.standard_normal((6, 4))
        f = rng.standard_normal(4)
        fwd, adj = matrix_ops(A)
        out, log = iterate_with_guess(A @ f, f, LandweberConfig(0.05, 3), fwd, adj)
        assert np.max(np.abs(out - f)) <= 1e-13
        assert log.residual[1] <= 1e-12

    def test_initial_guess_identity(self):
        A = np.diag([1.0, 2.0])
        fwd, adj = matrix_ops(A)
        m = np.array([1.0, -4.0])
        f0 = np.array([0.5, 0.25])
        cfg = LandweberConfig(0.3, 12)
        a, _ = iterate_with_guess(m, f0, cfg, fwd, adj)
        b, _ = iterate(m - A @ f0, cfg, fwd, adj)
        assert np.max(np.abs(a - (f0 + b))) <= 1e-10
        c, _ = iterate_with_guess(m, np.zeros(2), cfg, fwd, adj)
        d, _ = iterate(m, cfg, fwd, adj)
        assert np.array_equal(c, d)

    def test_monotone_residual_spd(self, rng):
        Q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
        A = Q @ np.diag(np.linspace(0.1, 2.0, 8)) @ Q.T
        fwd, adj = matrix_ops(A)
        _, log = iterate(rng.standard_normal(8), LandweberConfig(0.45, 60), fwd, adj)
        assert np.all(np.diff(log.residual) <= 1e-14)

    def test_divergence_detected(self):
        fwd, adj = matrix_ops(np.diag([1.0, 2.0]))
        with pytest.raises(LandweberDivergence) as info:
            iterate(np.ones(2), LandweberConfig(3.0, 500), fwd, adj)
        assert 1 < info.value.step < 500
        assert len(info.value.log) == info.value.step

    def test_stopping_rule(self):
        fwd, adj = matrix_ops(np.diag([1.0, 2.0]))
        cfg = LandweberConfig(0.3, 1000, stop=StoppingRule(C=1.5, delta=1e-3))
        _, log = iterate(np.array([3.0, 10.0]), cfg, fwd, adj)
        assert log.stopped_at is not None and log.stopped_at < 1000
        assert log.residual[-1] < 1.5e-3 <= log.residual[-2]

    def test_log_every(self):
        fwd, adj = matrix_ops(np.eye(2))
        _, log = iterate(np.ones(2), LandweberConfig(0.5, 10, log_every=4), fwd, adj)
        assert log.steps == [0, 4, 8, 10]

    @pytest.mark.parametrize("kw", [dict(gamma=0.0), dict(gamma=-1.0), dict(gamma=1.0, max_steps=0)])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            LandweberConfig(**kw)

    def test_stopping_validation(self):
        with pytest.raises(ValueError):
            StoppingRule(C=1.0, delta=0.1)
        with pytest.raises(ValueError):
            StoppingRule(C=2.0, delta=-0.1)


class TestStepTheory:
    def test_gamma_star(self):
        assert gamma_star(SpectralBounds(1, 20)) == pytest.approx(2 / 21, abs=1e-15)
        assert gamma_star(SpectralBounds(0, 2)) == 1.0
        assert gamma_star(SpectralBounds(1, 1)) == 1.0
        with pytest.raises(ValueError):
            gamma_star(SpectralBounds(0, 0))

    def test_contraction(self):
        b = SpectralBounds(1, 20)
        g = 2 / 21
        assert convergence_rate(g, b) == pytest.approx(2 / 21, abs=1e-15)
        assert contraction_norm(g, b) == pytest.approx(19 / 21, abs=1e-15)
        assert contraction_norm(1e-12, b) == pytest.approx(1, abs=1e-10)
        assert convergence_rate(1e-12, b) == pytest.approx(0, abs=1e-10)
        b0 = SpectralBounds(0, 4)
        assert contraction_norm(0.5, b0) == 1 and convergence_rate(0.5, b0) == 0

    def test_gamma_star_maximizes_rate(self, rng):
        for _ in range(20):
            L2 = rng.uniform(0.5, 50)
            b = SpectralBounds(rng.uniform(0, L2), L2)
            gs = np.linspace(1e-4, 2.5 / L2, 1000)
            best = convergence_rate(gamma_star(b), b)
            assert all(convergence_rate(g, b) <= best + 1e-12 for g in gs)

    def test_bounds_validation(self):
        with pytest.raises(ValueError):
            SpectralBounds(2, 1)


class TestEstimateBounds:
    def test_identity_multiple(self):
        b = estimate_bounds(lambda x: 3 * x, (4, 4))
        assert b.L2norm == pytest.approx(3, abs=1e-4) and b.mu2 == 0 and not b.approximate

    def test_diag(self):
        b = estimate_bounds(lambda x: np.array([1.0, 4.0]) * x, (2,))
        assert b.L2norm == pytest.approx(4, abs=1e-4)

    def test_flagged_when_capped(self):
        d = np.linspace(0.9, 1.0, 50)
        b = estimate_bounds(lambda x: d * x, (50,), max_apps=3, rtol=1e-14)
        assert b.approximate and b.L2norm <= 1.0


class TestGN:
    def test_values(self):
        for N in (1, 5, 50):
            assert g_N(1.0, N, [1.0])[0] == pytest.approx(1.0)
        assert g_N(1.0, 10, [0.0])[0] == 0.0
        lam = np.array([1e-9, 0.3])
        assert np.allclose(g_N_curve(0.5, 20, lam), (1 - (1 - 0.5 * lam**2) ** 20) / lam)
        assert g_N(1.0, 10, [1e-9])[0] == pytest.approx(10 * 1e-9, rel=1e-6)
        with pytest.raises(ValueError):
            g_N(1.0, 0, [1.0])

    def test_max_location(self):
        for N in (25, 100, 400):
            x, v = g_N_max(1.0, N)
            # the maximum of (1 - exp(-s^2)) / s sits at s ~ 1.12 after rescaling by sqrt(N)
            assert x * math.sqrt(N) == pytest.approx(1.1209, rel=0.02)
            lam = np.linspace(1e-6, math.sqrt(2), 20001)
            assert v >= g_N(1.0, N, lam).max() - 1e-12


class TestLogCsv:
    def test_roundtrip(self, tmp_path):
        log = IterationLog()
        for k in range(4):
            log.append(k, 1.0 / (k + 1), 0.5 / (k + 1), 0.01 * k, hd_error=0.1 * k)
        log.to_csv(tmp_path / "a.csv")
        back = IterationLog.from_csv(tmp_path / "a.csv")
        assert back.steps == log.steps and back.rel_error == log.rel_error
        assert back.extra["hd_error"] == log.extra["hd_error"]
        assert (tmp_path / "a.csv").read_text().splitlines()[0] == "step,residual,rel_error,seconds,hd_error"

    def test_timings_off(self, tmp_path):
        log = IterationLog()
        log.append(0, 1.0, 1.0, 123.4)
        log.to_csv(tmp_path / "a.csv", timings=False)
        assert IterationLog.from_csv(tmp_path / "a.csv").seconds == [0.0]
