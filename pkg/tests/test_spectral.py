import numpy as np
import pytest

from multiwave.fields import GridError, interior_cutoff
from multiwave.landweber import estimate_bounds
from multiwave.measurement import MeasurementConfig, MeasurementOperator
from multiwave.spectral import (AssembledOperator, SpectralError, assemble, bottom_fraction,
                                eigendecompose, high_freq_fraction, measurement_matrix,
                                normal_from_L, power_spectrum, wave_normal_matrix)


def dense(M, kind="normal-via-transpose"):
    return AssembledOperator(np.asarray(M, dtype=float), np.arange(len(M)), kind)


class TestEigen:
    def test_identity_and_scaled(self):
        assert np.allclose(eigendecompose(dense(np.eye(5))).eigenvalues, 1, atol=1e-12)
        assert np.allclose(eigendecompose(dense(2 * np.eye(5))).eigenvalues, 2, atol=1e-12)

    def test_diag_sorted(self):
        r = eigendecompose(dense(np.diag([3.0, 1.0, 2.0])))
        assert np.allclose(r.eigenvalues, [1, 2, 3], atol=1e-12)
        assert r.lambda_max == pytest.approx(3)

    def test_reconstruction_and_parseval(self, rng):
        B = rng.standard_normal((12, 12))
        M = B @ B.T
        r = eigendecompose(dense(M))
        Q = r.vectors
        assert np.max(np.abs(Q @ np.diag(r.eigenvalues) @ Q.T - M)) <= 1e-10 * np.abs(M).max()
        x = rng.standard_normal(12)
        assert power_spectrum(x, r).sum() == pytest.approx(x @ x, rel=1e-12)
        p = power_spectrum(Q[:, 4], r)
        assert p[4] == pytest.approx(1, abs=1e-12) and np.delete(p, 4).max() <= 1e-20 + 1e-24

    def test_general_path(self):
        M = np.array([[0.0, 1.0], [-1.0, 0.0]]) + 2 * np.eye(2)
        r = eigendecompose(dense(M, "generic"))
        assert np.allclose(r.eigenvalues, 2) and np.allclose(np.abs(r.imag), 1)
        with pytest.raises(SpectralError):
            power_spectrum(np.ones(2), r)

    def test_tail(self):
        r = eigendecompose(dense(np.diag([1e-14, 1e-3, 1.0])))
        assert list(r.tail()) == [0]

    def test_rejects_rectangular(self):
        with pytest.raises(GridError):
            eigendecompose(AssembledOperator(np.ones((3, 2)), np.arange(2), "L"))


class TestFractions:
    def test_checkerboard(self):
        e = (-1.0) ** np.add.outer(np.arange(21), np.arange(21))
        assert high_freq_fraction(e) >= 0.99
        e = (-1.0) ** np.add.outer(np.arange(20), np.arange(20))
        assert high_freq_fraction(e) >= 0.99

    def test_smooth_and_constant(self):
        assert high_freq_fraction(np.ones((15, 15))) <= 1e-30
        assert high_freq_fraction(np.zeros((15, 15))) == 0.0
        x = np.linspace(0, 1, 31)
        assert high_freq_fraction(np.outer(np.cos(np.pi * x), np.cos(np.pi * x))) <= 1e-6

    def test_bottom_fraction(self):
        assert bottom_fraction(np.r_[np.ones(10), np.zeros(90)]) == pytest.approx(1.0)
        assert bottom_fraction(np.ones(100)) == pytest.approx(0.1)
        assert bottom_fraction(np.zeros(5)) == 0.0


@pytest.fixture(scope="module")
def small_op(small_setup):
    g, c = small_setup
    chi = interior_cutoff(g, 0.1)
    op = MeasurementOperator(c, g, MeasurementConfig.default(g, chi=chi))
    return g, c, chi, op


class TestAssembly:
    def test_assemble_linear_consistency(self, small_op, rng):
        g, c, chi, op = small_op
        A = assemble(op.normal, chi, g, batch=50)
        x = rng.standard_normal(A.dim)
        direct = A.restrict(op.normal(A.embed(x)))
        assert np.max(np.abs(A.matrix @ x - direct)) <= 1e-10 * np.max(np.abs(direct))

    def test_transpose_vs_wave_adjoint(self, small_op):
        g, c, chi, op = small_op
        G = normal_from_L(measurement_matrix(op.forward, c, g, chi)).matrix
        W = wave_normal_matrix(op.normal, c, g, chi).matrix
        assert np.linalg.norm(W - W.T) <= 5e-2 * np.linalg.norm(W)
        assert np.linalg.norm(W - G) <= 5e-2 * np.linalg.norm(G)
        assert np.all(np.linalg.eigvalsh(G) >= -1e-10 * np.abs(G).max())

    def test_power_estimate_vs_eigh(self, small_op):
        g, c, chi, op = small_op
        G = normal_from_L(measurement_matrix(op.forward, c, g, chi))
        lam = eigendecompose(G).lambda_max
        b = estimate_bounds(op.normal, g.shape, inner=op.field_inner, rtol=1e-8, seed=3)
        assert b.L2norm == pytest.approx(lam, rel=1e-3)
