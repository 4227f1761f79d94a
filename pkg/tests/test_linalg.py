import numpy as np
import pytest

from anisodiff.errors import (
    DimensionTooLargeError,
    NotPositiveDefiniteError,
    NotSymmetricError,
)
from anisodiff.graph import structural_matrices
from anisodiff.linalg import expm_oracle, spd_solve, sym_eig

from conftest import path_graph


def random_symmetric(rng, n):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def random_spd(rng, n):
    g = rng.standard_normal((n, n))
    return g.T @ g + np.eye(n)


class TestSymEig:
    def test_identity_eigenvalues(self):
        eig = sym_eig(np.eye(3))
        assert np.allclose(eig.eigenvalues, [1.0, 1.0, 1.0])

    def test_p2_laplacian(self):
        eig = sym_eig([[1.0, -1.0], [-1.0, 1.0]])
        assert np.allclose(eig.eigenvalues, [0.0, 2.0], atol=1e-12)

    def test_p3_laplacian_characteristic_roots(self):
        # oracle: char poly of the P3 Laplacian is x(x-1)(x-3)
        lap = structural_matrices(path_graph(3)).laplacian
        roots = np.sort(np.roots([1.0, -4.0, 3.0, 0.0]).real)
        eig = sym_eig(lap)
        assert np.allclose(eig.eigenvalues, roots, atol=1e-10)
        assert np.allclose(eig.eigenvalues, [0.0, 1.0, 3.0], atol=1e-10)

    def test_residual_and_orthonormality(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            n = int(rng.integers(1, 33))
            m = random_symmetric(rng, n)
            eig = sym_eig(m)
            scale = max(np.abs(m).max(), 1.0)
            residual = m @ eig.eigenvectors - eig.eigenvectors * eig.eigenvalues
            assert np.abs(residual).max() <= 1e-10 * scale
            gram = eig.eigenvectors.T @ eig.eigenvectors
            assert np.abs(gram - np.eye(n)).max() <= 1e-10
            assert np.all(np.diff(eig.eigenvalues) >= -1e-14)

    def test_reconstruction(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(2, 33))
            m = random_symmetric(rng, n)
            eig = sym_eig(m)
            rebuilt = eig.eigenvectors @ np.diag(eig.eigenvalues) @ eig.eigenvectors.T
            assert np.abs(rebuilt - m).max() <= 1e-9 * max(np.abs(m).max(), 1.0)

    def test_sign_convention(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = random_symmetric(rng, 6)
            v = sym_eig(m).eigenvectors
            for c in range(6):
                lead = np.argmax(np.abs(v[:, c]))
                assert v[lead, c] > 0

    def test_determinism(self):
        m = random_symmetric(np.random.default_rng(11), 9)
        a, b = sym_eig(m), sym_eig(m)
        assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
        assert a.eigenvectors.tobytes() == b.eigenvectors.tobytes()

    def test_not_symmetric_rejected(self):
        with pytest.raises(NotSymmetricError):
            sym_eig([[0.0, 1.0], [0.0, 0.0]])


class TestSpdSolve:
    def test_identity(self):
        rhs = np.array([[3.0], [4.0]])
        assert np.array_equal(spd_solve(np.eye(2), rhs), rhs)

    def test_2x2_direct_inverse(self):
        # oracle: inverse of [[2,-1],[-1,2]] is [[2,1],[1,2]]/3
        m = np.array([[2.0, -1.0], [-1.0, 2.0]])
        rhs = np.array([1.0, 0.0])
        expected = np.array([[2.0, 1.0], [1.0, 2.0]]) / 3.0 @ rhs
        got = spd_solve(m, rhs)
        assert np.allclose(got, expected, atol=1e-14)
        assert np.allclose(got, [2.0 / 3.0, 1.0 / 3.0], atol=1e-14)

    def test_singular_laplacian_rejected(self):
        with pytest.raises(NotPositiveDefiniteError):
            spd_solve([[1.0, -1.0], [-1.0, 1.0]], [1.0, 0.0])

    def test_residual_on_random_spd(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            n = int(rng.integers(2, 20))
            m = random_spd(rng, n)
            rhs = rng.standard_normal((n, 3))
            y = spd_solve(m, rhs)
            residual = np.abs(m @ y - rhs).max()
            assert residual <= 1e-10 * max(np.abs(rhs).max(), 1.0)


class TestExpmOracle:
    def test_zero_matrix(self):
        assert np.array_equal(expm_oracle(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        got = expm_oracle(np.diag([-1.0, -2.0]))
        assert np.allclose(got, np.diag([np.exp(-1.0), np.exp(-2.0)]), atol=1e-14)

    def test_spectral_identity_on_p2(self):
        # oracle cross-check: exp(-D^{-1}L) == Phi exp(-Lam) Phi^T D for P2
        sm = structural_matrices(path_graph(2))
        rw = np.linalg.inv(sm.degree) @ sm.laplacian
        got = expm_oracle(-rw)
        e2 = np.exp(-2.0)
        expected = 0.5 * np.array([[1 + e2, 1 - e2], [1 - e2, 1 + e2]])
        assert np.abs(got - expected).max() <= 1e-10

    def test_inverse_identity(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            n = int(rng.integers(1, 9))
            m = rng.uniform(-1.0, 1.0, size=(n, n))
            m *= 5.0 / max(np.abs(m).sum(axis=1).max(), 1e-9)
            product = expm_oracle(m) @ expm_oracle(-m)
            assert np.abs(product - np.eye(n)).max() <= 1e-8

    def test_large_norm_accuracy(self):
        # exp of a diagonal with inf-norm 50 is known exactly
        d = np.array([-50.0, -1.0, 0.0])
        assert np.abs(expm_oracle(np.diag(d)) - np.diag(np.exp(d))).max() <= 1e-10

    def test_dimension_cap(self):
        with pytest.raises(DimensionTooLargeError):
            expm_oracle(np.zeros((33, 33)))
