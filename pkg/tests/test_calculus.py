import numpy as np
import pytest

from cmfact.calculus import (commutation_matrix, fd_complex_gradient, fd_complex_hessian_blocks,
                             fd_gradient, fd_jacobian_vec, grad_f, grad_phi, grad_psi,
                             grad_psi_qr, hess_phi, hess_psi, hessian_blocks_f,
                             reduce_grad_to_phi, reduce_hess_to_phi, unvec, vec)
from cmfact.exceptions import DimensionError, HessianTooLargeError
from cmfact.factorization import objective_qr, pad_phases, phases_to_analog, residual_direct

from conftest import crandn


def _instance(rng, n_t=5, n_rf=3, n_s=2):
    return rng.uniform(-np.pi, np.pi, (n_t - 1, n_rf)), crandn(rng, n_t, n_s)


def test_commutation_examples(rng):
    np.testing.assert_array_equal(commutation_matrix(1, 1), [[1.0]])
    np.testing.assert_array_equal(commutation_matrix(2, 2), np.eye(4)[[0, 2, 1, 3]])
    K = commutation_matrix(3, 2)
    for _ in range(10):
        A = rng.standard_normal((3, 2))
        np.testing.assert_array_equal(K @ vec(A), vec(A.T))
    np.testing.assert_array_equal(K.T, commutation_matrix(2, 3))
    assert np.all(K.sum(0) == 1) and np.all(K.sum(1) == 1)
    with pytest.raises(DimensionError):
        commutation_matrix(0, 2)


def test_grad_f_zero_cases(rng):
    F_RF = phases_to_analog(rng.uniform(-3, 3, (5, 2)))
    np.testing.assert_allclose(grad_f(F_RF, F_RF @ crandn(rng, 2, 2)), 0, atol=1e-12)
    square = phases_to_analog(rng.uniform(-3, 3, (3, 4)))
    np.testing.assert_allclose(grad_f(square, crandn(rng, 4, 2)), 0, atol=1e-10)


def test_grad_f_matches_fd(rng):
    for _ in range(5):
        F_RF = crandn(rng, 5, 3)
        F_opt = crandn(rng, 5, 2)
        g = grad_f(F_RF, F_opt)
        fd = fd_complex_gradient(lambda X: residual_direct(X, F_opt), F_RF)
        assert np.max(np.abs(g - fd)) < 1e-6 * (1 + np.linalg.norm(g))


def test_hessian_blocks_match_fd(rng):
    F_RF = crandn(rng, 4, 2)
    F_opt = crandn(rng, 4, 2)
    blocks = hessian_blocks_f(F_RF, F_opt)
    H1, H2 = fd_complex_hessian_blocks(lambda X: grad_f(X, F_opt), F_RF)
    assert np.max(np.abs(blocks.H_f_fstar - H1)) < 1e-4
    assert np.max(np.abs(blocks.H_fstar_fstar - H2)) < 1e-4
    np.testing.assert_allclose(blocks.H_f_fstar, blocks.H_f_fstar.conj().T, atol=1e-9)
    full = blocks.full()
    assert full.shape == (16, 16)
    np.testing.assert_allclose(full[8:, 8:], blocks.H_f_fstar.conj())


def test_hessian_forms_agree(rng):
    for _ in range(5):
        F_RF, F_opt = crandn(rng, 6, 3), crandn(rng, 6, 2)
        a = hessian_blocks_f(F_RF, F_opt, form="expanded").H_fstar_fstar
        b = hessian_blocks_f(F_RF, F_opt, form="symmetrized").H_fstar_fstar
        np.testing.assert_allclose(a, b, atol=1e-12)
    with pytest.raises(ValueError):
        hessian_blocks_f(F_RF, F_opt, form="other")


def test_hessian_blocks_zero_cases(rng):
    F_RF = crandn(rng, 4, 2)
    b = hessian_blocks_f(F_RF, np.zeros((4, 2)))
    assert np.max(np.abs(b.H_f_fstar)) < 1e-12 and np.max(np.abs(b.H_fstar_fstar)) < 1e-12
    sq = phases_to_analog(rng.uniform(-3, 3, (3, 4)))
    b = hessian_blocks_f(sq, crandn(rng, 4, 2))
    assert np.max(np.abs(b.H_f_fstar)) < 1e-9 and np.max(np.abs(b.H_fstar_fstar)) < 1e-9


def test_hessian_cap():
    with pytest.raises(HessianTooLargeError, match="identity"):
        hessian_blocks_f(np.eye(8, 4, dtype=complex), np.ones((8, 1)), cap=16)


def test_grad_psi_properties(rng):
    for _ in range(20):
        n_t = int(rng.integers(3, 9))
        n_rf = int(rng.integers(1, n_t))
        Phi_RF = rng.uniform(-np.pi, np.pi, (n_t, n_rf))
        F_opt = crandn(rng, n_t, int(rng.integers(1, n_rf + 1)))
        g = grad_psi(Phi_RF, F_opt)
        np.testing.assert_allclose(g.sum(axis=0), 0, atol=1e-9)
        np.testing.assert_allclose(grad_psi_qr(Phi_RF, F_opt), g, atol=1e-9)
        np.testing.assert_allclose(reduce_grad_to_phi(g), grad_phi(Phi_RF[1:] - Phi_RF[:1],
                                                                   F_opt), atol=1e-9)


def test_grad_psi_matches_fd(rng):
    Phi_RF = rng.uniform(-3, 3, (6, 3))
    F_opt = crandn(rng, 6, 2)
    fun = lambda P: residual_direct(np.exp(1j * P) / np.sqrt(6), F_opt)  # noqa: E731
    g = grad_psi(Phi_RF, F_opt)
    assert np.max(np.abs(g - fd_gradient(fun, Phi_RF))) < 1e-6 * (1 + np.linalg.norm(g))


def test_grad_zero_at_exact_factorization(rng):
    Phi = rng.uniform(-3, 3, (5, 3))
    F_opt = phases_to_analog(Phi) @ crandn(rng, 3, 2)
    np.testing.assert_allclose(grad_phi(Phi, F_opt), 0, atol=1e-12)
    np.testing.assert_allclose(grad_psi(pad_phases(Phi), F_opt), 0, atol=1e-12)


def test_hess_psi_properties(rng):
    Phi_RF = rng.uniform(-3, 3, (4, 2))
    F_opt = crandn(rng, 4, 2)
    H = hess_psi(Phi_RF, F_opt)
    np.testing.assert_allclose(H, H.T, atol=1e-9)
    for _ in range(5):
        r = rng.standard_normal(2)
        np.testing.assert_allclose(H @ vec(np.outer(np.ones(4), r)), 0, atol=1e-8)
    H_fd = fd_jacobian_vec(lambda P: grad_psi(P, F_opt), Phi_RF)
    assert np.max(np.abs(H - H_fd)) < 1e-4


def test_reduce_hess_indices(rng):
    H = rng.standard_normal((12, 12))
    R = reduce_hess_to_phi(H, 4)
    keep = [1, 2, 3, 5, 6, 7, 9, 10, 11]
    np.testing.assert_array_equal(R, H[np.ix_(keep, keep)])
    with pytest.raises(DimensionError):
        reduce_hess_to_phi(H, 5)
    with pytest.raises(DimensionError):
        reduce_grad_to_phi(np.ones((1, 3)))


def test_hess_phi_matches_fd(rng):
    Phi, F_opt = _instance(rng, 6, 3, 2)
    H = hess_phi(Phi, F_opt)
    H_fd = fd_jacobian_vec(lambda P: grad_phi(P, F_opt), Phi)
    assert np.max(np.abs(H - H_fd)) < 1e-4
    g = grad_phi(Phi, F_opt)
    g_fd = fd_gradient(lambda P: objective_qr(P, F_opt), Phi)
    assert np.max(np.abs(g - g_fd)) < 1e-6 * (1 + np.linalg.norm(g))


def test_vec_roundtrip(rng):
    A = rng.standard_normal((3, 4))
    np.testing.assert_array_equal(unvec(vec(A), A.shape), A)
    np.testing.assert_array_equal(vec(A)[:3], A[:, 0])
