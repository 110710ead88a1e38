import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmfact.baselines import (gaussian_mi, gaussian_mi_precoder, right_singular_basis,
                              waterfill_powers, waterfilling)
from cmfact.channel import sample_channel
from cmfact.exceptions import DegenerateChannelError, InvalidCovarianceError

from conftest import crandn


def test_waterfilling_identity():
    sol = waterfilling(np.eye(2), 2.0, 1.0, 2)
    np.testing.assert_allclose(sol.powers, [1, 1])
    np.testing.assert_allclose(np.abs(sol.F_opt), np.eye(2), atol=1e-12)


def test_waterfilling_dead_mode():
    sol = waterfilling(np.diag([1.0, 1e-9]), 1.0, 1.0, 2)
    np.testing.assert_allclose(sol.powers, [1, 0], atol=1e-12)


def test_waterfilling_zero_channel():
    with pytest.raises(DegenerateChannelError):
        waterfilling(np.zeros((2, 3)), 1.0, 1.0, 1)


def test_modes_beyond_rank_get_no_power():
    ch = sample_channel(4, 16, 2, 0)
    sol = waterfilling(ch.H, 1.0, 1e-3, 4)
    np.testing.assert_array_equal(sol.powers[2:], 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(0.01, 10))
def test_waterfilling_kkt(seed, P, sigma2):
    rng = np.random.default_rng(seed)
    H = crandn(rng, 4, 6)
    sol = waterfilling(H, P, sigma2, 4)
    lam2 = sol.singular_values[:4] ** 2
    assert abs(sol.powers.sum() - P) < 1e-9 * max(1, P)
    assert np.all(sol.powers >= 0)
    assert abs(np.linalg.norm(sol.F_opt) ** 2 - P) < 1e-9 * max(1, P)
    active = sol.powers > 0
    np.testing.assert_allclose(sol.powers[active] + sigma2 / lam2[active], sol.mu, rtol=1e-9)
    assert np.all(sigma2 / lam2[~active] >= sol.mu - 1e-12)


def test_waterfilling_perturbation_optimality():
    rng = np.random.default_rng(0)
    for _ in range(100):
        H = crandn(rng, 4, 8)
        sigma2 = rng.uniform(0.1, 5)
        sol = waterfilling(H, 1.0, sigma2, 4)
        lam2 = sol.singular_values[:4] ** 2
        rate = lambda p: np.sum(np.log2(1 + lam2 * p / sigma2))  # noqa: E731
        base = rate(sol.powers)
        for i in range(4):
            for j in range(4):
                if i == j:
                    continue
                d = np.zeros(4)
                d[i], d[j] = 1e-3, -1e-3
                p = sol.powers + d
                if np.all(p >= 0):
                    assert rate(p) <= base + 1e-9


def test_waterfill_powers_no_positive_gain():
    p, mu = waterfill_powers([0.0, 0.0], 1.0, 1.0)
    np.testing.assert_array_equal(p, 0)
    assert np.isnan(mu)


def test_gaussian_mi_examples(rng):
    assert gaussian_mi(np.eye(2), np.zeros((2, 2)), 1.0) == 0
    assert np.isclose(gaussian_mi(np.eye(1), 3 * np.eye(1), 1.0), 2.0)
    H = crandn(rng, 3, 5)
    sol = waterfilling(H, 2.0, 0.5, 3)
    lam2 = sol.singular_values[:3] ** 2
    expected = np.sum(np.log2(1 + lam2 * sol.powers / 0.5))
    Q = sol.F_opt @ sol.F_opt.conj().T
    assert np.isclose(gaussian_mi(H, Q, 0.5), expected)
    assert np.isclose(gaussian_mi_precoder(H, sol.F_opt, 0.5), expected)


def test_gaussian_mi_monotone_in_power(rng):
    H = crandn(rng, 3, 4)
    A = crandn(rng, 4, 4)
    Q = A @ A.conj().T
    vals = [gaussian_mi(H, p * Q, 1.0) for p in np.linspace(0, 5, 11)]
    assert np.all(np.diff(vals) >= 0)


def test_gaussian_mi_rejects_bad_covariance():
    with pytest.raises(InvalidCovarianceError):
        gaussian_mi(np.eye(2), np.diag([1.0, -1.0]), 1.0)
    with pytest.raises(InvalidCovarianceError):
        gaussian_mi(np.eye(2), np.array([[1, 1], [0, 1]]), 1.0)


def test_right_singular_basis(rng):
    U = right_singular_basis(np.eye(3), 2)
    np.testing.assert_allclose(np.abs(U), np.eye(3, 2), atol=1e-12)
    H = crandn(rng, 4, 8)
    U = right_singular_basis(H, 3)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(3), atol=1e-10)
    s = np.linalg.svd(H, compute_uv=False)
    assert np.linalg.norm(H @ (np.eye(8) - U @ U.conj().T), 2) <= s[3] + 1e-9
    first = U[np.argmax(np.abs(U) > 0, axis=0), np.arange(3)]
    np.testing.assert_allclose(first.imag, 0, atol=1e-15)
    assert np.all(first.real > 0)
