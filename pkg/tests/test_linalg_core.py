import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from perturbed_qsl.errors import DimensionMismatch, InvalidHermitian, NotPositiveSemidefinite
from perturbed_qsl.linalg_core import (
    anticommutator,
    commutator,
    eig_hermitian,
    hamiltonian_superop,
    haar_unitary,
    is_hermitian,
    lindblad_superop,
    logm_psd,
    matrix_function,
    operator_norm,
    powm_psd,
    random_hermitian,
    sandwich,
    sqrtm_psd,
    trace_norm,
    unvec,
    vec,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2)
KET0 = np.array([1, 0], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)


def test_eig_identity():
    dec = eig_hermitian(np.eye(3))
    assert_allclose(dec.values, [1, 1, 1])
    assert_allclose(dec.vectors.conj().T @ dec.vectors, np.eye(3), atol=1e-14)


def test_eig_sigma_x():
    dec = eig_hermitian(SX)
    assert_allclose(dec.values, [-1, 1])
    # up to phase: |<v|w>| = 1
    assert abs(np.vdot(dec.vectors[:, 0], np.array([1, -1]) / math.sqrt(2))) == pytest.approx(1.0)
    assert abs(np.vdot(dec.vectors[:, 1], np.array([1, 1]) / math.sqrt(2))) == pytest.approx(1.0)


def test_eig_reconstruction_seed7():
    M = random_hermitian(4, np.random.default_rng(7))
    assert np.max(np.abs(eig_hermitian(M).reconstruct() - M)) <= 1e-10


def test_eig_rejects_non_hermitian():
    with pytest.raises(InvalidHermitian):
        eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_eig_is_deterministic_on_degenerate_input():
    M = np.diag([1.0, 1.0, 2.0]).astype(complex)
    a, b = eig_hermitian(M), eig_hermitian(M.copy())
    assert_allclose(a.vectors, b.vectors)


@pytest.mark.parametrize("M, f, expected", [
    (np.diag([4.0, 9.0]), np.sqrt, np.diag([2.0, 3.0])),
    (np.diag([0.5, 0.5]), lambda x: x ** 0.3, np.diag([0.5 ** 0.3, 0.5 ** 0.3])),
])
def test_matrix_function_diagonal(M, f, expected):
    assert_allclose(matrix_function(M, f), expected, atol=1e-14)


def test_sqrt_of_projector_is_itself():
    P = np.outer(PLUS, PLUS.conj())
    assert_allclose(sqrtm_psd(P), P, atol=1e-12)


def test_matrix_function_floor():
    with pytest.raises(NotPositiveSemidefinite):
        sqrtm_psd(np.diag([1.0, -1e-6]))
    # within the clamping window the eigenvalue is treated as zero
    assert_allclose(sqrtm_psd(np.diag([1.0, -1e-11])), np.diag([1.0, 0.0]), atol=1e-15)


def test_powm_and_logm_consistency(rng):
    A = random_hermitian(3, rng)
    rho = A @ A + np.eye(3)
    assert_allclose(powm_psd(rho, 0.5) @ powm_psd(rho, 0.5), rho, atol=1e-10)
    w, U = np.linalg.eigh(rho)
    assert_allclose(logm_psd(rho), (U * np.log(w)) @ U.conj().T, atol=1e-12)


@pytest.mark.parametrize("M, expected", [
    (SZ, 1.0),
    (0.5 * (np.kron(SX, I2) + np.kron(I2, SX)), 1.0),
    (np.zeros((3, 3)), 0.0),
])
def test_operator_norm(M, expected):
    assert operator_norm(M) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("M, expected", [
    (np.diag([0.3, 0.7]), 1.0),
    (SX, 2.0),
    (np.outer(KET0, KET0) - np.outer(PLUS, PLUS), math.sqrt(2)),
])
def test_trace_norm(M, expected):
    assert trace_norm(M) == pytest.approx(expected, abs=1e-12)


def test_commutator_algebra():
    assert_allclose(commutator(SX, SY), 2j * SZ)
    assert_allclose(anticommutator(SX, SX), 2 * I2)
    H = random_hermitian(3, np.random.default_rng(0))
    assert_allclose(commutator(H, H), 0, atol=1e-14)


def test_commutator_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        commutator(SX, np.eye(3))


@given(st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=10_000))
def test_vec_identity(d, seed):
    rng = np.random.default_rng(seed)
    A, X, B = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(3))
    assert_allclose(sandwich(A, B) @ vec(X), vec(A @ X @ B), atol=1e-10)
    assert_allclose(unvec(vec(X)), X)


def test_superoperators_match_direct_action(rng):
    H = random_hermitian(3, rng)
    L = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    X = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert_allclose(unvec(hamiltonian_superop(H) @ vec(X)), -1j * (H @ X - X @ H), atol=1e-12)
    LdL = L.conj().T @ L
    direct = 0.7 * (L @ X @ L.conj().T - 0.5 * (LdL @ X + X @ LdL))
    assert_allclose(unvec(lindblad_superop(L, 0.7) @ vec(X)), direct, atol=1e-12)


@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=10_000))
def test_random_helpers(d, seed):
    rng = np.random.default_rng(seed)
    assert is_hermitian(random_hermitian(d, rng))
    U = haar_unitary(d, rng)
    assert_allclose(U.conj().T @ U, np.eye(d), atol=1e-12)
