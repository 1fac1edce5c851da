import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from perturbed_qsl.errors import RequiresFullRank
from perturbed_qsl.gksl_dynamics import GkslForm, hamiltonian_generator
from perturbed_qsl.info_measures import (
    i_k,
    ibar,
    ibar_quadrature,
    kubo_mori_variance,
    kubo_mori_weights,
    metric_adjusted_bounds_check,
    pure_state_qfi_identity,
    qfi,
    sld,
    wigner_yanase,
)
from perturbed_qsl.linalg_core import anticommutator, random_hermitian
from perturbed_qsl.quantum_state import (
    bell_states,
    gibbs_state,
    haar_pure_state,
    maximally_mixed,
    projector,
    random_density_matrix,
    variance,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2)
PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)
V2 = 0.5 * (np.kron(SX, I2) + np.kron(I2, SX))

# Gibbs qubit, H = Z/2, beta = 1, A = X: populations p0 = e^{-1/2}/Z, p1 = e^{1/2}/Z,
# so ln p1 - ln p0 = 1 and the Kubo-Mori weight is p1 - p0 = tanh(1/2).  Var = 1.
KM_GIBBS = 2.0 * math.tanh(0.5)
IBAR_GIBBS = 1.0 - 2.0 * math.tanh(0.5)


@pytest.mark.parametrize("rho, G, expected", [
    (maximally_mixed(2), hamiltonian_generator(SX), 0.0),
    (projector(PLUS), hamiltonian_generator(0.5 * SZ), 1.0),
    (projector(bell_states()[:, 0]), hamiltonian_generator(V2), 4.0),
])
def test_qfi_examples(rho, G, expected):
    assert qfi(rho, G) == pytest.approx(expected, abs=1e-12)


def test_qfi_accepts_derivative_matrix(rng):
    rho = random_density_matrix(3, rng)
    G = hamiltonian_generator(random_hermitian(3, rng))
    assert qfi(rho, G) == pytest.approx(qfi(rho, G.apply(rho)))


def test_sld_examples(rng):
    assert_allclose(sld(maximally_mixed(2), hamiltonian_generator(SX)), 0, atol=1e-14)
    rho = projector(PLUS)
    L = sld(rho, hamiltonian_generator(0.5 * SZ))
    assert variance(rho, L) == pytest.approx(1.0, abs=1e-12)
    rho = random_density_matrix(3, rng)
    G = GkslForm(random_hermitian(3, rng), [(rng.normal(size=(3, 3)) + 0j, 0.4)])
    L = sld(rho, G)
    assert np.max(np.abs(0.5 * anticommutator(L, rho) - G.apply(rho))) <= 1e-9
    assert variance(rho, L) == pytest.approx(qfi(rho, G), rel=1e-9)


def test_wigner_yanase_examples():
    assert wigner_yanase(np.diag([0.7, 0.3]), SZ) == pytest.approx(0.0, abs=1e-15)
    assert wigner_yanase(projector(PLUS), SZ) == pytest.approx(1.0, abs=1e-12)
    expected = 1 - 2 * math.sqrt(0.75 * 0.25)
    assert wigner_yanase(np.diag([0.75, 0.25]), SX) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.13397, abs=1e-5)


def test_kubo_mori_examples():
    assert kubo_mori_variance(maximally_mixed(2), SZ) == pytest.approx(1.0)
    rho = np.diag([0.2, 0.3, 0.5]).astype(complex)
    A = np.diag([1.0, -2.0, 0.5])
    assert kubo_mori_variance(rho, A) == pytest.approx(variance(rho, A))
    assert kubo_mori_variance(gibbs_state(0.5 * SZ, 1.0), SX) == pytest.approx(KM_GIBBS, rel=1e-12)
    with pytest.raises(RequiresFullRank):
        kubo_mori_variance(projector(PLUS), SX)


def test_kubo_mori_weights_limits():
    W = kubo_mori_weights(np.array([0.4, 0.4 + 1e-12, 0.0]))
    assert W[0, 0] == pytest.approx(0.4)
    assert W[0, 1] == pytest.approx(0.4, rel=1e-9)
    assert W[0, 2] == 0.0 and W[2, 2] == 0.0


def test_i_k_examples(rng):
    rho = random_density_matrix(3, rng)
    A = random_hermitian(3, rng)
    assert i_k(rho, A, 0.5) == pytest.approx(wigner_yanase(rho, A), abs=1e-10)
    diag = np.diag([0.1, 0.3, 0.6]).astype(complex)
    for k in (0.0, 0.3, 1.0):
        assert i_k(diag, np.diag([1.0, 2.0, 3.0]), k) == pytest.approx(0.0, abs=1e-15)
    psi = haar_pure_state(3, rng)
    for k in (0.2, 0.7):
        assert i_k(np.outer(psi, psi.conj()), A, k) == pytest.approx(variance(np.outer(psi, psi.conj()), A))
    with pytest.raises(ValueError):
        i_k(rho, A, 1.5)


def test_ibar_examples(rng):
    assert ibar(np.diag([0.4, 0.6]), SZ) == pytest.approx(0.0, abs=1e-15)
    psi = haar_pure_state(3, rng)
    A = random_hermitian(3, rng)
    P = np.outer(psi, psi.conj())
    assert ibar(P, A) == pytest.approx(variance(P, A), rel=1e-9)
    g = gibbs_state(0.5 * SZ, 1.0)
    assert ibar(g, SX) == pytest.approx(IBAR_GIBBS, rel=1e-10)
    assert ibar_quadrature(g, SX) == pytest.approx(IBAR_GIBBS, rel=1e-10)


@given(st.integers(min_value=2, max_value=5), st.integers(min_value=0, max_value=10_000))
def test_skew_information_sandwich(d, seed):
    rng = np.random.default_rng(seed)
    out = metric_adjusted_bounds_check(random_density_matrix(d, rng), random_hermitian(d, rng))
    assert out["margin"] >= -1e-9


@given(st.integers(min_value=2, max_value=5), st.integers(min_value=0, max_value=10_000))
def test_wy_between_ibar_bounds(d, seed):
    rng = np.random.default_rng(seed)
    rho, A = random_density_matrix(d, rng), random_hermitian(d, rng)
    F = qfi(rho, hamiltonian_generator(A))
    # I^WY sits in the same family: F/8 <= I^WY <= F/4
    wy = wigner_yanase(rho, A)
    assert F / 8 - 1e-9 <= wy <= F / 4 + 1e-9


@given(st.integers(min_value=2, max_value=5), st.integers(min_value=0, max_value=10_000))
def test_pure_state_identity(d, seed):
    rng = np.random.default_rng(seed)
    psi = haar_pure_state(d, rng)
    G = GkslForm(random_hermitian(d, rng), [(rng.normal(size=(d, d)) + 0j, rng.uniform(0, 1))])
    F = qfi(np.outer(psi, psi.conj()), G)
    moment, bound = pure_state_qfi_identity(psi, G)
    assert F == pytest.approx(moment, abs=1e-9)
    assert F <= bound + 1e-9
