"""Quantum Fisher information and related skew informations.

All quantities are evaluated in the eigenbasis of the state.  ``qfi`` and
``sld`` accept either a :class:`~perturbed_qsl.gksl_dynamics.Generator`
(evaluated on the state, so ``F(rho, G)`` means the QFI of the
infinitesimal motion ``rho -> rho + G(rho) dt``) or an explicit derivative
matrix via ``derivative=``.
"""
from __future__ import annotations

import numpy as np

from . import _backend
from .errors import RequiresFullRank
from .gksl_dynamics import Generator, hamiltonian_generator
from .linalg_core import as_hermitian, check_same_dim, commutator, sqrtm_psd
from .quantum_state import variance

EIG_FLOOR = 1e-12
QUADRATURE_NODES = 32


def _spectrum(rho):
    rho = np.asarray(rho, dtype=complex)
    lam, U = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return np.clip(lam, 0.0, None), U


def _derivative(rho, G, t):
    if isinstance(G, Generator):
        return G.apply(rho, t)
    D = np.asarray(G, dtype=complex)
    check_same_dim(rho, D)
    return D


def qfi(rho, G, eig_floor: float = EIG_FLOOR, t: float = 0.0) -> float:
    """``2 sum |<i|G(rho)|j>|^2 / (l_i + l_j)`` over pairs with ``l_i + l_j > eig_floor``.

    ``G`` is a generator or the derivative matrix itself.  Slightly negative
    eigenvalues (round-off, or states produced by non-CP first-order
    generators) are clamped to zero.
    """
    lam, U = _spectrum(rho)
    Gm = U.conj().T @ _derivative(rho, G, t) @ U
    return max(0.0, float(_backend.qfi_sum(np.ascontiguousarray(lam), np.ascontiguousarray(Gm), eig_floor)))


def sld(rho, G, eig_floor: float = EIG_FLOOR, t: float = 0.0) -> np.ndarray:
    """Symmetric logarithmic derivative ``L`` with ``{L, rho}/2 = G(rho)`` on the support."""
    lam, U = _spectrum(rho)
    Gm = U.conj().T @ _derivative(rho, G, t) @ U
    den = lam[:, None] + lam[None, :]
    Lm = np.zeros_like(Gm)
    mask = den > eig_floor
    Lm[mask] = 2.0 * Gm[mask] / den[mask]
    L = U @ Lm @ U.conj().T
    return 0.5 * (L + L.conj().T)


def wigner_yanase(rho, V) -> float:
    """``-tr([sqrt(rho), V]^2)/2``."""
    V = as_hermitian(V, "observable")
    C = commutator(sqrtm_psd(rho), V)
    return max(0.0, float(-0.5 * np.real(np.trace(C @ C))))


def _centered_in_eigenbasis(rho, A):
    A = as_hermitian(A, "observable")
    check_same_dim(rho, A)
    lam, U = _spectrum(rho)
    Ab = U.conj().T @ A @ U
    mean = float(np.real(np.sum(lam * np.diag(Ab))))
    return lam, Ab - mean * np.eye(len(lam))


def kubo_mori_weights(lam, eig_floor: float = EIG_FLOOR) -> np.ndarray:
    """``(l_i - l_j)/(ln l_i - ln l_j)`` with the diagonal limit ``l_i``; zero if either is below the floor."""
    lam = np.asarray(lam, dtype=float)
    li = lam[:, None]
    lj = lam[None, :]
    W = np.zeros((len(lam), len(lam)))
    ok = (li > eig_floor) & (lj > eig_floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        logdiff = np.log(np.where(ok, li, 1.0)) - np.log(np.where(ok, lj, 1.0))
        near = np.abs(logdiff) < 1e-8
        # logarithmic mean; near the diagonal use its series in x = ln(li/lj)
        m = np.sqrt(np.where(ok, li * lj, 0.0))
        series = m * (1.0 + logdiff**2 / 24.0)
        exact = (li - lj) / np.where(near, 1.0, logdiff)
    W[ok] = np.where(near, series, exact)[ok]
    return W


def kubo_mori_variance(rho, A, eig_floor: float = EIG_FLOOR) -> float:
    """``tr[A_c J_rho(A_c)]`` with Kubo-Mori weights; needs a full-rank state."""
    lam, Ac = _centered_in_eigenbasis(rho, A)
    if lam.min() <= eig_floor:
        raise RequiresFullRank(f"Kubo-Mori variance needs a full-rank state (min eigenvalue {lam.min():.3e})")
    W = kubo_mori_weights(lam, eig_floor)
    return float(np.sum(W * np.abs(Ac) ** 2))


def i_k(rho, A, k: float, eig_floor: float = EIG_FLOOR) -> float:
    """``tr([rho^k, A][A, rho^(1-k)])/2`` as an eigenbasis sum, for ``k`` in [0, 1].

    Eigenvalues below ``eig_floor`` are set to zero: ``l^k`` of a round-off
    eigenvalue ``l ~ 1e-17`` is far from zero for small ``k``.
    """
    if not 0.0 <= k <= 1.0:
        raise ValueError(f"k must lie in [0, 1], got {k}")
    A = as_hermitian(A, "observable")
    check_same_dim(rho, A)
    lam, U = _spectrum(rho)
    lam = np.where(lam > eig_floor, lam, 0.0)
    Ab = U.conj().T @ A @ U
    with np.errstate(divide="ignore", invalid="ignore"):
        pk = np.where(lam > 0, lam ** k, 0.0) if k > 0 else np.ones_like(lam)
        pk1 = np.where(lam > 0, lam ** (1 - k), 0.0) if k < 1 else np.ones_like(lam)
    w = 0.5 * (pk[:, None] - pk[None, :]) * (pk1[:, None] - pk1[None, :])
    return float(np.sum(w * np.abs(Ab) ** 2))


def ibar_quadrature(rho, A, nodes: int = QUADRATURE_NODES, eig_floor: float = EIG_FLOOR) -> float:
    """Gauss-Legendre quadrature of ``I^(k)`` over ``k`` in [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    ks = 0.5 * (x + 1.0)
    return float(0.5 * np.sum(w * np.array([i_k(rho, A, k, eig_floor) for k in ks])))


def ibar(rho, A, eig_floor: float = EIG_FLOOR) -> float:
    """Averaged skew information ``int_0^1 I^(k) dk``.

    Full-rank states use the closed form ``Var - Var^KM``; rank-deficient
    states fall back to 32-node Gauss-Legendre quadrature.
    """
    lam, _ = _spectrum(rho)
    if lam.min() > eig_floor:
        return max(0.0, variance(rho, A) - kubo_mori_variance(rho, A, eig_floor))
    return max(0.0, ibar_quadrature(rho, A, eig_floor=eig_floor))


def metric_adjusted_bounds_check(rho, H) -> dict:
    """Return ``4*ibar``, the QFI of ``-i[H, .]`` and ``12*ibar`` for the sandwich inequality."""
    ib = ibar(rho, H)
    F = qfi(rho, hamiltonian_generator(H))
    return {"four_ibar": 4.0 * ib, "qfi": F, "twelve_ibar": 12.0 * ib,
            "margin": min(F - 4.0 * ib, 12.0 * ib - F)}


def pure_state_qfi_identity(psi, G) -> tuple[float, float]:
    """Return ``(4<G(psi)^2> - 3<G(psi)>^2, 4 ||G(psi)||^2)`` for a pure state vector."""
    psi = np.asarray(psi, dtype=complex).ravel()
    P = np.outer(psi, psi.conj())
    D = _derivative(P, G, 0.0)
    m1 = np.real(np.vdot(psi, D @ psi))
    m2 = np.real(np.vdot(psi, D @ D @ psi))
    return float(4 * m2 - 3 * m1 * m1), float(4 * np.linalg.norm(D, 2) ** 2)
