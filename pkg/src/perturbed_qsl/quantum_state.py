"""Density matrices, measurements and the distances the speed limits compare."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np

from .errors import DimensionMismatch, NotPositiveSemidefinite
from .linalg_core import (
    PSD_FLOOR,
    as_hermitian,
    check_same_dim,
    haar_unitary,
    sqrtm_psd,
    trace_norm,
)

TRACE_TOL = 1e-9


def density_matrix(M, psd_floor: float = PSD_FLOOR, trace_tol: float = TRACE_TOL) -> np.ndarray:
    """Validate a density matrix and return its symmetrised copy.

    Raises :class:`NotPositiveSemidefinite` when the smallest eigenvalue is
    below ``psd_floor`` and ``ValueError`` when the trace is off by more than
    ``trace_tol``.
    """
    rho = as_hermitian(M, "density matrix")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr!r} differs from 1 by more than {trace_tol}")
    lmin = np.linalg.eigvalsh(rho)[0]
    if lmin < psd_floor:
        raise NotPositiveSemidefinite(f"density matrix eigenvalue {lmin:.3e} < {psd_floor:.1e}")
    return rho


def pure_state(psi, tol: float = 1e-12) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    n = np.linalg.norm(psi)
    if abs(n - 1.0) > tol:
        raise ValueError(f"state vector norm {n!r} is not 1")
    return psi


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def maximally_mixed(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) / d


def haar_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=d) + 1j * rng.normal(size=d)
    return z / np.linalg.norm(z)


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random state of the given rank (Hilbert-Schmidt measure for full rank)."""
    rank = d if rank is None else rank
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


# -- measurements -----------------------------------------------------------

@dataclass(frozen=True)
class Measurement:
    """A POVM given by its effects; projective bases are the rank-1 case."""

    effects: tuple

    def __post_init__(self):
        effs = tuple(as_hermitian(E, "effect") for E in self.effects)
        check_same_dim(*effs)
        total = sum(effs)
        if np.max(np.abs(total - np.eye(total.shape[0]))) > 1e-10:
            raise ValueError("measurement effects do not sum to the identity")
        for E in effs:
            if np.linalg.eigvalsh(E)[0] < PSD_FLOOR:
                raise NotPositiveSemidefinite("measurement effect is not PSD")
        object.__setattr__(self, "effects", effs)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    @classmethod
    def projective(cls, basis) -> "Measurement":
        """Projective measurement onto the columns of a unitary ``basis``."""
        B = np.asarray(basis, dtype=complex)
        return cls(tuple(np.outer(B[:, k], B[:, k].conj()) for k in range(B.shape[1])))


def computational_basis(d: int) -> Measurement:
    return Measurement.projective(np.eye(d))


def bell_states() -> np.ndarray:
    """Columns Phi+, Phi-, Psi+, Psi- in the |00>,|01>,|10>,|11> basis."""
    s = 1 / np.sqrt(2)
    return np.array(
        [[s, s, 0, 0], [0, 0, s, s], [0, 0, s, -s], [s, -s, 0, 0]],
        dtype=complex,
    )


def bell_measurement() -> Measurement:
    return Measurement.projective(bell_states())


def measure(rho, m: Measurement, floor: float = PSD_FLOOR) -> np.ndarray:
    """Outcome probabilities ``p_i = tr(E_i rho)``.

    Probabilities in ``[floor, 0)`` are clamped to zero; anything lower
    raises.  The result is renormalised when the total is within 1e-9 of 1.
    """
    rho = np.asarray(rho)
    if rho.shape != (m.dim, m.dim):
        raise DimensionMismatch(f"state shape {rho.shape} vs measurement dim {m.dim}")
    p = np.array([np.real(np.trace(E @ rho)) for E in m.effects])
    if p.min() < floor:
        raise NotPositiveSemidefinite(f"negative outcome probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    s = p.sum()
    if abs(s - 1.0) > TRACE_TOL + max(0.0, -floor) * len(p):
        raise ValueError(f"probabilities sum to {s!r}")
    return p / s


def sample_counts(p, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Empirical distribution from ``shots`` multinomial draws."""
    return rng.multinomial(shots, p) / shots


def bhattacharyya(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"distribution lengths differ: {p.shape} vs {q.shape}")
    return float(min(1.0, max(0.0, np.sum(np.sqrt(np.clip(p, 0, None) * np.clip(q, 0, None))))))


# -- distances --------------------------------------------------------------

def fidelity(rho, sigma, floor: float = PSD_FLOOR) -> float:
    """Uhlmann root fidelity ``||sqrt(rho) sqrt(sigma)||_1`` in [0, 1].

    The singular-value form is used because round-off eigenvalues of order
    1e-16 enter it additively, whereas the eigenvalues of
    ``sqrt(rho) sigma sqrt(rho)`` enter under a square root (1e-8 each),
    which spoils small Bures angles between near-pure states.  Eigenvalues
    in ``[floor, 0)`` are treated as zero; pass the integrator's
    ``-positivity_tol`` for states taken from a trajectory.
    """
    check_same_dim(rho, sigma)
    s = sqrtm_psd(rho, domain_floor=floor) @ sqrtm_psd(sigma, domain_floor=floor)
    return float(min(1.0, np.sum(np.linalg.svd(s, compute_uv=False))))


def fidelity_eig(rho, sigma, floor: float = PSD_FLOOR) -> float:
    """Same quantity as :func:`fidelity` via ``tr sqrt(sqrt(rho) sigma sqrt(rho))`` (cross-check)."""
    check_same_dim(rho, sigma)
    s = sqrtm_psd(rho, domain_floor=floor)
    M = s @ np.asarray(sigma) @ s
    mu = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    return float(min(1.0, max(0.0, np.sum(np.sqrt(np.clip(mu, 0.0, None))))))


fidelity_svd = fidelity


def bures_angle(rho, sigma, floor: float = PSD_FLOOR) -> float:
    return float(np.arccos(fidelity(rho, sigma, floor)))


def bures_distance(rho, sigma, floor: float = PSD_FLOOR) -> float:
    return float(np.sqrt(max(0.0, 2.0 * (1.0 - fidelity(rho, sigma, floor)))))


def trace_distance(rho, sigma) -> float:
    check_same_dim(rho, sigma)
    return 0.5 * trace_norm(np.asarray(rho) - np.asarray(sigma))


def _mp_hermitian(A) -> "mpmath.matrix":
    d = A.shape[0]
    M = mpmath.matrix(d, d)
    for i in range(d):
        for j in range(d):
            z = 0.5 * (A[i, j] + np.conj(A[j, i]))
            M[i, j] = mpmath.mpc(float(z.real), float(z.imag))
    return M


def extended_fidelity(rho, eta, dps: int = 50) -> float:
    """Fidelity extended to a Hermitian, unit-trace but possibly indefinite ``eta``.

    ``rho`` must be PSD (within the usual floor).  The eigenvalues ``mu`` of
    ``sqrt(rho) eta sqrt(rho)`` enter as ``sum sign(mu) sqrt(|mu|)``, which
    equals the Uhlmann fidelity when ``eta`` is PSD and is continuous as
    ``eta`` leaves the state space.  The eigenproblem is solved at ``dps``
    decimal digits: near-pure states put the information in eigenvalues far
    below double-precision resolution.
    """
    check_same_dim(rho, eta)
    rho = np.asarray(rho, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    with mpmath.workdps(dps):
        R = _mp_hermitian(rho)
        E = _mp_hermitian(eta)
        w, Q = mpmath.eigh(R)
        if min(w) < PSD_FLOOR:
            raise NotPositiveSemidefinite("first argument of extended_fidelity must be PSD")
        sq = mpmath.diag([mpmath.sqrt(x) if x > 0 else mpmath.mpf(0) for x in w])
        S = Q * sq * Q.transpose_conj()
        M = S * E * S
        M = (M + M.transpose_conj()) / 2
        mu = mpmath.eigh(M, eigvals_only=True)
        F = mpmath.fsum(mpmath.sign(x) * mpmath.sqrt(abs(x)) for x in mu)
        return float(F)


def extended_bures_angle(rho, eta, dps: int = 50) -> float:
    """Bures angle using :func:`extended_fidelity` (clamped to [0, 1])."""
    F = extended_fidelity(rho, eta, dps)
    return float(np.arccos(min(1.0, max(0.0, F))))


# -- thermal states and moments ---------------------------------------------

def gibbs_state(H, beta: float) -> np.ndarray:
    """``exp(-beta H)/Z`` built in the eigenbasis with a max-energy shift."""
    H = as_hermitian(H, "Hamiltonian")
    if not np.isfinite(beta):
        raise ValueError("beta must be finite")
    E, U = np.linalg.eigh(H)
    x = -beta * E
    w = np.exp(x - np.max(x))
    w = w / w.sum()
    rho = (U * w) @ U.conj().T
    return 0.5 * (rho + rho.conj().T)


def expectation(rho, A) -> float:
    check_same_dim(rho, A)
    return float(np.real(np.trace(np.asarray(rho) @ np.asarray(A))))


def variance(rho, A) -> float:
    check_same_dim(rho, A)
    A = np.asarray(A)
    m = expectation(rho, A)
    return float(np.real(np.trace(np.asarray(rho) @ A @ A)) - m * m)


def vector_to_density(psi) -> np.ndarray:
    return projector(psi)


def random_projective_measurement(d: int, rng: np.random.Generator) -> Measurement:
    return Measurement.projective(haar_unitary(d, rng))


def bures_angle_many(rhos: Sequence[np.ndarray], sigmas: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([bures_angle(a, b) for a, b in zip(rhos, sigmas)])
