"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The helpers
here validate them (Hermiticity, finiteness, matching shapes), provide a
deterministic Hermitian eigendecomposition, spectral matrix functions with
PSD clamping, the two norms the bounds need, and the column-stacking
vectorisation used to turn linear maps on operators into matrices.

Vectorisation convention: ``vec(X) = X.reshape(-1, order="F")`` so that
``vec(A X B) = kron(B.T, A) @ vec(X)``.
"""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .errors import DimensionMismatch, InvalidHermitian, NotPositiveSemidefinite

HERMITIAN_TOL = 1e-12
PSD_FLOOR = -1e-10


class EigenDecomposition(NamedTuple):
    """Ascending eigenvalues and orthonormal eigenvectors (as columns)."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a square finite complex array, raising on bad input."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def hermiticity_error(M) -> float:
    A = np.asarray(M)
    return float(np.max(np.abs(A - A.conj().T)))


def is_hermitian(M, tol: float = HERMITIAN_TOL) -> bool:
    A = np.asarray(M)
    return hermiticity_error(A) <= tol * (1.0 + float(np.max(np.abs(A))))


def as_hermitian(M, name: str = "operator", tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate Hermiticity and return the exactly symmetrised matrix."""
    A = as_matrix(M, name)
    if not is_hermitian(A, tol):
        raise InvalidHermitian(f"{name} is not Hermitian (max |M - M^dagger| = {hermiticity_error(A):.3e})")
    return 0.5 * (A + A.conj().T)


def check_same_dim(*mats) -> int:
    dims = {np.shape(m)[0] for m in mats}
    shapes = {np.shape(m) for m in mats}
    if len(dims) != 1 or len(shapes) != 1:
        raise DimensionMismatch(f"dimension mismatch: {sorted(shapes)}")
    return dims.pop()


def _fix_phases(vecs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Make the first non-negligible component of every column real positive."""
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = np.flatnonzero(np.abs(col) > tol)
        if idx.size:
            c = col[idx[0]]
            out[:, k] = col * (abs(c) / c)
    return out


def eig_hermitian(M, tol: float = HERMITIAN_TOL) -> EigenDecomposition:
    """Deterministic eigendecomposition of a Hermitian matrix.

    Eigenvalues ascend; inside each degenerate cluster the phase-fixed
    eigenvectors are ordered lexicographically by their components so that
    repeated calls give bit-identical output.
    """
    A = as_hermitian(M, tol=tol)
    w, U = np.linalg.eigh(A)
    U = _fix_phases(U)
    scale = 1.0 + float(np.max(np.abs(w)))
    order = list(range(len(w)))
    # group near-equal eigenvalues and sort their vectors lexicographically
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[stop - 1] <= 1e-10 * scale:
            stop += 1
        if stop - start > 1:
            block = order[start:stop]

            def key(k):
                col = np.round(U[:, k], 12)
                return tuple(v for z in col for v in (-z.real, -z.imag))

            order[start:stop] = sorted(block, key=key)
        start = stop
    return EigenDecomposition(w[order], U[:, order])


def matrix_function(
    M,
    f: Callable[[np.ndarray], np.ndarray],
    domain_floor: float = PSD_FLOOR,
    psd: bool = True,
) -> np.ndarray:
    """Spectral function ``sum_i f(l_i) |psi_i><psi_i|`` of a Hermitian matrix.

    With ``psd=True`` (needed for sqrt, log and fractional powers) eigenvalues
    below ``domain_floor`` raise :class:`NotPositiveSemidefinite`, those in
    ``[domain_floor, 0]`` are clamped to zero and ``f(0)`` is taken as 0.
    """
    w, U = np.linalg.eigh(as_hermitian(M))
    if psd:
        if w[0] < domain_floor:
            raise NotPositiveSemidefinite(f"eigenvalue {w[0]:.3e} below floor {domain_floor:.1e}")
        w = np.clip(w, 0.0, None)
        fw = np.zeros_like(w)
        pos = w > 0
        fw[pos] = f(w[pos])
    else:
        fw = f(w)
    return (U * fw) @ U.conj().T


def sqrtm_psd(M, domain_floor: float = PSD_FLOOR) -> np.ndarray:
    return matrix_function(M, np.sqrt, domain_floor)


def powm_psd(M, k: float, domain_floor: float = PSD_FLOOR) -> np.ndarray:
    return matrix_function(M, lambda x: x**k, domain_floor)


def logm_psd(M, domain_floor: float = PSD_FLOOR) -> np.ndarray:
    return matrix_function(M, np.log, domain_floor)


def operator_norm(M) -> float:
    """Largest singular value."""
    A = np.asarray(M, dtype=complex)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def trace_norm(M) -> float:
    """Sum of singular values."""
    A = np.asarray(M, dtype=complex)
    return float(np.sum(np.linalg.svd(A, compute_uv=False)))


def commutator(A, B) -> np.ndarray:
    check_same_dim(A, B)
    A = np.asarray(A)
    B = np.asarray(B)
    return A @ B - B @ A


def anticommutator(A, B) -> np.ndarray:
    check_same_dim(A, B)
    A = np.asarray(A)
    B = np.asarray(B)
    return A @ B + B @ A


def dagger(A) -> np.ndarray:
    return np.asarray(A).conj().T


# -- vectorisation -----------------------------------------------------------

def vec(X) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(x, d: int | None = None) -> np.ndarray:
    x = np.asarray(x)
    if d is None:
        d = int(round(np.sqrt(x.shape[-1])))
    return x.reshape(x.shape[:-1] + (d, d), order="F") if x.ndim == 1 else np.swapaxes(
        x.reshape(x.shape[:-1] + (d, d)), -1, -2
    )


def sandwich(A, B) -> np.ndarray:
    """Superoperator of ``X -> A X B``."""
    return np.kron(np.asarray(B).T, np.asarray(A))


def left(A) -> np.ndarray:
    """Superoperator of ``X -> A X``."""
    A = np.asarray(A)
    return np.kron(np.eye(A.shape[0]), A)


def right(B) -> np.ndarray:
    """Superoperator of ``X -> X B``."""
    B = np.asarray(B)
    return np.kron(B.T, np.eye(B.shape[0]))


def hamiltonian_superop(H) -> np.ndarray:
    """Superoperator of ``X -> -i[H, X]``."""
    return -1j * (left(H) - right(H))


def lindblad_superop(L, rate: float = 1.0) -> np.ndarray:
    """Superoperator of ``X -> rate (L X L^dagger - {L^dagger L, X}/2)``."""
    L = np.asarray(L, dtype=complex)
    LdL = L.conj().T @ L
    return rate * (sandwich(L, L.conj().T) - 0.5 * (left(LdL) + right(LdL)))


# -- random matrices (deterministic given a Generator) ----------------------

def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (X + X.conj().T)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    Z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph
