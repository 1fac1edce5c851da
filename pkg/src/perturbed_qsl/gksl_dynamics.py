"""Generators of Markovian dynamics and a fixed-step RK4 integrator.

A generator is any linear, trace-annihilating map on operators.  Four
forms are provided and compose freely:

* :class:`GkslForm`: ``-i[H, X] + sum_k g_k (L_k X L_k^+ - {L_k^+ L_k, X}/2)``
* :class:`LinearForm`: an explicit ``d^2 x d^2`` matrix acting on ``vec(X)``
* :class:`Sum`: pointwise sum of generators
* :class:`Scaled`: ``v(t) * inner`` for a scalar schedule ``v``

Every generator flattens into ``sum_j c_j(t) M_j`` with constant
superoperators ``M_j``; the integrator samples the ``c_j`` at the RK4 stage
times and hands the arrays to the compiled kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
import scipy.linalg

from . import _backend
from .errors import DimensionMismatch, IntegrationUnstable
from .linalg_core import (
    anticommutator,
    as_hermitian,
    as_matrix,
    commutator,
    hamiltonian_superop,
    lindblad_superop,
    operator_norm,
    unvec,
    vec,
)

Schedule = Union[float, Callable[[float], float]]


def _eval_schedule(s, t):
    if callable(s):
        return float(s(t))
    return float(s)


class Generator:
    """Base class; subclasses implement :meth:`terms` and the two applies."""

    dim: int

    def terms(self) -> list:
        """List of ``(schedule or None, superoperator)`` pairs."""
        raise NotImplementedError

    @property
    def time_dependent(self) -> bool:
        return any(callable(s) for s, _ in self.terms())

    def superoperator(self, t: float = 0.0) -> np.ndarray:
        D = self.dim * self.dim
        out = np.zeros((D, D), dtype=complex)
        for s, M in self.terms():
            c = 1.0 if s is None else _eval_schedule(s, t)
            if c != 0.0:
                out += c * M
        return out

    def apply(self, X, t: float = 0.0) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        self._check(X)
        return unvec(self.superoperator(t) @ vec(X), self.dim)

    def adjoint_apply(self, A, t: float = 0.0) -> np.ndarray:
        A = np.asarray(A, dtype=complex)
        self._check(A)
        M = self.superoperator(t)
        return unvec(M.T @ vec(A.T), self.dim).T

    def _check(self, X):
        if X.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"operator shape {X.shape} does not match generator dim {self.dim}")

    def __add__(self, other: "Generator") -> "Sum":
        return Sum([self, other])

    def scaled(self, schedule: Schedule) -> "Scaled":
        return Scaled(schedule, self)


class GkslForm(Generator):
    """Hamiltonian part plus Lindblad terms with nonnegative rates."""

    def __init__(self, H, lindblad_terms: Sequence = ()):
        self.H = as_hermitian(H, "Hamiltonian")
        self.dim = self.H.shape[0]
        terms = []
        for L, rate in lindblad_terms:
            L = as_matrix(L, "jump operator")
            if L.shape != self.H.shape:
                raise DimensionMismatch("jump operator and Hamiltonian dimensions differ")
            rate = float(rate)
            if not rate >= 0.0:
                raise ValueError(f"Lindblad rate must be nonnegative, got {rate}")
            terms.append((L, rate))
        self.lindblad_terms = terms
        self._superop = None

    def terms(self):
        if self._superop is None:
            M = hamiltonian_superop(self.H)
            for L, g in self.lindblad_terms:
                if g:
                    M = M + lindblad_superop(L, g)
            self._superop = M
        return [(None, self._superop)]

    def apply(self, X, t: float = 0.0):
        X = np.asarray(X, dtype=complex)
        self._check(X)
        out = -1j * commutator(self.H, X)
        for L, g in self.lindblad_terms:
            Ld = L.conj().T
            out = out + g * (L @ X @ Ld - 0.5 * anticommutator(Ld @ L, X))
        return out

    def adjoint_apply(self, A, t: float = 0.0):
        A = np.asarray(A, dtype=complex)
        self._check(A)
        out = 1j * commutator(self.H, A)
        for L, g in self.lindblad_terms:
            Ld = L.conj().T
            out = out + g * (Ld @ A @ L - 0.5 * anticommutator(Ld @ L, A))
        return out


def hamiltonian_generator(H) -> GkslForm:
    """``X -> -i[H, X]``."""
    return GkslForm(H, ())


def zero_generator(d: int) -> GkslForm:
    return GkslForm(np.zeros((d, d)), ())


class LinearForm(Generator):
    """Explicit superoperator matrix on column-stacked operators.

    With ``check=True`` the matrix must map Hermitian to Hermitian and
    annihilate the trace on a probe basis (tolerance 1e-10, scaled by the
    matrix size).
    """

    def __init__(self, matrix, check: bool = True, tol: float = 1e-10):
        M = np.asarray(matrix, dtype=complex)
        D = M.shape[0]
        d = int(round(math.sqrt(D)))
        if M.ndim != 2 or M.shape != (D, D) or d * d != D:
            raise DimensionMismatch(f"superoperator must be d^2 x d^2, got {M.shape}")
        self.matrix = M
        self.dim = d
        if check:
            self._validate(tol)

    def _validate(self, tol):
        d = self.dim
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        trace_rows = self.matrix[np.arange(d) * (d + 1), :].sum(axis=0)
        if np.max(np.abs(trace_rows)) > tol * scale:
            raise ValueError("LinearForm does not annihilate the trace")
        for i in range(d):
            for j in range(i, d):
                for phase in (1.0, 1j):
                    X = np.zeros((d, d), dtype=complex)
                    X[i, j] += phase
                    X[j, i] += np.conj(phase)
                    Y = unvec(self.matrix @ vec(X), d)
                    if np.max(np.abs(Y - Y.conj().T)) > tol * scale:
                        raise ValueError("LinearForm does not preserve Hermiticity")

    def terms(self):
        return [(None, self.matrix)]


class Sum(Generator):
    def __init__(self, parts: Sequence[Generator]):
        parts = list(parts)
        if not parts:
            raise ValueError("Sum needs at least one generator")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DimensionMismatch(f"summands have different dimensions {sorted(dims)}")
        self.parts = parts
        self.dim = parts[0].dim

    def terms(self):
        return [t for p in self.parts for t in p.terms()]

    def apply(self, X, t: float = 0.0):
        return sum(p.apply(X, t) for p in self.parts)

    def adjoint_apply(self, A, t: float = 0.0):
        return sum(p.adjoint_apply(A, t) for p in self.parts)


class Scaled(Generator):
    """``schedule(t) * inner``; ``schedule`` may be a constant."""

    def __init__(self, schedule: Schedule, inner: Generator):
        self.schedule = schedule
        self.inner = inner
        self.dim = inner.dim

    def coefficient(self, t: float) -> float:
        return _eval_schedule(self.schedule, t)

    def terms(self):
        out = []
        for s, M in self.inner.terms():
            out.append((_compose(self.schedule, s), M))
        return out

    def apply(self, X, t: float = 0.0):
        c = self.coefficient(t)
        if c == 0.0:
            self._check(np.asarray(X))
            return np.zeros((self.dim, self.dim), dtype=complex)
        return c * self.inner.apply(X, t)

    def adjoint_apply(self, A, t: float = 0.0):
        c = self.coefficient(t)
        if c == 0.0:
            self._check(np.asarray(A))
            return np.zeros((self.dim, self.dim), dtype=complex)
        return c * self.inner.adjoint_apply(A, t)


def _compose(outer, inner):
    if inner is None:
        return outer if callable(outer) else float(outer)
    if not callable(outer) and not callable(inner):
        return float(outer) * float(inner)
    return lambda t: _eval_schedule(outer, t) * _eval_schedule(inner, t)


def apply(G: Generator, X, t: float = 0.0) -> np.ndarray:
    return G.apply(X, t)


def adjoint_apply(G: Generator, A, t: float = 0.0) -> np.ndarray:
    return G.adjoint_apply(A, t)


def superoperator_norm(G: Generator, t: float = 0.0) -> float:
    return operator_norm(G.superoperator(t))


# -- integration -------------------------------------------------------------

@dataclass
class IntegratorConfig:
    """Output grid plus integrator settings.

    ``h_int`` is an upper bound on the internal step: every output interval
    is split into ``ceil(interval / h_int)`` equal RK4 steps.
    """

    times: np.ndarray
    h_int: float
    hermitize_each_step: bool = True
    trace_drift_tol: float = 1e-8
    positivity_tol: float = 1e-8

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size < 1:
            raise ValueError("output grid must be a non-empty 1-D array")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("output times must be strictly increasing")
        if not self.h_int > 0:
            raise ValueError("h_int must be positive")
        if self.times.size > 1:
            min_spacing = float(np.min(np.diff(self.times)))
            if self.h_int > min_spacing * (1 + 1e-12):
                raise ValueError(f"h_int={self.h_int} exceeds the minimum output spacing {min_spacing}")

    def step_plan(self):
        """Return ``(step_start_times, step_sizes, record_flags)``."""
        starts, hs, rec = [], [], []
        for a, b in zip(self.times[:-1], self.times[1:]):
            n = max(1, math.ceil((b - a) / self.h_int - 1e-9))
            h = (b - a) / n
            for k in range(n):
                starts.append(a + k * h)
                hs.append(h)
                rec.append(1 if k == n - 1 else 0)
        return np.array(starts), np.array(hs), np.array(rec, dtype=np.int8)

    def halved(self) -> "IntegratorConfig":
        return IntegratorConfig(self.times, self.h_int / 2, self.hermitize_each_step,
                                self.trace_drift_tol, self.positivity_tol)


def default_h_int(G: Generator, times, cap: float | None = None) -> float:
    """Step for generators without physical timescales: ``1/(100 ||G||)``, capped by the grid spacing."""
    times = np.asarray(times, dtype=float)
    norm = max(superoperator_norm(G, float(times[0])), 1e-12)
    h = 1.0 / (100.0 * norm)
    if cap is not None:
        h = min(h, cap)
    if times.size > 1:
        h = min(h, float(np.min(np.diff(times))))
    return h


def make_config(G: Generator, times, h_int: float | None = None, **kw) -> IntegratorConfig:
    times = np.asarray(times, dtype=float)
    if h_int is None:
        h_int = default_h_int(G, times)
    elif times.size > 1:
        h_int = min(h_int, float(np.min(np.diff(times))))
    return IntegratorConfig(times, h_int, **kw)


@dataclass
class Trajectory:
    """States on a time grid; ``states`` has shape ``(len(times), d, d)``."""

    times: np.ndarray
    states: np.ndarray
    config: IntegratorConfig | None = field(default=None, repr=False)
    max_trace_drift: float = 0.0
    min_eigenvalue: float = 0.0

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i):
        return self.states[i]

    def __iter__(self):
        return iter(self.states)

    @property
    def dim(self) -> int:
        return self.states.shape[1]


def _sample_coefficients(terms, starts, hs):
    K = len(terms)
    stage_t = np.stack([starts, starts + 0.5 * hs, starts + hs], axis=1)
    coeffs = np.ones((len(hs), 3, K))
    for k, (s, _) in enumerate(terms):
        if s is None:
            continue
        if not callable(s):
            coeffs[:, :, k] = float(s)
            continue
        try:
            vals = np.asarray(s(stage_t), dtype=float)
            if vals.shape != stage_t.shape:
                raise ValueError
        except Exception:
            vals = np.array([[float(s(t)) for t in row] for row in stage_t])
        coeffs[:, :, k] = vals
    return coeffs


def integrate(G: Generator, rho0, cfg: IntegratorConfig) -> Trajectory:
    """Classical RK4 on the configured grid.

    After every internal step the state is re-Hermitised and its trace
    renormalised.  Raises :class:`IntegrationUnstable` when an output state
    has an eigenvalue below ``-cfg.positivity_tol`` or when the trace drift
    before renormalisation exceeds ``cfg.trace_drift_tol``.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    d = G.dim
    if rho0.shape != (d, d):
        raise DimensionMismatch(f"initial state shape {rho0.shape} vs generator dim {d}")
    terms = [(s, M) for s, M in G.terms() if not (s is not None and not callable(s) and float(s) == 0.0)]
    if not terms:
        terms = [(None, np.zeros((d * d, d * d), dtype=complex))]
    ops = np.ascontiguousarray(np.stack([M for _, M in terms]), dtype=complex)
    starts, hs, rec = cfg.step_plan()
    if len(hs):
        coeffs = np.ascontiguousarray(_sample_coefficients(terms, starts, hs))
        xs, drift = _backend.rk4_integrate(
            ops, coeffs, np.ascontiguousarray(hs), np.ascontiguousarray(vec(rho0)), d,
            np.ascontiguousarray(rec), bool(cfg.hermitize_each_step),
        )
        xs = np.asarray(xs)
    else:
        xs, drift = np.zeros((0, d * d), dtype=complex), 0.0
    states = np.concatenate([rho0[None], unvec(xs, d)], axis=0)
    if drift > cfg.trace_drift_tol:
        raise IntegrationUnstable(f"trace drift {drift:.3e} exceeds {cfg.trace_drift_tol:.1e}; reduce h_int")
    lmin = float(np.min(np.linalg.eigvalsh(states))) if len(states) else 0.0
    if lmin < -cfg.positivity_tol:
        raise IntegrationUnstable(
            f"positivity violated (eigenvalue {lmin:.3e} < -{cfg.positivity_tol:.1e}); reduce h_int"
        )
    return Trajectory(cfg.times.copy(), states, cfg, float(drift), lmin)


def propagate_pair(G_free: Generator, G_pert: Generator, rho0, cfg: IntegratorConfig):
    """Integrate the free and the perturbed generator from the same state and grid."""
    return integrate(G_free, rho0, cfg), integrate(G_pert, rho0, cfg)


def propagate_exact(G: Generator, rho0, times) -> np.ndarray:
    """Matrix-exponential propagation for time-independent generators (cross-check only)."""
    if G.time_dependent:
        raise ValueError("propagate_exact needs a time-independent generator")
    times = np.asarray(times, dtype=float)
    M = G.superoperator()
    x0 = vec(np.asarray(rho0, dtype=complex))
    out = [unvec(scipy.linalg.expm(M * (t - times[0])) @ x0, G.dim) for t in times]
    return np.array(out)
