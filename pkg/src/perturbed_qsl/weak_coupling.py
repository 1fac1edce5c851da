"""Secular weak-coupling master equations and their first-order perturbation.

Frequency convention
--------------------
Jump components follow ``omega = E_m - E_n`` with
``A(omega) = sum Pi_m A Pi_n``, so that ``[H, A(omega)] = omega A(omega)``:
``A(omega)`` *raises* the system energy by ``omega``.  Bath spectra, on the
other hand, are supplied in the usual form where the argument is the energy
released into the bath (``gamma(w) / gamma(-w) = exp(beta w)`` for a
thermal bath).  The rate multiplying ``A(omega)`` is therefore
``bath.gamma(-omega)``; with this pairing the Gibbs state of ``H`` is
stationary under a thermal bath.

Degenerate Hamiltonians are handled with eigenspace projectors.  First-order
perturbation theory is only applied when ``V`` acts as a multiple of the
identity inside every degenerate eigenspace, in which case the projector
corrections are unambiguous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AmbiguousClustering, DegeneracyBroken, NearDegenerate, UnphysicalBath
from .gksl_dynamics import GkslForm, LinearForm
from .linalg_core import (
    as_hermitian,
    hamiltonian_superop,
    haar_unitary,
    left,
    operator_norm,
    right,
    sandwich,
)
from .quantum_state import haar_pure_state

RATIO_THRESHOLD = 0.1


def _zero(a, b, w):
    return 0.0


@dataclass
class BathSpectrum:
    """Bath correlation spectra ``gamma_ab(w)`` and ``S_ab(w)``.

    ``w`` is the energy given to the bath (see the module docstring).
    Derivatives are optional; central differences are used when absent.
    ``tau_B`` is the bath correlation time (0 for white noise).
    """

    gamma: Callable[[int, int, float], float]
    s_shift: Callable[[int, int, float], float] = _zero
    gamma_deriv: Optional[Callable[[int, int, float], float]] = None
    s_deriv: Optional[Callable[[int, int, float], float]] = None
    tau_B: float = 0.0


def flat_bath(gamma0: float, tau_B: float = 0.0) -> BathSpectrum:
    """Independent white-noise baths with ``gamma_aa(w) = gamma0``."""

    def gamma(a, b, w):
        return gamma0 if a == b else 0.0

    return BathSpectrum(gamma=gamma, s_shift=_zero, gamma_deriv=_zero, s_deriv=_zero, tau_B=tau_B)


def _ohmic_scalar(w, eta, omega_c, beta):
    if w == 0.0:
        return 2 * math.pi * eta / beta
    return 2 * math.pi * eta * w * math.exp(-abs(w) / omega_c) / (-math.expm1(-beta * w))


def _ohmic_deriv_scalar(w, eta, omega_c, beta):
    # g(w) = w/(1 - e^{-bw}); gamma = 2 pi eta g(w) e^{-|w|/wc}
    x = beta * w
    if abs(x) < 1e-4:
        g = 1 / beta + w / 2 + beta * w * w / 12
        dg = 0.5 + x / 6
    else:
        den = -math.expm1(-x)
        g = w / den
        dg = (den - x * math.exp(-x)) / (den * den)
    sgn = 0.0 if w == 0.0 else math.copysign(1.0, w)
    return 2 * math.pi * eta * math.exp(-abs(w) / omega_c) * (dg - sgn * g / omega_c)


def ohmic_gamma(eta: float, omega_c: float, beta_bath: float) -> BathSpectrum:
    """Independent Ohmic baths, ``gamma(w) = 2 pi eta w e^{-|w|/wc} / (1 - e^{-beta w})``.

    The ``w -> 0`` limit ``2 pi eta / beta`` is used exactly at ``w = 0``.
    Lamb shifts default to zero and ``tau_B = beta``.
    """
    if not (eta > 0 and omega_c > 0 and beta_bath > 0):
        raise ValueError("eta, omega_c and beta must be positive")

    def gamma(a, b, w):
        return _ohmic_scalar(float(w), eta, omega_c, beta_bath) if a == b else 0.0

    def dgamma(a, b, w):
        return _ohmic_deriv_scalar(float(w), eta, omega_c, beta_bath) if a == b else 0.0

    return BathSpectrum(gamma=gamma, s_shift=_zero, gamma_deriv=dgamma, s_deriv=_zero, tau_B=beta_bath)


@dataclass
class WeakCouplingModel:
    H: np.ndarray
    couplings: list
    lam: float
    bath: BathSpectrum

    def __post_init__(self):
        self.H = as_hermitian(self.H, "H")
        self.couplings = [as_hermitian(A, "coupling") for A in self.couplings]
        for A in self.couplings:
            if A.shape != self.H.shape:
                raise ValueError("coupling and Hamiltonian dimensions differ")
        self.lam = float(self.lam)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def with_hamiltonian(self, H) -> "WeakCouplingModel":
        return WeakCouplingModel(H, self.couplings, self.lam, self.bath)


# -- spectral structure -------------------------------------------------------

@dataclass
class Levels:
    """Eigenbasis of ``H`` grouped into (possibly degenerate) levels."""

    energies: np.ndarray        # per eigenvector
    vectors: np.ndarray         # columns
    level_of: np.ndarray        # level index of each eigenvector
    level_energies: np.ndarray  # mean energy of each level
    projectors: list

    @property
    def n_levels(self) -> int:
        return len(self.level_energies)

    def min_gap(self) -> float:
        if self.n_levels < 2:
            return math.inf
        return float(np.min(np.diff(self.level_energies)))


def default_tol(H) -> float:
    return 1e-8 * max(operator_norm(H), 1e-300)


def levels_of(H, tol: float | None = None) -> Levels:
    H = as_hermitian(H, "H")
    tol = default_tol(H) if tol is None else tol
    E, U = np.linalg.eigh(H)
    level_of = np.zeros(len(E), dtype=int)
    for i in range(1, len(E)):
        level_of[i] = level_of[i - 1] + (1 if E[i] - E[i - 1] > tol else 0)
    nl = level_of[-1] + 1
    lev_E = np.array([E[level_of == a].mean() for a in range(nl)])
    projs = [U[:, level_of == a] @ U[:, level_of == a].conj().T for a in range(nl)]
    return Levels(E, U, level_of, lev_E, projs)


@dataclass
class Cluster:
    omega: float
    pairs: list  # (a, b) level pairs with E_a - E_b in the cluster


def cluster_frequencies(levels: Levels, tol: float) -> list:
    """Single-linkage clustering of all gaps ``E_a - E_b`` (including 0)."""
    items = sorted(
        ((levels.level_energies[a] - levels.level_energies[b], (a, b))
         for a in range(levels.n_levels) for b in range(levels.n_levels)),
        key=lambda x: x[0],
    )
    clusters = []
    group = [items[0]]
    for w, p in items[1:]:
        if w - group[-1][0] <= tol:
            group.append((w, p))
        else:
            clusters.append(group)
            group = [(w, p)]
    clusters.append(group)
    out = []
    for g in clusters:
        ws = [w for w, _ in g]
        if max(ws) - min(ws) > tol:
            raise AmbiguousClustering(
                f"Bohr frequencies {min(ws):.6g}..{max(ws):.6g} chain together beyond tol_omega={tol:.3g}"
            )
        out.append(Cluster(float(np.mean(ws)), [p for _, p in g]))
    return out


def bohr_decompose(H, A, tol_omega: float | None = None) -> dict:
    """Map ``omega -> A(omega) = sum_{E_m - E_n ~ omega} Pi_m A Pi_n`` (nonzero components only)."""
    H = as_hermitian(H, "H")
    A = np.asarray(A, dtype=complex)
    tol = default_tol(H) if tol_omega is None else tol_omega
    lev = levels_of(H, tol)
    out = {}
    for c in cluster_frequencies(lev, tol):
        comp = sum(lev.projectors[a] @ A @ lev.projectors[b] for a, b in c.pairs)
        if np.max(np.abs(comp)) > 1e-14 * (1 + np.max(np.abs(A))):
            out[c.omega] = comp
    return out


# -- secular master equation ----------------------------------------------------

def paper_gamma(bath: BathSpectrum, a: int, b: int, omega: float) -> complex:
    """Rate multiplying ``A_b(omega) rho A_a(omega)^+`` for raising-convention ``omega``."""
    return bath.gamma(a, b, -omega)


def paper_s(bath: BathSpectrum, a: int, b: int, omega: float) -> complex:
    return bath.s_shift(a, b, -omega)


@dataclass
class SecularME:
    model: WeakCouplingModel
    tol_omega: float
    levels: Levels
    clusters: list          # Cluster objects with a nonzero component for some coupling
    components: list        # components[alpha][k] = A_alpha(omega_k)
    gamma_mats: list        # gamma_mats[k][a, b] = gamma_ab(omega_k) in the raising convention
    s_mats: list
    H_LS: np.ndarray
    jump_terms: list        # (L, rate) after diagonalising gamma(omega)
    generator: GkslForm

    @property
    def bohr_frequencies(self) -> list:
        return [c.omega for c in self.clusters]

    def dissipator_superop(self) -> np.ndarray:
        """Dissipator assembled directly from the double sum over couplings (for cross-checks)."""
        d = self.model.dim
        lam2 = self.model.lam ** 2
        M = np.zeros((d * d, d * d), dtype=complex)
        n = len(self.model.couplings)
        for k in range(len(self.clusters)):
            G = self.gamma_mats[k]
            for a in range(n):
                Aa = self.components[a][k]
                for b in range(n):
                    if G[a, b] == 0:
                        continue
                    Ab = self.components[b][k]
                    AdA = Aa.conj().T @ Ab
                    M += lam2 * G[a, b] * (sandwich(Ab, Aa.conj().T) - 0.5 * (left(AdA) + right(AdA)))
        return M


def build_secular_me(model: WeakCouplingModel, tol_omega: float | None = None) -> SecularME:
    """Secular (rotating-wave) GKSL generator ``-i[H + H_LS, .] + D``."""
    H = model.H
    tol = default_tol(H) if tol_omega is None else tol_omega
    lev = levels_of(H, tol)
    all_clusters = cluster_frequencies(lev, tol)
    n = len(model.couplings)
    d = model.dim
    comps_all = [[sum(lev.projectors[a] @ A @ lev.projectors[b] for a, b in c.pairs) for c in all_clusters]
                 for A in model.couplings]
    keep = [k for k in range(len(all_clusters))
            if any(np.max(np.abs(comps_all[al][k])) > 1e-14 * (1 + np.max(np.abs(model.couplings[al])))
                   for al in range(n))]
    clusters = [all_clusters[k] for k in keep]
    comps = [[comps_all[al][k] for k in keep] for al in range(n)]
    lam2 = model.lam ** 2
    H_LS = np.zeros((d, d), dtype=complex)
    jumps = []
    gmats, smats = [], []
    for k, c in enumerate(clusters):
        G = np.array([[paper_gamma(model.bath, a, b, c.omega) for b in range(n)] for a in range(n)], dtype=complex)
        S = np.array([[paper_s(model.bath, a, b, c.omega) for b in range(n)] for a in range(n)], dtype=complex)
        gmats.append(G)
        smats.append(S)
        if lam2 == 0.0:
            continue
        for a in range(n):
            for b in range(n):
                if S[a, b] != 0:
                    H_LS += lam2 * S[a, b] * comps[a][k].conj().T @ comps[b][k]
        Gh = 0.5 * (G + G.conj().T)
        g, U = np.linalg.eigh(Gh)
        if g.min() < -1e-10 * max(1.0, float(np.max(np.abs(g)))):
            raise UnphysicalBath(f"gamma(omega={c.omega:.6g}) has eigenvalue {g.min():.3e}")
        for j in range(n):
            if g[j] <= 0:
                continue
            L = sum(np.conj(U[b, j]) * comps[b][k] for b in range(n))
            if np.max(np.abs(L)) > 0:
                jumps.append((L, lam2 * g[j]))
    H_LS = 0.5 * (H_LS + H_LS.conj().T)
    gen = GkslForm(H + H_LS, jumps)
    return SecularME(model, tol, lev, clusters, comps, gmats, smats, H_LS, jumps, gen)


# -- perturbation theory -------------------------------------------------------

@dataclass
class PerturbedEigensystem:
    levels: Levels
    V: np.ndarray
    E1: np.ndarray          # first-order energy of each eigenvector
    C: np.ndarray           # C[n, m] = <m|V|n>/(E_n - E_m), zero within a level
    Q: list                 # Q_n per eigenvector
    level_Q: list           # sum of Q_n over each level (first-order projector change)
    level_E1: np.ndarray


def perturb_eigensystem(H, V, tol: float | None = None) -> PerturbedEigensystem:
    """Non-degenerate (or benignly degenerate) first-order perturbation theory."""
    H = as_hermitian(H, "H")
    V = as_hermitian(V, "V")
    lev = levels_of(H, tol)
    hnorm = max(operator_norm(H), 1e-300)
    if lev.n_levels > 1 and lev.min_gap() < 1e3 * np.finfo(float).eps * hnorm:
        raise NearDegenerate(f"spectral gap {lev.min_gap():.3e} too small for perturbation theory")
    U = lev.vectors
    Vb = U.conj().T @ V @ U
    dn = len(lev.energies)
    vscale = 1e-10 * (1 + float(np.max(np.abs(V))))
    for a in range(lev.n_levels):
        idx = np.flatnonzero(lev.level_of == a)
        if len(idx) > 1:
            block = Vb[np.ix_(idx, idx)]
            off = block - np.mean(np.diag(block).real) * np.eye(len(idx))
            if np.max(np.abs(off)) > vscale:
                raise NearDegenerate(
                    f"V splits the degenerate level at E={lev.level_energies[a]:.6g}; "
                    "first-order theory for this case is out of scope"
                )
    E1 = np.real(np.diag(Vb)).copy()
    C = np.zeros((dn, dn), dtype=complex)
    for nn in range(dn):
        for m in range(dn):
            if lev.level_of[m] != lev.level_of[nn]:
                C[nn, m] = Vb[m, nn] / (lev.energies[nn] - lev.energies[m])
    Q = []
    for nn in range(dn):
        q = np.zeros((dn, dn), dtype=complex)
        q[:, nn] += C[nn, :]
        q[nn, :] += C[nn, :].conj()
        Q.append(U @ q @ U.conj().T)
    level_Q = [sum(Q[i] for i in np.flatnonzero(lev.level_of == a)) for a in range(lev.n_levels)]
    level_E1 = np.array([E1[lev.level_of == a].mean() for a in range(lev.n_levels)])
    return PerturbedEigensystem(lev, V, E1, C, Q, level_Q, level_E1)


@dataclass
class DegeneracyReport:
    broken: bool
    clusters: list = field(default_factory=list)  # (omega, [delta_omega per contributing pair])
    advisory: str = ""


def _contributing_pairs(me: SecularME, k: int):
    tol = 1e-14
    pairs = []
    for a, b in me.clusters[k].pairs:
        Pa, Pb = me.levels.projectors[a], me.levels.projectors[b]
        if any(np.max(np.abs(Pa @ A @ Pb)) > tol * (1 + np.max(np.abs(A))) for A in me.model.couplings):
            pairs.append((a, b))
    return pairs


def degeneracy_break_check(me: SecularME, pert: PerturbedEigensystem, tol: float = 1e-9) -> DegeneracyReport:
    """Flag Bohr clusters whose member transitions shift by different first-order amounts."""
    flagged = []
    for k, c in enumerate(me.clusters):
        pairs = _contributing_pairs(me, k)
        shifts = [float(pert.level_E1[a] - pert.level_E1[b]) for a, b in pairs]
        if shifts and max(shifts) - min(shifts) > tol:
            flagged.append((c.omega, shifts))
    if flagged:
        return DegeneracyReport(True, flagged,
                                "degeneracy broken: requires tau_R << tau_V (perturbation weaker than the decoherence)")
    return DegeneracyReport(False, [], "")


def _paper_deriv(me: SecularME, fn, deriv, a, b, omega, step):
    if deriv is not None:
        return -deriv(a, b, -omega)
    return (fn(a, b, -(omega + step)) - fn(a, b, -(omega - step))) / (2 * step)


@dataclass
class PerturbationExpansion:
    E1: np.ndarray
    C: np.ndarray
    Q: list
    A1: list                # A1[alpha][k] for cluster k
    delta_omega: list       # per cluster, per unit v
    H1_LS: np.ndarray
    D1: LinearForm
    epsilon_sampled: float
    epsilon_upper: float

    @property
    def correction(self) -> LinearForm:
        """Generator ``-i[H1_LS, .] + D1`` whose size defines epsilon."""
        return LinearForm(hamiltonian_superop(self.H1_LS) + self.D1.matrix, check=False)


def first_order_generators(
    me: SecularME,
    pert: PerturbedEigensystem,
    bath: BathSpectrum | None = None,
    sample_count: int = 2000,
    seed: int = 0,
    degeneracy_tol: float = 1e-9,
) -> PerturbationExpansion:
    """First-order changes of the Lamb shift and dissipator under ``H -> H + vV``."""
    bath = me.model.bath if bath is None else bath
    rep = degeneracy_break_check(me, pert, degeneracy_tol)
    if rep.broken:
        raise DegeneracyBroken(rep.advisory, [(w, min(s), max(s)) for w, s in rep.clusters])
    d = me.model.dim
    n = len(me.model.couplings)
    lam2 = me.model.lam ** 2
    gap = me.levels.min_gap()
    step = 1e-4 * (gap if math.isfinite(gap) else 1.0)
    P = me.levels.projectors
    LQ = pert.level_Q
    A1 = [[sum(LQ[a] @ A @ P[b] + P[a] @ A @ LQ[b] for a, b in c.pairs) for c in me.clusters]
          for A in me.model.couplings]
    H1 = np.zeros((d, d), dtype=complex)
    D1 = np.zeros((d * d, d * d), dtype=complex)
    dws = []
    for k, c in enumerate(me.clusters):
        pairs = _contributing_pairs(me, k)
        dw = float(np.mean([pert.level_E1[a] - pert.level_E1[b] for a, b in pairs])) if pairs else 0.0
        dws.append(dw)
        if lam2 == 0.0:
            continue
        for al in range(n):
            Aa = me.components[al][k]
            A1a = A1[al][k]
            for be in range(n):
                Ab = me.components[be][k]
                A1b = A1[be][k]
                g = paper_gamma(bath, al, be, c.omega)
                s = paper_s(bath, al, be, c.omega)
                dg = _paper_deriv(me, bath.gamma, bath.gamma_deriv, al, be, c.omega, step) if dw else 0.0
                ds = _paper_deriv(me, bath.s_shift, bath.s_deriv, al, be, c.omega, step) if dw else 0.0
                AdA = Aa.conj().T @ Ab
                X1 = A1a.conj().T @ Ab + Aa.conj().T @ A1b
                H1 += lam2 * (s * X1 + dw * ds * AdA)
                if g != 0:
                    D1 += lam2 * g * (sandwich(A1b, Aa.conj().T) + sandwich(Ab, A1a.conj().T)
                                      - 0.5 * (left(X1) + right(X1)))
                if dw * dg != 0:
                    D1 += lam2 * dw * dg * (sandwich(Ab, Aa.conj().T) - 0.5 * (left(AdA) + right(AdA)))
    H1 = 0.5 * (H1 + H1.conj().T)
    D1f = LinearForm(D1)
    exp = PerturbationExpansion(pert.E1, pert.C, pert.Q, A1, dws, H1, D1f, 0.0, 0.0)
    es, eu = epsilon(exp, sample_count, seed)
    exp.epsilon_sampled, exp.epsilon_upper = es, eu
    return exp


def epsilon(exp: PerturbationExpansion, sample_count: int = 2000, seed: int = 0) -> tuple[float, float]:
    """``(sampled lower bound, rigorous upper bound)`` on ``max_psi ||(H1 + D1)(psi)||``.

    The upper bound is the spectral norm of the superoperator matrix, valid
    because ``||X||_op <= ||X||_F`` and ``||psi||_F = 1`` for pure states.
    """
    G = exp.correction
    M = G.matrix
    upper = operator_norm(M)
    if upper == 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    d = G.dim
    best = 0.0
    for _ in range(int(sample_count)):
        psi = haar_pure_state(d, rng)
        X = M @ np.outer(psi, psi.conj()).reshape(-1, order="F")
        best = max(best, operator_norm(X.reshape(d, d, order="F")))
    return best, upper


# -- timescales ------------------------------------------------------------------

@dataclass
class TimescaleReport:
    tau_S: float
    tau_V: float
    tau_R: float
    tau_B: float
    flags: dict

    @property
    def all_pass(self) -> bool:
        return all(self.flags.values())

    def failed(self) -> list:
        return [k for k, ok in self.flags.items() if not ok]


def _ratio_ok(small, large):
    if large == math.inf:
        return True
    if small == math.inf:
        return False
    return small <= RATIO_THRESHOLD * large


def timescales(model: WeakCouplingModel, v: float, tol_omega: float | None = None) -> TimescaleReport:
    """``tau_S = 1/min gap``, ``tau_V = 1/v``, ``tau_R = 1/(lam^2 max gamma_aa)`` and the four flags."""
    tol = default_tol(model.H) if tol_omega is None else tol_omega
    lev = levels_of(model.H, tol)
    gap = lev.min_gap()
    tau_S = 1.0 / gap if math.isfinite(gap) else math.inf
    tau_V = 1.0 / abs(v) if v else math.inf
    gmax = 0.0
    if model.lam != 0.0:
        me = build_secular_me(model, tol)
        for G in me.gamma_mats:
            gmax = max(gmax, float(np.max(np.real(np.diag(G)))))
    rate = model.lam ** 2 * gmax
    tau_R = 1.0 / rate if rate > 0 else math.inf
    tau_B = float(model.bath.tau_B)
    flags = {
        "i_born_markov": _ratio_ok(tau_B, tau_R),
        "ii_rwa": _ratio_ok(tau_S, tau_R),
        "iii_bath_vs_perturbation": _ratio_ok(tau_B, tau_V),
        "iv_system_vs_perturbation": _ratio_ok(tau_S, tau_V),
    }
    return TimescaleReport(tau_S, tau_V, tau_R, tau_B, flags)


def default_step(report: TimescaleReport) -> float:
    """``min(tau_S, tau_V, tau_R)/200`` (finite entries only; 0.01 when none are finite)."""
    finite = [x for x in (report.tau_S, report.tau_V, report.tau_R) if math.isfinite(x)]
    return min(finite) / 200.0 if finite else 0.01


# -- convenience -------------------------------------------------------------------

@dataclass
class FirstOrderModel:
    """Everything needed to compare the free, approximate and first-order perturbed dynamics."""

    me: SecularME
    pert: PerturbedEigensystem
    expansion: PerturbationExpansion
    V: np.ndarray
    v: float


def expand(model: WeakCouplingModel, V, v: float, tol_omega: float | None = None,
           sample_count: int = 2000, seed: int = 0) -> FirstOrderModel:
    me = build_secular_me(model, tol_omega)
    pert = perturb_eigensystem(model.H, V, me.tol_omega)
    exp = first_order_generators(me, pert, model.bath, sample_count, seed)
    return FirstOrderModel(me, pert, exp, as_hermitian(V, "V"), float(v))


def rebuild(model: WeakCouplingModel, V, v: float, tol_omega: float | None = None) -> SecularME:
    """Secular master equation rebuilt from scratch at ``H + vV`` (reference for first-order checks)."""
    return build_secular_me(model.with_hamiltonian(model.H + v * np.asarray(V)), tol_omega)


def random_model(dim: int, n_couplings: int, lam: float, bath: BathSpectrum, rng) -> WeakCouplingModel:
    """Random nondegenerate Hamiltonian with unit-norm random couplings (test fuel)."""
    E = np.sort(rng.uniform(-1, 1, size=dim))
    while np.min(np.diff(E)) < 0.1:
        E = np.sort(rng.uniform(-1, 1, size=dim))
    U = haar_unitary(dim, rng)
    H = (U * E) @ U.conj().T
    couplings = []
    for _ in range(n_couplings):
        X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        A = 0.5 * (X + X.conj().T)
        couplings.append(A / operator_norm(A))
    return WeakCouplingModel(H, couplings, lam, bath)
