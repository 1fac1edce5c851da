"""Built-in models and figure pipelines.

* :func:`two_qubit_dephasing`: two qubits with independent dephasing,
  driven by a local field ``v (X1 + X2)/2`` from a Bell state and read out
  in the Bell basis (separable-state QFI threshold ``F* = 2``).
* :func:`fig2_run`: entanglement witness statistic against the exact
  time-averaged QFI.
* :func:`fig3_run`: exact weak-coupling errors ``Delta_1 + Delta_2``
  against the estimate ``Delta_est``.
* :func:`quench_scenario`, :func:`random_instance`: inputs for the
  thermodynamic and property suites.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gksl_dynamics import Generator, GkslForm
from .info_measures import ibar
from .linalg_core import haar_unitary, operator_norm, random_hermitian
from .quantum_state import (
    Measurement,
    bell_measurement,
    bell_states,
    bhattacharyya,
    gibbs_state,
    measure,
    projector,
    random_density_matrix,
    sample_counts,
)
from .speed_limits import (
    delta_est,
    first_crossing,
    result3_bound,
    weak_coupling_trajectories,
)
from .weak_coupling import BathSpectrum, WeakCouplingModel, expand, flat_bath

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)

DEFAULT_T_MAX = 2.0
DEFAULT_POINTS = 400


def default_grid(t_max: float = DEFAULT_T_MAX, points: int = DEFAULT_POINTS) -> np.ndarray:
    return np.linspace(0.0, t_max, points)


@dataclass
class Scenario:
    name: str
    model: Optional[WeakCouplingModel] = None
    generator: Optional[Generator] = None
    V: Optional[np.ndarray] = None
    v: float = 0.0
    rho0: Optional[np.ndarray] = None
    grid: np.ndarray = field(default_factory=default_grid)
    measurement: Optional[Measurement] = None
    threshold: Optional[float] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = set()
        if self.model is not None:
            dims.add(self.model.dim)
        if self.generator is not None:
            dims.add(self.generator.dim)
        for M in (self.V, self.rho0):
            if M is not None:
                dims.add(np.shape(M)[0])
        if self.measurement is not None:
            dims.add(self.measurement.dim)
        if len(dims) > 1:
            raise ValueError(f"scenario components have inconsistent dimensions {sorted(dims)}")
        self.grid = np.asarray(self.grid, dtype=float)


@dataclass
class Table:
    columns: dict
    meta: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.columns[key]


def two_qubit_dephasing(h: float = 1.0, lam: float = 0.1, gamma0: float = 0.1, v: float = 0.1,
                        grid=None) -> Scenario:
    """``H = (h/2)(Z1 + Z2)``, dephasing couplings ``Z1, Z2`` with flat rate ``gamma0``."""
    Z1, Z2 = np.kron(SZ, I2), np.kron(I2, SZ)
    X1, X2 = np.kron(SX, I2), np.kron(I2, SX)
    H = 0.5 * h * (Z1 + Z2)
    model = WeakCouplingModel(H, [Z1, Z2], lam, flat_bath(gamma0))
    rho0 = projector(bell_states()[:, 0])
    return Scenario(
        name="two_qubit_dephasing",
        model=model,
        V=0.5 * (X1 + X2),
        v=v,
        rho0=rho0,
        grid=default_grid() if grid is None else np.asarray(grid, dtype=float),
        measurement=bell_measurement(),
        threshold=2.0,
        extras={"h": h, "lam": lam, "gamma0": gamma0},
    )


def fig2_run(scenario: Scenario, grid=None, shots: int = 0, seed: int = 0,
             h_int: float | None = None, run=None) -> Table:
    """Witness statistic, exact average sqrt-QFI and the error-corrected statistic.

    Columns: ``t, measured_speed, exact_avg_sqrt_qfi, corrected_lower_bound,
    threshold``.  At ``t = 0`` the ratios are undefined and reported as NaN,
    except the QFI average which takes its limit ``sqrt(F(eta_0))``.
    """
    grid = scenario.grid if grid is None else np.asarray(grid, dtype=float)
    sc = scenario
    if run is None:
        run = weak_coupling_trajectories(sc.model, sc.V, sc.v, sc.rho0, grid, h_int)
    t = run.times - run.times[0]
    v = sc.v
    rng = np.random.default_rng(seed)
    floor = -run.eta_positivity_tol
    p = [measure(r, sc.measurement) for r in run.rho.states]
    q = [measure(e, sc.measurement, floor=floor) for e in run.eta.states]
    if shots:
        p = [sample_counts(x, shots, rng) for x in p]
        q = [sample_counts(x, shots, rng) for x in q]
    integral = run.int_sqrt_qfi_eta
    eps = run.first_order.expansion.epsilon_upper
    nV = operator_norm(sc.V)
    d_est = np.asarray(delta_est(t, v, nV, eps))
    measured = np.full(len(t), np.nan)
    avg = np.empty(len(t))
    corrected = np.full(len(t), np.nan)
    for i in range(len(t)):
        if t[i] > 0:
            measured[i] = 2.0 * math.acos(bhattacharyya(p[i], q[i])) / (t[i] * v)
            avg[i] = integral[i] / t[i]
            corrected[i] = measured[i] - 2.0 * d_est[i] / (v * t[i])
        else:
            avg[i] = run.sqrt_qfi_eta[i]
    thr = math.sqrt(sc.threshold)
    cols = {
        "t": run.times,
        "measured_speed": measured,
        "exact_avg_sqrt_qfi": avg,
        "corrected_lower_bound": corrected,
        "threshold": np.full(len(t), thr),
    }
    meta = {
        "crossing_exact_qfi": first_crossing(run.times, avg, thr, "down"),
        "crossing_corrected": first_crossing(run.times, corrected, thr, "down"),
        "crossing_measured": first_crossing(run.times, measured, thr, "down"),
        "epsilon_upper": eps,
        "epsilon_sampled": run.first_order.expansion.epsilon_sampled,
        "h_int": run.h_int,
        "timescales": run.timescales,
        "warnings": [f"timescale assumption {k} fails" for k in run.timescales.failed()],
    }
    return Table(cols, meta)


def fig3_run(scenario: Scenario, grid=None, h_int: float | None = None, run=None) -> Table:
    """Exact ``Delta_1``, ``Delta_2`` and their sum next to ``Delta_est``."""
    grid = scenario.grid if grid is None else np.asarray(grid, dtype=float)
    sc = scenario
    report, budget = result3_bound(sc.model, sc.V, sc.v, sc.rho0, grid, h_int, run=run)
    cols = {
        "t": budget.times,
        "delta1": budget.delta1,
        "delta2": budget.delta2,
        "delta1_plus_delta2": budget.delta_exact,
        "delta_est": budget.delta_est,
    }
    meta = {"h_int": report.metadata["h_int"], "epsilon_upper": budget.epsilon_used,
            "warnings": report.metadata["warnings"], "report": report, "budget": budget}
    return Table(cols, meta)


def quench_scenario(H, dH, beta: float, couplings, lam: float, bath: BathSpectrum,
                    grid=None, regime_factor: float = 10.0) -> Scenario:
    """Sudden quench ``H -> H + dH`` from the Gibbs state of ``H``.

    ``extras`` carries ``H_prime``, ``beta``, the averaged skew information
    of ``dH`` and the driving-regime flags.
    """
    from .errors import NotStationary
    from .weak_coupling import build_secular_me

    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    model = WeakCouplingModel(H, couplings, lam, bath)
    rho_th = gibbs_state(model.H, beta)
    L = build_secular_me(model).generator
    resid = float(np.max(np.abs(L.apply(rho_th))))
    if resid > 1e-6:
        raise NotStationary(f"Gibbs state not stationary under the bath (residual {resid:.3e})")
    dH = np.asarray(dH, dtype=complex)
    v = operator_norm(dH)
    ib = ibar(rho_th, dH) if v > 0 else 0.0
    extras = {"H_prime": model.H + dH, "beta": beta, "ibar": ib, "classical_driving": ib <= 1e-12}
    if v > 0:
        fo = expand(model, dH / v, v)
        eps = fo.expansion.epsilon_upper
        t_end = float(grid[-1] - grid[0])
        scale = max(math.sqrt(eps * v * t_end), eps)
        extras["quantum_driving_ratio"] = (math.sqrt(ib) / v) / scale if scale > 0 else math.inf
        extras["quantum_driving"] = bool(math.sqrt(ib) / v >= regime_factor * scale)
        V = dH / v
    else:
        extras["quantum_driving_ratio"] = 0.0
        extras["quantum_driving"] = False
        V = np.zeros_like(dH)
    return Scenario("quench", model=model, V=V, v=v, rho0=rho_th, grid=grid, extras=extras)


def random_instance(dim: int, seed: int, rate_cap: float = 1.0, v_cap: float = 0.2,
                    n_jumps: int = 2, grid=None) -> Scenario:
    """Deterministic random GKSL generator, Hamiltonian perturbation, state and observable."""
    if not 2 <= dim <= 8:
        raise ValueError("dim must lie in [2, 8]")
    rng = np.random.default_rng(seed)
    H = random_hermitian(dim, rng)
    H = H / operator_norm(H)
    jumps = []
    for _ in range(n_jumps):
        L = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        L = L / operator_norm(L)
        jumps.append((L, float(rng.uniform(0.0, rate_cap))))
    V = random_hermitian(dim, rng)
    V = V / operator_norm(V)
    v = float(rng.uniform(0.0, v_cap))
    rho0 = random_density_matrix(dim, rng)
    U = haar_unitary(dim, rng)
    A = (U * rng.uniform(-1, 1, size=dim)) @ U.conj().T
    A = 0.5 * (A + A.conj().T)
    return Scenario(
        name=f"random_d{dim}_s{seed}",
        generator=GkslForm(H, jumps),
        V=V,
        v=v,
        rho0=rho0,
        grid=np.linspace(0.0, 2.0, 201) if grid is None else np.asarray(grid, dtype=float),
        extras={"observable": A, "seed": seed},
    )
