"""Acceptance criteria 1-12, each at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line, printed in the terminal
summary (and to stdout when run with ``-s``).
"""
import math
import time

import numpy as np
import pytest

from perturbed_qsl import cli
from perturbed_qsl.gksl_dynamics import GkslForm, IntegratorConfig, Scaled, hamiltonian_generator, integrate
from perturbed_qsl.info_measures import ibar, ibar_quadrature, kubo_mori_variance, pure_state_qfi_identity, qfi
from perturbed_qsl.linalg_core import random_hermitian
from perturbed_qsl.quantum_state import (
    bhattacharyya,
    bures_angle,
    bures_distance,
    haar_pure_state,
    measure,
    random_density_matrix,
    random_projective_measurement,
    trace_distance,
)
from perturbed_qsl.scenarios import SX, SZ, Scenario, fig2_run, fig3_run, random_instance, two_qubit_dephasing
from perturbed_qsl.speed_limits import fdr_check, result1_bound, result2_bound, result3_bound, result4_bound
from perturbed_qsl.weak_coupling import WeakCouplingModel, expand, flat_bath, ohmic_gamma, timescales

from .conftest import ACCEPTANCE_LINES

MARGIN_TOL = 1e-6


def record(number: int, ok: bool, detail: str):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def fig_scenario():
    return two_qubit_dephasing(h=1.0, lam=0.1, gamma0=0.1, v=0.1)


@pytest.fixture(scope="module")
def fig_tables(fig_scenario):
    start = time.perf_counter()
    t2 = fig2_run(fig_scenario)
    mid = time.perf_counter()
    t3 = fig3_run(fig_scenario)
    end = time.perf_counter()
    return t2, t3, mid - start, end - mid


@pytest.fixture(scope="module")
def suite_instances():
    return [random_instance((2, 3, 4)[i % 3], seed=i) for i in range(100)]


def test_criterion_01_fig2_crossings(fig_tables):
    t2, _, runtime, _ = fig_tables
    c_exact = t2.meta["crossing_exact_qfi"]
    c_corr = t2.meta["crossing_corrected"]
    ok = (c_exact is not None and abs(c_exact - 1.41) <= 0.02 and c_corr is not None
          and abs(c_corr - 1.26) <= 0.02 and runtime < 10.0)
    record(1, ok, f"exact-QFI crossing {c_exact:.4f}, corrected crossing {c_corr:.4f}, runtime {runtime:.2f}s")
    assert ok


def test_criterion_02_fig3_error_budget(fig_tables):
    _, t3, _, runtime = fig_tables
    d1, d2, est = t3["delta1"], t3["delta2"], t3["delta_est"]
    margin = float(np.min(est - (d1 + d2)))
    dominated = bool(np.all(d2 >= d1))
    ok = margin >= 0.0 and dominated and runtime < 10.0
    record(2, ok, f"min(Delta_est - Delta_1 - Delta_2) = {margin:.3e}, Delta_2 >= Delta_1: {dominated}, "
                  f"runtime {runtime:.2f}s")
    assert ok


def test_criterion_03_epsilon(fig_scenario):
    fo = expand(fig_scenario.model, fig_scenario.V, fig_scenario.v)
    sampled, upper = fo.expansion.epsilon_sampled, fo.expansion.epsilon_upper
    ok = sampled <= 0.004 + 1e-9 and 0.001 <= upper <= 0.016
    record(3, ok, f"epsilon_sampled {sampled:.6f}, epsilon_upper {upper:.6f}")
    assert ok


def test_criterion_04_result1_suite(suite_instances):
    start = time.perf_counter()
    worst = math.inf
    for sc in suite_instances:
        rep = result1_bound(sc.generator, Scaled(sc.v, hamiltonian_generator(sc.V)), sc.rho0, sc.grid)
        worst = min(worst, rep.min_margin)
    runtime = time.perf_counter() - start
    ok = worst >= -MARGIN_TOL and runtime < 60.0
    record(4, ok, f"100 instances, worst margin {worst:.3e}, runtime {runtime:.1f}s")
    assert ok


def test_criterion_05_result2_suite(suite_instances):
    worst = math.inf
    for sc in suite_instances:
        rep = result2_bound(sc.generator, Scaled(sc.v, hamiltonian_generator(sc.V)), sc.extras["observable"],
                            sc.rho0, sc.grid)
        worst = min(worst, rep.min_margin)
    ok = worst >= -MARGIN_TOL
    record(5, ok, f"100 instances, worst margin {worst:.3e}")
    assert ok


def weak_coupling_scenarios():
    grid = np.linspace(0.0, 2.0, 201)
    yield two_qubit_dephasing(v=0.1, grid=grid)
    yield two_qubit_dephasing(h=1.5, v=0.05, grid=grid)
    qubit = WeakCouplingModel(0.5 * SZ, [SX], 0.1, ohmic_gamma(0.1, 100.0, 1.0))
    yield Scenario("qubit_ohmic", model=qubit, V=SX, v=0.05,
                   rho0=np.array([[0.7, 0.3], [0.3, 0.3]], dtype=complex), grid=grid)
    qutrit = WeakCouplingModel(np.diag([0.0, 1.0, 2.7]).astype(complex),
                               [np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)], 0.1, flat_bath(0.2))
    V3 = 0.5 * np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0.5]], dtype=complex)
    yield Scenario("qutrit_flat", model=qutrit, V=V3, v=0.05,
                   rho0=np.diag([0.5, 0.3, 0.2]).astype(complex), grid=grid)


def test_criterion_06_result3_exact_errors():
    worst = math.inf
    names = []
    for sc in weak_coupling_scenarios():
        assert timescales(sc.model, sc.v).all_pass, sc.name
        rep, _ = result3_bound(sc.model, sc.V, sc.v, sc.rho0, sc.grid)
        worst = min(worst, float(np.min(rep.metadata["rhs_exact"] - rep.lhs)))
        names.append(sc.name)
    ok = worst >= -MARGIN_TOL
    record(6, ok, f"{len(names)} scenarios with flags (i)-(iv) passing, worst exact-error margin {worst:.3e}")
    assert ok


def test_criterion_07_skew_information_sandwich():
    rng = np.random.default_rng(7)
    worst_sandwich = math.inf
    worst_rel = 0.0
    for i in range(200):
        d = 2 + i % 4
        rho = random_density_matrix(d, rng, rank=d if i % 2 == 0 else max(1, d - 1))
        H = random_hermitian(d, rng)
        ib = ibar(rho, H)
        F = qfi(rho, hamiltonian_generator(H))
        worst_sandwich = min(worst_sandwich, F - 4 * ib, 12 * ib - F)
        if np.linalg.eigvalsh(rho)[0] > 1e-6:
            closed = float(np.real(np.trace(rho @ H @ H)) - np.real(np.trace(rho @ H)) ** 2) - kubo_mori_variance(rho, H)
            quad = ibar_quadrature(rho, H)
            worst_rel = max(worst_rel, abs(quad - closed) / max(abs(closed), 1e-300))
    ok = worst_sandwich >= -1e-9 and worst_rel <= 1e-8
    record(7, ok, f"worst sandwich margin {worst_sandwich:.3e}, worst quadrature relative error {worst_rel:.3e}")
    assert ok


def test_criterion_08_pure_state_qfi():
    rng = np.random.default_rng(8)
    worst_eq = 0.0
    worst_ineq = math.inf
    for i in range(200):
        d = 2 + i % 4
        psi = haar_pure_state(d, rng)
        H = random_hermitian(d, rng)
        if i % 2:
            L = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            G = GkslForm(H, [(L, float(rng.uniform(0.0, 1.0)))])
        else:
            G = hamiltonian_generator(H)
        F = qfi(np.outer(psi, psi.conj()), G)
        moment, norm_bound = pure_state_qfi_identity(psi, G)
        worst_eq = max(worst_eq, abs(F - moment))
        worst_ineq = min(worst_ineq, norm_bound - F)
    ok = worst_eq <= 1e-9 and worst_ineq >= -1e-9
    record(8, ok, f"worst identity error {worst_eq:.3e}, worst norm-bound margin {worst_ineq:.3e}")
    assert ok


def test_criterion_09_fdr_scaling():
    rng = np.random.default_rng(9)
    scales = np.array([0.1, 0.05, 0.025])
    slopes = []
    for d in (2, 3, 2, 3):
        H = random_hermitian(d, rng)
        dH = random_hermitian(d, rng)
        dH /= np.linalg.norm(dH, 2)
        res = [abs(fdr_check(H, s * dH, 1.0)["residual"]) for s in scales]
        slopes.append(float(np.polyfit(np.log(scales), np.log(res), 1)[0]))
    ok = min(slopes) >= 2.7
    record(9, ok, f"log-log slopes {', '.join(f'{s:.3f}' for s in slopes)}")
    assert ok


def test_criterion_10_result4_suite():
    grid = np.linspace(0.0, 2.0, 101)
    bath = ohmic_gamma(0.01, 20.0, 1.0)
    rng = np.random.default_rng(10)
    cases = [(0.5 * SZ, 0.05 * SX, [SX]), (0.5 * SZ, 0.1 * (SX + SZ), [SX])]
    for _ in range(2):
        H = np.diag(np.sort(rng.uniform(0.0, 3.0, 3))).astype(complex)
        dH = random_hermitian(3, rng)
        cases.append((H, 0.05 * dH / np.linalg.norm(dH, 2), [random_hermitian(3, rng)]))
    worst = math.inf
    for H, dH, cp in cases:
        rep, _ = result4_bound(H, H + dH, 1.0, WeakCouplingModel(H, cp, 0.1, bath), grid)
        worst = min(worst, rep.min_margin)
    commuting = []
    for H, dH in ((0.5 * SZ, 0.05 * SZ), (np.diag([0.0, 1.0, 2.5]).astype(complex), np.diag([0.02, -0.01, 0.03]))):
        dH = np.asarray(dH, dtype=complex)
        rep, _ = result4_bound(H, H + dH, 1.0, WeakCouplingModel(H, [random_hermitian(len(H), rng)], 0.1, bath), grid)
        commuting.append(rep.metadata["ibar"])
        worst = min(worst, rep.min_margin)
    ok = worst >= -MARGIN_TOL and max(commuting) <= 1e-12
    record(10, ok, f"worst margin {worst:.3e}, commuting-quench ibar {max(commuting):.3e}")
    assert ok


def test_criterion_11_metric_suite():
    rng = np.random.default_rng(11)
    worst = math.inf
    for i in range(500):
        d = 2 + i % 3
        r, s, w = (random_density_matrix(d, rng, rank=1 + (i + k) % d) for k in range(3))
        ab = bures_angle(r, s)
        worst = min(worst, bures_angle(r, w) + bures_angle(w, s) - ab)
        m = random_projective_measurement(d, rng)
        worst = min(worst, ab - math.acos(min(1.0, bhattacharyya(measure(r, m), measure(s, m)))))
        worst = min(worst, ab - trace_distance(r, s), ab - bures_distance(r, s))
        L = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        G = GkslForm(random_hermitian(d, rng), [(L / np.linalg.norm(L, 2), float(rng.uniform(0.0, 1.0)))])
        cfg = IntegratorConfig(np.array([0.0, 0.01]), 0.01)
        r1 = integrate(G, r, cfg).states[-1]
        s1 = integrate(G, s, cfg).states[-1]
        worst = min(worst, ab - bures_angle(r1, s1, floor=-cfg.positivity_tol))
    ok = worst >= -1e-7
    record(11, ok, f"500 cases, worst slack {worst:.3e}")
    assert ok


def test_criterion_12_numerical_hygiene(fig_scenario, fig_tables, tmp_path):
    t2, t3, _, _ = fig_tables
    h = t2.meta["h_int"]
    t2h = fig2_run(fig_scenario, h_int=h / 2)
    t3h = fig3_run(fig_scenario, h_int=h / 2)
    change = 0.0
    for a, b in ((t2, t2h), (t3, t3h)):
        for key in a.columns:
            change = max(change, float(np.nanmax(np.abs(a[key] - b[key]))))
    for key in ("crossing_exact_qfi", "crossing_corrected"):
        change = max(change, abs(t2.meta[key] - t2h.meta[key]))
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert cli.main(["run", "--out", str(out), "--quiet", "--seed", "3", "--shots", "500"]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    identical = outputs[0] == outputs[1]
    ok = change < 1e-6 and identical
    record(12, ok, f"max change on halving h_int {change:.3e}, byte-identical CSVs: {identical}")
    assert ok
