import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from perturbed_qsl.errors import NotStationary
from perturbed_qsl.gksl_dynamics import IntegratorConfig, integrate
from perturbed_qsl.scenarios import (
    SX,
    SZ,
    Scenario,
    default_grid,
    fig2_run,
    fig3_run,
    quench_scenario,
    random_instance,
    two_qubit_dephasing,
)
from perturbed_qsl.weak_coupling import build_secular_me, expand, flat_bath, ohmic_gamma

BATH = ohmic_gamma(0.01, 20.0, 1.0)


def test_default_epsilon():
    sc = two_qubit_dephasing()
    fo = expand(sc.model, sc.V, sc.v)
    assert fo.expansion.epsilon_upper == pytest.approx(0.004, rel=1e-9)
    assert sc.threshold == 2.0 and len(sc.measurement.effects) == 4


def test_closed_system_variant():
    sc = two_qubit_dephasing(lam=0.0)
    L = build_secular_me(sc.model).generator
    assert np.max(np.abs(L.apply(sc.rho0) + 1j * (sc.model.H @ sc.rho0 - sc.rho0 @ sc.model.H))) < 1e-14


@pytest.mark.parametrize("lam, gamma0, h", [(0.1, 0.1, 1.0), (0.3, 0.5, 2.0)])
def test_pure_dephasing_coherence(lam, gamma0, h):
    sc = two_qubit_dephasing(h=h, lam=lam, gamma0=gamma0, v=0.0)
    L = build_secular_me(sc.model).generator
    times = np.linspace(0, 2, 21)
    traj = integrate(L, sc.rho0, IntegratorConfig(times, 0.005))
    # <00|rho|11> picks up exp(-2iht) from H and exp(-4 lam^2 gamma t) from the dissipator
    expected = 0.5 * np.exp(-2j * h * times - 4 * lam ** 2 * gamma0 * times)
    assert_allclose(traj.states[:, 0, 3], expected, atol=1e-10)


def test_scenario_dimension_check():
    with pytest.raises(ValueError):
        Scenario("bad", V=np.eye(2), rho0=np.eye(3) / 3)


def test_fig2_small_t_and_columns():
    sc = two_qubit_dephasing()
    tab = fig2_run(sc, grid=np.linspace(0, 0.5, 101))
    assert set(tab.columns) == {"t", "measured_speed", "exact_avg_sqrt_qfi", "corrected_lower_bound", "threshold"}
    assert math.isnan(tab["measured_speed"][0])
    assert tab["exact_avg_sqrt_qfi"][1] == pytest.approx(2.0, abs=0.01)
    assert tab["measured_speed"][1] == pytest.approx(2.0, abs=0.01)
    assert_allclose(tab["threshold"], math.sqrt(2))


def test_fig2_shot_noise_is_seeded():
    sc = two_qubit_dephasing()
    g = np.linspace(0, 0.5, 21)
    a = fig2_run(sc, grid=g, shots=200, seed=4)
    b = fig2_run(sc, grid=g, shots=200, seed=4)
    assert_allclose(a["measured_speed"], b["measured_speed"])


def test_fig3_starts_at_zero():
    tab = fig3_run(two_qubit_dephasing(), grid=np.linspace(0, 0.5, 51))
    assert tab["delta1"][0] == 0.0 and tab["delta2"][0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(tab["delta_est"] >= tab["delta1_plus_delta2"])


def test_quench_static_and_classical():
    H = 0.5 * SZ
    sc = quench_scenario(H, np.zeros((2, 2)), 1.0, [SX], 0.1, BATH)
    assert sc.v == 0.0 and not sc.extras["quantum_driving"]
    assert_allclose(sc.extras["H_prime"], H)
    sc = quench_scenario(H, 0.05 * SZ, 1.0, [SX], 0.1, BATH)
    assert sc.extras["classical_driving"]


def test_quench_sigma_x_is_quantum_driving():
    sc = quench_scenario(0.5 * SZ, 0.05 * SX, 1.0, [SZ], 0.1, BATH)
    assert sc.extras["quantum_driving"] and sc.extras["quantum_driving_ratio"] > 10


def test_quench_needs_thermal_bath():
    with pytest.raises(NotStationary):
        quench_scenario(0.5 * SZ, 0.05 * SX, 1.0, [SX], 0.1, flat_bath(0.1))


def test_random_instance_deterministic():
    a, b = random_instance(3, 1), random_instance(3, 1)
    assert_allclose(a.generator.superoperator(), b.generator.superoperator())
    assert_allclose(a.rho0, b.rho0)
    assert a.v == b.v
    assert all(rate >= 0 for _, rate in a.generator.lindblad_terms)
    assert np.linalg.norm(a.extras["observable"], 2) <= 1 + 1e-12
    with pytest.raises(ValueError):
        random_instance(9, 0)


def test_default_grid():
    g = default_grid()
    assert g[0] == 0.0 and g[-1] == 2.0 and len(g) == 400
