import math
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from qthermo.errors import DerivativeNoiseWarning, InvalidStateError, SingularPurityError
from qthermo.services.bath import SpectralDensity
from qthermo.services.heom import HeomParams, build_two_qubit
from qthermo.services.metrology import (
    BlochVector,
    bloch_vector,
    gibbs_state,
    qfi_bloch,
    qfi_mixed,
    qsnr,
    qsnr_trajectory,
    reduced_qubit_state,
    steady_qsnr,
    steady_temperature_derivative,
    temperature_derivative,
    thermal_benchmark,
    thermal_benchmark_asymptotic,
    thermal_qfi,
    thermal_reference,
)
from qthermo.services.operators import PAULIS, SIGMA_Z, ket, projector
from qthermo.services.redfield import RedfieldOptions
from qthermo.services.scenario import Scenario


def sech2(x: float) -> float:
    return 1.0 / math.cosh(x) ** 2


def gibbs_qubit_derivative(T: float) -> np.ndarray:
    """∂_T of the qubit Gibbs state: only ⟨σ_z⟩ moves, by sech²(1/2T)/2T²."""
    return 0.5 * sech2(0.5 / T) / (2 * T * T) * SIGMA_Z


# ── Bloch vector ────────────────────────────────────────────────────────────


def test_bloch_vector_of_reference_states():
    np.testing.assert_allclose(bloch_vector(projector(ket(1, 1))).as_array(), [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(bloch_vector(np.eye(2) / 2).as_array(), [0, 0, 0], atol=1e-15)
    gibbs = gibbs_state(0.5 * SIGMA_Z, 0.2)
    np.testing.assert_allclose(bloch_vector(gibbs).as_array(), [0, 0, -math.tanh(2.5)], atol=1e-12)
    assert bloch_vector(gibbs).sz == pytest.approx(-0.98661, abs=1e-5)


def test_bloch_vector_needs_qubit():
    with pytest.raises(InvalidStateError):
        bloch_vector(np.eye(4) / 4)


# ── QFI ─────────────────────────────────────────────────────────────────────


def test_qfi_bloch_radial_algebra():
    d = 0.3
    assert qfi_bloch(BlochVector(0, 0, 0.5), BlochVector(0, 0, d)) == pytest.approx(4 / 3 * d * d, rel=1e-12)


def test_qfi_bloch_pure_state_branch():
    assert qfi_bloch(BlochVector(1, 0, 0), BlochVector(0, 0.7, 0)) == pytest.approx(0.49, rel=1e-12)
    with pytest.raises(SingularPurityError):
        qfi_bloch(BlochVector(1, 0, 0), BlochVector(0.1, 0, 0))


def test_qfi_bloch_of_gibbs_qubit_gives_benchmark():
    T = 0.2
    s = bloch_vector(gibbs_state(0.5 * SIGMA_Z, T))
    ds = bloch_vector(gibbs_qubit_derivative(T))
    assert qsnr(T, qfi_bloch(s, ds)) == pytest.approx(thermal_benchmark(T), rel=1e-10)


def test_qfi_forms_agree_on_random_qubits():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        direction = rng.normal(size=3)
        s = direction / np.linalg.norm(direction) * rng.uniform(0.0, 0.99)
        ds = rng.normal(size=3)
        rho = 0.5 * (np.eye(2) + sum(c * p for c, p in zip(s, PAULIS)))
        drho = 0.5 * sum(c * p for c, p in zip(ds, PAULIS))
        expected = qfi_bloch(BlochVector.from_array(s), BlochVector.from_array(ds))
        assert qfi_mixed(rho, drho) == pytest.approx(expected, rel=1e-8)


def test_qfi_mixed_zero_derivative():
    assert qfi_mixed(gibbs_state(0.5 * SIGMA_Z, 0.3), np.zeros((2, 2))) == 0.0


def test_qfi_mixed_agrees_with_bloch_route():
    T = 0.35
    rho, drho = gibbs_state(0.5 * SIGMA_Z, T), gibbs_qubit_derivative(T)
    expected = qfi_bloch(bloch_vector(rho), bloch_vector(drho))
    assert qfi_mixed(rho, drho) == pytest.approx(expected, rel=1e-8)


def test_qfi_mixed_of_two_qubit_gibbs_state():
    T = 0.3
    h = build_two_qubit(1.0, 0.2, np.eye(4) / 4).h_base
    rho = gibbs_state(h, T)
    mean = np.trace(rho @ h).real
    drho = rho @ (h - mean * np.eye(4)) / T**2
    assert qfi_mixed(rho, drho) == pytest.approx(thermal_qfi(h, T), rel=1e-10)


def test_qfi_mixed_rejects_non_hermitian_derivative():
    with pytest.raises(InvalidStateError):
        qfi_mixed(np.eye(2) / 2, np.array([[0, 1], [0, 0]]))


def test_qfi_mixed_rejects_derivative_with_trace():
    with pytest.raises(InvalidStateError, match="traceless"):
        qfi_mixed(np.eye(2) / 2, 0.1 * np.eye(2))
    # Hermitian and traceless passes
    assert qfi_mixed(np.eye(2) / 2, 0.1 * SIGMA_Z) == pytest.approx(0.04, rel=1e-12)


# ── QSNR and the thermal benchmark ──────────────────────────────────────────


def test_qsnr_values():
    assert qsnr(0.2, 0.0) == 0.0
    assert qsnr(1.0, 2.5) == 2.5
    assert qsnr(0.2, 4.1553) == pytest.approx(0.16621, abs=1e-5)
    with pytest.raises(ValueError):
        qsnr(0.0, 1.0)
    with pytest.raises(ValueError):
        qsnr(0.2, -1.0)


def test_thermal_benchmark_at_reference_temperature():
    assert thermal_benchmark(0.2) == pytest.approx(0.166206, abs=1e-5)
    assert thermal_benchmark(0.2) == pytest.approx(6.25 * sech2(2.5), rel=1e-12)


def test_thermal_benchmark_grid():
    temperatures = np.linspace(0.05, 1.0, 100)
    values = np.array([thermal_benchmark(T) for T in temperatures])
    expected = (0.5 / temperatures) ** 2 / np.cosh(0.5 / temperatures) ** 2
    np.testing.assert_allclose(values, expected, rtol=1e-10)


def test_thermal_benchmark_limits():
    assert thermal_benchmark(1e3) < 1e-6
    low = thermal_benchmark(0.05)
    assert low == pytest.approx(8.24e-7, rel=1e-3)
    assert thermal_benchmark_asymptotic(0.05) == pytest.approx(low, rel=1e-3)
    # no overflow deep in the frozen regime
    assert 0.0 <= thermal_benchmark(1e-4) < 1e-300


def test_thermal_qfi_generalizes_benchmark():
    T = 0.25
    assert qsnr(T, thermal_qfi(0.5 * SIGMA_Z, T)) == pytest.approx(thermal_benchmark(T), rel=1e-10)


def test_thermal_reference_for_two_qubits():
    model = build_two_qubit(1.0, 0.0, np.eye(4) / 4)
    # independent qubits: the Fisher information is additive
    assert thermal_reference(model, 0.3) == pytest.approx(2 * thermal_benchmark(0.3), rel=1e-10)


def test_reduced_qubit_state_of_product():
    a, b = projector(ket(1, 1)), projector(ket(1, 0))
    rho = np.kron(a, b)
    np.testing.assert_allclose(reduced_qubit_state(rho, 0), a, atol=1e-15)
    np.testing.assert_allclose(reduced_qubit_state(rho, 1), b, atol=1e-15)
    with pytest.raises(ValueError):
        reduced_qubit_state(rho, 2)


# ── Temperature derivative ──────────────────────────────────────────────────


def test_derivative_vanishes_without_coupling(scenario_factory):
    scenario = scenario_factory(0.0, 0.1, HeomParams(depth=1))
    derivative = temperature_derivative(scenario, 0.2, np.linspace(0.0, 10.0, 11))
    assert np.max(np.abs(derivative.drho)) == 0.0
    assert derivative.delta == pytest.approx(2e-4)


def test_derivative_argument_checks(scenario_factory):
    scenario = scenario_factory(0.0, 0.1, HeomParams(depth=1))
    with pytest.raises(ValueError):
        temperature_derivative(scenario, 0.2, [0.0, 1.0], delta=0.3)
    with pytest.raises(ValueError):
        temperature_derivative(scenario, -0.2, [0.0, 1.0])


def test_steady_derivative_matches_gibbs(brme_scenario):
    T = 0.2
    rho, drho, settled = steady_temperature_derivative(brme_scenario, T)
    assert math.isnan(settled)
    dsz = np.real(np.trace(SIGMA_Z @ drho))
    assert dsz == pytest.approx(12.5 * sech2(2.5), rel=1e-2)
    assert dsz == pytest.approx(0.33241, rel=1e-2)
    np.testing.assert_allclose(rho, gibbs_state(0.5 * SIGMA_Z, T), atol=1e-6)


def test_richardson_improves_the_derivative(brme_scenario):
    T, delta = 0.2, 0.02
    exact = 12.5 * sech2(2.5)
    _, plain, _ = steady_temperature_derivative(brme_scenario, T, delta)
    _, halved, _ = steady_temperature_derivative(brme_scenario, T, delta / 2)
    _, refined, _ = steady_temperature_derivative(brme_scenario, T, delta, richardson=True)
    plain_error = abs(np.real(np.trace(SIGMA_Z @ plain)) - exact)
    halved_error = abs(np.real(np.trace(SIGMA_Z @ halved)) - exact)
    refined_error = abs(np.real(np.trace(SIGMA_Z @ refined)) - exact)
    # second order: halving δ cuts the error about fourfold
    assert plain_error >= 3 * halved_error
    assert refined_error * 3 <= halved_error


def test_derivative_with_executor_matches_serial(heom_scenario):
    t_grid = np.linspace(0.0, 10.0, 11)
    serial = temperature_derivative(heom_scenario, 0.2, t_grid)
    with ThreadPoolExecutor(max_workers=2) as pool:
        pooled = temperature_derivative(heom_scenario, 0.2, t_grid, executor=pool)
    np.testing.assert_array_equal(serial.drho, pooled.drho)
    assert serial.n_matsubara == pooled.n_matsubara == 1


def test_heom_steady_derivative_uses_direct_solve(heom_scenario):
    with warnings.catch_warnings():
        warnings.simplefilter("error", DerivativeNoiseWarning)
        rho, drho, settled = steady_temperature_derivative(heom_scenario, 0.2)
    assert math.isinf(settled)
    assert np.trace(rho) == pytest.approx(1.0, abs=1e-12)
    assert abs(np.trace(drho)) < 1e-8
    # a hotter bath populates the excited level
    assert np.real(np.trace(SIGMA_Z @ drho)) > 0


# ── QSNR series ─────────────────────────────────────────────────────────────


def test_brme_trajectory_relaxes_to_benchmark(brme_scenario):
    series = qsnr_trajectory(brme_scenario, 0.2, np.linspace(0.0, 600.0, 61))
    assert series.points[0].qsnr == pytest.approx(0.0, abs=1e-12)
    assert series.final.qsnr == pytest.approx(thermal_benchmark(0.2), abs=1e-3)
    assert series.best.qsnr >= series.final.qsnr
    assert len(series.qsnr_values()) == 61


def test_brme_steady_qsnr_is_coupling_independent(scenario_factory):
    values = [
        steady_qsnr(scenario_factory(lam, 0.1, RedfieldOptions()), 0.2).qsnr
        for lam in (0.01, 0.05, 0.1)
    ]
    np.testing.assert_allclose(values, thermal_benchmark(0.2), atol=1e-4)


@pytest.mark.slow
def test_heom_transient_exceeds_final_value(scenario_factory):
    scenario = scenario_factory(0.01, 0.05, HeomParams(depth=4))
    series = qsnr_trajectory(scenario, 0.2, np.linspace(0.0, 400.0, 401))
    assert series.best.qsnr > series.final.qsnr


@pytest.mark.slow
def test_weak_coupling_has_larger_optimum(scenario_factory):
    t_grid = np.linspace(0.0, 400.0, 401)
    weak = qsnr_trajectory(scenario_factory(0.01, 0.05, HeomParams(depth=4)), 0.2, t_grid)
    strong = qsnr_trajectory(scenario_factory(0.1, 0.05, HeomParams(depth=6)), 0.2, t_grid)
    assert weak.best.qsnr > strong.best.qsnr


@pytest.mark.slow
def test_strong_coupling_enhances_low_temperature_qsnr(scenario_factory):
    values = [steady_qsnr(scenario_factory(lam, 0.1, HeomParams(depth=6)), 0.05).qsnr for lam in (0.05, 0.1, 0.2)]
    assert values[-1] > thermal_benchmark(0.05)
    assert values[0] < values[1] < values[2]


@pytest.mark.slow
@pytest.mark.parametrize("T", [0.15, 0.2, 0.3, 0.5])
def test_weak_coupling_steady_qsnr_matches_benchmark(scenario_factory, T):
    point = steady_qsnr(scenario_factory(1e-3, 0.1, HeomParams(depth=3)), T)
    assert point.qsnr == pytest.approx(thermal_benchmark(T), rel=0.05)


def two_qubit_scenario(lam: float, g: float) -> Scenario:
    plus = projector(ket(1, 1))
    return Scenario(
        model=build_two_qubit(1.0, g, np.kron(plus, plus)),
        spectral_density=SpectralDensity(lam, 0.1),
        solver=HeomParams(depth=4 if lam < 0.05 else 6),
    )


@pytest.mark.slow
def test_two_qubit_qsnr_prefers_weak_coupling_and_small_exchange():
    t_grid = np.linspace(0.0, 300.0, 301)
    best = {
        (lam, g): qsnr_trajectory(two_qubit_scenario(lam, g), 0.2, t_grid).best.qsnr
        for lam, g in [(0.01, 0.001), (0.1, 0.001), (0.01, 0.2)]
    }
    assert best[(0.01, 0.001)] > best[(0.1, 0.001)]
    assert best[(0.01, 0.001)] > best[(0.01, 0.2)]
