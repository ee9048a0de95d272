import math
import pickle

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse

from qthermo.errors import ConfigError, HierarchyTooLargeError, InvalidStateError, SteadyStateError
from qthermo.services.bath import SpectralDensity, default_n_matsubara, matsubara_expansion
from qthermo.services.control import ControlSequence
from qthermo.services.heom import (
    HeomParams,
    HeomSolver,
    HierarchyIndex,
    SystemModel,
    build_single_qubit,
    build_two_qubit,
    commutator,
    conserved_operator_count,
    convergence_sweep,
    enumerate_hierarchy,
    heom_generator,
    hierarchy_size,
    propagate,
    steady_state,
)
from qthermo.services.metrology import bloch_vector, gibbs_state, reduced_qubit_state
from qthermo.services.operators import SIGMA_X, SIGMA_Z, is_hermitian, ket, projector, trace_norm_distance


def superoperator(fn, d: int) -> np.ndarray:
    """Matrix of ρ ↦ fn(ρ) on row-major vec(ρ), built from matrix units."""
    matrix = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[i, j] = 1.0
            matrix[:, i * d + j] = fn(unit).reshape(-1)
    return matrix


def free_bath(T: float = 0.2, n_matsubara: int = 1):
    return matsubara_expansion(SpectralDensity(0.0, 0.1), T, n_matsubara)


# ── System models ───────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    "vector, expected",
    [((1, 1), (1, 0, 0)), ((1, 0), (0, 0, 1))],
)
def test_single_qubit_initial_bloch(vector, expected):
    model = build_single_qubit(1.0, projector(ket(*vector)))
    np.testing.assert_allclose(bloch_vector(model.initial_state).as_array(), expected, atol=1e-12)


def test_single_qubit_mixed_initial_state():
    model = build_single_qubit(1.0, np.eye(2) / 2)
    np.testing.assert_allclose(bloch_vector(model.initial_state).as_array(), 0.0, atol=1e-15)
    np.testing.assert_allclose(model.h_base, 0.5 * SIGMA_Z)
    np.testing.assert_allclose(model.coupling_op, SIGMA_X)


def test_single_qubit_rejects_unphysical_state():
    with pytest.raises(InvalidStateError):
        build_single_qubit(1.0, np.diag([1.0, 1.0]))
    with pytest.raises(InvalidStateError):
        build_single_qubit(1.0, np.diag([1.5, -0.5]))


def test_two_qubit_spectrum_without_exchange():
    model = build_two_qubit(1.0, 0.0, np.kron(projector(ket(0, 1)), projector(ket(0, 1))))
    np.testing.assert_allclose(np.linalg.eigvalsh(model.h_base), [-1, 0, 0, 1], atol=1e-12)


def test_two_qubit_exchange_splits_single_excitation_sector():
    model = build_two_qubit(1.0, 0.2, np.eye(4) / 4)
    np.testing.assert_allclose(np.linalg.eigvalsh(model.h_base), [-1, -0.2, 0.2, 1], atol=1e-12)


def test_two_qubit_product_state_bloch_vectors():
    plus = projector(ket(1, 1))
    model = build_two_qubit(1.0, 0.001, np.kron(plus, plus))
    for qubit in (0, 1):
        s = bloch_vector(reduced_qubit_state(model.initial_state, qubit))
        np.testing.assert_allclose(s.as_array(), [1, 0, 0], atol=1e-12)


def test_two_qubit_rejects_qubit_state():
    with pytest.raises(InvalidStateError):
        build_two_qubit(1.0, 0.1, np.eye(2) / 2)


# ── Hierarchy ───────────────────────────────────────────────────────────────


def test_hierarchy_sizes():
    assert len(enumerate_hierarchy(2, 2)) == 6 == hierarchy_size(2, 2)
    assert enumerate_hierarchy(1, 0) == [HierarchyIndex((0,))]


def test_first_tier_is_unit_vectors():
    index = enumerate_hierarchy(3, 1)
    assert index[0] == HierarchyIndex((0, 0, 0))
    assert {i.counts for i in index[1:]} == {(1, 0, 0), (0, 1, 0), (0, 0, 1)}


def test_hierarchy_is_graded_and_unique():
    index = enumerate_hierarchy(3, 4)
    depths = [i.depth for i in index]
    assert depths == sorted(depths)
    assert len(set(index)) == len(index) == math.comb(7, 4)


def test_hierarchy_cap():
    with pytest.raises(HierarchyTooLargeError):
        enumerate_hierarchy(6, 6, cap=100)


def test_hierarchy_cap_from_settings(monkeypatch):
    monkeypatch.setenv("QTHERMO_HIERARCHY_CAP", "10")
    with pytest.raises(HierarchyTooLargeError):
        enumerate_hierarchy(2, 4)


# ── Generator ───────────────────────────────────────────────────────────────


def test_generator_without_coupling_is_free_evolution(qubit):
    params = HeomParams(depth=2)
    generator = heom_generator(qubit, free_bath(), params).toarray()
    d2 = 4
    expected = superoperator(lambda r: -1j * (qubit.h_base @ r - r @ qubit.h_base), 2)
    np.testing.assert_allclose(generator[:d2, :d2], expected, atol=1e-14)
    assert np.all(generator[:d2, d2:] == 0)
    assert np.all(generator[d2:, :d2] == 0)


@pytest.mark.parametrize("scaling", [False, True])
def test_generator_matches_hand_assembly(qubit, scaling):
    bath = matsubara_expansion(SpectralDensity(0.1, 0.1), 0.2, 0)
    (c, nu), delta = bath.terms[0], bath.terminator_strength
    h, s = qubit.h_base, qubit.coupling_op

    def comm(a, r):
        return a @ r - r @ a

    liouville = superoperator(lambda r: -1j * comm(h, r), 2)
    terminator = superoperator(lambda r: -delta * comm(s, comm(s, r)), 2)
    phi = superoperator(lambda r: -1j * comm(s, r), 2)
    theta = superoperator(lambda r: -1j * (c.real * comm(s, r) + 1j * c.imag * (s @ r + r @ s)), 2)
    up, down = (math.sqrt(abs(c)), 1.0 / math.sqrt(abs(c))) if scaling else (1.0, 1.0)

    expected = np.zeros((8, 8), dtype=complex)
    expected[:4, :4] = liouville + terminator
    expected[:4, 4:] = up * phi
    expected[4:, :4] = down * theta
    expected[4:, 4:] = liouville + terminator - nu * np.eye(4)

    generator = heom_generator(qubit, bath, HeomParams(depth=1, scaling=scaling)).toarray()
    np.testing.assert_allclose(generator, expected, atol=1e-14)


def test_generator_on_random_ados_matches_explicit_equations(qubit):
    bath = matsubara_expansion(SpectralDensity(0.05, 0.2), 0.3, 1)
    params = HeomParams(depth=2, scaling=False, use_terminator=False)
    solver = HeomSolver(qubit, bath, params)
    rng = np.random.default_rng(7)
    raw = rng.normal(size=(solver.n_ados, 2, 2)) + 1j * rng.normal(size=(solver.n_ados, 2, 2))
    ados = raw + np.conj(np.swapaxes(raw, 1, 2))

    result = (solver.generator() @ ados.reshape(-1)).reshape(solver.n_ados, 2, 2)
    h, s = qubit.h_base, qubit.coupling_op
    for pos, idx in enumerate(solver.index):
        rho = ados[pos]
        expected = -1j * (h @ rho - rho @ h)
        expected -= sum(n * nu for n, nu in zip(idx.counts, bath.rates)) * rho
        for k, (c, _) in enumerate(bath.terms):
            upper = solver.index_map.get(idx.shifted(k, +1))
            if upper is not None:
                expected += -1j * (s @ ados[upper] - ados[upper] @ s)
            if idx.counts[k] > 0:
                lower = ados[solver.index_map[idx.shifted(k, -1)]]
                expected += idx.counts[k] * -1j * (
                    c.real * (s @ lower - lower @ s) + 1j * c.imag * (s @ lower + lower @ s)
                )
        np.testing.assert_allclose(result[pos], expected, atol=1e-12)


def test_generator_keeps_hermitian_stacks_hermitian(qubit):
    bath = matsubara_expansion(SpectralDensity(0.1, 0.1), 0.2, 2)
    solver = HeomSolver(qubit, bath, HeomParams(depth=2))
    rng = np.random.default_rng(3)
    raw = rng.normal(size=(solver.n_ados, 2, 2)) + 1j * rng.normal(size=(solver.n_ados, 2, 2))
    ados = raw + np.conj(np.swapaxes(raw, 1, 2))
    result = (solver.generator() @ ados.reshape(-1)).reshape(solver.n_ados, 2, 2)
    for block in result:
        assert is_hermitian(block, 1e-12)


def test_commutator_superoperator_convention():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    np.testing.assert_allclose((commutator(a) @ rho.reshape(-1)).reshape(3, 3), a @ rho - rho @ a, atol=1e-12)


def test_negative_terminator_is_skipped(qubit, caplog):
    # ω_c just above the first Matsubara pole makes the omitted tail negative
    bath = matsubara_expansion(SpectralDensity(0.05, 1.3), 0.2, 0)
    assert bath.terminator_strength < 0
    with_term = heom_generator(qubit, bath, HeomParams(depth=1, use_terminator=True))
    without = heom_generator(qubit, bath, HeomParams(depth=1, use_terminator=False))
    assert abs(with_term - without).max() == 0
    assert "terminator skipped" in caplog.text


def test_terminator_acts_on_every_tier(qubit):
    bath = matsubara_expansion(SpectralDensity(0.05, 0.1), 0.2, 2)
    assert bath.terminator_strength > 0
    with_term = HeomSolver(qubit, bath, HeomParams(depth=2, use_terminator=True))
    without = heom_generator(qubit, bath, HeomParams(depth=2, use_terminator=False))
    comm_s = commutator(qubit.coupling_op)
    expected = np.kron(np.eye(with_term.n_ados), -bath.terminator_strength * (comm_s @ comm_s).toarray())
    difference = scipy.sparse.csr_matrix(with_term.generator() - without).toarray()
    np.testing.assert_allclose(difference, expected, atol=1e-12)


def test_params_validation():
    with pytest.raises(ConfigError):
        HeomParams(depth=0)
    with pytest.raises(ConfigError):
        HeomParams(integrator="euler")
    with pytest.raises(ConfigError):
        HeomParams(rtol=0.0)


# ── Propagation ─────────────────────────────────────────────────────────────


def test_free_precession_by_pi(qubit, tight_heom):
    trajectory = propagate(qubit, free_bath(), tight_heom, np.linspace(0.0, math.pi, 51))
    assert trajectory.observables["sx"][-1] == pytest.approx(-1.0, abs=1e-7)
    assert trajectory.observables["sy"][-1] == pytest.approx(0.0, abs=1e-7)


def test_zero_coupling_matches_closed_evolution(qubit, tight_heom):
    t_grid = np.linspace(0.0, 20.0, 81)
    trajectory = propagate(qubit, free_bath(), tight_heom, t_grid)
    for t, rho in zip(t_grid, trajectory.states):
        u = scipy.linalg.expm(-1j * qubit.h_base * t)
        assert trace_norm_distance(rho, u @ qubit.initial_state @ u.conj().T) < 1e-6


def test_propagation_stays_hermitian_with_unit_trace(qubit):
    bath = matsubara_expansion(SpectralDensity(0.05, 0.1), 0.2, 1)
    trajectory = propagate(qubit, bath, HeomParams(depth=3), np.linspace(0.0, 30.0, 61))
    for rho in trajectory.states:
        assert is_hermitian(rho, 1e-7)
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-7)
    assert trajectory.final_state is not None
    np.testing.assert_allclose(trajectory.final_state.rho, trajectory.states[-1], atol=1e-12)


def test_fixed_step_agrees_with_adaptive(qubit):
    bath = matsubara_expansion(SpectralDensity(0.02, 0.1), 0.2, 1)
    t_grid = np.linspace(0.0, 10.0, 21)
    adaptive = propagate(qubit, bath, HeomParams(depth=3, rtol=1e-10, atol=1e-12), t_grid)
    fixed = propagate(qubit, bath, HeomParams(depth=3, integrator="fixed_rk4", dt=0.01), t_grid)
    np.testing.assert_allclose(fixed.states, adaptive.states, atol=1e-6)


def test_fixed_step_is_bitwise_reproducible(qubit):
    bath = matsubara_expansion(SpectralDensity(0.02, 0.1), 0.2, 1)
    params = HeomParams(depth=2, integrator="fixed_rk4", dt=0.05)
    t_grid = np.linspace(0.0, 5.0, 11)
    first = propagate(qubit, bath, params, t_grid).states
    second = propagate(qubit, bath, params, t_grid).states
    assert np.array_equal(first, second)


def test_zero_control_matches_uncontrolled(qubit):
    bath = matsubara_expansion(SpectralDensity(0.02, 0.1), 0.2, 1)
    params = HeomParams(depth=2, rtol=1e-10, atol=1e-12)
    t_grid = np.linspace(0.0, 8.0, 17)
    controlled = qubit.with_control(ControlSequence.zeros(4, 8.0))
    np.testing.assert_allclose(
        propagate(controlled, bath, params, t_grid).states,
        propagate(qubit, bath, params, t_grid).states,
        atol=1e-8,
    )


def test_control_segment_drives_rotation(qubit, tight_heom):
    # D_z = 1 on [0, π) doubles the precession rate; the second segment is bare
    amplitudes = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    model = qubit.with_control(ControlSequence(amplitudes, 2 * math.pi))
    trajectory = propagate(model, free_bath(), tight_heom, np.array([0.0, math.pi / 2, math.pi, 2 * math.pi]))
    np.testing.assert_allclose(trajectory.observables["sx"], [1.0, -1.0, 1.0, -1.0], atol=1e-7)


@pytest.mark.parametrize("grid", [[0.5, 1.0], [0.0, 1.0, 1.0], []])
def test_propagate_rejects_bad_grids(qubit, grid):
    with pytest.raises(ConfigError):
        propagate(qubit, free_bath(), HeomParams(depth=1), np.array(grid))


def spin_one_model() -> SystemModel:
    jx = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / math.sqrt(2)
    jy = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / math.sqrt(2)
    jz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return SystemModel(
        dim=3,
        h_base=jz,
        coupling_op=jx,
        initial_state=projector(ket(1, 1, 1)),
        control_ops=(jx, jy, jz),
    )


def test_qutrit_propagation():
    model = spin_one_model()
    bath = matsubara_expansion(SpectralDensity(0.02, 0.1), 0.2, 1)
    trajectory = propagate(model, bath, HeomParams(depth=2), np.linspace(0.0, 60.0, 61))
    assert trajectory.observables == {}
    assert trajectory.states.shape == (61, 3, 3)
    for rho in trajectory.states:
        assert is_hermitian(rho, 1e-7)
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-7)
    # ⟨H⟩ drifts toward the ground level
    energy = trajectory.expect(model.h_base)
    assert energy[0] == pytest.approx(0.0, abs=1e-12)
    assert energy[-1] < 0


def test_qutrit_steady_state_and_sweep():
    model = spin_one_model()
    assert conserved_operator_count(model) == 1
    result = steady_state(model, matsubara_expansion(SpectralDensity(0.02, 0.1), 0.2, 1), HeomParams(depth=2))
    assert math.isinf(result.time)
    assert np.trace(result.rho) == pytest.approx(1.0, abs=1e-12)
    report = convergence_sweep(
        model, SpectralDensity(0.0, 0.1), 0.2, HeomParams(depth=1), [1, 2], [0, 1], np.linspace(0.0, 5.0, 11)
    )
    assert report.converged


# ── Steady state ────────────────────────────────────────────────────────────


def test_steady_state_fails_without_dissipation(qubit):
    with pytest.raises(SteadyStateError) as info:
        steady_state(qubit, free_bath(), HeomParams(depth=1), method="propagate", probe_window=10.0, t_max=40.0)
    assert info.value.residual > 0.1
    assert info.value.time == pytest.approx(40.0)


def test_steady_state_rejects_controlled_model(qubit):
    model = qubit.with_control(ControlSequence.zeros(2, 10.0))
    with pytest.raises(ConfigError):
        steady_state(model, free_bath(), HeomParams(depth=1))


def test_direct_steady_state_needs_dissipation(qubit):
    with pytest.raises(SteadyStateError) as info:
        steady_state(qubit, free_bath(), HeomParams(depth=1))
    assert math.isinf(info.value.time)


def test_direct_solve_agrees_with_detector(qubit):
    bath = matsubara_expansion(SpectralDensity(0.05, 0.5), 0.3, 1)
    params = HeomParams(depth=3, rtol=1e-10, atol=1e-12)
    direct = steady_state(qubit, bath, params)
    detected = steady_state(qubit, bath, params, method="propagate", tolerance=1e-9, probe_window=20.0, t_max=3000.0)
    assert math.isinf(direct.time)
    assert detected.time < 3000.0
    assert np.trace(direct.rho) == pytest.approx(1.0, abs=1e-12)
    assert is_hermitian(direct.rho)
    assert trace_norm_distance(direct.rho, detected.rho) < 1e-6


def test_conserved_operators(qubit):
    assert conserved_operator_count(qubit) == 1
    # collective coupling leaves the singlet alone
    assert conserved_operator_count(build_two_qubit(1.0, 0.05, np.eye(4) / 4)) > 1


def test_common_bath_pair_falls_back_to_detector():
    model = build_two_qubit(1.0, 0.05, np.eye(4) / 4)
    bath = matsubara_expansion(SpectralDensity(0.05, 0.5), 0.3, 1)
    result = steady_state(model, bath, HeomParams(depth=2), tolerance=1e-6, t_max=5000.0)
    assert math.isfinite(result.time)
    assert np.trace(result.rho) == pytest.approx(1.0, abs=1e-8)
    assert np.min(np.linalg.eigvalsh(result.rho)) > -1e-6


def test_steady_state_error_survives_pickling():
    error = SteadyStateError("no steady state", residual=2.5e-3, time=400.0)
    restored = pickle.loads(pickle.dumps(error))
    assert type(restored) is SteadyStateError
    assert str(restored) == "no steady state"
    assert (restored.residual, restored.time) == (2.5e-3, 400.0)


def test_unknown_steady_method_is_rejected(qubit):
    with pytest.raises(ConfigError):
        steady_state(qubit, matsubara_expansion(SpectralDensity(0.05, 0.5), 0.3, 1), HeomParams(depth=1), method="guess")


@pytest.mark.slow
@pytest.mark.parametrize("T", [0.15, 0.2, 0.3, 0.5])
def test_weak_coupling_thermalizes(qubit, T):
    sd = SpectralDensity(1e-3, 0.1)
    result = steady_state(qubit, matsubara_expansion(sd, T, default_n_matsubara(sd, T)), HeomParams(depth=3))
    assert np.real(np.trace(SIGMA_Z @ result.rho)) == pytest.approx(-math.tanh(0.5 / T), abs=0.01)
    assert trace_norm_distance(result.rho, gibbs_state(qubit.h_base, T)) < 0.01


@pytest.mark.slow
def test_strong_coupling_deviates_from_gibbs(qubit):
    bath = matsubara_expansion(SpectralDensity(0.1, 0.1), 0.2, 2)
    result = steady_state(qubit, bath, HeomParams(depth=6))
    assert abs(np.real(np.trace(SIGMA_Z @ result.rho)) + math.tanh(2.5)) > 0.01


# ── Convergence ─────────────────────────────────────────────────────────────


def test_convergence_sweep_without_coupling(qubit):
    report = convergence_sweep(
        qubit, SpectralDensity(0.0, 0.1), 0.2, HeomParams(depth=1), [1, 2], [0, 1], np.linspace(0.0, 5.0, 11)
    )
    deviations = [r.deviation for r in report.rows if r.deviation is not None]
    assert deviations and all(d < 1e-6 for d in deviations)
    assert report.converged
    assert report.first_converged("depth").depth == 2


def test_convergence_sweep_layout(qubit):
    report = convergence_sweep(
        qubit, SpectralDensity(0.01, 0.1), 0.2, HeomParams(depth=1), [1, 2], [0, 1], np.linspace(0.0, 5.0, 11)
    )
    assert [(r.axis, r.depth, r.n_matsubara) for r in report.rows] == [
        ("depth", 1, 1),
        ("depth", 2, 1),
        ("n_matsubara", 2, 0),
        ("n_matsubara", 2, 1),
    ]
    assert report.rows[0].deviation is None and not report.rows[0].converged


def test_convergence_sweep_needs_axes(qubit):
    with pytest.raises(ConfigError):
        convergence_sweep(qubit, SpectralDensity(0.01, 0.1), 0.2, HeomParams(), [], [1], [0.0, 1.0])


def test_convergence_sweep_tracks_given_observable(qubit):
    args = (qubit, SpectralDensity(0.01, 0.1), 0.2, HeomParams(depth=1), [1, 2], [1], np.linspace(0.0, 5.0, 11))
    along_z = convergence_sweep(*args)
    along_x = convergence_sweep(*args, observable=SIGMA_X)
    assert along_x.rows[1].deviation != along_z.rows[1].deviation
    with pytest.raises(InvalidStateError):
        convergence_sweep(*args, observable=np.array([[0, 1], [0, 0]]))


@pytest.mark.slow
def test_depth_refinement_reduces_deviation(qubit):
    report = convergence_sweep(
        qubit, SpectralDensity(0.01, 0.1), 0.2, HeomParams(depth=3), [2, 3, 4, 5], [2], np.linspace(0.0, 100.0, 201)
    )
    deviations = [r.deviation for r in report.rows if r.axis == "depth" and r.deviation is not None]
    assert all(later < earlier for earlier, later in zip(deviations, deviations[1:]))


@pytest.mark.slow
@pytest.mark.parametrize("omega_c", [0.05, 0.1, 0.5])
@pytest.mark.parametrize("lam", [0.01, 0.02, 0.05, 0.1])
def test_dynamics_stay_physical_across_coupling_grid(qubit, lam, omega_c):
    sd, T = SpectralDensity(lam, omega_c), 0.2
    bath = matsubara_expansion(sd, T, min(default_n_matsubara(sd, T), 3))
    trajectory = propagate(qubit, bath, HeomParams(depth=8), np.linspace(0.0, 200.0, 401))
    for rho in trajectory.states:
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-8)
        assert is_hermitian(rho, 1e-7)
        assert np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) > -1e-5
