import math

import numpy as np
import pytest

from epsense.errors import GridRefinementError, MultiChannelError, NotLocalizedError
from epsense.model import (
    build_mirror_ring,
    build_single_ring,
    build_three_ring,
    build_two_ring,
    coupling_perturbation,
    effective_hamiltonian,
    isolated_reference,
    perturbed,
)
from epsense.numerics import spectral_norm
from epsense.qfi import (
    cramer_rao,
    decay_modified_qfi,
    evaluate,
    long_lived_contribution,
    phase_response,
    qfi_average,
    qfi_for_input,
    qfi_max,
    qfi_max_via_ldos,
    reduced_qfi,
    reduced_qfi_channel,
    scattering_derivative,
    scattering_matrix,
    wigner_smith,
)
from epsense.sensing_types import (
    MirrorRing,
    Perturbation,
    ScatteringModel,
    SingleRing,
    ThreeRing,
    TwoRing,
)
from epsense.spectral import greens_function, ldos, passive_xi_bound


def _finite_difference(model, pert, omega, h):
    plus = scattering_matrix(perturbed(model, pert, h), omega)
    minus = scattering_matrix(perturbed(model, pert, -h), omega)
    return (plus - minus) / (2 * h)


# --- Scattering matrix ---


def test_uncoupled_system_does_not_scatter():
    model = ScatteringModel(h_sys=np.diag([0.3, -0.2]), w=np.zeros((2, 1)))
    assert np.allclose(scattering_matrix(model, 0.0), np.eye(1))


def test_single_ring_on_resonance_flips_sign(isolated_mode):
    model, _ = isolated_mode
    assert scattering_matrix(model, 0.0)[0, 0] == pytest.approx(-1.0, abs=1e-14)


def test_two_ring_ep_transmission_is_all_pass(two_ring_ep):
    model, _ = two_ring_ep
    assert abs(scattering_matrix(model, 0.0)[0, 0]) == pytest.approx(1.0, abs=1e-13)


def test_zoo_scattering_is_unitary(zoo):
    for model, _ in zoo:
        for omega in np.linspace(-2.0, 2.0, 50):
            s = scattering_matrix(model, float(omega))
            assert np.allclose(s.conj().T @ s, np.eye(model.n_channels), atol=1e-10)


# --- Derivative and Wigner-Smith operator ---


def test_derivative_vanishes_without_perturbation(two_ring_ep):
    model, _ = two_ring_ep
    zero = Perturbation(h1=np.zeros((2, 2)))
    assert np.array_equal(scattering_derivative(model, zero, 0.0), np.zeros((1, 1)))


def test_derivative_at_two_ring_ep(two_ring_ep):
    model, pert = two_ring_ep
    assert abs(scattering_derivative(model, pert, 0.0)[0, 0]) == pytest.approx(16.0, rel=1e-10)


def test_derivative_matches_finite_difference(zoo):
    for model, pert in zoo:
        ds = scattering_derivative(model, pert, 0.05)
        fd = _finite_difference(model, pert, 0.05, 1e-5)
        assert np.max(np.abs(fd - ds)) <= 1e-7 * max(1.0, spectral_norm(ds))


def test_finite_difference_error_is_second_order():
    model, pert = build_two_ring(TwoRing(gamma=1.0, v=0.3))
    ds = scattering_derivative(model, pert, 0.05)
    coarse = np.max(np.abs(_finite_difference(model, pert, 0.05, 1e-3) - ds))
    fine = np.max(np.abs(_finite_difference(model, pert, 0.05, 5e-4) - ds))
    assert coarse / fine == pytest.approx(4.0, rel=0.05)


def test_wigner_smith_is_hermitian(zoo):
    for model, pert in zoo:
        q = wigner_smith(model, pert, 0.1)
        assert np.allclose(q, q.conj().T, atol=1e-12 * max(1.0, spectral_norm(q)))


def test_wigner_smith_from_unitary_s(zoo):
    for model, pert in zoo:
        s = scattering_matrix(model, 0.1)
        ds = scattering_derivative(model, pert, 0.1)
        q = wigner_smith(model, pert, 0.1)
        assert np.allclose(q, -1j * s.conj().T @ ds, atol=1e-10 * max(1.0, spectral_norm(q)))


def test_wigner_smith_trace_counts_ldos():
    model, pert = build_two_ring(TwoRing(gamma=1.0, v=0.4, kappa=0.1))
    q = wigner_smith(model, pert, 0.2)
    assert np.trace(q).real == pytest.approx(-2 * math.pi * ldos(model, 1, 0.2).rho, rel=1e-10)
    assert np.linalg.matrix_rank(q, tol=1e-10 * spectral_norm(q)) == 1


# --- Maximum and input-dependent QFI ---


def test_optimal_input_reaches_maximum(zoo):
    for model, pert in zoo:
        i_max, u_opt = qfi_max(model, pert, 0.05)
        assert np.linalg.norm(u_opt) == pytest.approx(1.0)
        assert qfi_for_input(model, pert, 0.05, u_opt) == pytest.approx(i_max, rel=1e-9)


def test_random_inputs_stay_below_maximum(zoo):
    rng = np.random.default_rng(11)
    for model, pert in zoo:
        i_max, _ = qfi_max(model, pert, 0.0)
        for _ in range(20):
            u = rng.standard_normal(model.n_channels) + 1j * rng.standard_normal(model.n_channels)
            assert qfi_for_input(model, pert, 0.0, u) <= i_max * (1 + 1e-12)


def test_optimal_input_for_tiny_perturbation():
    model = ScatteringModel(h_sys=[[0.0]], w=[[0.0, 1j]])
    pert = Perturbation(h1=[[1e-92]])
    i_max, u_opt = qfi_max(model, pert, 0.0)
    assert i_max > 0
    assert qfi_for_input(model, pert, 0.0, u_opt) == pytest.approx(i_max, rel=1e-9)
    assert abs(u_opt[0]) == pytest.approx(0.0, abs=1e-6)


def test_maximum_over_many_random_inputs():
    model, pert = build_mirror_ring(MirrorRing(gamma=1.0, rho=0.25))
    i_max, _ = qfi_max(model, pert, 0.0)
    rng = np.random.default_rng(17)
    inputs = rng.standard_normal((10_000, 2)) + 1j * rng.standard_normal((10_000, 2))
    values = [qfi_for_input(model, pert, 0.0, u) for u in inputs]
    assert max(values) <= i_max * (1 + 1e-9)
    assert max(values) == pytest.approx(i_max, rel=1e-2)


def test_input_orthogonal_to_sensing_mode_sees_nothing():
    model, pert = build_two_ring(TwoRing(gamma=1.0, v=0.4, kappa=0.1))
    row = (greens_function(effective_hamiltonian(model), 0.0) @ model.w)[1]
    u = np.array([row[1], -row[0], 0.0])
    assert qfi_for_input(model, pert, 0.0, u) <= 1e-12 * qfi_max(model, pert, 0.0)[0]


def test_qfi_for_input_rejects_bad_inputs(two_ring_ep):
    model, pert = two_ring_ep
    with pytest.raises(ValueError):
        qfi_for_input(model, pert, 0.0, [0.0])
    with pytest.raises(ValueError):
        qfi_for_input(model, pert, 0.0, [1.0, 0.0])


@pytest.mark.parametrize("v", [0.05, 0.1, 0.25, 0.4, 1.0])
def test_two_ring_maximum_qfi(v):
    model, pert = build_two_ring(TwoRing(gamma=1.0, v=v))
    i_max, _ = qfi_max(model, pert, 0.0)
    assert i_max == pytest.approx(4 / v**4, rel=1e-9)


def test_three_ring_ep_maximum_qfi(three_ring_ep):
    model, pert = three_ring_ep
    assert qfi_max(model, pert, 0.0)[0] == pytest.approx(4096, rel=1e-8)


def test_two_ring_ep_against_isolated_mode(two_ring_ep, isolated_mode):
    i_ep = qfi_max(*two_ring_ep, 0.0)[0]
    i_iso = qfi_max(*isolated_mode, 0.0)[0]
    assert i_iso == pytest.approx(256, rel=1e-9)
    assert i_ep / i_iso == pytest.approx(4.0, rel=1e-9)
    assert i_ep / i_iso == pytest.approx(passive_xi_bound(0.25, 2).ef_cap, rel=1e-9)


def test_three_ring_ep_against_isolated_reference(three_ring_ep):
    # Reference mode with the EP's decay rate gamma / 6
    reference, pert = isolated_reference(1 / 6)
    i_iso = qfi_max(reference, pert, 0.0)[0]
    assert i_iso == pytest.approx(576, rel=1e-9)
    i_ep = qfi_max(*three_ring_ep, 0.0)[0]
    assert i_ep / i_iso == pytest.approx(64 / 9, rel=1e-8)


@pytest.mark.parametrize("rho", [0.0, 0.25, 0.5, 1.0])
def test_mirror_ring_backscattering_qfi(rho):
    model, pert = build_mirror_ring(MirrorRing(gamma=1.0, rho=rho))
    assert qfi_max(model, pert, 0.0)[0] == pytest.approx(64 * (1 + rho) ** 2, rel=1e-9)


def test_ldos_route_agrees_with_operator_route(zoo):
    for model, pert in zoo:
        if pert.localized_site is None:
            continue
        for omega in (-0.3, 0.0, 0.2):
            i_max, _ = qfi_max(model, pert, omega)
            assert qfi_max_via_ldos(model, pert, omega) == pytest.approx(i_max, rel=1e-9)


def test_ldos_route_needs_localized_perturbation(mirror_ring_half):
    model, pert = mirror_ring_half
    with pytest.raises(NotLocalizedError):
        qfi_max_via_ldos(model, pert, 0.0)


def test_average_qfi_of_localized_perturbation(zoo):
    for model, pert in zoo:
        if pert.localized_site is None:
            continue
        i_max, _ = qfi_max(model, pert, 0.1)
        assert qfi_average(model, pert, 0.1) * model.n_channels == pytest.approx(i_max, rel=1e-9)


# --- Reduced QFI ---


def test_reduced_qfi_without_loss_is_the_full_qfi(two_ring_ep, isolated_mode):
    for model, pert in (two_ring_ep, isolated_mode):
        i_max, _ = qfi_max(model, pert, 0.0)
        assert reduced_qfi(model, pert, 0.0) == pytest.approx(i_max, rel=1e-10)
    assert reduced_qfi(*two_ring_ep, 0.0) == pytest.approx(1024, rel=1e-10)


def test_reduced_qfi_routes_agree(zoo):
    for model, pert in zoo:
        if pert.localized_site is None:
            continue
        channel = model.observed_channels[0]
        factorized = reduced_qfi(model, pert, 0.07)
        assert reduced_qfi_channel(model, pert, 0.07, channel, channel) == pytest.approx(
            factorized, rel=1e-9
        )
        assert factorized <= qfi_max(model, pert, 0.07)[0] * (1 + 1e-12)


def test_single_ring_reduced_qfi_with_loss():
    model, pert = build_single_ring(SingleRing(gamma=1.0, kappa=0.3))
    assert reduced_qfi(model, pert, 0.0) == pytest.approx(16 / (0.5 + 0.3) ** 4, rel=1e-10)


def test_reduced_qfi_rejects_bad_channel(two_ring_ep):
    model, pert = two_ring_ep
    with pytest.raises(ValueError):
        reduced_qfi(model, pert, 0.0, in_channel=1)
    with pytest.raises(NotLocalizedError):
        reduced_qfi(*build_mirror_ring(MirrorRing(rho=0.5)), 0.0)


def test_long_lived_contribution_below_ep():
    model, pert = build_two_ring(TwoRing(gamma=1.0, v=0.05))
    contribution = long_lived_contribution(model, pert, 0.0)
    assert 0 < contribution
    # Far below the EP the long-lived mode carries almost all of the LDOS
    assert contribution == pytest.approx(qfi_max(model, pert, 0.0)[0], rel=0.05)


# --- Zero-QFI configurations ---


def test_lossless_two_ring_blind_spots():
    model, _ = build_two_ring(TwoRing(gamma=1.0, v=0.3))
    for pert in (
        Perturbation.localized(2, 0),
        coupling_perturbation(2, 1, 0, "magnitude"),
        coupling_perturbation(2, 1, 0, "phase"),
    ):
        assert qfi_max(model, pert, 0.0)[0] <= 1e-12


def test_coupling_phase_is_invisible_under_loss():
    model, _ = build_two_ring(TwoRing(gamma=1.0, v=0.3, kappa=0.1))
    phase = coupling_perturbation(2, 1, 0, "phase")
    assert reduced_qfi_channel(model, phase, 0.0, 0, 0) <= 1e-12
    magnitude = coupling_perturbation(2, 1, 0, "magnitude")
    assert reduced_qfi_channel(model, magnitude, 0.0, 0, 0) > 1e-6


# --- Phase route ---


def test_phase_route_at_two_ring_ep(two_ring_ep):
    model, pert = two_ring_ep
    response = phase_response(model, pert, 0.0, np.linspace(-0.05, 0.05, 21))
    assert response.qfi == pytest.approx(1024, rel=1e-6)
    phase = np.asarray(response.phase)
    assert phase[10] == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(phase, -phase[::-1], atol=1e-9)


def test_phase_route_of_isolated_mode(isolated_mode):
    model, pert = isolated_mode
    response = phase_response(model, pert, 0.0, np.linspace(-0.1, 0.1, 41))
    assert response.qfi == pytest.approx(256, rel=1e-6)


def test_phase_route_needs_single_channel(mirror_ring_half):
    model, pert = mirror_ring_half
    with pytest.raises(MultiChannelError):
        phase_response(model, pert, 0.0, [-0.1, 0.0, 0.1])


def test_phase_route_detects_coarse_grid():
    model, pert = build_single_ring(SingleRing(gamma_wg=0.01))
    with pytest.raises(GridRefinementError):
        phase_response(model, pert, 0.0, [-1.0, 0.0, 1.0])


def test_phase_route_rejects_unsorted_grid(two_ring_ep):
    model, pert = two_ring_ep
    with pytest.raises(ValueError):
        phase_response(model, pert, 0.0, [0.1, 0.0])


# --- Decay-modified QFI ---


def test_decay_modified_qfi_above_ep_equals_maximum():
    for v in (0.3, 0.5, 1.0):
        model, pert = build_two_ring(TwoRing(gamma=1.0, v=v))
        assert decay_modified_qfi(model) == pytest.approx(qfi_max(model, pert, 0.0)[0], rel=1e-9)


def test_decay_modified_qfi_peaks_at_ep():
    grid = np.concatenate([np.linspace(0.05, 0.6, 111), [0.25]])
    values = [decay_modified_qfi(build_two_ring(TwoRing(gamma=1.0, v=v))[0]) for v in grid]
    assert grid[int(np.argmax(values))] == pytest.approx(0.25)
    assert max(values) == pytest.approx(1024, rel=1e-6)


def test_decay_modified_qfi_weak_coupling_limit():
    model, _ = build_two_ring(TwoRing(gamma=1.0, v=1e-3))
    assert decay_modified_qfi(model) == pytest.approx(256, rel=1e-3)


def test_decay_modified_qfi_needs_lossless_model():
    model, _ = build_two_ring(TwoRing(gamma=1.0, kappa=0.1))
    with pytest.raises(ValueError):
        decay_modified_qfi(model)


# --- Cramer-Rao ---


def test_cramer_rao_floor():
    assert cramer_rao(1.0) == 1.0
    assert cramer_rao(100.0) == pytest.approx(0.1)
    assert cramer_rao(1024.0) == pytest.approx(1 / 32)
    assert cramer_rao(1024.0, trials=4) == pytest.approx(1 / 64)
    with pytest.raises(ValueError):
        cramer_rao(0.0)
    with pytest.raises(ValueError):
        cramer_rao(1.0, trials=0)


# --- Full evaluation ---


def test_evaluate_two_ring_ep(two_ring_ep):
    model, pert = two_ring_ep
    result = evaluate(model, pert)
    assert result.i_max == pytest.approx(1024, rel=1e-9)
    assert result.i_input == pytest.approx(result.i_max, rel=1e-9)
    assert result.i_avg == pytest.approx(result.i_max, rel=1e-9)
    assert result.i_reduced == pytest.approx(1024, rel=1e-9)
    assert result.bounds.localized == pytest.approx(1024, rel=1e-8)
    assert result.bounds.general == pytest.approx(16384, rel=1e-8)
    q = result.q_operator
    assert np.allclose(q, q.conj().T)


def test_evaluate_invariants(zoo):
    for model, pert in zoo:
        result = evaluate(model, pert, 0.1)
        assert result.i_input <= result.i_max * (1 + 1e-12)
        assert result.i_reduced <= result.i_max * (1 + 1e-12)
        assert result.i_avg <= result.i_max * (1 + 1e-12)
        assert np.linalg.norm(result.optimal_input) == pytest.approx(1.0)


def test_evaluate_reports_nan_bounds_for_unresolved_spectrum():
    model = ScatteringModel(h_sys=np.diag([0.0, 1e-6]), w=np.zeros((2, 1)))
    result = evaluate(model, Perturbation.localized(2, 0), 0.5)
    assert result.i_max == 0.0
    assert math.isnan(result.bounds.localized)
    assert math.isnan(result.bounds.general)


def test_three_ring_reduced_equals_full_without_loss():
    model, pert = build_three_ring(ThreeRing(gamma=1.0))
    assert reduced_qfi(model, pert, 0.0) == pytest.approx(4096, rel=1e-8)


def test_evaluate_leaves_localized_bound_out_for_extended_perturbation(mirror_ring_half):
    model, pert = mirror_ring_half
    result = evaluate(model, pert, 0.0)
    assert result.i_max == pytest.approx(144, rel=1e-9)
    assert math.isnan(result.bounds.localized)
    # Tight on the exceptional surface
    assert result.bounds.general >= result.i_max * (1 - 1e-9)
