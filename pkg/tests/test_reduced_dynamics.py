import numpy as np
import pytest

from tests.conftest import CANONICAL_Q
from utils.builtin_systems import random_sigma_points
from utils.bundle_geometry import evaluate_geometry
from utils.mechanical_system import PointOnSigma
from utils.reduced_dynamics import (NotHorizontal, ReducedState, Trajectory, convergence_study,
                                    energy, full_space_oracle, full_velocity, integrate,
                                    oracle_acceleration, reduced_state, wong_rhs, wong_terms)
from utils.mechanical_system import NotOnSigma


def moving_state(sys, rng, p_scale=0.3):
    q = random_sigma_points(sys, rng, 1)[0]
    return reduced_state(sys, q, rng.normal(scale=0.3, size=sys.n_p), rng.normal(scale=p_scale, size=sys.n_g))


def test_reduced_state_is_horizontal(two_vector, rng):
    state = moving_state(two_vector, rng)
    geom = evaluate_geometry(two_vector, state.q, with_derivatives=False)
    assert np.max(np.abs(geom.A_conn @ state.q_dot)) < 1e-12


def test_vertical_velocity_is_rejected(two_vector):
    geom = evaluate_geometry(two_vector, CANONICAL_Q, with_derivatives=False)
    state = ReducedState(geom.q, geom.K[:, 0], np.zeros(3))
    with pytest.raises(NotHorizontal):
        wong_rhs(two_vector, state)


def test_state_off_sigma_is_rejected(two_vector):
    state = ReducedState(PointOnSigma([1.0, 0.0, 1.0, 1.0, 0.0, 0.0]), np.zeros(6), np.zeros(3))
    with pytest.raises(NotOnSigma):
        wong_rhs(two_vector, state)


def test_wong_terms_add_up_to_the_acceleration(two_vector, rng):
    state = moving_state(two_vector, rng)
    geom = evaluate_geometry(two_vector, state.q)
    q_ddot, _ = wong_rhs(two_vector, state, geom=geom)
    terms = wong_terms(two_vector, geom, geom.N_proj @ state.q_dot, state.p)
    assert set(terms) == {'geodesic', 'curvature', 'momentum', 'potential'}
    np.testing.assert_allclose(sum(terms.values()), q_ddot, atol=1e-14)


@pytest.mark.parametrize('family', ['two_vector', 'kaluza_klein'])
def test_reduced_equations_match_the_full_flow(family, request, rng):
    sys = request.getfixturevalue(family)
    for _ in range(3):
        state = moving_state(sys, rng)
        q_ddot, p_dot = wong_rhs(sys, state)
        oracle_q_ddot, _, oracle_p_dot = oracle_acceleration(sys, state)
        np.testing.assert_allclose(q_ddot, oracle_q_ddot, atol=1e-6)
        np.testing.assert_allclose(p_dot, oracle_p_dot, atol=1e-6)


def test_energy_is_conserved(two_vector, rng):
    state = moving_state(two_vector, rng)
    trajectory = integrate(two_vector, state, 0.5, 5e-3)
    assert trajectory.energy_drift() < 1e-7
    assert trajectory.max_invariant('sigma') < 1e-9
    assert trajectory.max_invariant('horizontal') < 1e-9
    assert trajectory.final.t == pytest.approx(0.5)


def test_zero_momentum_stays_zero(two_vector, rng):
    state = moving_state(two_vector, rng, p_scale=0.0)
    trajectory = integrate(two_vector, state, 0.3, 1e-2)
    assert max(np.max(np.abs(s.p)) for s in trajectory.samples) < 1e-12


def test_zero_momentum_mode_discards_initial_momentum(two_vector, rng):
    state = moving_state(two_vector, rng)
    trajectory = integrate(two_vector, state, 0.1, 1e-2, momentum='zero')
    assert all(np.all(s.p == 0.0) for s in trajectory.samples)


def test_sampling_and_columns(two_vector, rng):
    state = moving_state(two_vector, rng)
    trajectory = integrate(two_vector, state, 0.1, 1e-2, sample_every=5)
    np.testing.assert_allclose(trajectory.times, [0.0, 0.05, 0.1], atol=1e-12)
    columns = trajectory.columns()
    assert columns[0] == 't' and columns[-1] == 'p_norm'
    assert all(len(row) == len(columns) for row in trajectory.rows())


def test_invalid_integration_arguments(two_vector, rng):
    state = moving_state(two_vector, rng)
    with pytest.raises(ValueError):
        integrate(two_vector, state, 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate(two_vector, state, 1.0, 1e-2, method='euler')
    with pytest.raises(ValueError):
        integrate(two_vector, state, 1.0, 1e-2, vertical_form='other')


def test_trajectory_times_must_increase(two_vector):
    state = reduced_state(two_vector, CANONICAL_Q)
    trajectory = Trajectory()
    invariants = {'energy': 0.0, 'sigma': 0.0, 'horizontal': 0.0, 'p_norm': 0.0}
    trajectory.append(state, invariants)
    with pytest.raises(ValueError):
        trajectory.append(state, invariants)


def test_energy_includes_all_parts(two_vector):
    state = reduced_state(two_vector, CANONICAL_Q, p=[0.0, 2.0, 0.0])
    # ½ pᵀγ⁻¹p + V = ½·4·½ + ½(1 + 1)
    assert energy(two_vector, state) == pytest.approx(2.0)


@pytest.mark.slow
def test_gauge_fixed_oracle_agrees_with_reduced_run(two_vector, rng):
    state = moving_state(two_vector, rng)
    reduced = integrate(two_vector, state, 0.2, 1e-3, sample_every=20)
    _, fixed = full_space_oracle(two_vector, state.q.q, full_velocity(two_vector, state), 0.2, 1e-3,
                                 sample_every=20)
    for mine, theirs in zip(reduced.samples, fixed.samples):
        assert mine.t == pytest.approx(theirs.t)
        np.testing.assert_allclose(mine.q.q, theirs.q.q, atol=1e-5)
        assert two_vector.algebra.k_hat_norm(mine.p - theirs.p) < 1e-6


@pytest.mark.slow
def test_fourth_order_convergence(two_vector, rng):
    state = moving_state(two_vector, rng)
    study = convergence_study(two_vector, state, 0.5, 0.05)
    assert 12.0 <= study['ratio'] <= 20.0


@pytest.mark.slow
def test_oracle_agrees_over_a_unit_time_for_several_starts(two_vector, rng):
    for _ in range(5):
        state = moving_state(two_vector, rng)
        reduced = integrate(two_vector, state, 1.0, 1e-4, sample_every=1000)
        _, fixed = full_space_oracle(two_vector, state.q.q, full_velocity(two_vector, state), 1.0, 1e-4,
                                     sample_every=1000)
        assert len(reduced.samples) == len(fixed.samples)
        for mine, theirs in zip(reduced.samples, fixed.samples):
            assert np.max(np.abs(mine.q.q - theirs.q.q)) < 1e-5
            assert two_vector.algebra.k_hat_norm(mine.p - theirs.p) < 1e-6


@pytest.mark.slow
def test_energy_drift_over_ten_thousand_steps(two_vector, rng):
    state = moving_state(two_vector, rng)
    trajectory = integrate(two_vector, state, 10.0, 1e-3, sample_every=100)
    assert trajectory.final.t == pytest.approx(10.0)
    assert trajectory.energy_drift() < 1e-7
