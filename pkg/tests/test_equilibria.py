import numpy as np
import pytest

from tests.conftest import CANONICAL_Q
from utils.builtin_systems import random_sigma_points
from utils.bundle_geometry import evaluate_geometry
from utils.equilibria import (EigenCrossing, EigenTracker, RelativeEquilibrium, amended_potential,
                              horizontal_residual, momentum_eigenproblem, solve_equilibrium,
                              vertical_residual, verify_equilibrium_dynamics)
from utils.numeric_helpers import NoConvergence


def test_reference_point_spectrum(two_vector):
    pairs = momentum_eigenproblem(two_vector, CANONICAL_Q)
    np.testing.assert_allclose([lam for lam, _ in pairs], [-2.0, -2.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(pairs[2][1], [0.0, 1.0, 0.0], atol=1e-12)


@pytest.mark.parametrize('family', ['two_vector', 'kaluza_klein'])
def test_eigenvectors_solve_the_vertical_equation(family, request, rng):
    sys = request.getfixturevalue(family)
    for q in random_sigma_points(sys, rng, 10):
        geom = evaluate_geometry(sys, q, with_derivatives=False)
        operator = sys.algebra.k @ geom.gamma_inv
        for lam, vector in momentum_eigenproblem(sys, q, geom):
            assert np.linalg.norm(operator @ vector - lam * vector) < 1e-10
            assert vector @ sys.algebra.k_hat_inv @ vector == pytest.approx(1.0)
            assert np.linalg.norm(vertical_residual(sys, q, vector, geom)) < 1e-10


def test_amended_potential(two_vector):
    # V = 1 y ½pᵀγ⁻¹p = 1 en el punto de referencia
    assert amended_potential(two_vector, CANONICAL_Q, np.array([0.0, 2.0, 0.0])) == pytest.approx(2.0)


def test_rotation_about_the_normal_is_a_relative_equilibrium(two_vector):
    # V armónico: ω = 1 alrededor de e_y, p = γ_yy·ω = 2
    residual = horizontal_residual(two_vector, CANONICAL_Q, np.array([0.0, 2.0, 0.0]))
    assert np.linalg.norm(residual) < 1e-8


def test_solver_finds_the_rotating_branch(two_vector):
    equilibrium = solve_equilibrium(two_vector, CANONICAL_Q, eigen_index=2, scale_guess=1.5)
    assert isinstance(equilibrium, RelativeEquilibrium)
    assert equilibrium.converged
    assert equilibrium.residual_h < 1e-8
    assert equilibrium.residual_v < 1e-10
    assert equilibrium.lam < 0.0
    geom = evaluate_geometry(two_vector, equilibrium.q, with_derivatives=False)
    # rotación con ω = 1: p_y = γ_yy
    assert abs(equilibrium.p[1]) == pytest.approx(geom.gamma[1, 1], abs=1e-6)
    assert all(b <= a for a, b in zip(equilibrium.history, equilibrium.history[1:]))


def test_solver_reports_best_iterate(two_vector):
    with pytest.raises(NoConvergence) as info:
        solve_equilibrium(two_vector, CANONICAL_Q, eigen_index=2, scale_guess=1.5, tol=1e-300, max_iter=1)
    best = info.value.best
    assert isinstance(best, RelativeEquilibrium)
    assert not best.converged
    assert best.iterations == 1


def test_eigen_index_out_of_range(two_vector):
    with pytest.raises(ValueError):
        solve_equilibrium(two_vector, CANONICAL_Q, eigen_index=3, scale_guess=1.0)


def test_tracker_detects_a_crossing():
    spectrum = (np.array([1.0, 2.0, 3.0]), np.eye(3))
    tracker = EigenTracker.start(lambda source: source, np.eye(3), spectrum, eigen_index=0)
    basis, lam = tracker.follow(spectrum)
    np.testing.assert_allclose(basis, np.eye(3)[:, [0]])
    assert lam == 1.0
    with pytest.raises(EigenCrossing):
        tracker.follow((np.array([1.0, 2.0, 3.0]), np.eye(3)[:, [1, 0, 2]]))


def test_tracker_keeps_degenerate_clusters():
    spectrum = (np.array([-2.0, -2.0, -1.0]), np.eye(3))
    tracker = EigenTracker.start(lambda source: source, np.eye(3), spectrum, eigen_index=1)
    assert tracker.indices == [0, 1]


@pytest.mark.slow
def test_solution_stays_put_under_the_dynamics(two_vector):
    equilibrium = solve_equilibrium(two_vector, CANONICAL_Q, eigen_index=2, scale_guess=1.5)
    report = verify_equilibrium_dynamics(two_vector, equilibrium, t_end=1.0, dt=1e-2)
    assert report['max_q_dot'] < 1e-6
    assert report['p_drift'] < 1e-8
