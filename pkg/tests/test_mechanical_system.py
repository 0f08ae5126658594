import numpy as np
import pytest

from tests.conftest import CANONICAL_Q
from utils.builtin_systems import (builtin_group_manifold, random_sigma_points, rotation_matrix,
                                   system_from_config)
from utils.mechanical_system import (ChartOutOfRange, NotOnSigma, PointOnSigma, check_system,
                                     faddeev_popov_matrix, point_on_sigma, project_to_sigma,
                                     sigma_residual)
from utils.numeric_helpers import SingularFP


def test_point_on_sigma_validates_the_gauge(two_vector):
    point = point_on_sigma(two_vector, CANONICAL_Q)
    assert isinstance(point, PointOnSigma)
    with pytest.raises(NotOnSigma):
        point_on_sigma(two_vector, [1.0, 0.0, 1.0, 1.0, 0.0, 0.0])


def test_point_on_sigma_is_read_only(two_vector):
    point = point_on_sigma(two_vector, CANONICAL_Q)
    with pytest.raises(ValueError):
        point.q[0] = 1.0


def test_projection_keeps_points_already_on_sigma(two_vector):
    point = project_to_sigma(two_vector, CANONICAL_Q)
    np.testing.assert_array_equal(point.q, CANONICAL_Q)


def test_projection_undoes_a_rotation_about_z(two_vector):
    R = rotation_matrix(np.array([0.0, 0.0, 0.3]))
    rotated = np.concatenate([R @ CANONICAL_Q[:3], R @ CANONICAL_Q[3:]])
    point = project_to_sigma(two_vector, rotated)
    np.testing.assert_allclose(point.q, CANONICAL_Q, atol=1e-10)


def test_projection_preserves_the_orbit(two_vector, rng):
    for q in random_sigma_points(two_vector, rng, 5, on_sigma=False):
        point = project_to_sigma(two_vector, q)
        assert sigma_residual(two_vector, point.q) < 1e-10
        np.testing.assert_allclose(two_vector.invariants(point.q), two_vector.invariants(q), atol=1e-9)


def test_collinear_vectors_have_singular_fp(two_vector):
    x1 = np.array([0.6, 0.0, 0.8])
    with pytest.raises(SingularFP):
        project_to_sigma(two_vector, np.concatenate([x1, 2.0 * x1]))


def test_fp_matrix_at_reference_point(two_vector):
    phi = faddeev_popov_matrix(two_vector, CANONICAL_Q)
    assert abs(abs(np.linalg.det(phi)) - 1.0) < 1e-12


@pytest.mark.parametrize('mode', ['analytic', 'finite-difference'])
def test_two_vector_system_checks(two_vector, rng, mode):
    sys = two_vector if mode == 'analytic' else two_vector.with_derivative_mode(mode)
    report = check_system(sys, random_sigma_points(sys, rng, 100))
    assert report['metric_symmetry'] == 0.0
    assert report['metric_min_eigenvalue'] > 0.0
    assert report['killing'] < 1e-7
    assert report['equivariance'] < 1e-7
    assert report['potential_invariance'] < 1e-9


def test_kaluza_klein_system_checks(kaluza_klein, rng):
    report = check_system(kaluza_klein, random_sigma_points(kaluza_klein, rng, 5, on_sigma=False))
    assert report['metric_min_eigenvalue'] > 0.0
    assert report['killing'] < 1e-7
    assert report['equivariance'] < 1e-7
    assert report['potential_invariance'] < 1e-9


def test_group_chart_limit():
    sys = builtin_group_manifold()
    with pytest.raises(ChartOutOfRange):
        sys.G(np.array([0.0, 0.0, 3.2]))


def test_unknown_derivative_mode(two_vector):
    with pytest.raises(ValueError):
        two_vector.with_derivative_mode('symbolic')


def test_system_from_config_kaluza_klein_shapes():
    sys = system_from_config({'name': 'kaluza_klein', 'base_dim': 2,
                              'connection': {'constant': [[0.1, 0.0], [0.0, 0.2], [0.3, 0.0]]}})
    assert sys.n_p == 5 and sys.n_g == 3
    with pytest.raises(ValueError):
        system_from_config({'name': 'kaluza_klein', 'base_dim': 2,
                            'connection': {'constant': [[0.1, 0.0, 0.0]]}})


def test_system_from_config_derivative_mode():
    sys = system_from_config({'name': 'two_vector_so3', 'derivative_mode': 'finite-difference'})
    assert sys.derivative_mode == 'finite-difference'
    assert sys.name == 'two_vector_so3'


def test_random_off_sigma_points_leave_the_section(two_vector, rng):
    points = random_sigma_points(two_vector, rng, 3, on_sigma=False)
    assert max(sigma_residual(two_vector, q) for q in points) > 1e-3


def test_killing_bracket_sign(two_vector, monkeypatch):
    import utils.mechanical_system as mechanical_system
    assert mechanical_system.KILLING_BRACKET_SIGN == 1
    assert mechanical_system.equivariance_residual(two_vector, CANONICAL_Q) < 1e-7
    monkeypatch.setattr(mechanical_system, 'KILLING_BRACKET_SIGN', -1)
    assert mechanical_system.equivariance_residual(two_vector, CANONICAL_Q) > 0.1


def test_projection_is_idempotent(two_vector, rng):
    for q in random_sigma_points(two_vector, rng, 20, on_sigma=False):
        once = project_to_sigma(two_vector, q)
        twice = project_to_sigma(two_vector, once.q)
        assert np.max(np.abs(twice.q - once.q)) < 1e-12
