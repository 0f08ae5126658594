import numpy as np
import pytest

from tests.conftest import CANONICAL_Q, NONABELIAN_A
from utils.builtin_systems import (builtin_group_manifold, builtin_kaluza_klein, linear_connection,
                                   random_sigma_points)
from utils.bundle_geometry import (evaluate_geometry, identity_residuals, lifted_metric,
                                   pseudoinverse_blocks, residual_tolerance)
from utils.mechanical_system import NotOnSigma


def test_reference_point_orbit_metric(two_vector):
    geom = evaluate_geometry(two_vector, CANONICAL_Q, with_derivatives=False)
    np.testing.assert_allclose(geom.gamma, np.diag([1.0, 2.0, 1.0]), atol=1e-12)
    np.testing.assert_allclose(geom.gamma_inv, np.diag([1.0, 0.5, 1.0]), atol=1e-12)
    assert geom.G_H_rank == 3
    assert not geom.has_derivatives


def test_evaluation_rejects_points_off_sigma(two_vector):
    with pytest.raises(NotOnSigma):
        evaluate_geometry(two_vector, [0.3, 0.0, 1.0, 1.0, 0.0, 0.0])


@pytest.mark.parametrize('family', ['two_vector', 'kaluza_klein'])
def test_projector_identities_at_random_points(family, request, rng):
    sys = request.getfixturevalue(family)
    for q in random_sigma_points(sys, rng, 100):
        geom = evaluate_geometry(sys, q)
        for name, value in identity_residuals(sys, geom).items():
            assert value < residual_tolerance(name), f"{name} = {value:.3e}"


def test_pseudoinverse_blocks_orthogonality(two_vector, rng):
    q = random_sigma_points(two_vector, rng, 1)[0]
    blocks = pseudoinverse_blocks(two_vector, q)
    assert blocks['orthogonality_residual'] < 1e-9
    assert blocks['upper_left'].shape == (6, 6)
    assert blocks['lower_right'].shape == (3, 3)


def test_lifted_metric_is_block_diagonal(two_vector):
    geom = evaluate_geometry(two_vector, CANONICAL_Q, with_derivatives=False)
    lifted = lifted_metric(geom)
    np.testing.assert_allclose(lifted[6:, 6:], geom.gamma, atol=1e-12)
    np.testing.assert_allclose(lifted[:6, 6:], 0.0, atol=1e-12)


def test_kaluza_klein_connection_is_reproduced(kaluza_klein, rng):
    for q in random_sigma_points(kaluza_klein, rng, 5):
        geom = evaluate_geometry(kaluza_klein, q, with_derivatives=False)
        np.testing.assert_allclose(geom.A_conn[:, :2], NONABELIAN_A, atol=1e-8)
        np.testing.assert_allclose(geom.A_conn[:, 2:], np.eye(3), atol=1e-8)


def test_zero_connection_has_flat_product_geometry(rng):
    sys = builtin_kaluza_klein(linear_connection(np.zeros((3, 2))))
    geom = evaluate_geometry(sys, np.array([0.3, -0.4, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(geom.A_conn[:, :2], 0.0, atol=1e-12)
    np.testing.assert_allclose(geom.F_curv, 0.0, atol=1e-8)


def test_constant_nonabelian_curvature(kaluza_klein):
    geom = evaluate_geometry(kaluza_klein, np.array([0.2, 0.5, 0.0, 0.0, 0.0]))
    closed = np.einsum('kns,na,sb->kab', kaluza_klein.algebra.c, NONABELIAN_A, NONABELIAN_A)
    np.testing.assert_allclose(geom.F_curv[:, :2, :2], closed, atol=1e-6)


def test_linear_abelian_curvature():
    linear = np.zeros((3, 2, 2))
    linear[0, 0, 1], linear[0, 1, 0] = 0.3, 0.1
    sys = builtin_kaluza_klein(linear_connection(np.zeros((3, 2)), linear))
    geom = evaluate_geometry(sys, np.array([0.4, -0.3, 0.0, 0.0, 0.0]))
    expected = np.zeros((3, 2, 2))
    expected[0, 0, 1], expected[0, 1, 0] = -0.2, 0.2
    np.testing.assert_allclose(geom.F_curv[:, :2, :2], expected, atol=1e-6)


def test_geometry_serializes(two_vector):
    data = evaluate_geometry(two_vector, CANONICAL_Q).to_dict()
    assert data['q'] == CANONICAL_Q.tolist()
    assert len(data['gamma']) == 3
    assert data['F_curv'] is not None


def test_pure_orbit_has_no_horizontal_part():
    sys = builtin_group_manifold(fiber_scale=2.0)
    q = np.zeros(3)
    geom = evaluate_geometry(sys, q, with_derivatives=False)
    assert geom.G_H_rank == 0
    np.testing.assert_allclose(geom.G_H, 0.0, atol=1e-12)
    np.testing.assert_allclose(geom.Pi_proj, 0.0, atol=1e-12)
    blocks = pseudoinverse_blocks(sys, q, geom)
    np.testing.assert_allclose(blocks['upper_left'], 0.0, atol=1e-12)
    np.testing.assert_allclose(blocks['lower_right'], np.linalg.inv(geom.gamma), atol=1e-12)
