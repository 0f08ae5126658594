import numpy as np
import pytest
import scipy.linalg

from utils.builtin_systems import rotation_matrix
from utils.lattice_gauge import (GaugeField, GaugeLattice, FieldMomentum, GribovViolation, InvalidField,
                                 coulomb_connection, coulomb_project, cov_deriv_operator, divergence,
                                 field_strength, fp_operator, gauge_constraint, gauge_constraint_jacobian,
                                 global_frame, global_rotate, gradient_operator, green_eigenpairs,
                                 green_function, gribov_margin, lattice_mechanical_system, metric_matrix,
                                 potential_and_gradient, random_gauge_field, zero_field)
from utils.mechanical_system import NotOnSigma, check_system


def test_lattice_side_limits():
    with pytest.raises(ValueError):
        GaugeLattice(1)
    with pytest.raises(ValueError):
        GaugeLattice(7)
    with pytest.raises(ValueError):
        GaugeLattice(2, spacing=0.0)


def test_index_layout(lattice2):
    assert lattice2.flat_dim == 72 and lattice2.group_dim == 24
    index = lattice2.flat_index(2, 1, lattice2.site_index(1, 0, 1))
    assert index == (5 * 3 + 1) * 3 + 2
    assert lattice2.unflatten(index) == (2, 1, 5)
    assert lattice2.site_coordinates(5) == (1, 0, 1)
    assert lattice2.site_index(2, -1, 3) == lattice2.site_index(0, 1, 1)


def test_field_validation(lattice2):
    with pytest.raises(InvalidField):
        GaugeField(lattice2, np.zeros(10))
    bad = np.zeros(lattice2.flat_dim)
    bad[3] = np.nan
    with pytest.raises(InvalidField):
        GaugeField(lattice2, bad)
    with pytest.raises(InvalidField):
        FieldMomentum(lattice2, np.zeros(5))


def test_coulomb_flag_checks_the_divergence(lattice2, rng):
    raw = rng.uniform(-0.2, 0.2, size=lattice2.flat_dim)
    with pytest.raises(NotOnSigma):
        GaugeField(lattice2, raw, coulomb_fixed=True)
    projected = coulomb_project(lattice2, raw)
    assert np.max(np.abs(divergence(lattice2, projected.a_field))) < 1e-12


def test_lattice_divergence_is_minus_gradient_transpose(lattice2, rng):
    a = rng.normal(size=lattice2.flat_dim)
    np.testing.assert_allclose(divergence(lattice2, a), -gradient_operator(lattice2).T @ a, atol=1e-12)


def test_random_field_lies_on_the_section(lattice2, random_field):
    assert np.max(np.abs(gauge_constraint(lattice2, random_field.a_field))) < 1e-10
    np.testing.assert_allclose(global_frame(lattice2, random_field.a_field), 0.0, atol=1e-12)
    np.testing.assert_allclose(gauge_constraint_jacobian(lattice2) @ random_field.a_field, 0.0, atol=1e-10)


def test_vacuum_green_function_deflates_constant_modes(lattice2):
    green = green_function(zero_field(lattice2))
    assert green.kernel_dim == 3
    gamma = fp_operator(zero_field(lattice2))
    np.testing.assert_allclose(gamma @ green.matrix @ gamma, gamma, atol=1e-10)


def test_fp_operator_is_symmetric_positive(random_field):
    gamma = fp_operator(random_field)
    np.testing.assert_allclose(gamma, gamma.T, atol=1e-14)
    assert np.linalg.eigvalsh(gamma)[0] > 0.0


def test_fp_spectrum_is_invariant_under_global_rotations(random_field):
    rotated = global_rotate(random_field, rotation_matrix(np.array([0.3, -1.1, 0.7])))
    np.testing.assert_allclose(np.linalg.eigvalsh(fp_operator(rotated)),
                               np.linalg.eigvalsh(fp_operator(random_field)), atol=1e-10)


def test_coulomb_connection_inverts_the_orbit_map(random_field, lattice2):
    A = coulomb_connection(random_field)
    D = cov_deriv_operator(random_field)
    np.testing.assert_allclose(A @ D, np.eye(lattice2.group_dim), atol=1e-9)


def test_coulomb_projection_keeps_transverse_fields(lattice2, rng):
    transverse = coulomb_project(lattice2, rng.normal(size=lattice2.flat_dim)).a_field
    again = coulomb_project(lattice2, transverse).a_field
    np.testing.assert_allclose(again, transverse, atol=1e-12)


def test_coulomb_projection_removes_pure_gradients(lattice2, rng):
    gradient = gradient_operator(lattice2) @ rng.normal(size=lattice2.group_dim)
    projected = coulomb_project(lattice2, gradient).a_field
    np.testing.assert_allclose(projected, 0.0, atol=1e-12)


def test_coulomb_connection_vanishes_on_transverse_directions(lattice2, random_field, rng):
    vacuum = zero_field(lattice2)
    divergence_free = coulomb_project(lattice2, rng.normal(size=lattice2.flat_dim)).a_field
    np.testing.assert_allclose(coulomb_connection(vacuum) @ divergence_free, 0.0, atol=1e-10)

    D = cov_deriv_operator(random_field)
    basis = scipy.linalg.null_space(D.T @ metric_matrix(lattice2))
    delta = basis @ rng.normal(size=basis.shape[1])
    np.testing.assert_allclose(coulomb_connection(random_field) @ delta, 0.0, atol=1e-9)


def test_green_eigenpairs(random_field, lattice2):
    green = green_function(random_field)
    pairs = green_eigenpairs(lattice2, green)
    lams = [lam for lam, _ in pairs]
    assert lams == sorted(lams)
    k = np.kron(np.eye(lattice2.n_sites), lattice2.algebra.k)
    for lam, vector in pairs:
        assert np.linalg.norm(k @ green.matrix @ vector - lam * vector) < 1e-10


def test_vacuum_potential_vanishes(lattice2):
    value, gradient = potential_and_gradient(zero_field(lattice2))
    assert value == 0.0
    assert np.all(gradient == 0.0)


def test_field_strength_is_antisymmetric(random_field):
    F = field_strength(random_field)
    np.testing.assert_allclose(F, -F.transpose(0, 1, 2, 4, 3, 5), atol=1e-14)


def test_potential_gradient_matches_finite_differences(random_field, lattice2, rng):
    _, gradient = potential_and_gradient(random_field)
    for _ in range(3):
        direction = rng.normal(size=lattice2.flat_dim)
        step = 1e-5
        plus = potential_and_gradient(GaugeField(lattice2, random_field.a_field + step * direction))[0]
        minus = potential_and_gradient(GaugeField(lattice2, random_field.a_field - step * direction))[0]
        numeric = (plus - minus) / (2 * step)
        assert abs(numeric - gradient @ direction) < 1e-6 * max(1.0, abs(numeric))


def test_gribov_margin(lattice2, rng):
    assert gribov_margin(zero_field(lattice2)) > 0.0
    strong = random_gauge_field(lattice2, rng, amplitude=20.0)
    margin = gribov_margin(strong)
    if margin < 0.0:
        with pytest.raises(GribovViolation):
            gribov_margin(strong, check=True)
    else:
        assert gribov_margin(strong, check=True) == margin


def test_flattened_system_metric_is_killing(lattice2, random_field):
    sys = lattice_mechanical_system(lattice2)
    assert sys.n_p == 72 and sys.n_g == 24
    report = check_system(sys, [random_field.a_field])
    assert report['metric_symmetry'] == 0.0
    assert report['killing'] < 1e-12


def test_potential_is_invariant_under_global_rotations(random_field):
    rotated = global_rotate(random_field, rotation_matrix(np.array([0.9, 0.2, -0.4])))
    value = potential_and_gradient(random_field)[0]
    assert potential_and_gradient(rotated)[0] == pytest.approx(value, rel=1e-12)
