from dataclasses import replace

import numpy as np
import pytest

from utils.lie_algebra import (IndefiniteKilling, JacobiViolation, NotAntisymmetric,
                               ad_antisymmetry_check, ad_antisymmetry_residual, builtin_algebra,
                               direct_sum, jacobi_residual, levi_civita, make_algebra)


def test_so3_killing_form_and_normalization():
    so3 = builtin_algebra('so3')
    assert so3.dim == 3
    np.testing.assert_allclose(so3.k, -2.0 * np.eye(3), atol=1e-14)
    np.testing.assert_allclose(so3.k_hat, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(so3.k_hat_inv, np.eye(3), atol=1e-14)


def test_bracket_follows_structure_constants():
    so3 = builtin_algebra('so3')
    e = np.eye(3)
    np.testing.assert_allclose(so3.bracket(e[0], e[1]), e[2], atol=1e-14)
    np.testing.assert_allclose(so3.bracket(e[1], e[0]), -e[2], atol=1e-14)
    np.testing.assert_allclose(so3.adjoint(e[0]) @ e[1], e[2], atol=1e-14)


def test_algebra_is_immutable():
    so3 = builtin_algebra('su2')
    with pytest.raises(ValueError):
        so3.c[0, 1, 2] = 5.0


def test_symmetric_constants_are_rejected():
    c = np.abs(levi_civita())
    with pytest.raises(NotAntisymmetric):
        make_algebra(c)


def test_jacobi_violation_is_detected():
    # [e0, e1] = e1, [e1, e2] = e0, [e2, e0] = 0
    c = np.zeros((3, 3, 3))
    c[1, 0, 1], c[1, 1, 0] = 1.0, -1.0
    c[0, 1, 2], c[0, 2, 1] = 1.0, -1.0
    assert jacobi_residual(c) > 0.5
    with pytest.raises(JacobiViolation):
        make_algebra(c)


def test_abelian_algebra_has_indefinite_killing():
    with pytest.raises(IndefiniteKilling):
        make_algebra(np.zeros((3, 3, 3)))


def test_ad_antisymmetry_identity():
    so3 = builtin_algebra('so3')
    assert ad_antisymmetry_residual(so3) < 1e-14
    assert ad_antisymmetry_check(so3)


def test_ad_antisymmetry_detects_a_wrong_killing_form():
    so3 = builtin_algebra('so3')
    k = np.array(so3.k)
    k[0, 1] = k[1, 0] = 1.0
    corrupted = replace(so3, k=k, k_inv=np.linalg.inv(k))
    assert ad_antisymmetry_residual(corrupted) > 1e-3
    assert not ad_antisymmetry_check(corrupted)


def test_ad_antisymmetry_survives_rescaled_constants():
    doubled = make_algebra(2.0 * levi_civita())
    np.testing.assert_allclose(doubled.k, -8.0 * np.eye(3), atol=1e-12)
    assert ad_antisymmetry_check(doubled)


def test_direct_sum_blocks():
    so3 = builtin_algebra('so3')
    local = direct_sum(so3, 4)
    assert local.dim == 12
    np.testing.assert_allclose(local.c[3:6, 3:6, 3:6], so3.c)
    assert np.all(local.c[0:3, 3:6, 3:6] == 0)
    np.testing.assert_allclose(local.k_hat, np.eye(12), atol=1e-14)
    assert ad_antisymmetry_residual(local) < 1e-14


def test_unknown_algebra_name():
    with pytest.raises(ValueError):
        builtin_algebra('g2')
