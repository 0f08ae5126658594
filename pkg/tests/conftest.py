import json

import numpy as np
import pytest

from utils.builtin_systems import builtin_kaluza_klein, builtin_two_vector_so3, linear_connection
from utils.lattice_gauge import GaugeLattice, random_gauge_field

# Punto de referencia del sistema de dos vectores: γ = diag(1, 2, 1)
CANONICAL_Q = np.array([0.0, 0.0, 1.0, 1.0, 0.0, 0.0])

NONABELIAN_A = np.array([[0.4, -0.2], [0.1, 0.3], [-0.5, 0.2]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_vector():
    """Dos vectores con V armónico (½|x⁽¹⁾|² + ½|x⁽²⁾|²)"""
    return builtin_two_vector_so3()


@pytest.fixture
def kaluza_klein():
    return builtin_kaluza_klein(linear_connection(NONABELIAN_A), base_dim=2, base_frequency=0.7)


@pytest.fixture
def lattice2():
    return GaugeLattice(2)


@pytest.fixture
def random_field(lattice2, rng):
    return random_gauge_field(lattice2, rng, amplitude=0.3)


@pytest.fixture
def write_config(tmp_path):
    """Escribe un RunConfig en tmp_path y devuelve su ruta"""
    def _write(data, name='run.json'):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding='utf-8')
        return path
    return _write
