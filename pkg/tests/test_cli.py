import json

import pytest
from click.testing import CliRunner

from app import cli
from config import Config
from tests.conftest import CANONICAL_Q

TWO_VECTOR = {'name': 'two_vector_so3'}


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, *args):
    return runner.invoke(cli, list(map(str, args)), catch_exceptions=False)


def test_version(runner):
    result = run(runner, '--version')
    assert result.exit_code == 0
    assert Config.VERSION in result.output


def test_geometry_run_and_report(runner, write_config, tmp_path):
    out_dir = tmp_path / 'geometry'
    path = write_config({'subcommand': 'geometry', 'system': TWO_VECTOR,
                         'initial': {'q': CANONICAL_Q.tolist()}})
    result = run(runner, 'geometry', '--config', path, '--out', out_dir)
    assert result.exit_code == 0, result.output
    for name in ('geometry.json', 'manifest.json', 'invariants.json'):
        assert (out_dir / name).exists()
    manifest = json.loads((out_dir / 'manifest.json').read_text(encoding='utf-8'))
    assert manifest['exit_code'] == 0 and manifest['subcommand'] == 'geometry'

    result = run(runner, 'report-invariants', '--out', out_dir)
    assert result.exit_code == 0
    assert (out_dir / 'report.md').exists()


def test_report_without_run(runner, tmp_path):
    result = run(runner, 'report-invariants', '--out', tmp_path)
    assert result.exit_code == 1


def test_short_integration(runner, write_config, tmp_path):
    out_dir = tmp_path / 'integrate'
    path = write_config({'system': TWO_VECTOR,
                         'initial': {'q': CANONICAL_Q.tolist(), 'p': [0.1, 0.3, -0.2]},
                         'integrator': {'t_end': 0.05, 'dt': 0.01}})
    result = run(runner, 'integrate', '--config', path, '--out', out_dir)
    assert result.exit_code == 0, result.output
    lines = (out_dir / 'trajectory.csv').read_text(encoding='utf-8').splitlines()
    assert len(lines) == 7


def test_equilibrium_on_the_rotation_branch(runner, write_config, tmp_path):
    out_dir = tmp_path / 'equilibria'
    path = write_config({'system': TWO_VECTOR, 'initial': {'q': CANONICAL_Q.tolist()},
                         'solver': {'eigen_index': 2, 'scale_guess': 1.5}})
    result = run(runner, 'equilibria', '--config', path, '--out', out_dir)
    assert result.exit_code == 0, result.output
    data = json.loads((out_dir / 'equilibria.json').read_text(encoding='utf-8'))
    assert data['status'] == 'ok'
    assert data['equilibrium']['converged']


def test_vacuum_lattice_geometry(runner, write_config, tmp_path):
    out_dir = tmp_path / 'lattice'
    path = write_config({'lattice': {'L': 2, 'field': {'init': 'zero'}}})
    result = run(runner, 'lattice-geometry', '--config', path, '--out', out_dir)
    assert result.exit_code == 0, result.output
    assert (out_dir / 'lattice_geometry.json').exists()


def test_subcommand_mismatch_exits_with_error(runner, write_config, tmp_path):
    path = write_config({'subcommand': 'integrate', 'system': TWO_VECTOR})
    result = run(runner, 'geometry', '--config', path, '--out', tmp_path / 'out')
    assert result.exit_code == 1
    manifest = json.loads((tmp_path / 'out' / 'manifest.json').read_text(encoding='utf-8'))
    assert manifest['status'] == 'config_error'
