import json

from utils.numeric_helpers import NoConvergence, SingularFP
from utils.report_service import invariant_check
from utils.run_manager import EXIT_ERROR, EXIT_NO_CONVERGENCE, EXIT_OK, RunManager, config_hash

GEOMETRY_CONFIG = {'subcommand': 'geometry', 'system': {'name': 'two_vector_so3'}}


def read_manifest(out_dir):
    return json.loads((out_dir / 'manifest.json').read_text(encoding='utf-8'))


def test_config_hash_ignores_key_order():
    assert config_hash({'a': 1, 'b': [1, 2]}) == config_hash({'b': [1, 2], 'a': 1})
    assert config_hash({'a': 1}) != config_hash({'a': 2})


def test_successful_run_writes_manifest(write_config, tmp_path):
    out_dir = tmp_path / 'out'

    def pipeline(config, out, rng):
        return {'outputs': {'x.json': None}, 'checks': [invariant_check('sigma', 0.0, 1e-10)],
                'summary': {'points': 1}}

    code = RunManager().execute('geometry', pipeline, write_config(GEOMETRY_CONFIG), out_dir, seed=7)
    assert code == EXIT_OK
    manifest = read_manifest(out_dir)
    assert manifest['status'] == 'ok' and manifest['seed'] == 7
    assert manifest['config']['seed'] == 7
    assert manifest['config_hash'] == config_hash(manifest['config'])
    assert manifest['invariant_summary']['sigma']['passed']
    assert (out_dir / 'invariants.json').exists()


def test_no_convergence_exit_code(write_config, tmp_path):
    def pipeline(config, out, rng):
        raise NoConvergence("sin convergencia", iterations=3, residual=1.0)

    code = RunManager().execute('geometry', pipeline, write_config(GEOMETRY_CONFIG), tmp_path / 'out')
    assert code == EXIT_NO_CONVERGENCE
    assert read_manifest(tmp_path / 'out')['status'] == 'no_convergence'


def test_no_convergence_status_from_pipeline(write_config, tmp_path):
    def pipeline(config, out, rng):
        return {'checks': [], 'status': 'no_convergence'}

    assert RunManager().execute('geometry', pipeline, write_config(GEOMETRY_CONFIG),
                                tmp_path / 'out') == EXIT_NO_CONVERGENCE


def test_domain_error_exit_code(write_config, tmp_path):
    def pipeline(config, out, rng):
        raise SingularFP("det Φ = 0")

    code = RunManager().execute('geometry', pipeline, write_config(GEOMETRY_CONFIG), tmp_path / 'out')
    assert code == EXIT_ERROR
    manifest = read_manifest(tmp_path / 'out')
    assert manifest['status'] == 'error' and 'SingularFP' in manifest['error']


def test_invalid_config_still_writes_manifest(write_config, tmp_path):
    calls = []
    path = write_config({'system': {'name': 'unknown'}})
    code = RunManager().execute('geometry', lambda *args: calls.append(args), path, tmp_path / 'out')
    assert code == EXIT_ERROR
    assert not calls
    manifest = read_manifest(tmp_path / 'out')
    assert manifest['status'] == 'config_error' and manifest['config'] is None
