import json

import numpy as np
import pytest

from utils.report_service import MissingArtifact, ReportService, invariant_check


@pytest.fixture
def service():
    return ReportService()


def test_summarize_keeps_the_worst_value(service):
    checks = [invariant_check('sigma', 1e-12, 1e-10), invariant_check('sigma', 5e-11, 1e-10),
              invariant_check('energy_drift', 2e-7, 1e-7, 'integration')]
    rows = service.summarize(checks)
    assert [row['name'] for row in rows] == ['energy_drift', 'sigma']
    assert rows[1]['value'] == 5e-11 and rows[1]['passed']
    assert not rows[0]['passed']


def test_tolerance_scale(service):
    rows = service.summarize([invariant_check('energy_drift', 2e-7, 1e-7)], tolerance_scale=10.0)
    assert rows[0]['passed']
    assert rows[0]['tolerance'] == pytest.approx(1e-6)


def test_csv_uses_repr_floats(service, tmp_path):
    path = service.write_csv(tmp_path / 'out.csv', ['t', 'x'], [[0.1, np.float64(1 / 3)], [0.2, 7]])
    lines = path.read_text(encoding='utf-8').splitlines()
    assert lines == ['t,x', f'0.1,{1 / 3!r}', '0.2,7']


def test_json_is_sorted_and_native(service, tmp_path):
    path = service.write_json(tmp_path / 'data.json', {'b': np.arange(2), 'a': np.float64(1.5)})
    text = path.read_text(encoding='utf-8')
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {'a': 1.5, 'b': [0, 1]}


def test_report_needs_invariants(service, tmp_path):
    with pytest.raises(MissingArtifact):
        service.report_invariants(tmp_path)


def test_report_flags_out_of_tolerance(service, tmp_path):
    service.write_invariants(tmp_path, 'geometry', [invariant_check('sigma', 1e-12, 1e-10),
                                                    invariant_check('killing', 1e-3, 1e-7)])
    result = service.report_invariants(tmp_path)
    assert result['flagged'] == ['killing']
    report = (tmp_path / 'report.md').read_text(encoding='utf-8')
    assert '| sigma |' in report and '1 de 2' in report
