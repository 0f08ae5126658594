"""
📊 Servicio de reportes de wong-reduce
Proporciona:
- Escritura determinista de artefactos CSV/JSON (repr de los flotantes)
- Registro de chequeos de invariantes con su clase y tolerancia
- Tabla resumen de invariantes renderizada con Jinja2
"""

import csv
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List

import numpy as np
from jinja2 import Environment

logger = logging.getLogger(__name__)

INVARIANTS_FILE = 'invariants.json'
REPORT_FILE = 'report.md'

REPORT_TEMPLATE = """# Reporte de invariantes: {{ subcommand }}

Escala de tolerancia: {{ scale }}

| Invariante | Clase | Máximo residuo | Tolerancia | Estado |
|---|---|---|---|---|
{% for row in rows -%}
| {{ row['name'] }} | {{ row['class'] }} | {{ '%.3e' % row['value'] }} | {{ '%.3e' % row['tolerance'] }} | {{ '✅' if row['passed'] else '❌' }} |
{% endfor %}
{{ passed }} de {{ rows|length }} chequeos dentro de tolerancia.
"""


class MissingArtifact(Exception):
    """Falta un artefacto de una ejecución terminada"""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


def _plain(value):
    """Convierte arreglos y escalares de numpy a tipos JSON nativos"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    return value


def format_float(value) -> str:
    return repr(float(value))


def invariant_check(name, value, tolerance, klass='identity') -> Dict[str, Any]:
    return {'name': name, 'class': klass, 'value': float(value), 'tolerance': float(tolerance)}


class ReportService:
    """Servicio centralizado de artefactos y reportes"""

    def __init__(self):
        self.environment = Environment(autoescape=False, trim_blocks=True)

    def write_json(self, path, data):
        """JSON con claves ordenadas escrito de forma atómica"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(_plain(data), indent=2, sort_keys=True, ensure_ascii=False)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.')
        with os.fdopen(fd, 'w', encoding='utf-8') as handle:
            handle.write(text + '\n')
        os.replace(tmp, path)
        logger.debug(f"💾 {path.name} escrito")
        return path

    def read_json(self, path):
        path = Path(path)
        if not path.exists():
            raise MissingArtifact(f"No existe {path}", path)
        with open(path, encoding='utf-8') as handle:
            return json.load(handle)

    def write_csv(self, path, columns: List[str], rows: Iterable[Iterable[Any]]):
        """CSV con flotantes en repr: salidas idénticas byte a byte para la misma entrada"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
        logger.debug(f"💾 {path.name} escrito")
        return path

    def write_invariants(self, out_dir, subcommand, checks: List[Dict[str, Any]]):
        return self.write_json(Path(out_dir) / INVARIANTS_FILE, {'subcommand': subcommand, 'checks': checks})

    def summarize(self, checks: List[Dict[str, Any]], tolerance_scale=1.0) -> List[Dict[str, Any]]:
        """Máximo por invariante; marca los que superan tolerancia·escala"""
        merged: Dict[str, Dict[str, Any]] = {}
        for check in checks:
            current = merged.get(check['name'])
            if current is None or check['value'] > current['value']:
                merged[check['name']] = dict(check)
        rows = []
        for name in sorted(merged):
            row = merged[name]
            row['passed'] = bool(row['value'] < row['tolerance'] * tolerance_scale)
            row['tolerance'] = row['tolerance'] * tolerance_scale
            rows.append(row)
        return rows

    def render_table(self, subcommand, rows, tolerance_scale=1.0) -> str:
        template = self.environment.from_string(REPORT_TEMPLATE)
        return template.render(subcommand=subcommand, rows=rows, scale=tolerance_scale,
                               passed=sum(1 for r in rows if r['passed']))

    def report_invariants(self, out_dir, tolerance_scale=1.0) -> Dict[str, Any]:
        """
        Lee invariants.json de una ejecución terminada y escribe report.md

        Raises:
            MissingArtifact
        """
        out_dir = Path(out_dir)
        data = self.read_json(out_dir / INVARIANTS_FILE)
        rows = self.summarize(data.get('checks', []), tolerance_scale)
        text = self.render_table(data.get('subcommand', '?'), rows, tolerance_scale)
        (out_dir / REPORT_FILE).write_text(text, encoding='utf-8')
        flagged = [r['name'] for r in rows if not r['passed']]
        if flagged:
            logger.warning(f"⚠️ {len(flagged)} invariantes fuera de tolerancia: {', '.join(flagged)}")
        else:
            logger.info(f"✅ Los {len(rows)} invariantes están dentro de tolerancia")
        return {'rows': rows, 'flagged': flagged, 'report': str(out_dir / REPORT_FILE), 'text': text}


# Instancia global del servicio
report_service = ReportService()
