"""
🗂️ Gestión de ejecuciones
Proporciona:
- Inicio y cierre de cada ejecución con marcas de tiempo ISO
- Hash sha256 del RunConfig resuelto y versión de la herramienta
- Manifiesto escrito de forma atómica al terminar (también si falla)
- Traducción de errores del dominio a códigos de salida
"""

from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Optional
import hashlib
import json
import logging

import click
import numpy as np

from config import Config
from utils.config_validator import ConfigInvalid, load_run_config
from utils.equilibria import EigenCrossing
from utils.lattice_gauge import GribovViolation, InvalidField
from utils.lie_algebra import IndefiniteKilling, JacobiViolation, NotAntisymmetric
from utils.mechanical_system import ChartOutOfRange, NotOnSigma
from utils.numeric_helpers import IllConditioned, NoConvergence, SingularFP
from utils.reduced_dynamics import NotHorizontal, StepFailure
from utils.report_service import MissingArtifact, report_service

logger = logging.getLogger(__name__)

MANIFEST_FILE = 'manifest.json'

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_CONVERGENCE = 2

# Errores que terminan la ejecución con código 1
DOMAIN_ERRORS = (ConfigInvalid, MissingArtifact, SingularFP, IllConditioned, NotOnSigma,
                 ChartOutOfRange, NotHorizontal, StepFailure, EigenCrossing, GribovViolation,
                 InvalidField, JacobiViolation, NotAntisymmetric, IndefiniteKilling, ValueError)


def config_hash(config: Dict[str, Any]) -> str:
    """sha256 del JSON canónico (claves ordenadas, sin espacios)"""
    canonical = json.dumps(config, sort_keys=True, separators=(',', ':'), ensure_ascii=False)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunManager:
    """Gestor centralizado del ciclo de vida de una ejecución"""

    def __init__(self):
        self.current: Optional[Dict[str, Any]] = None

    def start_run(self, subcommand, config, out_dir, seed) -> Dict[str, Any]:
        """
        Iniciar una ejecución

        Args:
            subcommand: nombre del subcomando
            config: RunConfig resuelto (None si no se pudo leer)
            out_dir: directorio de salida
            seed: semilla efectiva
        """
        self.current = {
            'tool': Config.TOOL_NAME,
            'version': Config.VERSION,
            'subcommand': subcommand,
            'config': config,
            'config_hash': config_hash(config) if config is not None else None,
            'seed': seed,
            'out_dir': str(out_dir),
            'started_at': _now(),
        }
        logger.info(f"🚀 Ejecución {subcommand} iniciada (semilla {seed})")
        return self.current

    def end_run(self, status, exit_code, outputs=None, invariants=None, summary=None, error=None):
        """Cerrar la ejecución y escribir el manifiesto de forma atómica"""
        if self.current is None:
            raise RuntimeError("No hay ejecución activa")
        record = dict(self.current)
        record.update({
            'ended_at': _now(),
            'status': status,
            'exit_code': exit_code,
            'outputs': outputs or {},
            'invariant_summary': invariants or {},
            'summary': summary or {},
            'error': error,
        })
        report_service.write_json(Path(record['out_dir']) / MANIFEST_FILE, record)
        self.current = None
        logger.info(f"🔚 Ejecución {record['subcommand']} terminada: {status} (código {exit_code})")
        return record

    def execute(self, subcommand, pipeline: Callable, config_path, out_dir=None, seed=None) -> int:
        """
        Carga y valida el RunConfig, ejecuta el pipeline y escribe invariantes y manifiesto

        El pipeline recibe (config, out_dir, rng) y devuelve un dict con
        'outputs' (archivo → columnas), 'checks', 'status' y 'summary'.

        Returns:
            int: 0 éxito, 2 sin convergencia, 1 error de configuración o de geometría
        """
        try:
            config = load_run_config(config_path, subcommand)
        except ConfigInvalid as e:
            logger.error(f"❌ {e}")
            click.echo(f"❌ Configuración inválida: {e}", err=True)
            if out_dir is not None:
                self.start_run(subcommand, None, Path(out_dir), seed)
                self.end_run('config_error', EXIT_ERROR, error=str(e))
            return EXIT_ERROR

        seed = config['seed'] if seed is None else int(seed)
        config['seed'] = seed
        out_path = Path(out_dir or config.get('out') or Path('runs') / subcommand)
        out_path.mkdir(parents=True, exist_ok=True)
        self.start_run(subcommand, config, out_path, seed)

        try:
            result = pipeline(config, out_path, np.random.default_rng(seed))
        except DOMAIN_ERRORS as e:
            logger.error(f"❌ {type(e).__name__}: {e}")
            click.echo(f"❌ {type(e).__name__}: {e}", err=True)
            self.end_run('error', EXIT_ERROR, error=f"{type(e).__name__}: {e}")
            return EXIT_ERROR
        except NoConvergence as e:
            logger.error(f"❌ Sin convergencia: {e}")
            click.echo(f"❌ Sin convergencia: {e}", err=True)
            self.end_run('no_convergence', EXIT_NO_CONVERGENCE, error=str(e))
            return EXIT_NO_CONVERGENCE

        checks = result.get('checks', [])
        report_service.write_invariants(out_path, subcommand, checks)
        rows = report_service.summarize(checks)
        invariants = {row['name']: {'value': row['value'], 'tolerance': row['tolerance'],
                                    'passed': row['passed']} for row in rows}
        outputs = dict(result.get('outputs', {}))
        outputs['invariants.json'] = None
        status = result.get('status', 'ok')
        exit_code = EXIT_NO_CONVERGENCE if status == 'no_convergence' else EXIT_OK
        self.end_run(status, exit_code, outputs, invariants, result.get('summary'))
        click.echo(f"{'✅' if exit_code == EXIT_OK else '⚠️'} {subcommand}: {status}, resultados en {out_path}")
        return exit_code


# Instancia global del gestor de ejecuciones
run_manager = RunManager()
