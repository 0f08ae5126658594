"""
📐 Subcomando geometry: volcado de la geometría del fibrado en puntos de Σ
"""

import logging

import click
import numpy as np

from utils.builtin_systems import random_sigma_points, system_from_config
from utils.bundle_geometry import (RESIDUAL_CLASSES, evaluate_geometry, identity_residuals,
                                   pseudoinverse_blocks, residual_tolerance)
from utils.config_validator import tolerance_dict
from utils.mechanical_system import check_system, project_to_sigma
from utils.report_service import invariant_check, report_service
from utils.run_manager import run_manager
from utils.validation_decorators import run_options

logger = logging.getLogger(__name__)

GEOMETRY_FILE = 'geometry.json'


def sample_points(sys, initial, rng, tolerances):
    """
    Puntos de la sección pedidos en `initial`: lista explícita, q suelto o aleatorios.
    Con off_sigma los aleatorios se generan fuera de Σ y se proyectan.
    """
    if initial.get('points'):
        raw = [np.asarray(q, dtype=float) for q in initial['points']]
    elif initial.get('q') is not None:
        raw = [np.asarray(initial['q'], dtype=float)]
    else:
        count = max(initial.get('random_points', 0), 1)
        raw = random_sigma_points(sys, rng, count, on_sigma=not initial.get('off_sigma', False))
    for q in raw:
        if q.size != sys.n_p:
            raise ValueError(f"Punto de dimensión {q.size}, se esperaba {sys.n_p}")
    return [project_to_sigma(sys, q, tolerances['sigma']) for q in raw]


def system_checks(sys, points, tolerances):
    report = check_system(sys, [p.q for p in points])
    checks = [
        invariant_check('killing', report['killing'], tolerances['killing'], 'finite_difference'),
        invariant_check('equivariance', report['equivariance'], tolerances['killing'], 'finite_difference'),
        invariant_check('potential_invariance', report['potential_invariance'], tolerances['killing'],
                        'finite_difference'),
        invariant_check('metric_symmetry', report['metric_symmetry'], tolerances['identity']),
        # positividad: residuo nulo si el menor autovalor es positivo
        invariant_check('metric_positivity', max(0.0, -report['metric_min_eigenvalue']), tolerances['identity']),
    ]
    return report, checks


def run_geometry(config, out_dir, rng):
    tolerances = tolerance_dict(config)
    sys = system_from_config(config['system'])
    points = sample_points(sys, config['initial'], rng, tolerances)
    logger.info(f"📐 Geometría de {sys.name} en {len(points)} puntos")

    entries, checks = [], []
    for point in points:
        geom = evaluate_geometry(sys, point, with_derivatives=True, tolerances=tolerances)
        residuals = identity_residuals(sys, geom)
        entry = geom.to_dict()
        entry['residuals'] = residuals
        entry['pseudoinverse'] = pseudoinverse_blocks(sys, point, geom)
        entries.append(entry)
        checks.extend(invariant_check(name, value, residual_tolerance(name, tolerances),
                                      RESIDUAL_CLASSES.get(name, 'identity'))
                      for name, value in residuals.items())

    report, system_rows = system_checks(sys, points, tolerances)
    checks.extend(system_rows)
    report_service.write_json(out_dir / GEOMETRY_FILE, {
        'system': sys.name,
        'parameters': sys.parameters,
        'derivative_mode': sys.derivative_mode,
        'points': entries,
        'system_checks': report,
    })
    worst = max(c['value'] for c in checks)
    return {
        'outputs': {GEOMETRY_FILE: None},
        'checks': checks,
        'status': 'ok',
        'summary': {'system': sys.name, 'points': len(points), 'max_residual': worst},
    }


@click.command('geometry')
@run_options
@click.pass_context
def geometry_cmd(ctx, config_path, out_dir, seed):
    """Geometría del fibrado (γ, 𝒜, N, Π, Gᴴ, ℱ, Γᴴ, 𝒟γ) en puntos de Σ"""
    ctx.exit(run_manager.execute('geometry', run_geometry, config_path, out_dir, seed))
