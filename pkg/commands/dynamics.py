"""
🌀 Subcomando integrate: ecuaciones reducidas con RK4, oráculo y estudio de convergencia
"""

import logging

import click
import numpy as np

from config import Config
from utils.builtin_systems import random_sigma_points, system_from_config
from utils.config_validator import tolerance_dict
from utils.mechanical_system import project_to_sigma
from utils.reduced_dynamics import (convergence_study, full_space_oracle, full_velocity, integrate,
                                    reduced_state)
from utils.report_service import invariant_check, report_service
from utils.run_manager import run_manager
from utils.validation_decorators import run_options

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = 'trajectory.csv'
ORACLE_FILE = 'oracle.csv'


def initial_state(sys, initial, rng, tolerances):
    """Estado reducido inicial; sin `q` se toma un punto aleatorio de Σ"""
    if initial.get('q') is not None:
        q = np.asarray(initial['q'], dtype=float)
    else:
        q = random_sigma_points(sys, rng, 1)[0]
    if q.size != sys.n_p:
        raise ValueError(f"initial.q tiene dimensión {q.size}, se esperaba {sys.n_p}")
    point = project_to_sigma(sys, q, tolerances['sigma'])
    q_dot = initial.get('q_dot')
    p = initial.get('p')
    if q_dot is not None and len(q_dot) != sys.n_p:
        raise ValueError(f"initial.q_dot tiene dimensión {len(q_dot)}, se esperaba {sys.n_p}")
    if p is not None and len(p) != sys.n_g:
        raise ValueError(f"initial.p tiene dimensión {len(p)}, se esperaba {sys.n_g}")
    return reduced_state(sys, point, q_dot, p, tolerances=tolerances)


def trajectory_checks(trajectory, tolerances, prefix=''):
    return [
        invariant_check(f'{prefix}energy_drift', trajectory.energy_drift(), Config.TOL_ENERGY_DRIFT, 'dynamics'),
        invariant_check(f'{prefix}sigma', trajectory.max_invariant('sigma'), Config.TOL_SIGMA_DRIFT, 'dynamics'),
        invariant_check(f'{prefix}horizontal', trajectory.max_invariant('horizontal'),
                        tolerances['horizontal'], 'dynamics'),
    ]


def oracle_comparison(sys, reduced, oracle):
    """Máximas diferencias en q y en la norma k̂ de p sobre las muestras comunes"""
    q_error, p_error = 0.0, 0.0
    for mine, theirs in zip(reduced.samples, oracle.samples):
        if abs(mine.t - theirs.t) > 1e-12:
            raise ValueError(f"Muestras desalineadas: t={mine.t} frente a t={theirs.t}")
        q_error = max(q_error, float(np.max(np.abs(mine.q.q - theirs.q.q))))
        p_error = max(p_error, float(sys.algebra.k_hat_norm(mine.p - theirs.p)))
    return {'q_error': q_error, 'p_error': p_error}


def run_integrate(config, out_dir, rng):
    tolerances = tolerance_dict(config)
    options = config['integrator']
    sys = system_from_config(config['system'])
    state0 = initial_state(sys, config['initial'], rng, tolerances)
    kwargs = {'method': options['method'], 'vertical_form': options['vertical_form'],
              'momentum': options['momentum'], 'tolerances': tolerances}

    trajectory = integrate(sys, state0, options['t_end'], options['dt'],
                           sample_every=options['sample_every'], **kwargs)
    report_service.write_csv(out_dir / TRAJECTORY_FILE, trajectory.columns(), trajectory.rows())
    outputs = {TRAJECTORY_FILE: trajectory.columns()}
    checks = trajectory_checks(trajectory, tolerances)
    summary = {'system': sys.name, 'samples': len(trajectory.samples),
               'energy_drift': trajectory.energy_drift(), 'final_t': trajectory.final.t}

    if options['oracle']:
        _, fixed = full_space_oracle(sys, state0.q.q, full_velocity(sys, state0), options['t_end'],
                                     options['dt'], options['sample_every'], tolerances)
        report_service.write_csv(out_dir / ORACLE_FILE, fixed.columns(), fixed.rows())
        outputs[ORACLE_FILE] = fixed.columns()
        comparison = oracle_comparison(sys, trajectory, fixed)
        checks.append(invariant_check('oracle_q', comparison['q_error'], Config.TOL_ORACLE_Q, 'oracle'))
        checks.append(invariant_check('oracle_p', comparison['p_error'], Config.TOL_ORACLE_P, 'oracle'))
        summary['oracle'] = comparison
        logger.info(f"🔎 Oráculo: |Δq| = {comparison['q_error']:.3e}, |Δp| = {comparison['p_error']:.3e}")

    if options['convergence']:
        study = convergence_study(sys, state0, options['t_end'], options['dt'], **kwargs)
        low, high = Config.CONVERGENCE_RATIO
        # distancia del cociente al intervalo aceptado
        outside = max(0.0, low - study['ratio'], study['ratio'] - high) if np.isfinite(study['ratio']) else 0.0
        checks.append(invariant_check('convergence_ratio', outside, tolerances['identity'], 'convergence'))
        summary['convergence'] = study

    return {'outputs': outputs, 'checks': checks, 'status': 'ok', 'summary': summary}


@click.command('integrate')
@run_options
@click.pass_context
def integrate_cmd(ctx, config_path, out_dir, seed):
    """Integra las ecuaciones reducidas desde un estado inicial sobre Σ"""
    ctx.exit(run_manager.execute('integrate', run_integrate, config_path, out_dir, seed))
