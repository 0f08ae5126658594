"""
⚖️ Subcomando equilibria: búsqueda de equilibrios relativos sobre Σ
"""

import logging

import click
import numpy as np

from config import Config
from utils.builtin_systems import random_sigma_points, system_from_config
from utils.bundle_geometry import evaluate_geometry
from utils.config_validator import tolerance_dict
from utils.equilibria import (momentum_eigenproblem, solve_equilibrium, vertical_residual,
                              verify_equilibrium_dynamics)
from utils.numeric_helpers import NoConvergence
from utils.report_service import invariant_check, report_service
from utils.run_manager import run_manager
from utils.validation_decorators import run_options

logger = logging.getLogger(__name__)

EQUILIBRIA_FILE = 'equilibria.json'


def eigen_listing(sys, q):
    """Pares (λ, e) en q con el residuo ‖(kγ⁻¹)e - λe‖ y el residuo vertical de e"""
    geom = evaluate_geometry(sys, q, with_derivatives=False)
    operator = sys.algebra.k @ geom.gamma_inv
    listing = []
    for lam, vector in momentum_eigenproblem(sys, q, geom):
        listing.append({
            'lambda': lam,
            'vector': vector,
            'eigen_residual': float(np.linalg.norm(operator @ vector - lam * vector)),
            'vertical_residual': float(np.linalg.norm(vertical_residual(sys, q, vector, geom))),
        })
    return listing


def run_equilibria(config, out_dir, rng):
    tolerances = tolerance_dict(config)
    options = config['solver']
    sys = system_from_config(config['system'])
    initial = config['initial']
    q_guess = np.asarray(initial['q'], dtype=float) if initial.get('q') is not None \
        else random_sigma_points(sys, rng, 1)[0]
    if q_guess.size != sys.n_p:
        raise ValueError(f"initial.q tiene dimensión {q_guess.size}, se esperaba {sys.n_p}")

    status = 'ok'
    try:
        equilibrium = solve_equilibrium(sys, q_guess, options['eigen_index'], options['scale_guess'],
                                        options['tol'], options['max_iter'], options['fd_step'], tolerances)
    except NoConvergence as e:
        if e.best is None:
            raise
        equilibrium, status = e.best, 'no_convergence'

    listing = eigen_listing(sys, equilibrium.q)
    checks = [
        invariant_check('residual_h', equilibrium.residual_h, options['tol'], 'solver'),
        invariant_check('residual_v', equilibrium.residual_v, tolerances['identity'], 'solver'),
    ]
    checks.extend(invariant_check('eigen_residual', entry['eigen_residual'], tolerances['identity'])
                  for entry in listing)
    checks.extend(invariant_check('eigenvector_vertical_residual', entry['vertical_residual'],
                                  tolerances['identity']) for entry in listing)

    data = {'system': sys.name, 'status': status, 'equilibrium': equilibrium.to_dict(),
            'eigenpairs': listing}
    if options['verify'] and status == 'ok':
        verification = verify_equilibrium_dynamics(sys, equilibrium, options['verify_t_end'],
                                                   options['verify_dt'])
        checks.append(invariant_check('equilibrium_q_dot', verification['max_q_dot'],
                                      Config.TOL_EQUILIBRIUM_Q_DOT, 'dynamics'))
        checks.append(invariant_check('equilibrium_p_drift', verification['p_drift'],
                                      Config.TOL_EQUILIBRIUM_P_DRIFT, 'dynamics'))
        data['verification'] = verification

    report_service.write_json(out_dir / EQUILIBRIA_FILE, data)
    return {
        'outputs': {EQUILIBRIA_FILE: None},
        'checks': checks,
        'status': status,
        'summary': {'system': sys.name, 'lambda': equilibrium.lam, 'scale': equilibrium.scale,
                    'iterations': equilibrium.iterations, 'converged': equilibrium.converged},
    }


@click.command('equilibria')
@run_options
@click.pass_context
def equilibria_cmd(ctx, config_path, out_dir, seed):
    """Equilibrio relativo en la rama del autovalor eigen_index"""
    ctx.exit(run_manager.execute('equilibria', run_equilibria, config_path, out_dir, seed))
