"""
🧊 Subcomandos de la red: lattice-geometry, lattice-integrate y lattice-equilibria
"""

import logging

import click
import numpy as np

from commands.dynamics import trajectory_checks
from config import Config
from utils.builtin_systems import rotation_matrix
from utils.config_validator import tolerance_dict
from utils.lattice_gauge import (GaugeField, GaugeLattice, align_global_frame, coulomb_project,
                                 fp_operator, gauge_constraint, global_rotate, green_eigenpairs,
                                 gribov_margin, potential_and_gradient,
                                 random_gauge_field, zero_field)
from utils.numeric_helpers import NoConvergence
from utils.reduced_dynamics import integrate
from utils.report_service import invariant_check, report_service
from utils.run_manager import run_manager
from utils.validation_decorators import run_options
from utils.yang_mills import (YangMillsDynamics, generic_cross_check, lattice_geometry, lattice_state,
                              ym_equilibrium_residuals, ym_solve_equilibrium)

logger = logging.getLogger(__name__)

LATTICE_GEOMETRY_FILE = 'lattice_geometry.json'
LATTICE_TRAJECTORY_FILE = 'lattice_trajectory.csv'
LATTICE_EQUILIBRIA_FILE = 'lattice_equilibria.json'


# ============================================================================
# Construcción de campos desde la configuración
# ============================================================================

def build_lattice(section) -> GaugeLattice:
    return GaugeLattice(section['L'], section['spacing'])


def build_field(lattice, section, rng, tolerances) -> GaugeField:
    """
    Campo inicial: cero, aleatorio transversal o leído de un JSON con `a_field`
    (también acepta lattice_equilibria.json). Los campos leídos se llevan a Σ.

    Raises:
        MissingArtifact, InvalidField, ValueError
    """
    init = section['init']
    if init == 'zero':
        return zero_field(lattice)
    if init == 'random':
        return random_gauge_field(lattice, rng, section['amplitude'])
    if not section.get('path'):
        raise ValueError("lattice.field.path es obligatorio con init = file")
    data = report_service.read_json(section['path'])
    values = data.get('a_field', data.get('equilibrium', {}).get('a_field'))
    if values is None:
        raise ValueError(f"{section['path']} no contiene a_field")
    field_ = GaugeField(lattice, values)
    if float(np.max(np.abs(gauge_constraint(lattice, field_.a_field)))) >= tolerances['sigma']:
        logger.info("🔄 Campo leído fuera de Σ: proyección de Coulomb y marco global")
        field_ = align_global_frame(coulomb_project(lattice, field_.a_field))
    return field_


def build_velocity(lattice, section, rng):
    if section['init'] == 'zero':
        return np.zeros(lattice.flat_dim)
    return rng.uniform(-section['amplitude'], section['amplitude'], size=lattice.flat_dim)


def build_momentum(field_, section, rng, geo=None):
    lattice = field_.lattice
    init = section['init']
    if init == 'zero':
        return np.zeros(lattice.group_dim)
    if init == 'random':
        return rng.uniform(-section['amplitude'], section['amplitude'], size=lattice.group_dim)
    geo = geo or lattice_geometry(field_)
    pairs = green_eigenpairs(lattice, geo.green)
    if section['index'] >= len(pairs):
        raise ValueError(f"lattice.momentum.index = {section['index']} fuera de rango ({len(pairs)} autovectores)")
    return section['scale'] * pairs[section['index']][1]


# ============================================================================
# lattice-geometry
# ============================================================================

def potential_gradient_error(field_, rng, step=1e-5):
    """Error relativo del gradiente de V frente a diferencias centradas en una dirección aleatoria"""
    lattice = field_.lattice
    direction = rng.normal(size=lattice.flat_dim)
    direction /= np.linalg.norm(direction)
    _, gradient = potential_and_gradient(field_)
    forward = potential_and_gradient(GaugeField(lattice, field_.a_field + step * direction))[0]
    backward = potential_and_gradient(GaugeField(lattice, field_.a_field - step * direction))[0]
    numeric = (forward - backward) / (2 * step)
    analytic = float(gradient @ direction)
    scale = max(abs(analytic), abs(numeric), 1.0)
    return abs(analytic - numeric) / scale


def global_invariance_error(field_, rng):
    """Cambio del espectro de γ bajo una rotación global aleatoria"""
    rotated = global_rotate(field_, rotation_matrix(rng.normal(size=3)))
    before = np.linalg.eigvalsh(fp_operator(field_))
    after = np.linalg.eigvalsh(fp_operator(rotated))
    return float(np.max(np.abs(before - after)))


def run_lattice_geometry(config, out_dir, rng):
    tolerances = tolerance_dict(config)
    section = config['lattice']
    lattice = build_lattice(section)
    field_ = build_field(lattice, section['field'], rng, tolerances)
    geo = lattice_geometry(field_, tolerances)
    value, _ = potential_and_gradient(field_)
    margin = gribov_margin(field_)
    if margin < -Config.GRIBOV_TOL:
        logger.warning(f"⚠️ Campo fuera de la región de Gribov (margen {margin:.3e})")

    orbit_identity = geo.A_conn @ geo.D - (np.eye(lattice.group_dim) - geo.green.kernel_projector)
    checks = [
        invariant_check('sigma', np.max(np.abs(gauge_constraint(lattice, field_.a_field))), tolerances['sigma']),
        invariant_check('connection_on_orbits', np.max(np.abs(orbit_identity)), tolerances['identity']),
        invariant_check('connection_annihilates_horizontal', np.max(np.abs(geo.A_conn @ geo.Pi_proj)),
                        tolerances['identity']),
        invariant_check('Pi_idempotent', np.max(np.abs(geo.Pi_proj @ geo.Pi_proj - geo.Pi_proj)),
                        tolerances['identity']),
        invariant_check('fp_global_invariance', global_invariance_error(field_, rng), tolerances['identity']),
        invariant_check('potential_gradient', potential_gradient_error(field_, rng),
                        Config.TOL_POTENTIAL_GRADIENT, 'finite_difference'),
    ]
    data = {
        'lattice': lattice.to_dict(),
        'geometry': geo.summary(),
        'gribov_margin': margin,
        'potential': value,
        'a_field': field_.a_field,
        'eigenpairs': [{'lambda': lam, 'vector': vector} for lam, vector in green_eigenpairs(lattice, geo.green)],
    }
    if section['cross_check']:
        differences = generic_cross_check(field_, geo, rng, tolerances)
        for name, difference in differences.items():
            checks.append(invariant_check(f'cross_check_{name}', difference, Config.TOL_CROSS_CHECK, 'cross_check'))
        data['cross_check'] = differences
        logger.info(f"🔎 Red frente al camino genérico: máx. diferencia {max(differences.values()):.3e}")

    report_service.write_json(out_dir / LATTICE_GEOMETRY_FILE, data)
    return {
        'outputs': {LATTICE_GEOMETRY_FILE: None},
        'checks': checks,
        'status': 'ok',
        'summary': {'L': lattice.L, 'kernel_dim': geo.green.kernel_dim, 'gribov_margin': margin,
                    'potential': value},
    }


# ============================================================================
# lattice-integrate
# ============================================================================

def run_lattice_integrate(config, out_dir, rng):
    tolerances = tolerance_dict(config)
    section = config['lattice']
    options = config['integrator']
    lattice = build_lattice(section)
    field_ = build_field(lattice, section['field'], rng, tolerances)
    a_dot = build_velocity(lattice, section['velocity'], rng)
    p = build_momentum(field_, section['momentum'], rng)
    dynamics = YangMillsDynamics(lattice, options['vertical_form'], options['momentum'], tolerances)
    state0 = lattice_state(field_, a_dot, p)

    trajectory = integrate(dynamics.sys, state0, options['t_end'], options['dt'], options['method'],
                           tolerances=tolerances, sample_every=options['sample_every'], dynamics=dynamics)
    report_service.write_csv(out_dir / LATTICE_TRAJECTORY_FILE, trajectory.columns(), trajectory.rows())
    return {
        'outputs': {LATTICE_TRAJECTORY_FILE: trajectory.columns()},
        'checks': trajectory_checks(trajectory, tolerances),
        'status': 'ok',
        'summary': {'L': lattice.L, 'samples': len(trajectory.samples),
                    'energy_drift': trajectory.energy_drift(), 'final_t': trajectory.final.t},
    }


# ============================================================================
# lattice-equilibria
# ============================================================================

def history_increase(history):
    """Mayor aumento entre residuos consecutivos (0 si la historia es monótona)"""
    steps = np.diff(np.asarray(history, dtype=float))
    return float(max(steps.max(), 0.0)) if steps.size else 0.0


def run_lattice_equilibria(config, out_dir, rng):
    tolerances = tolerance_dict(config)
    section = config['lattice']
    options = config['solver']
    lattice = build_lattice(section)
    guess = build_field(lattice, section['field'], rng, tolerances)

    status = 'ok'
    try:
        equilibrium = ym_solve_equilibrium(guess, options['eigen_index'], options['scale_guess'],
                                           options['tol'], options['max_iter'], options['fd_step'], tolerances)
    except NoConvergence as e:
        if e.best is None:
            raise
        equilibrium, status = e.best, 'no_convergence'

    geo = lattice_geometry(equilibrium.field, tolerances)
    pairs = green_eigenpairs(lattice, geo.green)
    eigen_vertical = [float(np.linalg.norm(ym_equilibrium_residuals(equilibrium.field, vector, geo)[1]))
                      for _, vector in pairs]
    checks = [
        invariant_check('residual_h', equilibrium.residual_h, options['tol'], 'solver'),
        invariant_check('residual_v', equilibrium.residual_v, tolerances['identity'], 'solver'),
        invariant_check('history_monotone', history_increase(equilibrium.history), tolerances['identity'], 'solver'),
    ]
    checks.extend(invariant_check('eigenvector_vertical_residual', value, tolerances['identity'])
                  for value in eigen_vertical)

    report_service.write_json(out_dir / LATTICE_EQUILIBRIA_FILE, {
        'lattice': lattice.to_dict(),
        'status': status,
        'equilibrium': equilibrium.to_dict(),
        'gribov_margin': gribov_margin(equilibrium.field),
        'eigenpairs': [{'lambda': lam, 'vector': vector, 'vertical_residual': res}
                       for (lam, vector), res in zip(pairs, eigen_vertical)],
    })
    return {
        'outputs': {LATTICE_EQUILIBRIA_FILE: None},
        'checks': checks,
        'status': status,
        'summary': {'L': lattice.L, 'lambda': equilibrium.lam, 'iterations': equilibrium.iterations,
                    'converged': equilibrium.converged},
    }


# ============================================================================
# Comandos
# ============================================================================

@click.command('lattice-geometry')
@run_options
@click.pass_context
def lattice_geometry_cmd(ctx, config_path, out_dir, seed):
    """Green deflactada, conexión de Coulomb, margen de Gribov y V[A] en la red"""
    ctx.exit(run_manager.execute('lattice-geometry', run_lattice_geometry, config_path, out_dir, seed))


@click.command('lattice-integrate')
@run_options
@click.pass_context
def lattice_integrate_cmd(ctx, config_path, out_dir, seed):
    """Integra las ecuaciones de Yang-Mills reducidas en la red"""
    ctx.exit(run_manager.execute('lattice-integrate', run_lattice_integrate, config_path, out_dir, seed))


@click.command('lattice-equilibria')
@run_options
@click.pass_context
def lattice_equilibria_cmd(ctx, config_path, out_dir, seed):
    """Equilibrios relativos de la red (vacío o rama de un autovector de γ⁻)"""
    ctx.exit(run_manager.execute('lattice-equilibria', run_lattice_equilibria, config_path, out_dir, seed))
