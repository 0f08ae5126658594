"""
🌀 Dinámica reducida (ecuaciones de Wong)
Proporciona:
- ReducedState / Trajectory con el registro de invariantes por muestra
- Términos separados de la ecuación horizontal y la ecuación vertical para p
- Integrador RK4 con re-proyección a Σ y re-horizontalización tras cada paso
- Oráculo en el espacio completo (geodésicas de G con potencial) fijado a Σ
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional
import logging

import numpy as np

from config import Config
from utils.bundle_geometry import (
    GeometryAtPoint, connection_form, evaluate_geometry, vertical_projector
)
from utils.mechanical_system import (
    ChartOutOfRange, MechanicalSystem, NotOnSigma, PointOnSigma,
    point_on_sigma, project_to_sigma, project_with_velocity, sigma_residual
)
from utils.numeric_helpers import (
    IllConditioned, NoConvergence, SingularFP, checked_inverse, directional_derivative
)

logger = logging.getLogger(__name__)

VERTICAL_FORMS = ('moment_map', 'verbatim')
MOMENTUM_MODES = ('free', 'zero')
INTEGRATION_METHODS = ('rk4',)

STEP_ERRORS = (SingularFP, IllConditioned, ChartOutOfRange, NoConvergence, NotOnSigma,
               np.linalg.LinAlgError)


class NotHorizontal(Exception):
    """La velocidad reducida tiene componente vertical (𝒜·q̇ ≠ 0)"""

    def __init__(self, message, residual=np.inf):
        super().__init__(message)
        self.residual = residual


class StepFailure(Exception):
    """Un paso del integrador falló en el tiempo t"""

    def __init__(self, t, reason):
        super().__init__(f"fallo en t={t:.6g}: {reason}")
        self.t = t
        self.reason = reason


class BlowUp(StepFailure):
    """El estado superó la norma máxima permitida o dejó de ser finito"""
    pass


@dataclass
class ReducedState:
    """(Q*, q̇, p, t); q̇ es el representante horizontal (Π q̇ = q̇)"""
    q: PointOnSigma
    q_dot: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q.q, self.q_dot, self.p])


@dataclass
class FullState:
    """Estado del sistema sin reducir"""
    x: np.ndarray
    v: np.ndarray
    t: float = 0.0


@dataclass
class Trajectory:
    samples: List[ReducedState] = field(default_factory=list)
    invariants_log: List[Dict[str, float]] = field(default_factory=list)
    adaptive: bool = False

    def append(self, state: ReducedState, invariants: Dict[str, float]):
        if self.samples and state.t <= self.samples[-1].t:
            raise ValueError("Los tiempos de la trayectoria deben ser estrictamente crecientes")
        self.samples.append(state)
        self.invariants_log.append(invariants)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def final(self) -> ReducedState:
        return self.samples[-1]

    def max_invariant(self, name) -> float:
        return max((entry[name] for entry in self.invariants_log), default=0.0)

    def energy_drift(self) -> float:
        """max |E(t) - E(0)| / |E(0)| (absoluta si E(0) = 0)"""
        energies = np.array([entry['energy'] for entry in self.invariants_log])
        scale = abs(energies[0]) if energies[0] != 0 else 1.0
        return float(np.max(np.abs(energies - energies[0])) / scale)

    def columns(self) -> List[str]:
        first = self.samples[0]
        n_p, n_g = first.q.q.size, first.p.size
        return (['t'] + [f'q{i}' for i in range(n_p)] + [f'q_dot{i}' for i in range(n_p)]
                + [f'p{i}' for i in range(n_g)] + ['energy', 'sigma', 'horizontal', 'p_norm'])

    def rows(self):
        for state, inv in zip(self.samples, self.invariants_log):
            yield ([state.t] + state.q.q.tolist() + state.q_dot.tolist() + state.p.tolist()
                   + [inv['energy'], inv['sigma'], inv['horizontal'], inv['p_norm']])


# ============================================================================
# Términos de la ecuación horizontal
# ============================================================================

def horizontal_geodesic_term(geom: GeometryAtPoint, u):
    """-ᴴΓ^A_{BC} q̇^B q̇^C"""
    return -np.einsum('abc,b,c->a', geom.christoffel_H, u, u)


def curvature_force_term(geom: GeometryAtPoint, u, p):
    """-G^{AS} N^F_S ℱ^ν_{EF} q̇^E p_ν"""
    force = np.einsum('nef,e,n->f', geom.F_curv, u, p)
    return -geom.G_inv @ geom.N_proj.T @ force


def momentum_force_term(geom: GeometryAtPoint, p):
    """-½ G^{AS} N^E_S (𝒟_Eγ^{κσ}) p_σ p_κ"""
    force = np.einsum('eks,s,k->e', geom.D_gamma_inv, p, p)
    return -0.5 * geom.G_inv @ geom.N_proj.T @ force


def potential_force_term(geom: GeometryAtPoint, grad_v):
    """-G^{AD} ∂_D V"""
    return -geom.G_inv @ grad_v


def vertical_rhs(geom: GeometryAtPoint, c, u, p, form='moment_map'):
    """
    ṗ_σ de la ecuación vertical

    - moment_map: c^κ_{μσ}𝒜^μ_E p_κ q̇^E + c^μ_{σν}γ^{νκ}p_μp_κ
    - verbatim: añade c^κ_{μν}𝒜^μ_E γ^{νν'}p_{ν'}γ_{σκ}q̇^E
    """
    if form not in VERTICAL_FORMS:
        raise ValueError(f"Forma vertical desconocida: {form}")
    w = geom.A_conn @ u
    p_dot = (np.einsum('kms,m,k->s', c, w, p)
             + np.einsum('msn,nk,m,k->s', c, geom.gamma_inv, p, p))
    if form == 'verbatim':
        p_dot = p_dot + np.einsum('kmn,m,n,sk->s', c, w, geom.gamma_inv @ p, geom.gamma)
    return p_dot


def wong_terms(sys: MechanicalSystem, geom: GeometryAtPoint, u, p) -> Dict[str, np.ndarray]:
    """Cada término de la ecuación horizontal, ya proyectado con N"""
    N = geom.N_proj
    return {
        'geodesic': N @ horizontal_geodesic_term(geom, u),
        'curvature': N @ curvature_force_term(geom, u, p),
        'momentum': N @ momentum_force_term(geom, p),
        'potential': N @ potential_force_term(geom, sys.grad_V(geom.q.q)),
    }


def wong_rhs(sys: MechanicalSystem, state: ReducedState, vertical_form='moment_map',
             tolerances=None, geom: Optional[GeometryAtPoint] = None, check=True):
    """
    (q̈*, ṗ) de las ecuaciones reducidas; q̈* ya lleva el proyector N restaurado

    Raises:
        SingularFP, NotOnSigma, NotHorizontal
    """
    tol = tolerances or {}
    point = point_on_sigma(sys, state.q.q, tol.get('sigma', Config.TOL_SIGMA)) if check else state.q
    geom = geom or evaluate_geometry(sys, point, tolerances=tol)
    if check:
        horizontal = float(np.max(np.abs(geom.A_conn @ state.q_dot)))
        if horizontal >= tol.get('horizontal', Config.TOL_HORIZ):
            raise NotHorizontal(f"|𝒜·q̇| = {horizontal:.3e}", horizontal)
    u = geom.N_proj @ state.q_dot
    q_ddot = sum(wong_terms(sys, geom, u, state.p).values())
    p_dot = vertical_rhs(geom, sys.algebra.c, u, state.p, vertical_form)
    return q_ddot, p_dot


# ============================================================================
# Energía y estados
# ============================================================================

def energy(sys: MechanicalSystem, state: ReducedState, geom: Optional[GeometryAtPoint] = None) -> float:
    """E = ½Gᴴ q̇ q̇ + ½γ^{κσ}p_κp_σ + V"""
    geom = geom or evaluate_geometry(sys, state.q, with_derivatives=False)
    h, p = state.q_dot, state.p
    return float(0.5 * h @ geom.G_H @ h + 0.5 * p @ geom.gamma_inv @ p + sys.V(state.q.q))


def reduced_state(sys: MechanicalSystem, q, q_dot=None, p=None, t=0.0, tolerances=None) -> ReducedState:
    """Estado reducido a partir de Q* ∈ Σ; q̇ se re-horizontaliza con Π"""
    tol = tolerances or {}
    point = q if isinstance(q, PointOnSigma) else point_on_sigma(sys, q, tol.get('sigma', Config.TOL_SIGMA))
    q_dot = np.zeros(sys.n_p) if q_dot is None else np.asarray(q_dot, dtype=float)
    p = np.zeros(sys.n_g) if p is None else np.asarray(p, dtype=float)
    return ReducedState(point, vertical_projector(sys, point.q) @ q_dot, p, float(t))


def gauge_fix(sys: MechanicalSystem, x, v, t=0.0, tolerances=None) -> ReducedState:
    """Imagen en Σ de un estado completo: h = Π v*, p = KᵀG v*"""
    tol = tolerances or {}
    point, w = project_with_velocity(sys, x, v, tol.get('sigma', Config.TOL_SIGMA))
    K, G = sys.K(point.q), sys.G(point.q)
    return ReducedState(point, vertical_projector(sys, point.q) @ w, K.T @ G @ w, float(t))


def full_velocity(sys: MechanicalSystem, state: ReducedState) -> np.ndarray:
    """v = h + K γ⁻¹ p en Q*"""
    K, G = sys.K(state.q.q), sys.G(state.q.q)
    return state.q_dot + K @ checked_inverse(K.T @ G @ K, "γ") @ state.p


# ============================================================================
# Modelo dinámico e integrador
# ============================================================================

class WongDynamics:
    """Campo vectorial en las variables (q, h, p) del sistema reducido"""

    def __init__(self, sys: MechanicalSystem, vertical_form='moment_map', momentum='free', tolerances=None):
        if vertical_form not in VERTICAL_FORMS:
            raise ValueError(f"Forma vertical desconocida: {vertical_form}")
        if momentum not in MOMENTUM_MODES:
            raise ValueError(f"Modo de momento desconocido: {momentum}")
        self.sys = sys
        self.vertical_form = vertical_form
        self.momentum = momentum
        self.tolerances = tolerances or {}

    @property
    def sizes(self):
        return self.sys.n_p, self.sys.n_p, self.sys.n_g

    def accelerations(self, q, h, p):
        """(u, q̈*, ṗ) sin validar Σ: se usa en las etapas intermedias"""
        geom = evaluate_geometry(self.sys, PointOnSigma(q), tolerances=self.tolerances)
        u = geom.N_proj @ h
        q_ddot = sum(wong_terms(self.sys, geom, u, p).values())
        p_dot = vertical_rhs(geom, self.sys.algebra.c, u, p, self.vertical_form)
        return geom, u, q_ddot, p_dot

    def derivatives(self, q, h, p):
        geom, u, q_ddot, p_dot = self.accelerations(q, h, p)
        d_pi = directional_derivative(lambda x: vertical_projector(self.sys, x), q, u, self.sys.fd_step)
        h_dot = geom.Pi_proj @ q_ddot + d_pi @ u
        if self.momentum == 'zero':
            p_dot = np.zeros_like(p_dot)
        return u, h_dot, p_dot

    def prepare(self, state: ReducedState) -> ReducedState:
        p = np.zeros_like(state.p) if self.momentum == 'zero' else state.p
        return ReducedState(state.q, vertical_projector(self.sys, state.q.q) @ state.q_dot, p, state.t)

    def restore(self, q, h, p, t) -> ReducedState:
        """Re-proyección a Σ y re-horizontalización de h"""
        point = project_to_sigma(self.sys, q, self.tolerances.get('sigma', Config.TOL_SIGMA))
        return ReducedState(point, vertical_projector(self.sys, point.q) @ h, p, t)

    def invariants(self, state: ReducedState) -> Dict[str, float]:
        geom = evaluate_geometry(self.sys, state.q, with_derivatives=False, tolerances=self.tolerances)
        return {
            'energy': energy(self.sys, state, geom),
            'sigma': sigma_residual(self.sys, state.q.q),
            'horizontal': float(np.max(np.abs(geom.A_conn @ state.q_dot))),
            'p_norm': self.sys.algebra.k_hat_norm(state.p),
        }


def _rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6


def _check_blowup(y, t, limit):
    if not np.all(np.isfinite(y)):
        raise BlowUp(t, "estado no finito")
    norm = float(np.max(np.abs(y)))
    if norm > limit:
        raise BlowUp(t, f"|estado| = {norm:.3e} > {limit:.1e}")


def _step_schedule(t0, t_end, dt):
    """Tiempos de fin de paso con dt uniforme; el último paso se acorta si hace falta"""
    if t_end <= t0:
        return []
    n_steps = int(np.ceil((t_end - t0) / dt - 1e-9))
    return [min(t0 + (k + 1) * dt, t_end) for k in range(n_steps)]


def integrate(sys: MechanicalSystem, state0: ReducedState, t_end, dt, method='rk4',
              vertical_form='moment_map', momentum='free', tolerances=None,
              sample_every=1, dynamics=None) -> Trajectory:
    """
    Integra las ecuaciones reducidas con RK4 y re-proyección tras cada paso completo

    Raises:
        StepFailure, BlowUp
    """
    if dt <= 0:
        raise ValueError("dt debe ser positivo")
    if method not in INTEGRATION_METHODS:
        raise ValueError(f"Método de integración desconocido: {method}")
    dynamics = dynamics or WongDynamics(sys, vertical_form, momentum, tolerances)
    n_q, n_h, _ = dynamics.sizes
    limit = (tolerances or {}).get('blowup', Config.BLOWUP_NORM)

    def f(y):
        dq, dh, dp = dynamics.derivatives(y[:n_q], y[n_q:n_q + n_h], y[n_q + n_h:])
        return np.concatenate([dq, dh, dp])

    state = dynamics.prepare(state0)
    trajectory = Trajectory()
    trajectory.append(state, dynamics.invariants(state))
    schedule = _step_schedule(state.t, t_end, dt)
    logger.info(f"🚀 Integrando {sys.name}: {len(schedule)} pasos de dt={dt:g}")

    for step, t_next in enumerate(schedule, start=1):
        y = state.as_vector()
        try:
            y = _rk4_step(f, y, t_next - state.t)
            _check_blowup(y, t_next, limit)
            state = dynamics.restore(y[:n_q], y[n_q:n_q + n_h], y[n_q + n_h:], t_next)
        except STEP_ERRORS as e:
            logger.error(f"❌ Paso fallido en t={t_next:.6g}: {e}")
            raise StepFailure(t_next, str(e)) from e
        if step % sample_every == 0 or step == len(schedule):
            trajectory.append(state, dynamics.invariants(state))

    logger.info(f"✅ Integración completa: deriva de energía {trajectory.energy_drift():.3e}")
    return trajectory


# ============================================================================
# Oráculo en el espacio completo
# ============================================================================

def full_acceleration(sys: MechanicalSystem, x, v):
    """ẍ = -Γ^A_{BC}v^Bv^C - G^{AB}∂_BV con la métrica completa"""
    dG = sys.dG(x)
    first_kind = 0.5 * (np.einsum('bdc->dbc', dG) + np.einsum('cdb->dbc', dG) - dG)
    G_inv = checked_inverse(sys.G(x), "G")
    return -G_inv @ (np.einsum('dbc,b,c->d', first_kind, v, v) + sys.grad_V(x))


def oracle_acceleration(sys: MechanicalSystem, state: ReducedState):
    """
    Derivadas exactas (q̈*, ḣ, ṗ) obtenidas del flujo sin reducir en Q*,
    con v = h + Kγ⁻¹p y Ω = γ⁻¹p - 𝒜 q̇* la velocidad de grupo
    """
    q = state.q.q
    geom = evaluate_geometry(sys, state.q, with_derivatives=False)
    u = geom.N_proj @ state.q_dot
    v = state.q_dot + geom.K @ geom.gamma_inv @ state.p
    omega = geom.gamma_inv @ state.p - geom.A_conn @ u
    dK = sys.dK(q)

    def along(w):
        return np.einsum('eam,e,m->a', dK, w, omega)

    x_ddot = full_acceleration(sys, q, v)
    q_ddot = geom.N_proj @ (x_ddot - 2 * along(u) - along(geom.K @ omega))
    pulled = x_ddot - along(v)
    d_pi = directional_derivative(lambda x: vertical_projector(sys, x), q, u, sys.fd_step)
    h_dot = d_pi @ v + geom.Pi_proj @ pulled
    d_kg = directional_derivative(lambda x: sys.K(x).T @ sys.G(x), q, u, sys.fd_step)
    p_dot = d_kg @ v + geom.K.T @ geom.G @ pulled
    return q_ddot, h_dot, p_dot


def full_space_oracle(sys: MechanicalSystem, q0, q0_dot, t_end, dt, sample_every=1, tolerances=None):
    """
    Integra Q̈ + ΓQ̇Q̇ + G⁻¹∂V = 0 en coordenadas originales y fija el gauge de cada muestra

    Returns:
        tuple: (lista de FullState, Trajectory reducida fijada a Σ)
    """
    if dt <= 0:
        raise ValueError("dt debe ser positivo")
    limit = (tolerances or {}).get('blowup', Config.BLOWUP_NORM)
    n = sys.n_p
    x = np.asarray(q0, dtype=float)
    v = np.asarray(q0_dot, dtype=float)

    def f(y):
        return np.concatenate([y[n:], full_acceleration(sys, y[:n], y[n:])])

    def record(x, v, t):
        full.append(FullState(x.copy(), v.copy(), t))
        state = gauge_fix(sys, x, v, t, tolerances)
        fixed.append(state, {
            'energy': energy(sys, state),
            'sigma': sigma_residual(sys, state.q.q),
            'horizontal': float(np.max(np.abs(connection_form(sys, state.q.q) @ state.q_dot))),
            'p_norm': sys.algebra.k_hat_norm(state.p),
        })

    full, fixed = [], Trajectory()
    t = 0.0
    record(x, v, t)
    schedule = _step_schedule(t, t_end, dt)
    logger.info(f"🔄 Oráculo completo {sys.name}: {len(schedule)} pasos")
    for step, t_next in enumerate(schedule, start=1):
        try:
            y = _rk4_step(f, np.concatenate([x, v]), t_next - t)
            _check_blowup(y, t_next, limit)
        except STEP_ERRORS as e:
            raise StepFailure(t_next, str(e)) from e
        x, v, t = y[:n], y[n:], t_next
        if step % sample_every == 0 or step == len(schedule):
            record(x, v, t)
    return full, fixed


# ============================================================================
# Estudio de convergencia
# ============================================================================

def convergence_study(sys: MechanicalSystem, state0: ReducedState, t_end, dt, **kwargs) -> Dict[str, float]:
    """Integra con dt, dt/2 y dt/4; un método de orden 4 da un cociente de errores ≈ 16"""
    finals, drifts = [], []
    for k in range(3):
        trajectory = integrate(sys, state0, t_end, dt / 2 ** k, **kwargs)
        finals.append(trajectory.final.as_vector())
        drifts.append(trajectory.energy_drift())
    coarse = float(np.linalg.norm(finals[0] - finals[1]))
    fine = float(np.linalg.norm(finals[1] - finals[2]))
    ratio = coarse / fine if fine > 0 else np.inf
    logger.info(f"📊 Convergencia: errores {coarse:.3e} / {fine:.3e}, cociente {ratio:.2f}")
    return {'dt': dt, 'error_coarse': coarse, 'error_fine': fine, 'ratio': ratio,
            'energy_drift': drifts}
