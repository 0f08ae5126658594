"""
🌌 Ecuaciones de Yang-Mills reducidas sobre la red
Proporciona:
- LatticeGeometry: 𝒟, γ⁻, 𝒜, N, Π y Gᴴ especializados a la red
- Cada término de la ecuación horizontal como función separada
- Ecuación vertical, residuos de equilibrio y solver de equilibrios
- Chequeo cruzado frente al camino genérico sobre el sistema aplanado
- YangMillsDynamics para el integrador RK4 compartido
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import logging

import numpy as np
import scipy.linalg

from config import Config
from utils.bundle_geometry import evaluate_geometry
from utils.equilibria import EigenTracker
from utils.lattice_gauge import (
    GaugeField, GaugeLattice, GreenFunction, as_flat, adjoint_block_transpose,
    adjoint_pairing, apply_adjoint_block, align_global_frame, coulomb_project, cov_deriv_operator,
    gauge_constraint, gauge_constraint_jacobian, green_eigen_decomposition, green_function,
    gribov_margin, lattice_mechanical_system, metric_matrix, potential_and_gradient
)
from utils.mechanical_system import NotOnSigma, PointOnSigma, project_to_sigma
from utils.numeric_helpers import NoConvergence, directional_derivative, solve_least_squares, truncated_pinv
from utils.reduced_dynamics import (
    VERTICAL_FORMS, NotHorizontal, ReducedState, WongDynamics, wong_rhs, wong_terms
)

logger = logging.getLogger(__name__)


@dataclass
class LatticeGeometry:
    """Geometría del fibrado en un campo A* de la sección"""
    field: GaugeField
    D: np.ndarray
    G: np.ndarray
    G_inv: np.ndarray
    C: np.ndarray
    Phi: np.ndarray
    Phi_inv: np.ndarray
    N_proj: np.ndarray
    gamma: np.ndarray
    green: GreenFunction
    A_conn: np.ndarray
    Pi_proj: np.ndarray
    G_H: np.ndarray
    G_H_pinv: np.ndarray
    G_H_rank: int

    @property
    def lattice(self) -> GaugeLattice:
        return self.field.lattice

    @property
    def gamma_minus(self) -> np.ndarray:
        return self.green.matrix

    def summary(self) -> Dict[str, Any]:
        return {
            **self.green.report(),
            'G_H_rank': self.G_H_rank,
            'gamma_spectrum': self.green.eigenvalues.tolist(),
            'sigma_residual': float(np.max(np.abs(gauge_constraint(self.lattice, self.field.a_field)))),
        }


def lattice_geometry(field_: GaugeField, tolerances=None) -> LatticeGeometry:
    """
    Ensambla la geometría; Φ se invierte con pseudo-inversa para cubrir el vacío

    Raises:
        IllConditioned
    """
    tol = tolerances or {}
    lattice = field_.lattice
    D = cov_deriv_operator(field_)
    G = metric_matrix(lattice)
    gamma = D.T @ G @ D
    green = green_function(gamma, tol.get('deflation'), tol.get('fp_condition'))
    C = gauge_constraint_jacobian(lattice)
    Phi = C @ D
    Phi_inv = np.linalg.pinv(Phi, rcond=tol.get('deflation', Config.DEFLATION_CUTOFF))
    A_conn = green.matrix @ D.T @ G
    Pi = np.eye(lattice.flat_dim) - D @ A_conn
    G_H = Pi.T @ G @ Pi
    G_H_pinv, rank, _ = truncated_pinv(G_H, tol.get('pinv_cutoff'))
    return LatticeGeometry(
        field=field_, D=D, G=G, G_inv=np.linalg.inv(G), C=C, Phi=Phi, Phi_inv=Phi_inv,
        N_proj=np.eye(lattice.flat_dim) - D @ Phi_inv @ C, gamma=0.5 * (gamma + gamma.T),
        green=green, A_conn=A_conn, Pi_proj=Pi, G_H=0.5 * (G_H + G_H.T),
        G_H_pinv=G_H_pinv, G_H_rank=rank,
    )


def lattice_projector(lattice: GaugeLattice, a_field, tolerances=None):
    """Π(A) = I - 𝒟γ⁻𝒟ᵀG en cualquier campo"""
    tol = tolerances or {}
    field_ = GaugeField(lattice, a_field)
    D, G = cov_deriv_operator(field_), metric_matrix(lattice)
    green = green_function(D.T @ G @ D, tol.get('deflation'), tol.get('fp_condition'))
    return np.eye(lattice.flat_dim) - D @ green.matrix @ D.T @ G


# ============================================================================
# Términos de la ecuación horizontal
# ============================================================================

def _connection_velocity(geo: LatticeGeometry, u):
    return geo.A_conn @ u


def christoffel_connection_term(geo: LatticeGeometry, u):
    """N·[u, 𝒜u]: parte de -ᴴΓuu con la conexión sin derivar"""
    w = _connection_velocity(geo, u)
    return geo.N_proj @ apply_adjoint_block(geo.lattice, u, w)


def christoffel_derivative_term(geo: LatticeGeometry, u):
    """-N·Gᴴ⁺(-𝒜ᵀM(u)ᵀGᴴu + ad(Gᴴu, 𝒜u)): parte con la derivada de 𝒜"""
    lattice = geo.lattice
    w = _connection_velocity(geo, u)
    gh_u = geo.G_H @ u
    y_term = -geo.A_conn.T @ adjoint_block_transpose(lattice, u, gh_u)
    z_term = adjoint_pairing(lattice, gh_u, w)
    return -geo.N_proj @ geo.G_H_pinv @ (y_term + z_term)


def curvature_term_1(geo: LatticeGeometry, u, p):
    """G·M(u)·γ⁻p"""
    xi = geo.gamma_minus @ as_flat(p)
    return geo.G @ apply_adjoint_block(geo.lattice, u, xi)


def curvature_term_2(geo: LatticeGeometry, u, p):
    """-𝒜ᵀ𝒟ᵀG·M(u)·γ⁻p"""
    xi = geo.gamma_minus @ as_flat(p)
    return -geo.A_conn.T @ (geo.D.T @ (geo.G @ apply_adjoint_block(geo.lattice, u, xi)))


def curvature_term_3(geo: LatticeGeometry, u, p):
    """-𝒜ᵀM(u)ᵀ𝒜ᵀp"""
    zeta = geo.A_conn.T @ as_flat(p)
    return -geo.A_conn.T @ adjoint_block_transpose(geo.lattice, u, zeta)


def curvature_term_4(geo: LatticeGeometry, u, p):
    """-ad(GΠu, γ⁻p)"""
    xi = geo.gamma_minus @ as_flat(p)
    return -adjoint_pairing(geo.lattice, geo.G @ (geo.Pi_proj @ u), xi)


def curvature_term_5(geo: LatticeGeometry, u, p):
    """ad(𝒜ᵀp, 𝒜u)"""
    zeta = geo.A_conn.T @ as_flat(p)
    return adjoint_pairing(geo.lattice, zeta, _connection_velocity(geo, u))


def curvature_term_6(geo: LatticeGeometry, u, p):
    """𝒜ᵀη con η_σ(x) = p_ν(x)c^ν_{ρσ}(𝒜u)^ρ(x)"""
    lattice = geo.lattice
    shape = (lattice.n_sites, lattice.n_g)
    eta = np.einsum('nrs,xn,xr->xs', lattice.algebra.c, as_flat(p).reshape(shape),
                    _connection_velocity(geo, u).reshape(shape))
    return geo.A_conn.T @ eta.ravel()


CURVATURE_TERMS = (curvature_term_1, curvature_term_2, curvature_term_3,
                   curvature_term_4, curvature_term_5, curvature_term_6)


def curvature_covector(geo: LatticeGeometry, u, p):
    """ℱ^ν_{EP}u^Ep_ν como suma de los seis términos"""
    return sum(term(geo, u, p) for term in CURVATURE_TERMS)


def curvature_force(geo: LatticeGeometry, u, p):
    return -geo.N_proj @ geo.G_inv @ geo.N_proj.T @ curvature_covector(geo, u, p)


def momentum_quadratic_term(geo: LatticeGeometry, p):
    """½N G⁻¹Nᵀ(ξᵀ𝒟γξ), ξ = γ⁻p; ξᵀ𝒟_Eγξ = 2ad(G𝒟ξ, ξ)_E - 2(𝒜ᵀν)_E"""
    lattice = geo.lattice
    shape = (lattice.n_sites, lattice.n_g)
    xi = geo.gamma_minus @ as_flat(p)
    nu = np.einsum('sma,xs,xa->xm', lattice.algebra.c, (geo.gamma @ xi).reshape(shape), xi.reshape(shape))
    contraction = 2.0 * adjoint_pairing(lattice, geo.G @ (geo.D @ xi), xi) - 2.0 * geo.A_conn.T @ nu.ravel()
    return 0.5 * geo.N_proj @ geo.G_inv @ geo.N_proj.T @ contraction


def field_strength_term(geo: LatticeGeometry, grad_v=None):
    """-N G⁻¹∇V = -N G⁻¹·2𝒟ᵀ(k̂F)"""
    if grad_v is None:
        grad_v = potential_and_gradient(geo.field)[1]
    return -geo.N_proj @ geo.G_inv @ grad_v


def ym_terms(geo: LatticeGeometry, u, p) -> Dict[str, np.ndarray]:
    """Cada término de la aceleración horizontal, proyectado con N"""
    return {
        'christoffel_connection': christoffel_connection_term(geo, u),
        'christoffel_derivative': christoffel_derivative_term(geo, u),
        'curvature': curvature_force(geo, u, p),
        'momentum': momentum_quadratic_term(geo, p),
        'field_strength': field_strength_term(geo),
    }


def vertical_ym_rhs(geo: LatticeGeometry, u, p, form='moment_map'):
    """
    ṗ_σ(x): c^κ_{μσ}(𝒜u)^μp_κ + c^μ_{σν}(γ⁻p)^νp_μ por sitio;
    'verbatim' añade γ_{σκ}c^κ_{μν}(𝒜u)^μ(γ⁻p)^ν
    """
    if form not in VERTICAL_FORMS:
        raise ValueError(f"Forma vertical desconocida: {form}")
    lattice = geo.lattice
    c = lattice.algebra.c
    shape = (lattice.n_sites, lattice.n_g)
    p = as_flat(p)
    w = _connection_velocity(geo, u).reshape(shape)
    xi = (geo.gamma_minus @ p).reshape(shape)
    p_sites = p.reshape(shape)
    p_dot = (np.einsum('kms,xm,xk->xs', c, w, p_sites)
             + np.einsum('msn,xn,xm->xs', c, xi, p_sites)).ravel()
    if form == 'verbatim':
        bracket = np.einsum('kmn,xm,xn->xk', c, w, xi).ravel()
        p_dot = p_dot + geo.gamma @ bracket
    return p_dot


def ym_rhs(field_: GaugeField, a_dot, p, vertical_form='moment_map', tolerances=None,
           geo: Optional[LatticeGeometry] = None, check=True):
    """
    (Ä*, ṗ) con Ȧ* tangente a la sección

    Raises:
        IllConditioned, NotOnSigma, NotHorizontal
    """
    tol = tolerances or {}
    lattice = field_.lattice
    u = as_flat(a_dot)
    if check:
        sigma = float(np.max(np.abs(gauge_constraint(lattice, field_.a_field))))
        if sigma >= tol.get('sigma', Config.TOL_SIGMA):
            raise NotOnSigma(f"|χ(A)| = {sigma:.3e}", sigma)
        transverse = float(np.max(np.abs(gauge_constraint_jacobian(lattice) @ u)))
        if transverse >= tol.get('horizontal', Config.TOL_HORIZ):
            raise NotHorizontal(f"|C·Ȧ| = {transverse:.3e}", transverse)
    geo = geo or lattice_geometry(field_, tol)
    a_ddot = sum(ym_terms(geo, u, p).values())
    return a_ddot, vertical_ym_rhs(geo, u, p, vertical_form)


def generic_cross_check(field_: GaugeField, geo: Optional[LatticeGeometry] = None, rng=None,
                        tolerances=None) -> Dict[str, float]:
    """
    Máximas diferencias entre las fórmulas de la red y el camino genérico sobre el sistema aplanado,
    en (Ȧ, p) aleatorios; necesita un campo fuera del vacío (Φ aplanado regular)

    Raises:
        SingularFP, IllConditioned
    """
    tolerances = tolerances or {}
    rng = rng if rng is not None else np.random.default_rng(0)
    lattice = field_.lattice
    geo = geo or lattice_geometry(field_, tolerances)
    sys = lattice_mechanical_system(lattice)
    point = PointOnSigma(field_.a_field)
    generic = evaluate_geometry(sys, point, with_derivatives=True, tolerances=tolerances)
    h = generic.Pi_proj @ rng.normal(scale=0.1, size=lattice.flat_dim)
    p = rng.normal(scale=0.1, size=lattice.group_dim)
    u = generic.N_proj @ h
    q_ddot, p_dot = wong_rhs(sys, ReducedState(point, h, p), tolerances=tolerances, geom=generic, check=False)
    a_ddot, p_dot_lattice = ym_rhs(field_, u, p, tolerances=tolerances, geo=geo, check=False)
    curvature_generic = wong_terms(sys, generic, u, p)['curvature']
    return {
        'fp_operator': float(np.max(np.abs(generic.gamma - geo.gamma))),
        'coulomb_connection': float(np.max(np.abs(generic.A_conn - geo.A_conn))),
        'curvature_force': float(np.max(np.abs(curvature_generic - curvature_force(geo, u, p)))),
        'rhs_horizontal': float(np.max(np.abs(q_ddot - a_ddot))),
        'rhs_vertical': float(np.max(np.abs(p_dot - p_dot_lattice))),
    }


# ============================================================================
# Equilibrios
# ============================================================================

def ym_equilibrium_residuals(field_: GaugeField, p, geo: Optional[LatticeGeometry] = None):
    """
    res_h = aceleración horizontal con Ȧ* = 0; res_v = c^φ_{σε}p_φ(x)(γ⁻p)^ε(x)

    Raises:
        IllConditioned
    """
    geo = geo or lattice_geometry(field_)
    p = as_flat(p)
    res_h = momentum_quadratic_term(geo, p) + field_strength_term(geo)
    res_v = vertical_ym_rhs(geo, np.zeros(geo.lattice.flat_dim), p)
    return res_h, res_v


@dataclass
class LatticeEquilibrium:
    field: GaugeField
    p: np.ndarray
    lam: float
    scale: float
    residual_h: float
    residual_v: float
    eigen_index: int = 0
    converged: bool = False
    iterations: int = 0
    history: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'a_field': self.field.a_field.tolist(), 'p': self.p.tolist(), 'lambda': self.lam,
            'scale': self.scale, 'residual_h': self.residual_h, 'residual_v': self.residual_v,
            'eigen_index': self.eigen_index, 'converged': self.converged,
            'iterations': self.iterations, 'history': list(self.history),
        }


def _decomposer(lattice):
    return lambda geo: green_eigen_decomposition(lattice, geo.green)


def _prepare_guess(field_: GaugeField, sigma_tol):
    lattice = field_.lattice
    if float(np.max(np.abs(gauge_constraint(lattice, field_.a_field)))) < sigma_tol:
        return field_
    logger.info("🔄 Llevando el campo inicial al gauge de Coulomb con marco global")
    return align_global_frame(coulomb_project(lattice, field_.a_field))


def ym_solve_equilibrium(field_guess: GaugeField, eigen_index, scale_guess, tol=None, max_iter=None,
                         fd_step=1e-7, tolerances=None) -> LatticeEquilibrium:
    """
    Mínimos cuadrados (least_squares) sobre las componentes transversales de A y las amplitudes de p,
    p = E(A)·y con E la base seguida del subespacio propio de γ⁻. Con scale_guess = 0
    se busca un punto crítico de V restringido a la sección (p = 0).

    Raises:
        NoConvergence (con el mejor iterado en .best), EigenCrossing, GribovViolation
    """
    tol = Config.SOLVER_TOL if tol is None else tol
    max_iter = Config.SOLVER_MAX_ITER if max_iter is None else max_iter
    tolerances = tolerances or {}
    lattice = field_guess.lattice
    start = _prepare_guess(field_guess, tolerances.get('sigma', Config.TOL_SIGMA))
    gribov_margin(start, check=True)

    basis_sigma = scipy.linalg.null_space(gauge_constraint_jacobian(lattice))
    d = basis_sigma.shape[1]
    tracker = EigenTracker.start(_decomposer(lattice), np.kron(np.eye(lattice.n_sites), lattice.algebra.k_hat_inv),
                                 lattice_geometry(start, tolerances), eigen_index)
    z_field = basis_sigma.T @ start.a_field
    if scale_guess == 0:
        tracker_in_use = None
        z0 = z_field
    else:
        tracker_in_use = tracker
        amplitudes = np.zeros(len(tracker.indices))
        amplitudes[0] = float(scale_guess)
        z0 = np.concatenate([z_field, amplitudes])

    def unpack(z):
        field_z = GaugeField(lattice, basis_sigma @ z[:d])
        geo = lattice_geometry(field_z, tolerances)
        if tracker_in_use is None:
            return geo, np.zeros(lattice.group_dim), None, float(tracker.decompose(geo)[0][eigen_index])
        basis, lam = tracker_in_use.follow(geo)
        return geo, basis @ z[d:], basis, lam

    def residual(z):
        geo, p, basis, _ = unpack(z)
        res_h, _ = ym_equilibrium_residuals(geo.field, p, geo)
        return res_h, basis

    def on_accept(basis):
        if tracker_in_use is not None:
            tracker_in_use.basis = basis

    logger.info(f"🚀 Equilibrio de Yang-Mills en L={lattice.L}: índice {eigen_index}, amplitud {scale_guess:g}")
    solution = solve_least_squares(residual, z0, tol, max_iter, fd_step, 'forward', on_accept)
    z = solution['z']
    geo, p, _, lam = unpack(z)
    res_h, res_v = ym_equilibrium_residuals(geo.field, p, geo)
    y = z[d:]
    result = LatticeEquilibrium(
        field=GaugeField(lattice, geo.field.a_field, coulomb_fixed=True), p=p, lam=lam,
        scale=0.0 if y.size == 0 else (float(y[0]) if y.size == 1 else float(np.linalg.norm(y))),
        residual_h=float(np.linalg.norm(res_h)), residual_v=float(np.linalg.norm(res_v)),
        eigen_index=eigen_index, converged=solution['converged'],
        iterations=solution['iterations'], history=solution['history'],
    )
    if not solution['converged']:
        logger.warning(f"⚠️ Equilibrio de red sin convergencia: mejor |R| = {solution['norm']:.3e}")
        raise NoConvergence(f"ym_solve_equilibrium sin convergencia (|R|={solution['norm']:.3e})",
                            iterations=solution['iterations'], residual=solution['norm'], best=result)
    logger.info(f"✅ Equilibrio de red en {solution['iterations']} iteraciones: "
                f"res_h={result.residual_h:.2e}, res_v={result.residual_v:.2e}")
    return result


# ============================================================================
# Dinámica
# ============================================================================

class YangMillsDynamics(WongDynamics):
    """Campo vectorial (A, h, p) de la red con las fórmulas especializadas"""

    def __init__(self, lattice: GaugeLattice, vertical_form='moment_map', momentum='free', tolerances=None):
        super().__init__(lattice_mechanical_system(lattice), vertical_form, momentum, tolerances)
        self.lattice = lattice

    def geometry(self, q) -> LatticeGeometry:
        return lattice_geometry(GaugeField(self.lattice, q), self.tolerances)

    def accelerations(self, q, h, p):
        geo = self.geometry(q)
        u = geo.N_proj @ h
        a_ddot = sum(ym_terms(geo, u, p).values())
        return geo, u, a_ddot, vertical_ym_rhs(geo, u, p, self.vertical_form)

    def derivatives(self, q, h, p):
        geo, u, a_ddot, p_dot = self.accelerations(q, h, p)
        d_pi_u = directional_derivative(lambda x: lattice_projector(self.lattice, x, self.tolerances) @ u,
                                        q, u, self.sys.fd_step)
        if self.momentum == 'zero':
            p_dot = np.zeros_like(p_dot)
        return u, geo.Pi_proj @ a_ddot + d_pi_u, p_dot

    def prepare(self, state: ReducedState) -> ReducedState:
        p = np.zeros_like(state.p) if self.momentum == 'zero' else state.p
        return ReducedState(state.q, self.geometry(state.q.q).Pi_proj @ state.q_dot, p, state.t)

    def restore(self, q, h, p, t) -> ReducedState:
        point = project_to_sigma(self.sys, q, self.tolerances.get('sigma', Config.TOL_SIGMA))
        return ReducedState(point, self.geometry(point.q).Pi_proj @ h, p, t)

    def invariants(self, state: ReducedState) -> Dict[str, float]:
        geo = self.geometry(state.q.q)
        h, p = state.q_dot, state.p
        kinetic = 0.5 * h @ geo.G_H @ h + 0.5 * p @ geo.gamma_minus @ p
        return {
            'energy': float(kinetic + potential_and_gradient(geo.field)[0]),
            'sigma': float(np.max(np.abs(gauge_constraint(self.lattice, state.q.q)))),
            'horizontal': float(np.max(np.abs(geo.A_conn @ h))),
            'p_norm': float(np.sqrt(max(p @ np.kron(np.eye(self.lattice.n_sites),
                                                    self.lattice.algebra.k_hat_inv) @ p, 0.0))),
        }


def lattice_state(field_: GaugeField, a_dot=None, p=None, t=0.0) -> ReducedState:
    """Estado reducido de la red; Ȧ se re-horizontaliza con Π"""
    lattice = field_.lattice
    a_dot = np.zeros(lattice.flat_dim) if a_dot is None else as_flat(a_dot)
    p = np.zeros(lattice.group_dim) if p is None else as_flat(p)
    Pi = lattice_geometry(field_).Pi_proj
    return ReducedState(PointOnSigma(field_.a_field), Pi @ a_dot, p, float(t))
