"""
⚖️ Equilibrios relativos
Proporciona:
- Problema de autovalores (kγ⁻¹)e = λe con normalización k̂ y signo canónico
- Residuos vertical y horizontal del sistema de equilibrio
- Solver de mínimos cuadrados sobre (Q*, amplitud de p) con seguimiento de autovectores
- Verificación dinámica: integrar desde el equilibrio con q̇ = 0
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import logging

import numpy as np
import scipy.linalg

from config import Config
from utils.bundle_geometry import GeometryAtPoint, evaluate_geometry, gamma_derivatives
from utils.mechanical_system import MechanicalSystem, PointOnSigma, project_to_sigma
from utils.numeric_helpers import (
    NoConvergence, SingularFP, canonical_sign, solve_least_squares, safe_linalg_operation
)
from utils.reduced_dynamics import (
    integrate, momentum_force_term, potential_force_term, reduced_state
)

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-8


class EigenCrossing(Exception):
    """El autovector seguido perdió el solapamiento con el del iterado anterior"""

    def __init__(self, message, overlap=0.0):
        super().__init__(message)
        self.overlap = overlap


@dataclass
class RelativeEquilibrium:
    q: PointOnSigma
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
            'q': self.q.q.tolist(), 'p': self.p.tolist(), 'lambda': self.lam,
            'scale': self.scale, 'residual_h': self.residual_h, 'residual_v': self.residual_v,
            'eigen_index': self.eigen_index, 'converged': self.converged,
            'iterations': self.iterations, 'history': list(self.history),
        }


# ============================================================================
# Problema de autovalores y residuos
# ============================================================================

def _geometry(sys, q, geom):
    if geom is not None:
        return geom
    point = q if isinstance(q, PointOnSigma) else PointOnSigma(q)
    return evaluate_geometry(sys, point, with_derivatives=False)


@safe_linalg_operation(SingularFP)
def _eigen_decomposition(sys: MechanicalSystem, gamma_inv):
    """Autovalores ascendentes λ y autovectores (columnas) con eᵀk̂⁻¹e = 1"""
    algebra = sys.algebra
    mu, vectors = scipy.linalg.eigh(0.5 * (gamma_inv + gamma_inv.T), algebra.k_hat_inv)
    lams = -algebra.kk_scale * mu
    order = np.argsort(lams, kind='stable')
    return lams[order], vectors[:, order]


def momentum_eigenproblem(sys: MechanicalSystem, q, geom: Optional[GeometryAtPoint] = None):
    """
    Todos los pares (λ, e) de (k_{φν}γ^{νκ})e_κ = λe_φ, ordenados por λ

    Raises:
        SingularFP
    """
    geom = _geometry(sys, q, geom)
    lams, vectors = _eigen_decomposition(sys, geom.gamma_inv)
    return [(float(lam), canonical_sign(vectors[:, i])) for i, lam in enumerate(lams)]


def vertical_residual(sys: MechanicalSystem, q, p, geom: Optional[GeometryAtPoint] = None):
    """c^μ_{σν} γ^{νκ} p_μ p_κ"""
    geom = _geometry(sys, q, geom)
    return np.einsum('msn,nk,m,k->s', sys.algebra.c, geom.gamma_inv, p, p)


def horizontal_residual(sys: MechanicalSystem, q, p, geom: Optional[GeometryAtPoint] = None):
    """Aceleración horizontal con q̇* = 0: -N(½G⁻¹Nᵀ(𝒟γ⁻¹)pp + G⁻¹∂V)"""
    geom = _geometry(sys, q, geom)
    gamma_derivatives(sys, geom)
    return geom.N_proj @ (momentum_force_term(geom, p)
                          + potential_force_term(geom, sys.grad_V(geom.q.q)))


def amended_potential(sys: MechanicalSystem, q, p, geom: Optional[GeometryAtPoint] = None) -> float:
    """V + ½γ^{κσ}p_κp_σ"""
    geom = _geometry(sys, q, geom)
    return float(sys.V(geom.q.q) + 0.5 * p @ geom.gamma_inv @ p)


# ============================================================================
# Seguimiento de autovectores
# ============================================================================

class EigenTracker:
    """Mantiene una base continua del subespacio propio (posiblemente degenerado) elegido"""

    def __init__(self, decompose, metric_inv, indices, basis, overlap_min=None):
        self.decompose = decompose
        self.metric_inv = metric_inv
        self.indices = list(indices)
        self.basis = basis
        self.overlap_min = Config.EIGEN_OVERLAP_MIN if overlap_min is None else overlap_min

    @classmethod
    def start(cls, decompose, metric_inv, source, eigen_index, overlap_min=None):
        """
        Args:
            decompose: source ↦ (λ ascendentes, autovectores en columnas)
            metric_inv: producto interno de la normalización (k̂⁻¹)
        """
        lams, vectors = decompose(source)
        if not 0 <= eigen_index < lams.size:
            raise ValueError(f"eigen_index {eigen_index} fuera de rango [0, {lams.size})")
        target = lams[eigen_index]
        cluster = [i for i, lam in enumerate(lams)
                   if abs(lam - target) <= DEGENERACY_TOL * max(1.0, abs(target))]
        basis = np.column_stack([canonical_sign(vectors[:, i]) for i in cluster])
        return cls(decompose, metric_inv, cluster, basis, overlap_min)

    def follow(self, source):
        """Base alineada (Procrustes en el producto k̂⁻¹) y autovalor medio del grupo"""
        lams, vectors = self.decompose(source)
        if max(self.indices) >= lams.size:
            raise EigenCrossing(f"el espectro perdió modos ({lams.size} restantes)")
        new = vectors[:, self.indices]
        overlap = self.basis.T @ self.metric_inv @ new
        u, s, vt = np.linalg.svd(overlap)
        if s.min() < self.overlap_min:
            raise EigenCrossing(f"solapamiento {s.min():.3f} < {self.overlap_min}", float(s.min()))
        return new @ vt.T @ u.T, float(np.mean(lams[self.indices]))


# ============================================================================
# Solver
# ============================================================================

def _residual_vector(sys, q, y, tracker):
    geom = evaluate_geometry(sys, PointOnSigma(q), with_derivatives=False)
    if tracker is None:
        p, basis = np.zeros(sys.n_g), None
    else:
        basis, _ = tracker.follow(geom)
        p = basis @ y
    residual = np.concatenate([horizontal_residual(sys, q, p, geom), sys.chi(q)])
    return residual, basis


def _initial_amplitudes(sys, q, tracker, scale_guess):
    """Desempate en el subespacio degenerado: dirección de menor residuo horizontal"""
    m = len(tracker.indices)
    if m == 1:
        return np.array([float(scale_guess)])
    candidates = [scale_guess * np.eye(m)[j] for j in range(m)]
    norms = [np.linalg.norm(_residual_vector(sys, q, y, tracker)[0]) for y in candidates]
    return candidates[int(np.argmin(norms))]


def _build_equilibrium(sys, q, y, tracker, eigen_index, solution):
    geom = evaluate_geometry(sys, PointOnSigma(q), with_derivatives=False)
    if tracker is None:
        lams, _ = _eigen_decomposition(sys, geom.gamma_inv)
        p, lam, scale = np.zeros(sys.n_g), float(lams[eigen_index]), 0.0
    else:
        basis, lam = tracker.follow(geom)
        p = basis @ y
        scale = float(y[0]) if y.size == 1 else float(np.linalg.norm(y))
    return RelativeEquilibrium(
        q=PointOnSigma(q), p=p, lam=lam, scale=scale,
        residual_h=float(np.linalg.norm(horizontal_residual(sys, q, p, geom))),
        residual_v=float(np.linalg.norm(vertical_residual(sys, q, p, geom))),
        eigen_index=eigen_index, converged=solution['converged'],
        iterations=solution['iterations'], history=solution['history'],
    )


def solve_equilibrium(sys: MechanicalSystem, q_guess, eigen_index, scale_guess,
                      tol=None, max_iter=None, fd_step=1e-6, tolerances=None) -> RelativeEquilibrium:
    """
    Mínimos cuadrados (least_squares) sobre [residuo horizontal; χ(q)] con incógnitas (q, y),
    p = E(q)·y y E la base seguida del subespacio propio de eigen_index.
    Con scale_guess = 0 se resuelve la rama de momento nulo (sólo q).

    Raises:
        NoConvergence (con el mejor iterado en .best), EigenCrossing, SingularFP
    """
    tol = Config.SOLVER_TOL if tol is None else tol
    max_iter = Config.SOLVER_MAX_ITER if max_iter is None else max_iter
    sigma_tol = (tolerances or {}).get('sigma', Config.TOL_SIGMA)
    n = sys.n_p

    start = project_to_sigma(sys, q_guess, sigma_tol)
    tracker = EigenTracker.start(
        lambda geom: _eigen_decomposition(sys, geom.gamma_inv), sys.algebra.k_hat_inv,
        evaluate_geometry(sys, start, with_derivatives=False), eigen_index,
    )
    if scale_guess == 0:
        tracker_in_use = None
        z0 = start.q.copy()
    else:
        tracker_in_use = tracker
        z0 = np.concatenate([start.q, _initial_amplitudes(sys, start.q, tracker, scale_guess)])

    def residual(z):
        return _residual_vector(sys, z[:n], z[n:], tracker_in_use)

    def on_accept(basis):
        if tracker_in_use is not None:
            tracker_in_use.basis = basis

    logger.info(f"🚀 Equilibrio relativo: índice {eigen_index}, amplitud inicial {scale_guess:g}")
    solution = solve_least_squares(residual, z0, tol, max_iter, fd_step, 'central', on_accept)
    z = solution['z']
    q_final = project_to_sigma(sys, z[:n], sigma_tol).q if solution['converged'] else z[:n]
    result = _build_equilibrium(sys, q_final, z[n:], tracker_in_use, eigen_index, solution)
    if not solution['converged']:
        logger.warning(f"⚠️ Equilibrio sin convergencia: mejor |R| = {solution['norm']:.3e}")
        raise NoConvergence(f"solve_equilibrium sin convergencia (|R|={solution['norm']:.3e})",
                            iterations=solution['iterations'], residual=solution['norm'], best=result)
    logger.info(f"✅ Equilibrio en {solution['iterations']} iteraciones: λ={result.lam:.6g}, "
                f"res_h={result.residual_h:.2e}, res_v={result.residual_v:.2e}")
    return result


def verify_equilibrium_dynamics(sys: MechanicalSystem, equilibrium: RelativeEquilibrium,
                                t_end=1.0, dt=1e-2, vertical_form='moment_map') -> Dict[str, float]:
    """Integra desde (Q*, q̇ = 0, p) y mide max|q̇*(t)| y la deriva de p"""
    state0 = reduced_state(sys, equilibrium.q, np.zeros(sys.n_p), equilibrium.p)
    trajectory = integrate(sys, state0, t_end, dt, vertical_form=vertical_form)
    max_q_dot = 0.0
    for state in trajectory.samples:
        geom = evaluate_geometry(sys, state.q, with_derivatives=False)
        max_q_dot = max(max_q_dot, float(np.max(np.abs(geom.N_proj @ state.q_dot))))
    p_drift = max(float(np.max(np.abs(s.p - equilibrium.p))) for s in trajectory.samples)
    return {'max_q_dot': max_q_dot, 'p_drift': p_drift, 't_end': float(t_end), 'dt': float(dt)}
