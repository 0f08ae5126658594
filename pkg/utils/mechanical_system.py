"""
⚙️ Sistemas mecánicos con simetría
Proporciona:
- MechanicalSystem: métrica G, campos de Killing K, condiciones gauge χ y potencial V
- PointOnSigma: representante validado sobre la sección Σ (χ = 0)
- Proyección a Σ moviéndose sólo a lo largo de la órbita (flujo exacto de Killing)
- Verificaciones numéricas de Killing, equivariancia e invariancia de V
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional
import logging

import numpy as np
from scipy.integrate import solve_ivp

from config import Config
from utils.lie_algebra import LieAlgebraSpec
from utils.numeric_helpers import NoConvergence, checked_inverse, field_jacobian

logger = logging.getLogger(__name__)

# [K_μ, K_ν] = KILLING_BRACKET_SIGN · c^σ_{μν} K_σ
# Es el signo con el que la fórmula de la curvatura reproduce el oráculo de Kaluza-Klein
KILLING_BRACKET_SIGN = 1

DERIVATIVE_MODES = ('analytic', 'finite-difference')


class NotOnSigma(Exception):
    """El punto no satisface las condiciones gauge χ = 0"""

    def __init__(self, message, residual=np.inf):
        super().__init__(message)
        self.residual = residual


class ChartOutOfRange(Exception):
    """Las coordenadas salieron de la carta donde el sistema está definido"""
    pass


@dataclass(frozen=True)
class MechanicalSystem:
    """Descripción evaluable e inmutable de un sistema con simetría"""
    name: str
    n_p: int
    algebra: LieAlgebraSpec
    metric: Callable[[np.ndarray], np.ndarray]
    killing: Callable[[np.ndarray], np.ndarray]
    constraint: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], float]
    derivative_mode: str = 'analytic'
    fd_step: float = Config.FD_STEP
    metric_jacobian: Optional[Callable] = None
    killing_jacobian: Optional[Callable] = None
    constraint_jacobian: Optional[Callable] = None
    potential_gradient: Optional[Callable] = None
    chart_check: Optional[Callable] = None
    invariants: Optional[Callable] = None
    parameters: Dict = field(default_factory=dict)

    @property
    def n_g(self) -> int:
        return self.algebra.dim

    def _use_analytic(self, fn) -> bool:
        return fn is not None and self.derivative_mode == 'analytic'

    def check_chart(self, q):
        if self.chart_check is not None:
            self.chart_check(q)

    def G(self, q):
        return np.asarray(self.metric(q), dtype=float)

    def K(self, q):
        return np.asarray(self.killing(q), dtype=float)

    def chi(self, q):
        return np.asarray(self.constraint(q), dtype=float)

    def V(self, q):
        return float(self.potential(q))

    def dG(self, q):
        """dG[E, A, B] = ∂_E G_AB"""
        if self._use_analytic(self.metric_jacobian):
            return np.asarray(self.metric_jacobian(q), dtype=float)
        return field_jacobian(self.G, q, self.fd_step)

    def dK(self, q):
        """dK[E, A, μ] = ∂_E K^A_μ"""
        if self._use_analytic(self.killing_jacobian):
            return np.asarray(self.killing_jacobian(q), dtype=float)
        return field_jacobian(self.K, q, self.fd_step)

    def chi_jacobian(self, q):
        """C[α, A] = ∂χ^α / ∂Q^A"""
        if self._use_analytic(self.constraint_jacobian):
            return np.asarray(self.constraint_jacobian(q), dtype=float)
        return field_jacobian(self.chi, q, self.fd_step).T

    def grad_V(self, q):
        if self._use_analytic(self.potential_gradient):
            return np.asarray(self.potential_gradient(q), dtype=float)
        return field_jacobian(lambda x: np.array(self.V(x)), q, self.fd_step)

    def with_derivative_mode(self, mode, step=None):
        """Copia del sistema con otro modo de derivación"""
        if mode not in DERIVATIVE_MODES:
            raise ValueError(f"Modo de derivación inválido: {mode}")
        return replace(self, derivative_mode=mode, fd_step=self.fd_step if step is None else step)


@dataclass(frozen=True)
class PointOnSigma:
    """Representante Q* con |χ(Q*)| < tol_sigma"""
    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        q.setflags(write=False)
        object.__setattr__(self, 'q', q)


def sigma_residual(sys: MechanicalSystem, q) -> float:
    chi = sys.chi(q)
    return float(np.max(np.abs(chi))) if chi.size else 0.0


def point_on_sigma(sys: MechanicalSystem, q, tol=None) -> PointOnSigma:
    """Valida que q esté sobre Σ"""
    tol = Config.TOL_SIGMA if tol is None else tol
    q = np.asarray(q, dtype=float)
    sys.check_chart(q)
    residual = sigma_residual(sys, q)
    if residual >= tol:
        raise NotOnSigma(f"|χ(q)| = {residual:.3e} ≥ {tol:.1e}", residual)
    return PointOnSigma(q)


def faddeev_popov_matrix(sys: MechanicalSystem, q):
    """Φ^β_μ = K^A_μ ∂χ^β/∂Q^A"""
    return sys.chi_jacobian(q) @ sys.K(q)


def _killing_flow(sys: MechanicalSystem, q, xi, velocity=None):
    """
    Flujo exacto de K(q)·ξ durante un tiempo unidad (la acción de exp ξ);
    opcionalmente transporta una velocidad con la ecuación variacional
    """
    n = sys.n_p

    def rhs(_, y):
        x = y[:n]
        dx = sys.K(x) @ xi
        if velocity is None:
            return dx
        dw = np.einsum('eam,e,m->a', sys.dK(x), y[n:], xi)
        return np.concatenate([dx, dw])

    y0 = q if velocity is None else np.concatenate([q, velocity])
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method='DOP853', rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise NoConvergence(f"flujo de Killing fallido: {sol.message}")
    y = sol.y[:, -1]
    return (y, None) if velocity is None else (y[:n], y[n:])


def project_with_velocity(sys: MechanicalSystem, q, velocity=None, tol=None, max_iter=None):
    """
    Newton δ = -Φ⁻¹χ(q) aplicado como flujo de grupo: la órbita se preserva y
    sólo cambia el representante. Si se da velocity, se devuelve su imagen
    por la misma transformación de grupo.

    Raises:
        SingularFP, NoConvergence
    """
    tol = Config.TOL_SIGMA if tol is None else tol
    max_iter = Config.NEWTON_MAX_ITER if max_iter is None else max_iter
    q = np.array(q, dtype=float)
    w = None if velocity is None else np.array(velocity, dtype=float)
    sys.check_chart(q)

    residual = sigma_residual(sys, q)
    if residual < tol:
        return PointOnSigma(q), w

    target = 1e-3 * tol
    iteration = 0
    while residual >= target and iteration < max_iter:
        iteration += 1
        phi_inv = checked_inverse(faddeev_popov_matrix(sys, q), "Φ")
        xi = -phi_inv @ sys.chi(q)
        q, w = _killing_flow(sys, q, xi, w)
        sys.check_chart(q)
        residual = sigma_residual(sys, q)
        if np.max(np.abs(xi)) < 1e-15:
            break
    if residual >= tol:
        raise NoConvergence(f"proyección a Σ sin convergencia (|χ|={residual:.3e})",
                            iterations=iteration, residual=residual)
    logger.debug(f"🔄 Proyección a Σ en {iteration} iteraciones (|χ|={residual:.2e})")
    return PointOnSigma(q), w


def project_to_sigma(sys: MechanicalSystem, q, tol=None, max_iter=None) -> PointOnSigma:
    """Representante sobre Σ de la órbita de q"""
    point, _ = project_with_velocity(sys, q, None, tol, max_iter)
    return point


def killing_residual(sys: MechanicalSystem, q) -> float:
    """max |(L_{K_μ} G)_{AB}| = |K^E ∂_E G_AB + G_EB ∂_A K^E + G_AE ∂_B K^E|"""
    G, K, dG, dK = sys.G(q), sys.K(q), sys.dG(q), sys.dK(q)
    lie = (np.einsum('em,eab->mab', K, dG)
           + np.einsum('eb,aem->mab', G, dK)
           + np.einsum('ae,bem->mab', G, dK))
    return float(np.max(np.abs(lie)))


def equivariance_residual(sys: MechanicalSystem, q) -> float:
    """max |[K_μ, K_ν] - s·c^σ_{μν}K_σ| con s = KILLING_BRACKET_SIGN"""
    K, dK = sys.K(q), sys.dK(q)
    # [K_μ, K_ν]^A = K^E_μ ∂_E K^A_ν - K^E_ν ∂_E K^A_μ
    bracket = np.einsum('em,ean->amn', K, dK) - np.einsum('en,eam->amn', K, dK)
    expected = KILLING_BRACKET_SIGN * np.einsum('smn,as->amn', sys.algebra.c, K)
    return float(np.max(np.abs(bracket - expected)))


def invariance_residual(sys: MechanicalSystem, q) -> float:
    """max_μ |K^A_μ ∂_A V|"""
    return float(np.max(np.abs(sys.K(q).T @ sys.grad_V(q))))


def check_system(sys: MechanicalSystem, points) -> Dict[str, float]:
    """Máximos residuos de las propiedades de MechanicalSystem sobre los puntos dados"""
    report = {'metric_symmetry': 0.0, 'metric_min_eigenvalue': np.inf,
              'killing': 0.0, 'equivariance': 0.0, 'potential_invariance': 0.0}
    for q in points:
        G = sys.G(q)
        report['metric_symmetry'] = max(report['metric_symmetry'], float(np.max(np.abs(G - G.T))))
        report['metric_min_eigenvalue'] = min(report['metric_min_eigenvalue'],
                                              float(np.linalg.eigvalsh(0.5 * (G + G.T))[0]))
        report['killing'] = max(report['killing'], killing_residual(sys, q))
        report['equivariance'] = max(report['equivariance'], equivariance_residual(sys, q))
        report['potential_invariance'] = max(report['potential_invariance'], invariance_residual(sys, q))
    return report
