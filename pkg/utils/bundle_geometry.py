"""
🧭 Geometría del fibrado sobre la sección Σ
Proporciona:
- GeometryAtPoint: Φ, P⊥, N, Π, γ, 𝒜, ℱ, Gᴴ, ᴴΓ y 𝒟γ evaluados en Q*
- Campos definidos en toda la carta (𝒜, γ, Gᴴ) para derivar fuera de Σ
- Bloques de la métrica y de su pseudo-inversa, base dual y residuos de identidades
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional
import logging

import numpy as np

from config import Config
from utils.mechanical_system import MechanicalSystem, PointOnSigma, point_on_sigma
from utils.numeric_helpers import (
    IllConditioned, checked_inverse, field_jacobian, truncated_pinv
)

logger = logging.getLogger(__name__)


@dataclass
class GeometryAtPoint:
    """Datos puntuales del fibrado en la sección, con a = identidad"""
    q: PointOnSigma
    G: np.ndarray
    G_inv: np.ndarray
    K: np.ndarray
    chi_jac: np.ndarray
    Phi: np.ndarray
    Phi_inv: np.ndarray
    P_perp: np.ndarray
    N_proj: np.ndarray
    Pi_proj: np.ndarray
    gamma: np.ndarray
    gamma_inv: np.ndarray
    A_conn: np.ndarray
    G_H: np.ndarray
    G_H_pinv: np.ndarray
    G_H_rank: int
    F_curv: Optional[np.ndarray] = None
    christoffel_H: Optional[np.ndarray] = None
    D_gamma: Optional[np.ndarray] = None
    D_gamma_inv: Optional[np.ndarray] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def has_derivatives(self) -> bool:
        return self.F_curv is not None

    def to_dict(self) -> Dict[str, Any]:
        """Representación JSON (listas anidadas)"""
        data = {'q': self.q.q.tolist(), 'G_H_rank': self.G_H_rank, 'diagnostics': self.diagnostics}
        for name in ('Phi', 'Phi_inv', 'P_perp', 'N_proj', 'Pi_proj', 'gamma', 'gamma_inv',
                     'A_conn', 'G_H', 'F_curv', 'christoffel_H', 'D_gamma', 'D_gamma_inv'):
            value = getattr(self, name)
            data[name] = None if value is None else value.tolist()
        return data


# ============================================================================
# Campos en toda la carta
# ============================================================================

def orbit_metric(sys: MechanicalSystem, q):
    """γ_{μν} = K^A_μ G_AB K^B_ν"""
    K = sys.K(q)
    return K.T @ sys.G(q) @ K


def connection_form(sys: MechanicalSystem, q):
    """𝒜^ν_P = γ^{νμ} K^R_μ G_RP en cualquier punto de la carta"""
    K, G = sys.K(q), sys.G(q)
    gamma_inv = checked_inverse(K.T @ G @ K, "γ")
    return gamma_inv @ K.T @ G


def vertical_projector(sys: MechanicalSystem, q):
    """Π^A_B = δ^A_B - K^A_μ 𝒜^μ_B"""
    return np.eye(sys.n_p) - sys.K(q) @ connection_form(sys, q)


def horizontal_metric(sys: MechanicalSystem, q):
    """Gᴴ = Πᵀ G Π"""
    Pi = vertical_projector(sys, q)
    return Pi.T @ sys.G(q) @ Pi


def _as_point(sys, q, tol):
    if isinstance(q, PointOnSigma):
        return q
    return point_on_sigma(sys, q, tol)


# ============================================================================
# Derivadas
# ============================================================================

def _curvature_from(sys, q, A_conn):
    """ℱ[α, E, P] = ∂_E𝒜^α_P - ∂_P𝒜^α_E + c^α_{νσ}𝒜^ν_E𝒜^σ_P"""
    dA = field_jacobian(lambda x: connection_form(sys, x), q, sys.fd_step)
    exterior = np.einsum('eap->aep', dA) - np.einsum('pae->aep', dA)
    quadratic = np.einsum('ans,ne,sp->aep', sys.algebra.c, A_conn, A_conn)
    return exterior + quadratic


def _christoffel_from(sys, q, N_proj, G_H_pinv):
    """ᴴΓ[A, C, D] = N·Gᴴ⁺·½(Gᴴ_{AC,D} + Gᴴ_{AD,C} - Gᴴ_{CD,A})"""
    dGH = field_jacobian(lambda x: horizontal_metric(sys, x), q, sys.fd_step)
    first_kind = 0.5 * (np.einsum('dac->acd', dGH) + np.einsum('cad->acd', dGH)
                        - np.einsum('acd->acd', dGH))
    return np.einsum('ab,bcd->acd', N_proj @ G_H_pinv, first_kind)


def _gauge_terms(c, A_conn, gamma):
    """c^σ_{μα}𝒜^μ_E γ_{σβ} con índices [E, α, β]"""
    return np.einsum('sma,me,sb->eab', c, A_conn, gamma)


def _D_gamma_from(sys, q, A_conn, gamma, gamma_inv):
    """𝒟_Eγ_{αβ} y 𝒟_Eγ^{κσ} = -γ⁻¹(𝒟_Eγ)γ⁻¹"""
    d_gamma = field_jacobian(lambda x: orbit_metric(sys, x), q, sys.fd_step)
    term = _gauge_terms(sys.algebra.c, A_conn, gamma)
    D_gamma = d_gamma - term - term.transpose(0, 2, 1)
    D_gamma_inv = -np.einsum('ab,ebc,cd->ead', gamma_inv, D_gamma, gamma_inv)
    return D_gamma, D_gamma_inv


# ============================================================================
# Evaluación principal
# ============================================================================

def evaluate_geometry(sys: MechanicalSystem, q, with_derivatives=True, tolerances=None) -> GeometryAtPoint:
    """
    Evalúa todos los objetos geométricos en Q* ∈ Σ

    Args:
        sys: sistema mecánico
        q: PointOnSigma o coordenadas (se validan contra Σ)
        with_derivatives: si False omite ℱ, ᴴΓ y 𝒟γ (sin diferencias finitas)

    Raises:
        SingularFP, NotOnSigma, IllConditioned
    """
    tol = tolerances or {}
    point = _as_point(sys, q, tol.get('sigma', Config.TOL_SIGMA))
    x = point.q
    condition_max = tol.get('fp_condition', Config.FP_CONDITION_MAX)

    G, K, C = sys.G(x), sys.K(x), sys.chi_jacobian(x)
    G_inv = checked_inverse(G, "G", condition_max)
    Phi = C @ K
    Phi_inv = checked_inverse(Phi, "Φ", condition_max)
    gamma = K.T @ G @ K
    gamma_inv = checked_inverse(gamma, "γ", condition_max)
    A_conn = gamma_inv @ K.T @ G

    eye = np.eye(sys.n_p)
    N_proj = eye - K @ Phi_inv @ C
    Pi_proj = eye - K @ A_conn
    # χᵀ^A_μ = G^{AB}γ_{μν}χ^ν_B; γ se cancela en el proyector
    chi_T = G_inv @ C.T @ gamma
    P_perp = eye - chi_T @ checked_inverse(C @ chi_T, "χχᵀ", condition_max) @ C
    G_H = Pi_proj.T @ G @ Pi_proj

    G_H_pinv, rank, cond = truncated_pinv(G_H, tol.get('pinv_cutoff', Config.PINV_CUTOFF))
    diagnostics = {'Phi_condition': float(np.linalg.cond(Phi)),
                   'gamma_condition': float(np.linalg.cond(gamma)),
                   'G_H_condition': cond, 'G_H_rank': rank}
    if cond > condition_max:
        raise IllConditioned(f"Gᴴ mal condicionada en el subespacio horizontal (cond={cond:.3e})",
                             diagnostics)
    if rank != sys.n_p - sys.n_g:
        logger.warning(f"⚠️ rango(Gᴴ) = {rank}, se esperaba {sys.n_p - sys.n_g}")

    geom = GeometryAtPoint(
        q=point, G=G, G_inv=G_inv, K=K, chi_jac=C, Phi=Phi, Phi_inv=Phi_inv,
        P_perp=P_perp, N_proj=N_proj, Pi_proj=Pi_proj, gamma=gamma, gamma_inv=gamma_inv,
        A_conn=A_conn, G_H=G_H, G_H_pinv=G_H_pinv, G_H_rank=rank, diagnostics=diagnostics,
    )
    if with_derivatives:
        geom.F_curv = _curvature_from(sys, x, A_conn)
        geom.christoffel_H = _christoffel_from(sys, x, N_proj, G_H_pinv)
        geom.D_gamma, geom.D_gamma_inv = _D_gamma_from(sys, x, A_conn, gamma, gamma_inv)
    return geom


def gamma_derivatives(sys: MechanicalSystem, geom: GeometryAtPoint):
    """𝒟γ y 𝒟γ⁻¹ para una geometría evaluada sin derivadas"""
    if geom.D_gamma is None:
        geom.D_gamma, geom.D_gamma_inv = _D_gamma_from(sys, geom.q.q, geom.A_conn, geom.gamma, geom.gamma_inv)
    return geom.D_gamma, geom.D_gamma_inv


def curvature(sys: MechanicalSystem, q):
    """ℱ^α_{EP}, con 𝒜 derivada en la carta ambiente; q no tiene que estar en Σ"""
    x = q.q if isinstance(q, PointOnSigma) else np.asarray(q, dtype=float)
    return _curvature_from(sys, x, connection_form(sys, x))


def christoffel_horizontal(sys: MechanicalSystem, q):
    """ᴴΓ^A_{CD} resuelto por pseudo-inversión de Gᴴ y proyectado con N"""
    return evaluate_geometry(sys, q).christoffel_H


def covariant_derivative_gamma(sys: MechanicalSystem, q):
    """(𝒟_Eγ_{αβ}, 𝒟_Eγ^{κσ})"""
    geom = evaluate_geometry(sys, q)
    return geom.D_gamma, geom.D_gamma_inv


def contravariant_D_gamma(sys: MechanicalSystem, q, geom: GeometryAtPoint):
    """𝒟_Eγ^{κσ} derivando γ⁻¹ directamente (comprobación de la regla de derivación)"""
    d_gamma_inv = field_jacobian(
        lambda x: checked_inverse(orbit_metric(sys, x), "γ"), q.q if isinstance(q, PointOnSigma) else q,
        sys.fd_step,
    )
    ad = np.einsum('kmn,me->ekn', sys.algebra.c, geom.A_conn)
    term = np.einsum('ekn,ns->eks', ad, geom.gamma_inv)
    return d_gamma_inv + term + term.transpose(0, 2, 1)


# ============================================================================
# Bloques métricos y base dual
# ============================================================================

def metric_blocks(geom: GeometryAtPoint):
    """Métrica en la base (P⊥, K): [[P⊥ᵀGP⊥, P⊥ᵀGK], [KᵀGP⊥, γ]]"""
    frame = np.hstack([geom.P_perp, geom.K])
    return frame.T @ geom.G @ frame


def pseudoinverse_blocks(sys: MechanicalSystem, q, geom: Optional[GeometryAtPoint] = None) -> Dict[str, Any]:
    """
    Bloques de la pseudo-inversa de la métrica y residuo de ortogonalidad
    (producto con los bloques métricos = diag(P⊥, δ))

    Raises:
        SingularFP
    """
    geom = geom or evaluate_geometry(sys, q, with_derivatives=False)
    lift = np.vstack([geom.N_proj, geom.Phi_inv @ geom.chi_jac])
    inverse = lift @ geom.G_inv @ lift.T
    n = sys.n_p
    product = inverse @ metric_blocks(geom)
    expected = np.zeros_like(product)
    expected[:n, :n] = geom.P_perp
    expected[n:, n:] = np.eye(sys.n_g)
    residual = float(np.max(np.abs(product - expected)))
    if residual > Config.TOL_IDENTITY:
        logger.warning(f"⚠️ Ortogonalidad de la pseudo-inversa: residuo {residual:.3e}")
    return {
        'upper_left': inverse[:n, :n],
        'upper_right': inverse[:n, n:],
        'lower_left': inverse[n:, :n],
        'lower_right': inverse[n:, n:],
        'metric': metric_blocks(geom),
        'orthogonality_residual': residual,
    }


def dual_basis(geom: GeometryAtPoint):
    """
    Campos H_A = N^E_A(∂_E - 𝒜^μ_E L_μ) y L_β = K_β en representación de carta,
    con las formas ω^A(v) = (N v)^A y ω^α(v) = (Φ⁻¹χ' v + 𝒜 N v)^α
    """
    H = geom.Pi_proj @ geom.N_proj
    L = geom.K

    def omega_horizontal(v):
        return geom.N_proj @ v

    def omega_vertical(v):
        return geom.Phi_inv @ geom.chi_jac @ v + geom.A_conn @ geom.N_proj @ v

    return H, L, omega_horizontal, omega_vertical


def dual_basis_residuals(geom: GeometryAtPoint) -> Dict[str, float]:
    H, L, omega_h, omega_v = dual_basis(geom)
    n_g = L.shape[1]
    return {
        'omega_H_H': float(np.max(np.abs(omega_h(H) - geom.N_proj))),
        'omega_V_H': float(np.max(np.abs(omega_v(H)))),
        'omega_V_L': float(np.max(np.abs(omega_v(L) - np.eye(n_g)))),
        'omega_H_L': float(np.max(np.abs(omega_h(L)))),
    }


def lifted_metric(geom: GeometryAtPoint):
    """Métrica en la base (H_A, L_α); debe ser diag(Gᴴ, γ)"""
    H, L, _, _ = dual_basis(geom)
    frame = np.hstack([H, L])
    return frame.T @ geom.G @ frame


def _max_abs(array) -> float:
    return float(np.max(np.abs(array))) if array.size else 0.0


def identity_residuals(sys: MechanicalSystem, geom: GeometryAtPoint) -> Dict[str, float]:
    """Cada identidad de proyectores y de la métrica como residuo con nombre"""
    N, P, Pi, K = geom.N_proj, geom.P_perp, geom.Pi_proj, geom.K
    n = sys.n_p
    lifted = lifted_metric(geom)
    expected = np.zeros_like(lifted)
    expected[:n, :n] = geom.G_H
    expected[n:, n:] = geom.gamma

    residuals = {
        'N_idempotent': _max_abs(N @ N - N),
        'N_annihilates_K': _max_abs(N @ K),
        'N_after_P_perp': _max_abs(N @ P - P),
        'P_perp_after_N': _max_abs(P @ N - N),
        'Pi_after_N': _max_abs(Pi @ N - Pi),
        'N_after_Pi': _max_abs(N @ Pi - N),
        'connection_annihilates_horizontal': _max_abs(geom.A_conn @ Pi),
        'gamma_symmetry': _max_abs(geom.gamma - geom.gamma.T),
        'G_H_annihilates_K': _max_abs(geom.G_H @ K),
        'pseudoinverse_orthogonality': pseudoinverse_blocks(sys, geom.q, geom)['orthogonality_residual'],
        'lifted_metric_block_diagonal': _max_abs(lifted - expected),
    }
    residuals['dual_basis'] = max(dual_basis_residuals(geom).values())
    if geom.has_derivatives:
        residuals['curvature_antisymmetry'] = _max_abs(geom.F_curv + geom.F_curv.transpose(0, 2, 1))
        residuals['christoffel_symmetry'] = _max_abs(geom.christoffel_H - geom.christoffel_H.transpose(0, 2, 1))
        residuals['gamma_derivation'] = _max_abs(contravariant_D_gamma(sys, geom.q, geom) - geom.D_gamma_inv)
    return residuals


# Clase de tolerancia de cada residuo (las que dependen de diferencias finitas son más laxas)
RESIDUAL_CLASSES = {
    'curvature_antisymmetry': 'finite_difference',
    'christoffel_symmetry': 'finite_difference',
    'gamma_derivation': 'finite_difference',
}


def residual_tolerance(name, tolerances=None) -> float:
    tol = tolerances or {}
    if RESIDUAL_CLASSES.get(name) == 'finite_difference':
        return tol.get('killing', Config.TOL_KILLING)
    return tol.get('identity', Config.TOL_IDENTITY)
