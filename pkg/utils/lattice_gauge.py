"""
🧊 Campo gauge su(2) sobre una red periódica L³
Proporciona:
- GaugeLattice / GaugeField / FieldMomentum con el mapa de índices documentado
- Operadores 𝒟 = ∇ + [A, ·], γ = 𝒟ᵀG𝒟 y la función de Green deflactada
- Conexión de Coulomb, proyección transversal por Fourier y fijado del marco global
- Intensidad de campo F, potencial V[A] y su gradiente
- Margen de Gribov y el MechanicalSystem aplanado de la red
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional
import logging

import numpy as np
import scipy.linalg

from config import Config
from utils.lie_algebra import LieAlgebraSpec, builtin_algebra, direct_sum
from utils.mechanical_system import MechanicalSystem, NotOnSigma
from utils.numeric_helpers import IllConditioned, canonical_sign, safe_linalg_operation

logger = logging.getLogger(__name__)

# (color, dirección) de las medias Ā que fija la condición de marco global:
# Ā_0 a lo largo del color 2 y Ā_1 en el plano de colores 0-2
GLOBAL_FRAME_COMPONENTS = ((0, 0), (1, 0), (1, 1))

MIN_SIDE, MAX_SIDE = 2, 6


class InvalidField(Exception):
    """Arreglo de campo con forma incorrecta o valores no finitos"""
    pass


class GribovViolation(Exception):
    """El operador de Faddeev-Popov de Coulomb tiene autovalores negativos"""

    def __init__(self, message, margin=0.0):
        super().__init__(message)
        self.margin = margin


# ============================================================================
# Red y campos
# ============================================================================

@dataclass(frozen=True)
class GaugeLattice:
    L: int
    spacing: float = 1.0
    algebra: LieAlgebraSpec = field(default_factory=lambda: builtin_algebra('su2'))

    def __post_init__(self):
        if not MIN_SIDE <= int(self.L) <= MAX_SIDE:
            raise ValueError(f"L = {self.L} fuera de [{MIN_SIDE}, {MAX_SIDE}]")
        if not self.spacing > 0:
            raise ValueError(f"El espaciado debe ser positivo (recibido {self.spacing})")
        if self.algebra.dim != 3:
            raise ValueError("La red sólo admite álgebras de dimensión 3")

    @property
    def n_g(self) -> int:
        return self.algebra.dim

    @property
    def n_sites(self) -> int:
        return self.L ** 3

    @property
    def flat_dim(self) -> int:
        return self.n_g * 3 * self.n_sites

    @property
    def group_dim(self) -> int:
        return self.n_g * self.n_sites

    @property
    def volume_factor(self) -> float:
        """a³ de ∫d³x → a³Σ_x"""
        return float(self.spacing) ** 3

    def site_index(self, x0, x1, x2) -> int:
        L = self.L
        return ((x0 % L) * L + (x1 % L)) * L + (x2 % L)

    def site_coordinates(self, site):
        L = self.L
        return site // (L * L), (site // L) % L, site % L

    def flat_index(self, alpha, i, site) -> int:
        return (site * 3 + i) * self.n_g + alpha

    def group_index(self, alpha, site) -> int:
        return site * self.n_g + alpha

    def unflatten(self, index):
        """Inverso de flat_index: (α, i, sitio)"""
        alpha = index % self.n_g
        rest = index // self.n_g
        return alpha, rest % 3, rest // 3

    def neighbors(self, direction, shift=1):
        """Sitio x + shift·e_direction para cada x (arreglo plano)"""
        grid = np.arange(self.n_sites).reshape(self.L, self.L, self.L)
        return np.roll(grid, -shift, axis=direction).ravel()

    def index_map(self) -> Dict[str, str]:
        return {
            'flat': '(site*3 + i)*N_G + alpha',
            'group': 'site*N_G + alpha',
            'site': '(x0*L + x1)*L + x2',
            'N_G': str(self.n_g),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {'L': self.L, 'spacing': float(self.spacing), 'n_sites': self.n_sites,
                'flat_dim': self.flat_dim, 'group_dim': self.group_dim,
                'algebra': self.algebra.name, 'index_map': self.index_map()}


def _readonly(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class GaugeField:
    lattice: GaugeLattice
    a_field: np.ndarray
    coulomb_fixed: bool = False

    def __post_init__(self):
        a_field = np.asarray(self.a_field, dtype=float).ravel()
        if a_field.size != self.lattice.flat_dim:
            raise InvalidField(f"El campo tiene {a_field.size} componentes, se esperaban {self.lattice.flat_dim}")
        if not np.all(np.isfinite(a_field)):
            raise InvalidField("El campo contiene valores no finitos")
        object.__setattr__(self, 'a_field', _readonly(a_field))
        if self.coulomb_fixed:
            residual = float(np.max(np.abs(divergence(self.lattice, a_field))))
            if residual >= Config.TOL_SIGMA:
                raise NotOnSigma(f"|∂ᵏA_k| = {residual:.3e} en un campo marcado como Coulomb", residual)

    @property
    def sites(self):
        """Vista (n_sites, 3, N_G)"""
        return self.a_field.reshape(self.lattice.n_sites, 3, self.lattice.n_g)

    @property
    def grid(self):
        """Vista (L, L, L, 3, N_G)"""
        L = self.lattice.L
        return self.a_field.reshape(L, L, L, 3, self.lattice.n_g)


@dataclass(frozen=True)
class FieldMomentum:
    lattice: GaugeLattice
    p_field: np.ndarray

    def __post_init__(self):
        p_field = np.asarray(self.p_field, dtype=float).ravel()
        if p_field.size != self.lattice.group_dim:
            raise InvalidField(f"El momento tiene {p_field.size} componentes, se esperaban {self.lattice.group_dim}")
        if not np.all(np.isfinite(p_field)):
            raise InvalidField("El momento contiene valores no finitos")
        object.__setattr__(self, 'p_field', _readonly(p_field))


def as_flat(value):
    if isinstance(value, GaugeField):
        return np.asarray(value.a_field)
    if isinstance(value, FieldMomentum):
        return np.asarray(value.p_field)
    return np.asarray(value, dtype=float).ravel()


# ============================================================================
# Operadores lineales
# ============================================================================

def gradient_operator(lattice: GaugeLattice):
    """∇ por diferencias hacia adelante: (α, x) → (α, i, x), periódico"""
    n, ng = lattice.n_sites, lattice.n_g
    inv_a = 1.0 / lattice.spacing
    grad = np.zeros((lattice.flat_dim, lattice.group_dim))
    sites = np.arange(n)
    for i in range(3):
        forward = lattice.neighbors(i)
        for alpha in range(ng):
            rows = (sites * 3 + i) * ng + alpha
            grad[rows, forward * ng + alpha] += inv_a
            grad[rows, sites * ng + alpha] -= inv_a
    return grad


def divergence(lattice: GaugeLattice, a_field):
    """Divergencia hacia atrás Σ_i (A_i(x) - A_i(x - e_i))/a = -∇ᵀA, forma plana (α, x)"""
    L, ng = lattice.L, lattice.n_g
    grid = as_flat(a_field).reshape(L, L, L, 3, ng)
    div = np.zeros((L, L, L, ng))
    for i in range(3):
        component = grid[..., i, :]
        div += component - np.roll(component, 1, axis=i)
    return (div / lattice.spacing).ravel()


def adjoint_block(lattice: GaugeLattice, u):
    """M(u)[(μ,i,x), (α,x)] = c^μ_{να} u^ν_i(x), diagonal por bloques en x"""
    c = lattice.algebra.c
    per_site = as_flat(u).reshape(lattice.n_sites, 3, lattice.n_g)
    blocks = [np.einsum('mna,in->ima', c, u_x).reshape(3 * lattice.n_g, lattice.n_g)
              for u_x in per_site]
    return scipy.linalg.block_diag(*blocks)


def apply_adjoint_block(lattice: GaugeLattice, u, v):
    """M(u)·v sin ensamblar la matriz"""
    n, ng = lattice.n_sites, lattice.n_g
    return np.einsum('mna,xin,xa->xim', lattice.algebra.c,
                     as_flat(u).reshape(n, 3, ng), as_flat(v).reshape(n, ng)).ravel()


def adjoint_block_transpose(lattice: GaugeLattice, u, y):
    """M(u)ᵀ·y"""
    n, ng = lattice.n_sites, lattice.n_g
    return np.einsum('xim,mna,xin->xa', as_flat(y).reshape(n, 3, ng), lattice.algebra.c,
                     as_flat(u).reshape(n, 3, ng)).ravel()


def adjoint_pairing(lattice: GaugeLattice, y, v):
    """Covector E ↦ yᵀM(e_E)v"""
    n, ng = lattice.n_sites, lattice.n_g
    return np.einsum('xim,mna,xa->xin', as_flat(y).reshape(n, 3, ng), lattice.algebra.c,
                     as_flat(v).reshape(n, ng)).ravel()


def metric_matrix(lattice: GaugeLattice):
    """G = a³ (δ ⊗ δ ⊗ k̂)"""
    return lattice.volume_factor * np.kron(np.eye(3 * lattice.n_sites), lattice.algebra.k_hat)


def cov_deriv_operator(field_: GaugeField):
    """𝒟^{μi}_{;α} = δ^μ_α ∂^i + c^μ_{να}A^{νi}: matriz flat_dim × group_dim"""
    lattice = field_.lattice
    return gradient_operator(lattice) + adjoint_block(lattice, field_.a_field)


def fp_operator(field_: GaugeField):
    """Métrica de órbita γ = 𝒟ᵀG𝒟"""
    D = cov_deriv_operator(field_)
    gamma = D.T @ metric_matrix(field_.lattice) @ D
    return 0.5 * (gamma + gamma.T)


# ============================================================================
# Función de Green
# ============================================================================

@dataclass
class GreenFunction:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kept: np.ndarray
    kernel_dim: int
    condition: float

    @property
    def kernel_projector(self):
        kernel = self.eigenvectors[:, ~self.kept]
        return kernel @ kernel.T

    def report(self) -> Dict[str, Any]:
        return {'kernel_dim': self.kernel_dim, 'condition': self.condition,
                'min_eigenvalue': float(self.eigenvalues[0]),
                'max_eigenvalue': float(self.eigenvalues[-1])}


@safe_linalg_operation(IllConditioned)
def green_function(source, cutoff=None, condition_max=None) -> GreenFunction:
    """
    Pseudo-inversa de γ con los autovalores ≤ cutoff·λ_max deflactados

    Args:
        source: GaugeField o la matriz γ ya ensamblada

    Raises:
        IllConditioned
    """
    cutoff = Config.DEFLATION_CUTOFF if cutoff is None else cutoff
    condition_max = Config.FP_CONDITION_MAX if condition_max is None else condition_max
    gamma = fp_operator(source) if isinstance(source, GaugeField) else np.asarray(source, dtype=float)
    eigvals, eigvecs = scipy.linalg.eigh(0.5 * (gamma + gamma.T))
    scale = float(np.max(np.abs(eigvals)))
    kept = eigvals > cutoff * scale
    if not np.any(kept):
        raise IllConditioned("γ no tiene modos fuera del núcleo", {'kernel_dim': int(eigvals.size)})
    condition = float(eigvals[kept].max() / eigvals[kept].min())
    report = {'kernel_dim': int(np.count_nonzero(~kept)), 'condition': condition}
    if condition > condition_max:
        logger.error(f"❌ Función de Green mal condicionada: cond = {condition:.3e}")
        raise IllConditioned(f"γ mal condicionada fuera del núcleo (cond={condition:.3e})", report)
    vectors = eigvecs[:, kept]
    matrix = (vectors / eigvals[kept]) @ vectors.T
    return GreenFunction(
        matrix=0.5 * (matrix + matrix.T), eigenvalues=eigvals, eigenvectors=eigvecs,
        kept=kept, kernel_dim=report['kernel_dim'], condition=condition,
    )


@safe_linalg_operation(IllConditioned)
def green_eigen_decomposition(lattice: GaugeLattice, green: GreenFunction, cutoff=None):
    """
    (kγ⁻)e = λe restringido al complemento del núcleo: λ ascendentes,
    autovectores en columnas con eᵀk̂⁻¹e = 1
    """
    cutoff = Config.DEFLATION_CUTOFF if cutoff is None else cutoff
    k_hat_inv = np.kron(np.eye(lattice.n_sites), lattice.algebra.k_hat_inv)
    mu, vectors = scipy.linalg.eigh(green.matrix, k_hat_inv)
    keep = np.abs(mu) > cutoff * np.max(np.abs(mu))
    lams = -lattice.algebra.kk_scale * mu[keep]
    vectors = vectors[:, keep]
    order = np.argsort(lams, kind='stable')
    return lams[order], vectors[:, order]


def green_eigenpairs(lattice: GaugeLattice, green: GreenFunction):
    """Pares (λ, e) con signo canónico, ordenados por λ"""
    lams, vectors = green_eigen_decomposition(lattice, green)
    return [(float(lam), canonical_sign(vectors[:, i])) for i, lam in enumerate(lams)]


def coulomb_connection(field_: GaugeField, green: Optional[GreenFunction] = None):
    """𝒜 = γ⁻𝒟ᵀG: matriz group_dim × flat_dim"""
    green = green_function(field_) if green is None else green
    return green.matrix @ cov_deriv_operator(field_).T @ metric_matrix(field_.lattice)


# ============================================================================
# Fijado de gauge
# ============================================================================

def coulomb_project(lattice: GaugeLattice, a_raw) -> GaugeField:
    """Resta la parte longitudinal en el espacio de Fourier; k = 0 queda intacto"""
    L, ng = lattice.L, lattice.n_g
    grid = as_flat(a_raw).reshape(L, L, L, 3, ng)
    transform = np.fft.fftn(grid, axes=(0, 1, 2))
    k = 2 * np.pi * np.fft.fftfreq(L)
    axes = np.meshgrid(k, k, k, indexing='ij')
    symbol = np.stack([(np.exp(1j * ki) - 1.0) / lattice.spacing for ki in axes], axis=-1)
    norm2 = np.sum(np.abs(symbol) ** 2, axis=-1)
    longitudinal = np.einsum('xyzi,xyzia->xyza', np.conj(symbol), transform)
    safe = np.where(norm2 > 0, norm2, 1.0)
    coefficient = np.where(norm2[..., None] > 0, longitudinal / safe[..., None], 0.0)
    transform = transform - symbol[..., None] * coefficient[..., None, :]
    projected = np.fft.ifftn(transform, axes=(0, 1, 2)).real
    return GaugeField(lattice, projected.ravel(), coulomb_fixed=True)


def global_frame(lattice: GaugeLattice, a_field):
    """g(Ā): componentes de las medias fijadas por el marco global"""
    means = as_flat(a_field).reshape(lattice.n_sites, 3, lattice.n_g).mean(axis=0)
    return np.array([means[direction, color] for color, direction in GLOBAL_FRAME_COMPONENTS])


def global_rotate(field_: GaugeField, rotation) -> GaugeField:
    """A^α_i(x) → R^α_β A^β_i(x) para todo x"""
    rotated = np.einsum('ab,xib->xia', np.asarray(rotation, dtype=float), field_.sites)
    return GaugeField(field_.lattice, rotated.ravel(), field_.coulomb_fixed)


def _orthogonal_to(vector):
    axis = np.eye(3)[int(np.argmin(np.abs(vector)))]
    other = axis - (axis @ vector) * vector
    return other / np.linalg.norm(other)


def frame_rotation(lattice: GaugeLattice, a_field, eps=1e-12):
    """Rotación R con g(RĀ) = 0 (Gram-Schmidt sobre Ā_0, Ā_1)"""
    means = as_flat(a_field).reshape(lattice.n_sites, 3, lattice.n_g).mean(axis=0)
    candidates = [m for m in means[:2] if np.linalg.norm(m) > eps]
    if not candidates:
        return np.eye(3)
    e2 = candidates[0] / np.linalg.norm(candidates[0])
    rest = means[1] - (means[1] @ e2) * e2 if len(candidates) == 2 else np.zeros(3)
    e0 = rest / np.linalg.norm(rest) if np.linalg.norm(rest) > eps else _orthogonal_to(e2)
    e1 = np.cross(e2, e0)
    return np.vstack([e0, e1, e2])


def align_global_frame(field_: GaugeField) -> GaugeField:
    """Rota el campo globalmente para cumplir la condición de marco g(Ā) = 0"""
    return global_rotate(field_, frame_rotation(field_.lattice, field_.a_field))


def gauge_constraint(lattice: GaugeLattice, a_field):
    """χ^α(x) = div A^α(x) + g_α(Ā)"""
    div = divergence(lattice, a_field).reshape(lattice.n_sites, lattice.n_g)
    return (div + global_frame(lattice, a_field)[None, :]).ravel()


def gauge_constraint_jacobian(lattice: GaugeLattice):
    """C = -∇ᵀ + B, con B la media de las componentes de GLOBAL_FRAME_COMPONENTS"""
    jac = -gradient_operator(lattice).T
    sites = np.arange(lattice.n_sites)
    for alpha, (color, direction) in enumerate(GLOBAL_FRAME_COMPONENTS):
        rows = sites * lattice.n_g + alpha
        columns = (sites * 3 + direction) * lattice.n_g + color
        jac[np.ix_(rows, columns)] += 1.0 / lattice.n_sites
    return jac


def tangent_project(lattice: GaugeLattice, delta):
    """Proyección euclídea sobre el espacio tangente de Σ (núcleo de C)"""
    basis = scipy.linalg.null_space(gauge_constraint_jacobian(lattice))
    return basis @ (basis.T @ as_flat(delta))


def random_gauge_field(lattice: GaugeLattice, rng, amplitude=0.1) -> GaugeField:
    """Campo aleatorio uniforme en ±amplitude, transversal y alineado con el marco global"""
    raw = rng.uniform(-amplitude, amplitude, size=lattice.flat_dim)
    return align_global_frame(coulomb_project(lattice, raw))


def zero_field(lattice: GaugeLattice) -> GaugeField:
    return GaugeField(lattice, np.zeros(lattice.flat_dim), coulomb_fixed=True)


# ============================================================================
# Intensidad de campo y potencial
# ============================================================================

def _forward(grid, axis, spacing):
    return (np.roll(grid, -1, axis=axis) - grid) / spacing


def _forward_adjoint(grid, axis, spacing):
    """∂ᵀ_i f(x) = (f(x - e_i) - f(x))/a"""
    return (np.roll(grid, 1, axis=axis) - grid) / spacing


def field_strength(field_: GaugeField):
    """F^α_{ij}(x) = ∂_iA_j - ∂_jA_i + c^α_{νσ}A^ν_iA^σ_j, forma (L, L, L, 3, 3, N_G)"""
    lattice = field_.lattice
    grid = field_.grid
    d = np.stack([_forward(grid, i, lattice.spacing) for i in range(3)], axis=3)
    return (d - d.transpose(0, 1, 2, 4, 3, 5)
            + np.einsum('ans,xyzin,xyzjs->xyzija', lattice.algebra.c, grid, grid))


def potential_and_gradient(field_: GaugeField):
    """V = (a³/2)Σ k̂_{αβ}F^α_{ij}F^β_{ij} y su gradiente 2a³𝒟ᵀ(k̂F)"""
    lattice = field_.lattice
    vol = lattice.volume_factor
    F = field_strength(field_)
    kF = np.einsum('xyzija,ab->xyzijb', F, lattice.algebra.k_hat)
    value = 0.5 * vol * float(np.sum(kF * F))

    divergence_term = sum(_forward_adjoint(kF[:, :, :, i, :, :], i, lattice.spacing) for i in range(3))
    bracket_term = np.einsum('xyzija,ans,xyzin->xyzjs', kF, lattice.algebra.c, field_.grid)
    gradient = 2.0 * vol * (divergence_term + bracket_term)
    return value, gradient.ravel()


# ============================================================================
# Región de Gribov
# ============================================================================

def gribov_margin(field_: GaugeField, check=False, tol=None) -> float:
    """
    Menor autovalor de la parte simétrica de -∂·𝒟 = ∇ᵀ𝒟 fuera de los modos constantes

    Raises:
        GribovViolation (sólo con check=True)
    """
    tol = Config.GRIBOV_TOL if tol is None else tol
    lattice = field_.lattice
    grad = gradient_operator(lattice)
    operator = grad.T @ cov_deriv_operator(field_)
    sym = 0.5 * (operator + operator.T)
    constants = np.kron(np.ones((lattice.n_sites, 1)), np.eye(lattice.n_g))
    complement = scipy.linalg.null_space(constants.T)
    margin = float(scipy.linalg.eigvalsh(complement.T @ sym @ complement)[0])
    if check and margin < -tol:
        logger.warning(f"⚠️ Configuración fuera de la región de Gribov (margen {margin:.3e})")
        raise GribovViolation(f"autovalor de Faddeev-Popov {margin:.3e} < -{tol:.1e}", margin)
    return margin


# ============================================================================
# Sistema aplanado
# ============================================================================

def lattice_mechanical_system(lattice: GaugeLattice) -> MechanicalSystem:
    """Q = A aplanado, G = a³k̂⊗δ⊗δ, K = 𝒟, χ = C·A, V = V[A]"""
    n, ng = lattice.n_sites, lattice.n_g
    metric = metric_matrix(lattice)
    grad = gradient_operator(lattice)
    jac = gauge_constraint_jacobian(lattice)

    def killing(q):
        return grad + adjoint_block(lattice, q)

    def killing_jacobian(q):
        # ∂K^{(μ,i,x)}_{(α,x)}/∂A^{(ν,i,x)} = c^μ_{να}
        dk = np.zeros((n, 3, ng, n, 3, ng, n, ng))
        for x in range(n):
            for i in range(3):
                dk[x, i, :, x, i, :, x, :] = lattice.algebra.c.transpose(1, 0, 2)
        return dk.reshape(lattice.flat_dim, lattice.flat_dim, lattice.group_dim)

    def value(q):
        return potential_and_gradient(GaugeField(lattice, q))[0]

    def gradient(q):
        return potential_and_gradient(GaugeField(lattice, q))[1]

    return MechanicalSystem(
        name='lattice_su2',
        n_p=lattice.flat_dim,
        algebra=direct_sum(lattice.algebra, n),
        metric=lambda q: metric,
        killing=killing,
        constraint=lambda q: jac @ np.asarray(q, dtype=float),
        potential=value,
        metric_jacobian=lambda q: np.zeros((lattice.flat_dim,) * 3),
        killing_jacobian=killing_jacobian,
        constraint_jacobian=lambda q: jac,
        potential_gradient=gradient,
        parameters={'family': 'lattice', **lattice.to_dict()},
    )
