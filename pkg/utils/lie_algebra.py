"""
🔷 Álgebras de Lie compactas semisimples
Proporciona:
- Construcción validada a partir de las constantes de estructura c^γ_{αβ}
- Forma de Cartan-Killing k, su inversa y la versión positiva k̂
- Acción adjunta, corchete y suma directa (álgebra gauge local de una red)
- Identidad de antisimetría usada por las ecuaciones de equilibrio
"""

from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from config import Config


class JacobiViolation(Exception):
    """Las constantes de estructura no cumplen la identidad de Jacobi"""
    pass


class NotAntisymmetric(Exception):
    """c^γ_{αβ} no es antisimétrica en los índices inferiores"""
    pass


class IndefiniteKilling(Exception):
    """-k no es definida positiva: el álgebra no es compacta semisimple"""
    pass


@dataclass(frozen=True)
class LieAlgebraSpec:
    """Álgebra de Lie inmutable; c[γ, α, β] = c^γ_{αβ}"""
    dim: int
    c: np.ndarray
    k: np.ndarray
    k_inv: np.ndarray
    kk_scale: float = Config.KK_SCALE
    name: str = "custom"

    @property
    def k_hat(self) -> np.ndarray:
        """Métrica positiva k̂ = -k / kk_scale"""
        return -self.k / self.kk_scale

    @property
    def k_hat_inv(self) -> np.ndarray:
        return -self.k_inv * self.kk_scale

    def adjoint(self, x) -> np.ndarray:
        """(ad_x)^γ_β = c^γ_{αβ} x^α"""
        return np.einsum('gab,a->gb', self.c, x)

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum('gab,a,b->g', self.c, x, y)

    def k_hat_norm(self, p) -> float:
        """Norma de un covector con k̂⁻¹"""
        return float(np.sqrt(max(p @ self.k_hat_inv @ p, 0.0)))

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'dim': self.dim, 'kk_scale': self.kk_scale,
                'k': self.k.tolist()}


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def levi_civita():
    """Tensor ε de tres índices"""
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    return eps


def killing_form(c):
    """k_{αβ} = c^τ_{μα} c^μ_{τβ}"""
    return np.einsum('tma,mtb->ab', c, c)


def jacobi_residual(c):
    """Máximo del ciclo de Jacobi sobre todos los índices"""
    cycle = (np.einsum('mab,smg->sabg', c, c)
             + np.einsum('mbg,sma->sabg', c, c)
             + np.einsum('mga,smb->sabg', c, c))
    return float(np.max(np.abs(cycle))) if cycle.size else 0.0


def make_algebra(c, kk_scale=Config.KK_SCALE, name="custom", tol=Config.TOL_ALGEBRA) -> LieAlgebraSpec:
    """
    Construye un LieAlgebraSpec validado

    Raises:
        NotAntisymmetric, JacobiViolation, IndefiniteKilling
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 3 or len(set(c.shape)) != 1:
        raise NotAntisymmetric(f"c debe ser un tensor n×n×n, recibido {c.shape}")
    if not np.all(np.isfinite(c)):
        raise NotAntisymmetric("c contiene valores no finitos")

    scale = max(1.0, float(np.max(np.abs(c))))
    antisym = float(np.max(np.abs(c + c.transpose(0, 2, 1))))
    if antisym > tol * scale:
        raise NotAntisymmetric(f"c^γ_(αβ) no es antisimétrica (residuo {antisym:.3e})")

    jacobi = jacobi_residual(c)
    if jacobi > tol * scale ** 2:
        raise JacobiViolation(f"identidad de Jacobi violada (residuo {jacobi:.3e})")

    k = killing_form(c)
    k = 0.5 * (k + k.T)
    eigvals = np.linalg.eigvalsh(-k)
    if eigvals.size == 0 or eigvals[0] <= tol * scale ** 2:
        raise IndefiniteKilling(f"-k no es definida positiva (λ_min={eigvals.min() if eigvals.size else 0:.3e})")

    return LieAlgebraSpec(
        dim=c.shape[0],
        c=_frozen(c),
        k=_frozen(k),
        k_inv=_frozen(np.linalg.inv(k)),
        kk_scale=float(kk_scale),
        name=name,
    )


def builtin_algebra(name: str) -> LieAlgebraSpec:
    """Álgebras con nombre: 'so3' y 'su2' comparten la normalización de Levi-Civita"""
    if name in ('so3', 'su2'):
        return make_algebra(levi_civita(), name=name)
    raise ValueError(f"Álgebra desconocida: {name}")


def direct_sum(spec: LieAlgebraSpec, copies: int) -> LieAlgebraSpec:
    """Suma directa de `copies` réplicas; la réplica s ocupa los índices [s·n, (s+1)·n)"""
    n = spec.dim
    c = np.zeros((n * copies,) * 3)
    for s in range(copies):
        block = slice(s * n, (s + 1) * n)
        c[block, block, block] = spec.c
    k = np.kron(np.eye(copies), spec.k)
    return LieAlgebraSpec(
        dim=n * copies,
        c=_frozen(c),
        k=_frozen(k),
        k_inv=_frozen(np.kron(np.eye(copies), spec.k_inv)),
        kk_scale=spec.kk_scale,
        name=f"{spec.name}^{copies}",
    )


def ad_antisymmetry_residual(spec: LieAlgebraSpec) -> float:
    """max |c^μ_{σν}k^{νε} + c^ε_{σν}k^{νμ}| sobre σ, μ, ε"""
    t = np.einsum('msn,ne->sme', spec.c, spec.k_inv)
    return float(np.max(np.abs(t + t.transpose(0, 2, 1))))


def ad_antisymmetry_check(spec: LieAlgebraSpec, tol=Config.TOL_ALGEBRA) -> bool:
    return ad_antisymmetry_residual(spec) < tol
