"""
🧮 Utilidades numéricas compartidas
Proporciona:
- Excepciones numéricas comunes a todos los módulos
- Decorador para operaciones de álgebra lineal seguras
- Inversión con monitoreo del número de condición
- Derivadas por diferencias finitas centradas de 4º orden
- Mínimos cuadrados no lineales (scipy.optimize.least_squares) con historia monótona
"""

import functools
import logging

import numpy as np
import scipy.linalg
from scipy.optimize import least_squares

from config import Config

logger = logging.getLogger(__name__)


class SingularFP(Exception):
    """Matriz de Faddeev-Popov (o métrica de órbita) singular: la acción no es libre aquí"""

    def __init__(self, message, condition=np.inf):
        super().__init__(message)
        self.condition = condition


class IllConditioned(Exception):
    """Operador mal condicionado; lleva un reporte con el diagnóstico"""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class NoConvergence(Exception):
    """Iteración sin convergencia; conserva el mejor iterado encontrado"""

    def __init__(self, message, iterations=0, residual=np.inf, best=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.best = best


def safe_linalg_operation(error_cls=SingularFP):
    """
    Decorador que traduce fallos de LAPACK a errores del dominio
    """
    def decorator(f):
        @functools.wraps(f)
        def decorated_function(*args, **kwargs):
            try:
                return f(*args, **kwargs)
            except np.linalg.LinAlgError as e:
                logger.error(f"❌ Fallo de álgebra lineal en {f.__name__}: {e}")
                raise error_cls(f"{f.__name__}: {e}") from e
        return decorated_function
    return decorator


def condition_number(matrix):
    """Número de condición en norma 2 (inf si no es finito)"""
    if matrix.size == 0:
        return 1.0
    cond = np.linalg.cond(matrix)
    return float(cond) if np.isfinite(cond) else np.inf


@safe_linalg_operation()
def checked_inverse(matrix, name="matriz", condition_max=None, error_cls=SingularFP):
    """
    Inversa vía LU con monitoreo de condición; nunca regulariza
    """
    condition_max = Config.FP_CONDITION_MAX if condition_max is None else condition_max
    matrix = np.asarray(matrix, dtype=float)
    cond = condition_number(matrix)
    if not cond < condition_max:
        raise error_cls(f"{name} singular o mal condicionada (cond={cond:.3e})", cond)
    lu_piv = scipy.linalg.lu_factor(matrix)
    return scipy.linalg.lu_solve(lu_piv, np.eye(matrix.shape[0]))


def truncated_pinv(matrix, cutoff=None):
    """
    Pseudo-inversa simétrica con valores propios < cutoff·λ_max truncados

    Returns:
        tuple: (pseudo-inversa, rango retenido, condición sobre lo retenido)
    """
    cutoff = Config.PINV_CUTOFF if cutoff is None else cutoff
    sym = 0.5 * (matrix + matrix.T)
    eigvals, eigvecs = scipy.linalg.eigh(sym)
    scale = np.max(np.abs(eigvals)) if eigvals.size else 0.0
    if scale == 0.0:
        return np.zeros_like(sym), 0, 1.0
    keep = np.abs(eigvals) > cutoff * scale
    kept = eigvals[keep]
    pinv = (eigvecs[:, keep] / kept) @ eigvecs[:, keep].T
    cond = float(np.max(np.abs(kept)) / np.min(np.abs(kept)))
    return pinv, int(np.count_nonzero(keep)), cond


def field_jacobian(fn, q, step=None):
    """
    Derivadas parciales ∂_E fn(q) por diferencias centradas de 4º orden

    Returns:
        np.ndarray: arreglo de forma (len(q),) + fn(q).shape con el índice E primero
    """
    step = Config.FD_STEP if step is None else step
    q = np.asarray(q, dtype=float)
    columns = []
    for e in range(q.size):
        dq = np.zeros_like(q)
        dq[e] = step
        columns.append(
            (-fn(q + 2 * dq) + 8 * fn(q + dq) - 8 * fn(q - dq) + fn(q - 2 * dq)) / (12 * step)
        )
    return np.array(columns)


def directional_derivative(fn, q, direction, step=None):
    """Derivada de fn en q a lo largo de direction (misma fórmula de 4º orden)"""
    step = Config.FD_STEP if step is None else step
    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        return np.zeros_like(np.asarray(fn(q), dtype=float))
    d = direction / norm * step
    return norm * (-fn(q + 2 * d) + 8 * fn(q + d) - 8 * fn(q - d) + fn(q - 2 * d)) / (12 * step)


class _TargetReached(Exception):
    """Corta least_squares en cuanto el mejor residuo baja del objetivo"""


def solve_least_squares(residual, z0, tol, max_iter, step=1e-6, scheme='central', on_accept=None):
    """
    Mínimos cuadrados no lineales con scipy.optimize.least_squares y jacobiano por diferencias finitas.
    Cada evaluación que mejora el mejor |R| se registra en la historia (monótona) y se pasa a on_accept.
    Tras alcanzar tol sigue puliendo hasta 1e-3·tol o hasta que least_squares termina.

    Args:
        residual: z -> (vector de residuos, aux)
        on_accept: callback(aux) con cada mejora (p. ej. actualizar un seguidor de autovectores)

    Returns:
        dict: z, aux, norm, iterations, history, converged
    """
    z0 = np.asarray(z0, dtype=float)
    values, aux = residual(z0)
    best = {'z': z0.copy(), 'aux': aux, 'norm': float(np.linalg.norm(values))}
    history = [best['norm']]
    if on_accept is not None:
        on_accept(aux)
    target = 1e-3 * tol

    def fun(z):
        values, aux = residual(z)
        norm = float(np.linalg.norm(values))
        if norm < best['norm']:
            best.update(z=np.array(z, dtype=float), aux=aux, norm=norm)
            history.append(norm)
            if on_accept is not None:
                on_accept(aux)
            logger.debug(f"🔄 least_squares: |R| = {norm:.3e}")
            if norm < target:
                raise _TargetReached()
        return values

    iterations = 0
    if z0.size and best['norm'] >= target:
        try:
            result = least_squares(fun, z0, jac='2-point' if scheme == 'forward' else '3-point',
                                   method='trf', diff_step=step, max_nfev=max_iter,
                                   ftol=1e-15, xtol=1e-15, gtol=1e-15)
            iterations = int(result.nfev)
            logger.debug(f"🔄 least_squares terminó: {result.message}")
        except _TargetReached:
            iterations = len(history) - 1

    return {'z': best['z'], 'aux': best['aux'], 'norm': best['norm'], 'iterations': iterations,
            'history': history, 'converged': best['norm'] < tol}


def canonical_sign(vector):
    """Signo tal que la entrada de mayor magnitud sea positiva"""
    vector = np.asarray(vector, dtype=float)
    if vector.size == 0:
        return vector
    pivot = int(np.argmax(np.abs(vector)))
    return -vector if vector[pivot] < 0 else vector
