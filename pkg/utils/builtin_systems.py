"""
🧪 Sistemas de referencia incorporados
- Dos vectores en ℝ³ con la acción diagonal de SO(3) (problema de n cuerpos reducido)
- Kaluza-Klein M × SO(3): la conexión mecánica es conocida por construcción
- Variedad de grupo pura (P = órbita), caso degenerado sin direcciones horizontales
"""

import numpy as np

from utils.lie_algebra import builtin_algebra, levi_civita
from utils.mechanical_system import ChartOutOfRange, MechanicalSystem

EPS = levi_civita()

DEFAULT_TWO_VECTOR_POTENTIAL = {'linear': [0.5, 0.5, 0.0], 'quadratic': np.zeros((3, 3)).tolist()}


# ============================================================================
# SO(3) en coordenadas exponenciales
# ============================================================================

def hat(v):
    """Matriz antisimétrica con hat(v)·w = v × w"""
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def _so3_coefficients(theta):
    """(sin t/t, (1-cos t)/t², (t-sin t)/t³) con serie de Taylor cerca de 0"""
    t2 = float(theta @ theta)
    if t2 < 1e-4:
        a = 1 - t2 / 6 + t2 ** 2 / 120 - t2 ** 3 / 5040
        b = 0.5 - t2 / 24 + t2 ** 2 / 720 - t2 ** 3 / 40320
        c = 1 / 6 - t2 / 120 + t2 ** 2 / 5040 - t2 ** 3 / 362880
        return a, b, c
    t = np.sqrt(t2)
    return np.sin(t) / t, (1 - np.cos(t)) / t2, (t - np.sin(t)) / (t2 * t)


def rotation_matrix(theta):
    """Rodrigues: exp(hat θ)"""
    a, b, _ = _so3_coefficients(theta)
    h = hat(theta)
    return np.eye(3) + a * h + b * h @ h


def right_jacobian(theta):
    """g⁻¹dg = J_r(θ)dθ para g = exp(hat θ)"""
    _, b, c = _so3_coefficients(theta)
    h = hat(theta)
    return np.eye(3) - b * h + c * h @ h


# ============================================================================
# Dos vectores con la acción diagonal de SO(3)
# ============================================================================

def _two_vector_invariants(q):
    x1, x2 = q[:3], q[3:]
    return np.array([x1 @ x1, x2 @ x2, x1 @ x2])


def builtin_two_vector_so3(potential=None) -> MechanicalSystem:
    """
    P = {(x⁽¹⁾, x⁽²⁾)} ⊂ ℝ⁶, G = I, K^{(s)}_μ = x⁽ˢ⁾ × e_μ,
    χ = (x⁽¹⁾₁, x⁽¹⁾₂, x⁽²⁾₂), V = a·s + ½ sᵀBs sobre los invariantes s
    """
    potential = potential or DEFAULT_TWO_VECTOR_POTENTIAL
    lin = np.asarray(potential.get('linear', [0.5, 0.5, 0.0]), dtype=float)
    quad = np.asarray(potential.get('quadratic', np.zeros((3, 3))), dtype=float)
    quad = 0.5 * (quad + quad.T)

    def metric(q):
        return np.eye(6)

    def metric_jacobian(q):
        return np.zeros((6, 6, 6))

    def killing(q):
        return np.vstack([hat(q[:3]), hat(q[3:])])

    def killing_jacobian(q):
        # ∂K^{(s)}_{iμ}/∂x⁽ˢ⁾_j = ε_{ijμ}
        dk = np.zeros((6, 6, 3))
        dk[:3, :3, :] = EPS.transpose(1, 0, 2)
        dk[3:, 3:, :] = EPS.transpose(1, 0, 2)
        return dk

    def constraint(q):
        return np.array([q[0], q[1], q[4]])

    def constraint_jacobian(q):
        jac = np.zeros((3, 6))
        jac[0, 0] = jac[1, 1] = jac[2, 4] = 1.0
        return jac

    def value(q):
        s = _two_vector_invariants(q)
        return float(lin @ s + 0.5 * s @ quad @ s)

    def gradient(q):
        x1, x2 = q[:3], q[3:]
        dv = lin + quad @ _two_vector_invariants(q)
        return np.concatenate([2 * dv[0] * x1 + dv[2] * x2, 2 * dv[1] * x2 + dv[2] * x1])

    return MechanicalSystem(
        name='two_vector_so3',
        n_p=6,
        algebra=builtin_algebra('so3'),
        metric=metric,
        killing=killing,
        constraint=constraint,
        potential=value,
        metric_jacobian=metric_jacobian,
        killing_jacobian=killing_jacobian,
        constraint_jacobian=constraint_jacobian,
        potential_gradient=gradient,
        invariants=_two_vector_invariants,
        parameters={'family': 'two_vector_so3',
                    'potential': {'linear': lin.tolist(), 'quadratic': quad.tolist()}},
    )


# ============================================================================
# Kaluza-Klein M × SO(3)
# ============================================================================

def _check_exponential_chart(theta):
    if np.linalg.norm(theta) >= np.pi * (1 - 1e-6):
        raise ChartOutOfRange(f"|θ| = {np.linalg.norm(theta):.4f} fuera de la carta exponencial")


def _group_bundle(name, base_dim, connection, fiber_scale, base_frequency, extra=None):
    algebra = builtin_algebra('so3')
    n = base_dim
    gamma0 = float(fiber_scale)
    omega2 = float(base_frequency) ** 2

    def split(q):
        return q[:n], q[n:]

    def chart_check(q):
        _check_exponential_chart(split(q)[1])

    def frame(q):
        """W = [R(θ)ᵀA(x) | J_r(θ)]: la 1-forma de conexión en la carta"""
        x, theta = split(q)
        _check_exponential_chart(theta)
        return np.hstack([rotation_matrix(theta).T @ connection(x), right_jacobian(theta)])

    def metric(q):
        w = frame(q)
        g = gamma0 * w.T @ w
        g[:n, :n] += np.eye(n)
        return g

    def killing(q):
        _, theta = split(q)
        _check_exponential_chart(theta)
        k = np.zeros((n + 3, 3))
        k[n:, :] = np.linalg.solve(right_jacobian(theta), np.eye(3))
        return k

    def constraint(q):
        return np.array(split(q)[1])

    def constraint_jacobian(q):
        jac = np.zeros((3, n + 3))
        jac[:, n:] = np.eye(3)
        return jac

    def value(q):
        x = split(q)[0]
        return 0.5 * omega2 * float(x @ x)

    def gradient(q):
        x = split(q)[0]
        return np.concatenate([omega2 * x, np.zeros(3)])

    def invariants(q):
        return np.asarray(split(q)[0], dtype=float)

    return MechanicalSystem(
        name=name,
        n_p=n + 3,
        algebra=algebra,
        metric=metric,
        killing=killing,
        constraint=constraint,
        potential=value,
        constraint_jacobian=constraint_jacobian,
        potential_gradient=gradient,
        chart_check=chart_check,
        invariants=invariants,
        parameters={'family': name, 'base_dim': n, 'fiber_scale': gamma0,
                    'base_frequency': float(base_frequency), **(extra or {})},
    )


def linear_connection(constant, linear=None):
    """A^μ_a(x) = C^μ_a + L^μ_{ab} x^b"""
    constant = np.asarray(constant, dtype=float)
    linear = None if linear is None else np.asarray(linear, dtype=float)

    def connection(x):
        if linear is None:
            return constant
        return constant + np.einsum('mab,b->ma', linear, x)
    return connection


def builtin_kaluza_klein(connection_input, base_dim=2, fiber_scale=1.0, base_frequency=0.0,
                         connection_parameters=None) -> MechanicalSystem:
    """
    P = M × SO(3) con métrica h + γ₀|g⁻¹dg + Ad_{g⁻¹}A|²; Σ = {θ = 0}

    Args:
        connection_input: función x ↦ A^μ_a(x) (matriz 3 × base_dim)
        connection_parameters: descripción serializable de la conexión para el manifiesto
    """
    if base_dim < 1:
        raise ValueError("La base de Kaluza-Klein necesita dimensión ≥ 1")
    return _group_bundle('kaluza_klein', base_dim, connection_input, fiber_scale, base_frequency,
                         {'connection': connection_parameters})


def builtin_group_manifold(fiber_scale=1.0) -> MechanicalSystem:
    """P = SO(3) en la carta exponencial: K genera todo el espacio tangente"""
    return _group_bundle('group_manifold', 0, lambda x: np.zeros((3, 0)), fiber_scale, 0.0)


# ============================================================================
# Puntos aleatorios
# ============================================================================

def random_sigma_points(sys: MechanicalSystem, rng, count, on_sigma=True):
    """Puntos aleatorios con acción libre; sobre Σ salvo que on_sigma=False"""
    family = sys.parameters.get('family')
    points = []
    for _ in range(count):
        if family == 'two_vector_so3':
            r1 = rng.uniform(0.5, 2.0)
            a, b = rng.uniform(0.3, 2.0), rng.uniform(-1.5, 1.5)
            q = np.array([0.0, 0.0, r1, a, 0.0, b])
            if not on_sigma:
                q = np.concatenate([rotation_matrix(rng.normal(size=3)) @ q[:3],
                                    rotation_matrix(rng.normal(size=3)) @ q[3:]])
        elif family in ('kaluza_klein', 'group_manifold'):
            n = sys.parameters['base_dim']
            theta = np.zeros(3) if on_sigma else rng.uniform(-0.5, 0.5, size=3)
            q = np.concatenate([rng.uniform(-1.0, 1.0, size=n), theta])
        else:
            raise ValueError(f"Sin generador de puntos para la familia {family}")
        points.append(q)
    return points


# ============================================================================
# Construcción desde la configuración
# ============================================================================

def system_from_config(section) -> MechanicalSystem:
    """
    MechanicalSystem a partir de la sección `system` ya validada

    Raises:
        ValueError: formas incompatibles de la conexión
    """
    name = section['name']
    if name == 'two_vector_so3':
        system = builtin_two_vector_so3(section.get('potential'))
    elif name == 'group_manifold':
        system = builtin_group_manifold(section.get('fiber_scale', 1.0))
    elif name == 'kaluza_klein':
        base_dim = int(section.get('base_dim', 2))
        spec = section.get('connection') or {}
        constant = np.asarray(spec.get('constant', np.zeros((3, base_dim))), dtype=float)
        linear = spec.get('linear')
        if constant.shape != (3, base_dim):
            raise ValueError(f"connection.constant debe tener forma (3, {base_dim}), recibido {constant.shape}")
        if linear is not None and np.asarray(linear).shape != (3, base_dim, base_dim):
            raise ValueError(f"connection.linear debe tener forma (3, {base_dim}, {base_dim})")
        system = builtin_kaluza_klein(
            linear_connection(constant, linear), base_dim,
            section.get('fiber_scale', 1.0), section.get('base_frequency', 0.0),
            {'constant': constant.tolist(), 'linear': linear},
        )
    else:
        raise ValueError(f"Sistema desconocido: {name}")
    mode = section.get('derivative_mode', 'analytic')
    return system if mode == system.derivative_mode else system.with_derivative_mode(mode)
