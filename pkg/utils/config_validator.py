"""
Sistema de Validación de Configuraciones de Ejecución para wong-reduce
Centraliza la lectura del RunConfig (JSON), los valores por defecto y el rechazo de claves desconocidas
"""

import json
import logging
import math
from typing import Any, Dict, Optional

import numpy as np

from config import Config, DEFAULT_TOLERANCES
from utils.mechanical_system import DERIVATIVE_MODES
from utils.reduced_dynamics import INTEGRATION_METHODS, MOMENTUM_MODES, VERTICAL_FORMS

logger = logging.getLogger(__name__)

SUBCOMMANDS = ('geometry', 'integrate', 'equilibria',
               'lattice-geometry', 'lattice-integrate', 'lattice-equilibria')
SYSTEM_NAMES = ('two_vector_so3', 'kaluza_klein', 'group_manifold')

# Sección obligatoria por subcomando
REQUIRED_SECTIONS = {
    'geometry': 'system', 'integrate': 'system', 'equilibria': 'system',
    'lattice-geometry': 'lattice', 'lattice-integrate': 'lattice', 'lattice-equilibria': 'lattice',
}


class ConfigInvalid(Exception):
    """Configuración ilegible o que no cumple el esquema; key es la clave con puntos"""

    def __init__(self, path, key, message=""):
        super().__init__(f"{path}: clave '{key}': {message}" if key else f"{path}: {message}")
        self.path = path
        self.key = key


# ============================================================================
# Esquemas
# ============================================================================

SYSTEM_RULES = {
    'name': {'rule': 'choice', 'choices': SYSTEM_NAMES, 'required': True},
    'potential': {'rule': 'section', 'schema': {
        'linear': {'rule': 'vector', 'length': 3, 'default': [0.5, 0.5, 0.0]},
        'quadratic': {'rule': 'matrix', 'default': [[0.0] * 3] * 3},
    }},
    'base_dim': {'rule': 'int', 'minimum': 1, 'default': 2},
    'fiber_scale': {'rule': 'float', 'minimum': 0.0, 'exclusive': True, 'default': 1.0},
    'base_frequency': {'rule': 'float', 'minimum': 0.0, 'default': 0.0},
    'connection': {'rule': 'section', 'schema': {
        'constant': {'rule': 'matrix'},
        'linear': {'rule': 'matrix'},
    }},
    'derivative_mode': {'rule': 'choice', 'choices': DERIVATIVE_MODES, 'default': 'analytic'},
}

INITIAL_RULES = {
    'q': {'rule': 'vector'},
    'q_dot': {'rule': 'vector'},
    'p': {'rule': 'vector'},
    'points': {'rule': 'vector_list'},
    'random_points': {'rule': 'int', 'minimum': 0, 'default': 0},
    'off_sigma': {'rule': 'bool', 'default': False},
}

INTEGRATOR_RULES = {
    't_end': {'rule': 'float', 'minimum': 0.0, 'default': 1.0},
    'dt': {'rule': 'float', 'minimum': 0.0, 'exclusive': True, 'default': 1e-2},
    'method': {'rule': 'choice', 'choices': INTEGRATION_METHODS, 'default': 'rk4'},
    'sample_every': {'rule': 'int', 'minimum': 1, 'default': 1},
    'vertical_form': {'rule': 'choice', 'choices': VERTICAL_FORMS, 'default': 'moment_map'},
    'momentum': {'rule': 'choice', 'choices': MOMENTUM_MODES, 'default': 'free'},
    'oracle': {'rule': 'bool', 'default': False},
    'convergence': {'rule': 'bool', 'default': False},
}

SOLVER_RULES = {
    'eigen_index': {'rule': 'int', 'minimum': 0, 'default': 0},
    'scale_guess': {'rule': 'float', 'default': 1.0},
    'tol': {'rule': 'float', 'minimum': 0.0, 'exclusive': True, 'default': Config.SOLVER_TOL},
    'max_iter': {'rule': 'int', 'minimum': 1, 'default': Config.SOLVER_MAX_ITER},
    'fd_step': {'rule': 'float', 'minimum': 0.0, 'exclusive': True, 'default': 1e-6},
    'verify': {'rule': 'bool', 'default': False},
    'verify_t_end': {'rule': 'float', 'minimum': 0.0, 'exclusive': True, 'default': 1.0},
    'verify_dt': {'rule': 'float', 'minimum': 0.0, 'exclusive': True, 'default': 1e-2},
}

LATTICE_RULES = {
    'L': {'rule': 'int', 'minimum': 2, 'maximum': 6, 'default': 2},
    'spacing': {'rule': 'float', 'minimum': 0.0, 'exclusive': True, 'default': 1.0},
    'field': {'rule': 'section', 'schema': {
        'init': {'rule': 'choice', 'choices': ('zero', 'random', 'file'), 'default': 'random'},
        'amplitude': {'rule': 'float', 'minimum': 0.0, 'default': 0.1},
        'path': {'rule': 'string'},
    }},
    'velocity': {'rule': 'section', 'schema': {
        'init': {'rule': 'choice', 'choices': ('zero', 'random'), 'default': 'zero'},
        'amplitude': {'rule': 'float', 'minimum': 0.0, 'default': 0.1},
    }},
    'momentum': {'rule': 'section', 'schema': {
        'init': {'rule': 'choice', 'choices': ('zero', 'eigen', 'random'), 'default': 'zero'},
        'index': {'rule': 'int', 'minimum': 0, 'default': 0},
        'scale': {'rule': 'float', 'default': 1.0},
        'amplitude': {'rule': 'float', 'minimum': 0.0, 'default': 0.1},
    }},
    'cross_check': {'rule': 'bool', 'default': False},
}

TOLERANCE_RULES = {
    name: {'rule': 'float', 'minimum': 0.0, 'default': value}
    for name, value in DEFAULT_TOLERANCES.items()
}

RUN_RULES = {
    'subcommand': {'rule': 'choice', 'choices': SUBCOMMANDS},
    'system': {'rule': 'section', 'schema': SYSTEM_RULES, 'optional': True},
    'lattice': {'rule': 'section', 'schema': LATTICE_RULES, 'optional': True},
    'initial': {'rule': 'section', 'schema': INITIAL_RULES},
    'integrator': {'rule': 'section', 'schema': INTEGRATOR_RULES},
    'solver': {'rule': 'section', 'schema': SOLVER_RULES},
    'tolerances': {'rule': 'section', 'schema': TOLERANCE_RULES},
    'seed': {'rule': 'int', 'minimum': 0, 'default': 0},
    'out': {'rule': 'string'},
}


# ============================================================================
# Validador
# ============================================================================

class ConfigValidator:
    """Validador centralizado de todas las claves del RunConfig"""

    @classmethod
    def validate_choice(cls, value, choices) -> Dict[str, Any]:
        if value not in choices:
            return {'valid': False, 'error': f"valor '{value}' no está entre {list(choices)}"}
        return {'valid': True, 'value': value}

    @classmethod
    def validate_int(cls, value, minimum=None, maximum=None) -> Dict[str, Any]:
        if isinstance(value, bool) or not isinstance(value, int):
            return {'valid': False, 'error': 'debe ser un entero'}
        if minimum is not None and value < minimum:
            return {'valid': False, 'error': f'debe ser ≥ {minimum}'}
        if maximum is not None and value > maximum:
            return {'valid': False, 'error': f'debe ser ≤ {maximum}'}
        return {'valid': True, 'value': value}

    @classmethod
    def validate_float(cls, value, minimum=None, exclusive=False) -> Dict[str, Any]:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return {'valid': False, 'error': 'debe ser un número'}
        value = float(value)
        if not math.isfinite(value):
            return {'valid': False, 'error': 'debe ser finito'}
        if minimum is not None and (value <= minimum if exclusive else value < minimum):
            return {'valid': False, 'error': f"debe ser {'>' if exclusive else '≥'} {minimum}"}
        return {'valid': True, 'value': value}

    @classmethod
    def validate_bool(cls, value) -> Dict[str, Any]:
        if not isinstance(value, bool):
            return {'valid': False, 'error': 'debe ser true o false'}
        return {'valid': True, 'value': value}

    @classmethod
    def validate_string(cls, value) -> Dict[str, Any]:
        if not isinstance(value, str) or not value.strip():
            return {'valid': False, 'error': 'debe ser un texto no vacío'}
        return {'valid': True, 'value': value.strip()}

    @classmethod
    def validate_matrix(cls, value) -> Dict[str, Any]:
        """Arreglo numérico anidado y finito (la forma se comprueba al construir el sistema)"""
        if value is None:
            return {'valid': True, 'value': None}
        try:
            array = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            return {'valid': False, 'error': 'debe ser un arreglo numérico rectangular'}
        if array.ndim == 0 or not np.all(np.isfinite(array)):
            return {'valid': False, 'error': 'debe ser un arreglo de números finitos'}
        return {'valid': True, 'value': array.tolist()}

    @classmethod
    def validate_vector(cls, value, length=None) -> Dict[str, Any]:
        result = cls.validate_matrix(value)
        if not result['valid'] or result['value'] is None:
            return result
        if np.asarray(result['value']).ndim != 1:
            return {'valid': False, 'error': 'debe ser una lista plana de números'}
        if length is not None and len(result['value']) != length:
            return {'valid': False, 'error': f'debe tener {length} componentes'}
        return result

    @classmethod
    def validate_vector_list(cls, value) -> Dict[str, Any]:
        if not isinstance(value, list) or not value:
            return {'valid': False, 'error': 'debe ser una lista no vacía de vectores'}
        vectors = []
        for item in value:
            result = cls.validate_vector(item)
            if not result['valid'] or result['value'] is None:
                return {'valid': False, 'error': result.get('error', 'vector vacío')}
            vectors.append(result['value'])
        return {'valid': True, 'value': vectors}

    @classmethod
    def validate_rule(cls, value, spec, path) -> Dict[str, Any]:
        rule = spec['rule']
        if rule == 'choice':
            return cls.validate_choice(value, spec['choices'])
        elif rule == 'int':
            return cls.validate_int(value, spec.get('minimum'), spec.get('maximum'))
        elif rule == 'float':
            return cls.validate_float(value, spec.get('minimum'), spec.get('exclusive', False))
        elif rule == 'bool':
            return cls.validate_bool(value)
        elif rule == 'string':
            return cls.validate_string(value)
        elif rule == 'matrix':
            return cls.validate_matrix(value)
        elif rule == 'vector':
            return cls.validate_vector(value, spec.get('length'))
        elif rule == 'vector_list':
            return cls.validate_vector_list(value)
        elif rule == 'section':
            if not isinstance(value, dict):
                return {'valid': False, 'error': 'debe ser un objeto'}
            nested = cls.validate_config_data(value, spec['schema'], path)
            if not nested['valid']:
                return {'valid': False, 'errors': nested['errors']}
            return {'valid': True, 'value': nested['values'], 'warnings': nested['warnings']}
        raise ValueError(f"Regla de validación desconocida: {rule}")

    @classmethod
    def validate_config_data(cls, data: Dict[str, Any], rules: Dict[str, Dict], path: str = '') -> Dict[str, Any]:
        """Valida una sección completa; las claves ausentes toman su valor por defecto"""
        results = {
            'valid': True,
            'errors': {},
            'values': {},
            'warnings': []
        }

        for key in data:
            if key not in rules:
                results['valid'] = False
                results['errors'][f'{path}{key}'] = 'clave desconocida'

        for key, spec in rules.items():
            dotted = f'{path}{key}'
            if key not in data:
                if spec.get('required'):
                    results['valid'] = False
                    results['errors'][dotted] = 'clave requerida'
                elif spec['rule'] == 'section' and not spec.get('optional'):
                    results['values'][key] = cls.validate_config_data({}, spec['schema'], f'{dotted}.')['values']
                elif 'default' in spec:
                    default = spec['default']
                    results['values'][key] = list(default) if isinstance(default, list) else default
                continue

            result = cls.validate_rule(data[key], spec, f'{dotted}.')
            if result['valid']:
                results['values'][key] = result['value']
                results['warnings'].extend(result.get('warnings', []))
            else:
                results['valid'] = False
                if 'errors' in result:
                    results['errors'].update(result['errors'])
                else:
                    results['errors'][dotted] = result['error']

        return results


# Instancia global del validador
config_validator = ConfigValidator()


def resolve_run_config(data, subcommand, source='<config>') -> Dict[str, Any]:
    """
    RunConfig resuelto con todos los valores por defecto

    Raises:
        ConfigInvalid
    """
    if not isinstance(data, dict):
        raise ConfigInvalid(source, '', 'el RunConfig debe ser un objeto JSON')
    if subcommand not in REQUIRED_SECTIONS:
        raise ConfigInvalid(source, 'subcommand', f"subcomando desconocido '{subcommand}'")
    if 'subcommand' in data and data['subcommand'] != subcommand:
        raise ConfigInvalid(source, 'subcommand',
                            f"el archivo declara '{data['subcommand']}' pero se ejecutó '{subcommand}'")
    required = REQUIRED_SECTIONS[subcommand]
    if required not in data:
        raise ConfigInvalid(source, required, 'clave requerida')

    result = config_validator.validate_config_data(data, RUN_RULES)
    if not result['valid']:
        key, message = sorted(result['errors'].items())[0]
        logger.error(f"❌ Configuración inválida ({len(result['errors'])} errores): {key}: {message}")
        raise ConfigInvalid(source, key, message)
    for warning in result['warnings']:
        logger.warning(f"⚠️ {warning}")
    values = result['values']
    values['subcommand'] = subcommand
    return values


def load_run_config(config_path, subcommand) -> Dict[str, Any]:
    """Lee el JSON y lo resuelve; cualquier fallo de lectura es ConfigInvalid"""
    try:
        with open(config_path, encoding='utf-8') as handle:
            data = json.load(handle)
    except OSError as e:
        raise ConfigInvalid(str(config_path), '', f'no se pudo leer: {e}') from e
    except json.JSONDecodeError as e:
        raise ConfigInvalid(str(config_path), '', f'JSON inválido: {e}') from e
    return resolve_run_config(data, subcommand, str(config_path))


def tolerance_dict(config: Optional[Dict[str, Any]]) -> Dict[str, float]:
    """Tolerancias resueltas (por defecto + las del RunConfig)"""
    merged = dict(DEFAULT_TOLERANCES)
    merged.update((config or {}).get('tolerances', {}))
    return merged
