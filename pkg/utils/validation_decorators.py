"""
Decoradores para los comandos de línea de órdenes
"""

from functools import wraps

import click


def run_options(f):
    """
    Opciones comunes a todos los subcomandos que ejecutan un pipeline

    Usage:
        @click.command('geometry')
        @run_options
        def geometry_command(config_path, out_dir, seed):
            ...
    """
    @click.option('--config', 'config_path', required=True,
                  type=click.Path(dir_okay=False), help='RunConfig en JSON')
    @click.option('--out', 'out_dir', default=None, type=click.Path(file_okay=False),
                  help='Directorio de salida')
    @click.option('--seed', default=None, type=int, help='Semilla (sobrescribe la del RunConfig)')
    @wraps(f)
    def decorated_function(*args, **kwargs):
        return f(*args, **kwargs)
    return decorated_function

