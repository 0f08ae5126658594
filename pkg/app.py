import logging
import sys

import click
from dotenv import load_dotenv

from commands.dynamics import integrate_cmd
from commands.equilibria import equilibria_cmd
from commands.geometry import geometry_cmd
from commands.lattice import lattice_equilibria_cmd, lattice_geometry_cmd, lattice_integrate_cmd
from commands.report import report_cmd
from config import Config

# Cargar variables de entorno desde .env
load_dotenv()


def setup_logging(level=None):
    """Logging a stderr; la salida estándar queda para los mensajes de click"""
    level = (level or Config.LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
        force=True,
    )


def create_cli():
    @click.group()
    @click.version_option(Config.VERSION, prog_name=Config.TOOL_NAME)
    @click.option('--log-level', default=None,
                  type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
                  help='Sobrescribe WONG_REDUCE_LOG_LEVEL')
    def cli(log_level):
        """wong-reduce: reducción por simetría y ecuaciones de Wong"""
        setup_logging(log_level)

    # Registrar subcomandos
    cli.add_command(geometry_cmd)
    cli.add_command(integrate_cmd)
    cli.add_command(equilibria_cmd)
    cli.add_command(lattice_geometry_cmd)
    cli.add_command(lattice_integrate_cmd)
    cli.add_command(lattice_equilibria_cmd)
    cli.add_command(report_cmd)
    return cli


cli = create_cli()

if __name__ == "__main__":
    cli()
