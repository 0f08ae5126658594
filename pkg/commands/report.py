"""
📊 Subcomando report-invariants
"""

import logging

import click

from utils.report_service import MissingArtifact, report_service
from utils.run_manager import EXIT_ERROR, EXIT_OK

logger = logging.getLogger(__name__)


@click.command('report-invariants')
@click.option('--out', 'out_dir', required=True, type=click.Path(file_okay=False),
              help='Directorio de una ejecución terminada')
@click.option('--tolerance-scale', default=1.0, type=click.FloatRange(min=0.0, min_open=True),
              help='Factor aplicado a todas las tolerancias')
@click.pass_context
def report_cmd(ctx, out_dir, tolerance_scale):
    """Tabla de invariantes (report.md) de una ejecución terminada"""
    try:
        result = report_service.report_invariants(out_dir, tolerance_scale)
    except MissingArtifact as e:
        logger.error(f"❌ {e}")
        click.echo(f"❌ {e}", err=True)
        ctx.exit(EXIT_ERROR)
    click.echo(result['text'])
    if result['flagged']:
        click.echo(f"⚠️ Fuera de tolerancia: {', '.join(result['flagged'])}")
    ctx.exit(EXIT_OK)
