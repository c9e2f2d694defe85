import click

from app.analysis import bp
from app.options import build_config, cone_options, input_options, output_options, run_command, scan_options
from app.pipeline import run_blowup, run_context_map, run_detect, run_verify


@bp.cli.command('detect')
@input_options
@scan_options
@output_options
def detect(**options):
    """Classify every point as regular, singular or undetermined."""
    run_command(run_detect, build_config('detect', **options))


@bp.cli.command('blowup')
@input_options
@scan_options
@cone_options
@output_options
def blowup(**options):
    """Estimate the tangent cone and blow up at singular points."""
    run_command(run_blowup, build_config('blowup', **options))


@bp.cli.command('verify-theorem1')
@input_options
@scan_options
@cone_options
@output_options
def verify_theorem1(**options):
    """Blow up and check that every exceptional point is regular.

    Exits with code 3 when any check fails.
    """
    run_command(run_verify, build_config('verify-theorem1', **options))


@bp.cli.command('context-map')
@input_options
@scan_options
@click.option('--sequence', type=click.Path(exists=True, dir_okay=False), required=True,
              help='Token ids (JSON list or whitespace separated) indexing the table rows.')
@click.option('--aggregator', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Aggregator weights JSON {kind, q, tau}; mean when omitted.')
@click.option('--context-k', type=click.IntRange(min=1), default=2, help='Half-width of the context window.')
@click.option('--k', type=int, default=None)
@click.option('--r-loc', type=float, default=None)
@output_options
def context_map(**options):
    """Embed a token sequence, replacing singular tokens by divisor points."""
    run_command(run_context_map, build_config('context-map', **options))
