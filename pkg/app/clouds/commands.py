import json

import click

from app.clouds import bp
from app.geometry.synth import SynthKind
from app.options import ValidationFailed, build_config, output_options, run_command
from app.pipeline import run_synth
from app.reporting import FORMATS


def _dims(ctx, param, value):
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(",")]
    except ValueError:
        raise click.BadParameter("expected comma-separated integers") from None


@bp.cli.command('synth')
@click.option('--spec', 'spec_path', type=click.Path(exists=True, dir_okay=False),
              help='JSON synth spec; flags below override its fields.')
@click.option('--kind', type=click.Choice([k.value for k in SynthKind]), default=None)
@click.option('--n', 'ambient', type=int, default=None, help='Ambient dimension.')
@click.option('--dims', callback=_dims, default=None, help='Component dimensions, e.g. 1,2.')
@click.option('--samples', callback=_dims, default=None, help='Samples per component.')
@click.option('--noise', type=float, default=None, help='RMS norm of the Gaussian noise.')
@click.option('--radius', type=float, default=None)
@click.option('--min-angle', 'min_angle', type=float, default=None,
              help='Smallest principal angle between random components (degrees).')
@click.option('--orthogonal', is_flag=True, help='Put components on disjoint axes.')
@click.option('--no-center', is_flag=True, help='Leave the intersection point out.')
@click.option('--seed', type=int, required=True)
@click.option('--format', 'fmt', type=click.Choice(FORMATS), default='csv')
@output_options
def synth(spec_path, kind, ambient, dims, samples, noise, radius, min_angle, orthogonal,
          no_center, seed, fmt, **options):
    """Generate a synthetic cloud with its ground truth."""
    data = {}
    if spec_path:
        with open(spec_path, encoding='utf-8') as fh:
            data = json.load(fh)
    overrides = {
        'kind': kind,
        'n': ambient,
        'dims': dims,
        'samples': samples,
        'noise': noise,
        'radius': radius,
        'min_principal_angle_deg': min_angle,
        'orthogonal': orthogonal or None,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if no_center:
        data['include_center'] = False
    data['seed'] = seed
    for required in ('kind', 'n'):
        if required not in data:
            raise ValidationFailed(f"{required}: missing (give --{required} or --spec)")
    config = build_config('synth', seed=seed, fmt=fmt, synth=data, **options)
    run_command(run_synth, config)
