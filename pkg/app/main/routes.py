import json
from pathlib import Path

import click
from flask import abort, current_app, jsonify
from werkzeug.utils import safe_join

from app.geometry.errors import ConfigError
from app.main import bp
from app.options import ValidationFailed
from app.reporting import load_report, render_summary


def _output_dir():
    return Path(current_app.config['OUTPUT_DIR'])


def list_runs(root):
    """Run folders under ``root`` that hold a report, sorted by name."""
    runs = []
    if not root.is_dir():
        return runs
    for folder in sorted(p for p in root.iterdir() if (p / 'report.json').is_file()):
        try:
            data = load_report(folder)
        except (ConfigError, ValueError):
            current_app.logger.warning("skipping unreadable report in %s", folder)
            continue
        runs.append({
            'name': folder.name,
            'subcommand': data['config']['subcommand'],
            'exit_code': data.get('exit_code', 0),
            'singular_points': len(data.get('singular_points', [])),
        })
    return runs


@bp.route('/')
def index():
    return jsonify(runs=list_runs(_output_dir()))


@bp.route('/runs/<name>')
def run_report(name):
    folder = safe_join(str(_output_dir()), name)
    if folder is None or not (Path(folder) / 'report.json').is_file():
        abort(404)
    try:
        return jsonify(load_report(folder))
    except ConfigError:
        abort(404)


@bp.cli.command('report')
@click.argument('run')
@click.option('--output-dir', type=click.Path(file_okay=False), default=None)
@click.option('--json', 'as_json', is_flag=True, help='Print the stored report instead of the summary.')
def report(run, output_dir, as_json):
    """Print the summary of a finished run (a folder path or a run name)."""
    folder = Path(run)
    if not (folder / 'report.json').is_file():
        folder = Path(output_dir or _output_dir()) / run
    try:
        data = load_report(folder)
    except FileNotFoundError:
        raise ValidationFailed(f"no report.json in {folder}") from None
    except (ConfigError, ValueError) as exc:
        raise ValidationFailed(f"{folder}: {exc}") from None
    if as_json:
        click.echo(json.dumps(data, sort_keys=True, indent=2))
    else:
        click.echo(render_summary(data), nl=False)
