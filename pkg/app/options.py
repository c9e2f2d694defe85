"""Shared click options and the error boundary of every command.

Options default to ``None``; unset ones fall back to ``current_app.config``.
"""
import click
from flask import current_app

from app.geometry.errors import ConfigError, FormatError, GeometryError
from app.reporting import FORMATS, RunConfig, emit_report

EXIT_VALIDATION = 2


class ValidationFailed(click.ClickException):
    exit_code = EXIT_VALIDATION


def _stack(*decorators):
    def apply(f):
        for decorator in reversed(decorators):
            f = decorator(f)
        return f
    return apply


def _id_list(ctx, param, value):
    if value is None:
        return None
    try:
        return tuple(sorted({int(v) for v in value.split(",") if v.strip()}))
    except ValueError:
        raise click.BadParameter("expected comma-separated point ids") from None


output_options = _stack(
    click.option("--output-dir", type=click.Path(file_okay=False), default=None,
                 help="Directory holding run folders (default EMBLOWUP_OUTPUT_DIR)."),
    click.option("--name", default=None, help="Run folder name (default: the subcommand)."),
    click.option("--threads", type=click.IntRange(min=1), default=None,
                 help="Worker threads (default EMBLOWUP_THREADS)."),
)

input_options = _stack(
    click.argument("input_path", type=click.Path(exists=True, dir_okay=False)),
    click.option("--format", "fmt", type=click.Choice(FORMATS), default=None,
                 help="Input format; inferred from the suffix when omitted."),
)

scan_options = _stack(
    click.option("--epsilon", type=float, default=None, help="Singularity threshold."),
    click.option("--r-max", type=float, default=None, help="Upper radius of the scan window."),
    click.option("--r-max-policy", type=click.Choice(["global", "per-point"]), default="global"),
    click.option("--grid-size", type=int, default=None),
    click.option("--estimator", type=click.Choice(["regression", "two-point"]), default="regression"),
    click.option("--window", type=int, default=9, help="Regression window (odd, >= 3)."),
    click.option("--v-min", type=int, default=None, help="Smallest volume a slope may use."),
    click.option("--points", callback=_id_list, default=None, help="Scan only these point ids."),
    click.option("--all-profiles", is_flag=True, help="Write a profile CSV for every scanned point."),
)

cone_options = _stack(
    click.option("--center", "centers", callback=_id_list, default=None,
                 help="Blow up at these point ids instead of the detected ones."),
    click.option("--max-centers", type=int, default=1,
                 help="How many detected singular points to analyse."),
    click.option("--k", type=int, default=None, help="Fix the number of cone components."),
    click.option("--k-max", type=int, default=None),
    click.option("--merge-angle", "merge_angle_deg", type=float, default=None,
                 help="Merge direction clusters closer than this many degrees."),
    click.option("--r-loc", type=float, default=None, help="Radius for secant directions."),
    click.option("--lambda", "lam", type=float, default=None, help="Angular weight of the blow-up metric."),
    click.option("--dense-divisor", type=int, default=0, help="Extra quasi-uniform divisor points."),
    click.option("--seed", type=int, default=None),
)


def build_config(subcommand, **options):
    cfg = current_app.config
    defaults = {
        "output_dir": cfg["OUTPUT_DIR"],
        "threads": cfg["THREADS"],
        "epsilon": cfg["EPSILON"],
        "v_min": cfg["V_MIN"],
        "grid_size": cfg["GRID_SIZE"],
        "merge_angle_deg": cfg["MERGE_ANGLE_DEG"],
        "k_max": cfg["K_MAX"],
    }
    input_path = options.pop("input_path", None)
    if input_path is not None:
        options["inputs"] = (input_path,)
    values = {k: v for k, v in options.items() if v is not None}
    for key, value in defaults.items():
        values.setdefault(key, value)
    try:
        return RunConfig(subcommand, **values).validate()
    except ConfigError as exc:
        raise ValidationFailed(str(exc)) from None


def run_command(runner, config):
    """Run a pipeline step, write its report and exit with the report's code."""
    current_app.logger.info("%s: output in %s", config.subcommand, config.run_dir)
    try:
        report, profiles = runner(config)
        emit_report(report, profiles)
    except (ConfigError, FormatError, GeometryError) as exc:
        raise ValidationFailed(f"{type(exc).__name__}: {exc}") from None
    except OSError as exc:
        raise click.ClickException(str(exc)) from None
    if report.exit_code:
        current_app.logger.warning("%s finished with exit code %d", config.subcommand, report.exit_code)
        click.get_current_context().exit(report.exit_code)

