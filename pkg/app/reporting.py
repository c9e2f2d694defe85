"""Run configuration, analysis reports and their files on disk."""
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import pandas as pd
from jinja2 import Environment, PackageLoader

from app.geometry.dimension import Estimator
from app.geometry.errors import ConfigError
from app.geometry.singularity import SingularityParams

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SUBCOMMANDS = ("synth", "detect", "blowup", "verify-theorem1", "context-map", "report")
FORMATS = ("csv", "raw-f32", "raw-f64")


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    inputs: tuple = ()
    fmt: Optional[str] = None
    output_dir: str = "runs"
    name: Optional[str] = None
    seed: Optional[int] = None
    threads: int = 1
    # singularity scan
    epsilon: float = 1.0
    r_max: Optional[float] = None
    r_max_policy: str = "global"
    grid_size: int = 32
    estimator: str = "regression"
    window: int = 9
    v_min: int = 50
    points: Optional[tuple] = None
    all_profiles: bool = False
    # tangent cone and blow-up
    centers: Optional[tuple] = None
    max_centers: int = 1
    k: Optional[int] = None
    k_max: int = 8
    merge_angle_deg: float = 20.0
    r_loc: Optional[float] = None
    lam: Optional[float] = None
    dense_divisor: int = 0
    # context map
    aggregator: Optional[str] = None
    context_k: int = 2
    sequence: Optional[str] = None
    # synth
    synth: Optional[dict] = field(default=None)

    @property
    def run_name(self):
        return self.name or self.subcommand

    @property
    def run_dir(self):
        return Path(self.output_dir) / self.run_name

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError("subcommand", f"unknown subcommand {self.subcommand!r}")
        if self.fmt is not None and self.fmt not in FORMATS:
            raise ConfigError("format", f"must be one of {', '.join(FORMATS)}")
        if self.threads < 1:
            raise ConfigError("threads", f"must be >= 1, got {self.threads}")
        if self.max_centers < 1:
            raise ConfigError("max_centers", f"must be >= 1, got {self.max_centers}")
        if self.k is not None and not 1 <= self.k <= self.k_max:
            raise ConfigError("k", f"must be in [1, {self.k_max}], got {self.k}")
        if self.k_max < 1:
            raise ConfigError("k_max", f"must be >= 1, got {self.k_max}")
        if not 0 < self.merge_angle_deg <= 90:
            raise ConfigError("merge_angle_deg", f"must be in (0, 90], got {self.merge_angle_deg}")
        for name in ("r_loc", "lam"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(name, f"must be > 0, got {value}")
        if self.dense_divisor < 0:
            raise ConfigError("dense_divisor", f"must be >= 0, got {self.dense_divisor}")
        if self.context_k < 1:
            raise ConfigError("context_k", f"must be >= 1, got {self.context_k}")
        if self.subcommand == "synth" and self.seed is None:
            raise ConfigError("seed", "synth needs an explicit --seed")
        self.estimator_spec()
        self.singularity_params()
        return self

    def estimator_spec(self) -> Estimator:
        try:
            if self.estimator == "two-point":
                return Estimator.two_point()
            return Estimator(self.estimator, self.window)
        except ValueError as exc:
            raise ConfigError("estimator", str(exc)) from None

    def singularity_params(self) -> SingularityParams:
        return SingularityParams(
            epsilon=self.epsilon,
            r_max=self.r_max,
            grid_size=self.grid_size,
            estimator=self.estimator_spec(),
            v_min=self.v_min,
            r_max_policy=self.r_max_policy,
        )

    def to_dict(self):
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config field")
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**values)


@dataclass
class AnalysisReport:
    tool_version: str
    config: RunConfig
    locus: Optional[dict] = None
    singular_points: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    exit_code: int = 0

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": self.tool_version,
            "config": self.config.to_dict(),
            "locus": self.locus,
            "singular_points": self.singular_points,
            "results": self.results,
            "timing": self.timing,
            "exit_code": self.exit_code,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


_templates = Environment(loader=PackageLoader("app", "templates"), trim_blocks=True, lstrip_blocks=True)


def render_summary(data: dict) -> str:
    """Plain-text summary table of a report dict."""
    return _templates.get_template("summary.txt").render(report=data)


def load_report(run_dir) -> dict:
    path = Path(run_dir) / "report.json"
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"{path} has schema {data.get('schema_version')}, "
                                            f"expected {SCHEMA_VERSION}")
    return data


def write_profile(profile, path):
    pd.DataFrame(profile.to_columns(), columns=["r", "V", "dim"]).to_csv(path, index=False)


def emit_report(report: AnalysisReport, profiles=None, stream=None):
    """Write report.json and one profile CSV per analysed point, then print the summary."""
    run_dir = report.config.run_dir
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        written = []
        if profiles:
            profile_dir = run_dir / "profiles"
            profile_dir.mkdir(exist_ok=True)
            for key in sorted(profiles, key=str):
                path = profile_dir / f"point-{key}.csv"
                write_profile(profiles[key], path)
                written.append(path)
        path = run_dir / "report.json"
        path.write_text(report.to_json(), encoding="utf-8")
        written.append(path)
    except OSError as exc:
        raise OSError(f"cannot write report to {run_dir}: {exc.strerror or exc}") from exc
    logger.info("report written to %s (%d files)", run_dir, len(written))
    (stream or sys.stdout).write(render_summary(report.to_dict()))
    return written
