"""Glue between a RunConfig and the geometry modules; one function per subcommand."""
import json
import logging
import time
from dataclasses import replace
from multiprocessing.pool import ThreadPool
from pathlib import Path

from app import __version__
from app.formats import CloudFormat, ingest, write_cloud
from app.geometry.blowup import blow_up, regularization_check, verify_isomorphism_away_from_center
from app.geometry.context_map import AggregatorSpec, hybrid_embed_sequence, load_aggregator
from app.geometry.errors import ConfigError, GeometryError
from app.geometry.singularity import Verdict, singular_locus
from app.geometry.synth import SynthSpec, generate
from app.geometry.tangent_cone import default_locality_radius, tangent_cone
from app.reporting import AnalysisReport

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_THEOREM_FAILED = 3


class Stopwatch:
    def __init__(self):
        self.timing = {}

    def lap(self, name, started):
        self.timing[name] = round(time.perf_counter() - started, 6)


def load_cloud(config):
    if not config.inputs:
        raise ConfigError("input", "no input cloud given")
    return ingest(config.inputs[0], config.fmt)


def scan(cloud, config):
    ids = config.points
    if config.centers:
        ids = sorted(set(config.centers) | set(config.points or ()))
    for i in ids or ():
        if not 0 <= i < len(cloud):
            raise ConfigError("points", f"point id {i} outside a cloud of {len(cloud)} points")
    return singular_locus(cloud, config.singularity_params(), ids, config.threads, keep_profiles=True)


def choose_centers(locus, config):
    """Explicit centers, else the most unstable singular points first."""
    if config.centers:
        return list(config.centers)
    singular = [v for v in locus.verdicts if v.verdict is Verdict.SINGULAR]
    singular.sort(key=lambda v: (-v.max_variation, v.point_id))
    return [v.point_id for v in singular[:config.max_centers]]


def _profiles_to_keep(locus, profiles, config):
    if config.all_profiles:
        return profiles
    keep = set(locus.singular_ids) | set(config.points or ()) | set(config.centers or ())
    return {i: p for i, p in profiles.items() if i in keep}


def analyze_center(cloud, point_id, locus, profiles, config, check=False):
    """Cone, blow-up and (optionally) the regularization check at one center."""
    verdict = locus.verdict_of(point_id)
    params = replace(config.singularity_params(), r_max=verdict.r_max)
    r_loc = config.r_loc or default_locality_radius(profiles[point_id], verdict.witness, verdict.r_max)
    s = cloud.points[point_id]
    cone = tangent_cone(cloud, s, r_loc, config.k, config.merge_angle_deg, config.k_max,
                        params.estimator, params.v_min)
    blownup = blow_up(cloud, s, cone, config.lam, config.dense_divisor, config.seed or 0)
    isomorphism = verify_isomorphism_away_from_center(cloud, blownup)
    entry = {
        "point_id": point_id,
        "verdict": verdict.verdict.value,
        "center_variation": verdict.max_variation,
        "witness": verdict.witness.to_dict() if verdict.witness else None,
        "cone": cone.to_dict(),
        "blowup": blownup.to_dict(),
        "isomorphism": isomorphism.to_dict(),
        "regularization": None,
    }
    extra_profiles = {}
    if check:
        regularization = regularization_check(blownup, params)
        center = verdict.max_variation
        below_center = all(v.max_variation is not None and center is not None and v.max_variation < center
                           for v in regularization.verdicts)
        entry["regularization"] = regularization.to_dict()
        entry["theorem_passed"] = bool(isomorphism.ok and regularization.passed and below_center)
        for v in regularization.verdicts:
            if v.profile is not None:
                extra_profiles[f"{point_id}-exceptional-{v.index}"] = v.profile
    return entry, extra_profiles


def failed_center(point_id, locus, exc, check=False):
    """Entry for a center whose cone or blow-up could not be built."""
    verdict = locus.verdict_of(point_id)
    entry = {
        "point_id": point_id,
        "verdict": Verdict.UNDETERMINED.value,
        "center_variation": verdict.max_variation,
        "witness": verdict.witness.to_dict() if verdict.witness else None,
        "cone": None,
        "blowup": None,
        "isomorphism": None,
        "regularization": None,
        "error": f"{type(exc).__name__}: {exc}",
    }
    if check:
        entry["theorem_passed"] = False
    return entry


def _analyze_all(cloud, config, check):
    watch = Stopwatch()
    started = time.perf_counter()
    locus, profiles = scan(cloud, config)
    watch.lap("scan", started)

    centers = choose_centers(locus, config)
    started = time.perf_counter()

    def work(point_id):
        try:
            return analyze_center(cloud, point_id, locus, profiles, config, check)
        except ConfigError:
            raise
        except GeometryError as exc:
            logger.warning("center %d left undetermined: %s", point_id, exc)
            return failed_center(point_id, locus, exc, check), {}

    if config.threads > 1 and len(centers) > 1:
        with ThreadPool(config.threads) as pool:
            analysed = pool.map(work, centers)
    else:
        analysed = [work(i) for i in centers]
    watch.lap("centers", started)

    kept = _profiles_to_keep(locus, profiles, config)
    for _, extra in analysed:
        kept.update(extra)
    report = AnalysisReport(__version__, config, locus.to_dict(), [entry for entry, _ in analysed])
    report.timing = watch.timing
    return report, kept


def run_detect(config):
    cloud = load_cloud(config)
    watch = Stopwatch()
    started = time.perf_counter()
    locus, profiles = scan(cloud, config)
    watch.lap("scan", started)
    report = AnalysisReport(__version__, config, locus.to_dict(),
                            [{"point_id": v.point_id, "center_variation": v.max_variation,
                              "witness": v.witness.to_dict(), "cone": None, "regularization": None}
                             for v in locus.verdicts if v.verdict is Verdict.SINGULAR],
                            {"points": len(cloud), "ambient_dim": cloud.n})
    report.timing = watch.timing
    return report, _profiles_to_keep(locus, profiles, config)


def run_blowup(config):
    cloud = load_cloud(config)
    report, profiles = _analyze_all(cloud, config, check=False)
    report.results = {"points": len(cloud), "centers": len(report.singular_points)}
    return report, profiles


def run_verify(config):
    cloud = load_cloud(config)
    report, profiles = _analyze_all(cloud, config, check=True)
    passed = bool(report.singular_points) and all(sp["theorem_passed"] for sp in report.singular_points)
    if not report.singular_points:
        logger.warning("no singular point to verify")
    report.results = {"points": len(cloud), "centers": len(report.singular_points),
                      "theorem_passed": passed}
    report.exit_code = EXIT_OK if passed else EXIT_THEOREM_FAILED
    return report, profiles


def read_sequence(path):
    text = Path(path).read_text(encoding="utf-8").strip()
    try:
        tokens = json.loads(text) if text.startswith("[") else [int(t) for t in text.split()]
    except ValueError:
        raise ConfigError("sequence", f"{path} is not a list of token ids") from None
    return [int(t) for t in tokens]


def run_context_map(config):
    table = load_cloud(config)
    if config.sequence is None:
        raise ConfigError("sequence", "context-map needs --sequence")
    sequence = read_sequence(config.sequence)
    for token in sequence:
        if not 0 <= token < len(table):
            raise ConfigError("sequence", f"token {token} outside a table of {len(table)} rows")
    spec = load_aggregator(config.aggregator) if config.aggregator else AggregatorSpec.mean()
    watch = Stopwatch()
    started = time.perf_counter()
    locus, profiles = singular_locus(table, config.singularity_params(), sorted(set(sequence)),
                                     config.threads, keep_profiles=True)
    cones = {}
    for token in locus.singular_ids:
        verdict = locus.verdict_of(token)
        r_loc = config.r_loc or default_locality_radius(profiles[token], verdict.witness, verdict.r_max)
        try:
            cones[token] = tangent_cone(table, table.points[token], r_loc, config.k,
                                        config.merge_angle_deg, config.k_max)
        except GeometryError as exc:
            logger.info("token %d: no tangent cone (%s)", token, exc)
    representations = hybrid_embed_sequence(sequence, config.context_k, locus, table, spec, cones)
    watch.lap("context_map", started)
    results = {
        "tokens": len(sequence),
        "desingularized": sum(r.to_dict()["kind"] == "desingularized" for r in representations),
        "aggregator": spec.to_dict(),
        "representations": [r.to_dict() for r in representations],
    }
    report = AnalysisReport(__version__, config, locus.to_dict(),
                            [{"point_id": t, "center_variation": locus.verdict_of(t).max_variation,
                              "cone": cones[t].to_dict() if t in cones else None, "regularization": None}
                             for t in locus.singular_ids],
                            results)
    report.timing = watch.timing
    return report, _profiles_to_keep(locus, profiles, config)


def run_synth(config):
    spec = SynthSpec.from_dict(config.synth)
    cloud, truth = generate(spec)
    run_dir = config.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    fmt = CloudFormat(config.fmt or "csv")
    suffix = {CloudFormat.CSV: "csv", CloudFormat.RAW_F32: "f32", CloudFormat.RAW_F64: "f64"}[fmt]
    cloud_path = write_cloud(cloud, run_dir / f"cloud.{suffix}", fmt)
    truth_path = run_dir / "truth.json"
    truth_path.write_text(json.dumps(truth.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    results = {
        "points": len(cloud),
        "ambient_dim": cloud.n,
        "cloud": cloud_path.name,
        "truth": truth_path.name,
        "spec": spec.to_dict(),
    }
    return AnalysisReport(__version__, config, None, [], results), {}
