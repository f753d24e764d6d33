"""Operator CLI: fuse, folds, infer, report, energy.

Commands are deterministic given config and fixtures: outputs are written
atomically (temp file, then rename), failures exit nonzero with a
machine-readable JSON line on stderr.  Option precedence is
CLI flag > environment variable > config file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import analytics
from .connectors import (
    OverpassClient,
    RemoteAnnotator,
    RuleBasedAnnotator,
    ScrapeConfig,
    load_zensus_cells,
    run_monument_agent,
    run_osm_agent,
    run_zensus_agent,
)
from .fusion import AllAgentsFailed, FusionConfig, cohort_distribution, fuse, harmonize, run_agents
from .geocode import FixtureGeocoder, HttpGeocoder
from .geodesy import BoundingBox, GeoPoint
from .inference import (
    BackendUnavailable,
    InferencePipeline,
    PredictionResult,
    SidecarBackend,
    StubBackend,
    TileFetcher,
    UniformBackend,
    flag_rate_report,
)
from .records import (
    FUSED_CSV_COLUMNS,
    AgeCohort,
    FusedRecord,
    Source,
    cohort_from_index,
    fused_from_csv_row,
    fused_to_csv_row,
)
from .spatial_folds import TooFewDistinctPoints, assign_folds
from .inference.pipeline import DEFAULT_TAU

__all__ = ["main", "PipelineConfig"]

EXIT_OK = 0
EXIT_NO_SOURCES = 2
EXIT_MISSING_INPUT = 3
EXIT_BAD_K = 4
EXIT_BACKEND = 5

DEFAULT_TAUS = (0.65, 0.70, 0.75)


@dataclass
class PipelineConfig:
    """Resolved configuration for one command invocation."""

    overpass_url: str = "https://overpass-api.de/api/interpreter"
    geocoder_url: str = ""
    geocoder_fixture: str = ""
    tile_url: str = ""
    tile_cache: str = ""
    annotator_url: str = ""
    cache_dir: str = ""
    scrape_config: str = ""
    city_bbox: str = ""
    coord_decimals: int = 6
    folds_k: int = 6
    folds_seed: int = 7
    tau: float = DEFAULT_TAU
    zoom: int = 19
    stitch: bool = False
    backend: str = "uniform"
    stub_table: str = ""
    sidecar_cmd: str = ""
    offline: bool = False
    universe: int = 0
    taus: tuple[float, ...] = DEFAULT_TAUS
    timeout: float = 25.0

    def city_box(self) -> BoundingBox | None:
        if not self.city_bbox:
            return None
        s, w, n, e = (float(v) for v in self.city_bbox.split(","))
        return BoundingBox(south=s, west=w, north=n, east=e)


_ENV_KEYS = {
    "overpass_url": "OVERPASS_URL",
    "annotator_url": "ANNOTATOR_URL",
    "cache_dir": "CACHE_DIR",
    "tile_url": "TILE_URL",
    "geocoder_url": "GEOCODER_URL",
    "geocoder_fixture": "GEOCODER_FIXTURE",
    "timeout": "HTTP_TIMEOUT_SECS",
}

_CASTS = {
    "coord_decimals": int,
    "folds_k": int,
    "folds_seed": int,
    "tau": float,
    "zoom": int,
    "universe": int,
    "timeout": float,
    "offline": lambda v: str(v).lower() in ("1", "true", "yes"),
    "stitch": lambda v: str(v).lower() in ("1", "true", "yes"),
    "taus": lambda v: tuple(float(t) for t in str(v).split(",")),
}


def read_config_file(path: str | Path) -> dict[str, object]:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, object] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            continue
        values[key] = _CASTS.get(key, str)(value)
    return values


def build_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig()
    if getattr(args, "config", None):
        for key, value in read_config_file(args.config).items():
            if hasattr(config, key):
                setattr(config, key, value)
    for attr, env in _ENV_KEYS.items():
        if env in os.environ:
            setattr(config, attr, _CASTS.get(attr, str)(os.environ[env]))
    for attr in vars(config):
        flag = getattr(args, attr, None)
        if flag is not None:
            setattr(config, attr, flag)
    return config


def _fail(code: int, error: str, message: str) -> int:
    print(json.dumps({"error": error, "message": message}), file=sys.stderr)
    return code


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue().encode("utf-8"))


def _write_json(path: Path, payload: object) -> None:
    body = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _atomic_write(path, body.encode("utf-8"))


def read_fused_csv(path: str | Path) -> list[FusedRecord]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != FUSED_CSV_COLUMNS:
            raise ValueError(f"unexpected dataset header: {header}")
        return [fused_from_csv_row(row) for row in reader]


def _dataset_geojson(dataset: list[FusedRecord]) -> dict:
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [r.location.lon, r.location.lat],
                },
                "properties": {
                    "chosen_year": r.chosen_year,
                    "chosen_source": r.chosen_source.value,
                    "cohort": r.cohort.label,
                },
            }
            for r in dataset
        ],
    }


def cmd_fuse(args: argparse.Namespace) -> int:
    config = build_config(args)
    out_dir = Path(args.output_dir)

    agents = {}
    if args.zensus_cells:
        cells_path = args.zensus_cells
        client = OverpassClient(
            config.overpass_url,
            cache_dir=config.cache_dir or None,
            offline=config.offline,
            timeout=config.timeout,
        )
        agents[Source.ZENSUS] = lambda: run_zensus_agent(load_zensus_cells(cells_path), client)
    if args.osm_bbox:
        s, w, n, e = (float(v) for v in args.osm_bbox.split(","))
        box = BoundingBox(south=s, west=w, north=n, east=e)
        client = OverpassClient(
            config.overpass_url,
            cache_dir=config.cache_dir or None,
            offline=config.offline,
            timeout=config.timeout,
        )
        agents[Source.OSM] = lambda: run_osm_agent(box, client)
    if args.monument_page:
        if not config.scrape_config:
            return _fail(EXIT_MISSING_INPUT, "missing-input", "monument pages need scrape_config")
        with open(config.scrape_config, encoding="utf-8") as f:
            scrape_config = ScrapeConfig(**json.load(f))
        pages = [(Path(p).read_text(encoding="utf-8"), str(p)) for p in args.monument_page]
        annotator = (
            RemoteAnnotator(config.annotator_url) if config.annotator_url else RuleBasedAnnotator()
        )
        if config.geocoder_fixture:
            geocoder = FixtureGeocoder(config.geocoder_fixture)
        elif config.geocoder_url:
            geocoder = HttpGeocoder(config.geocoder_url)
        else:
            return _fail(EXIT_MISSING_INPUT, "missing-input", "monument agent needs a geocoder")
        city_box = config.city_box()
        agents[Source.MONUMENT] = lambda: run_monument_agent(
            pages, scrape_config, annotator, geocoder, city_box=city_box
        )

    if not agents:
        return _fail(EXIT_NO_SOURCES, "no-sources", "no source inputs were provided")

    try:
        result = run_agents(agents)
    except AllAgentsFailed as exc:
        return _fail(EXIT_NO_SOURCES, "all-agents-failed", str(exc))

    combined = fuse(result.by_source[s] for s in sorted(result.by_source, key=lambda s: s.priority))
    dataset, report = harmonize(combined, FusionConfig(coord_quantize_decimals=config.coord_decimals))

    _write_csv(out_dir / "fused.csv", FUSED_CSV_COLUMNS, [fused_to_csv_row(r) for r in dataset])
    _write_json(out_dir / "fused.geojson", _dataset_geojson(dataset))
    report_dict = report.to_json_dict()
    report_dict["agent_failures"] = {s.value: msg for s, msg in sorted(result.failures.items(), key=lambda kv: kv[0].value)}
    _write_json(out_dir / "fusion_report.json", report_dict)
    print(f"fused {report.output_count} records ({report.groups_dropped_null} groups dropped)")
    return EXIT_OK


def cmd_folds(args: argparse.Namespace) -> int:
    config = build_config(args)
    if not Path(args.dataset).exists():
        return _fail(EXIT_MISSING_INPUT, "missing-input", f"dataset not found: {args.dataset}")
    dataset = read_fused_csv(args.dataset)
    try:
        assignments = assign_folds(dataset, k=config.folds_k, seed=config.folds_seed)
    except TooFewDistinctPoints as exc:
        return _fail(EXIT_BAD_K, "bad-k", str(exc))

    buf = io.StringIO()
    buf.write(f"# k={config.folds_k} seed={config.folds_seed}\n")
    buf.write("lat,lon,fold\n")
    for a in assignments:
        p = dataset[a.record_index].location
        buf.write(f"{p.lat!r},{p.lon!r},{a.fold}\n")
    _atomic_write(Path(args.output), buf.getvalue().encode("utf-8"))
    print(f"assigned {len(assignments)} records to {config.folds_k} folds")
    return EXIT_OK


_DECISION_COLUMNS = [
    "address", "status", "cohort", "p_max", "stage",
    "lat", "lon", "p0", "p1", "p2", "p3", "p4",
]
_REVIEW_COLUMNS = ["address", "lat", "lon", "p_max", "stage", "p0", "p1", "p2", "p3", "p4"]


def _build_backend(config: PipelineConfig):
    if config.backend == "uniform":
        return UniformBackend()
    if config.backend == "stub":
        if not config.stub_table:
            raise BackendUnavailable("stub backend needs stub_table")
        return StubBackend.from_json(config.stub_table)
    if config.backend == "sidecar":
        if not config.sidecar_cmd:
            raise BackendUnavailable("sidecar backend needs sidecar_cmd")
        backend = SidecarBackend(config.sidecar_cmd.split())
        backend.start()
        return backend
    raise BackendUnavailable(f"unknown backend: {config.backend}")


def cmd_infer(args: argparse.Namespace) -> int:
    config = build_config(args)
    if not Path(args.addresses).exists():
        return _fail(EXIT_MISSING_INPUT, "missing-input", f"addresses not found: {args.addresses}")
    addresses = [
        line.strip()
        for line in Path(args.addresses).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]

    try:
        backend = _build_backend(config)
    except BackendUnavailable as exc:
        return _fail(EXIT_BACKEND, "backend-unavailable", str(exc))

    if config.geocoder_fixture:
        geocoder = FixtureGeocoder(config.geocoder_fixture)
    elif config.geocoder_url:
        geocoder = HttpGeocoder(config.geocoder_url)
    else:
        return _fail(EXIT_MISSING_INPUT, "missing-input", "no geocoder configured")
    fetcher = TileFetcher(
        url_template=config.tile_url or None,
        cache_dir=config.tile_cache or None,
        offline=config.offline,
    )
    pipeline = InferencePipeline(
        geocoder=geocoder,
        tile_fetcher=fetcher,
        backend=backend,
        tau=config.tau,
        zoom=config.zoom,
        city_box=config.city_box(),
        stitch=config.stitch,
    )
    results = pipeline.infer_many(addresses)
    if hasattr(backend, "close"):
        backend.close()

    out_dir = Path(args.output_dir)
    decision_rows = []
    review_rows = []
    for r in results:
        probs = list(r.prediction.probs) if r.prediction else [""] * 5
        lat = repr(r.point.lat) if r.point else ""
        lon = repr(r.point.lon) if r.point else ""
        p_max = repr(r.decision.p_max) if r.decision.p_max is not None else ""
        stage = r.failed_stage or ""
        decision_rows.append(
            [
                r.address_text,
                "accepted" if r.decision.accepted else "flagged",
                r.decision.cohort.label if r.decision.cohort else "",
                p_max,
                stage,
                lat,
                lon,
                *[repr(p) if p != "" else "" for p in probs],
            ]
        )
        if not r.decision.accepted:
            review_rows.append(
                [r.address_text, lat, lon, p_max, stage, *[repr(p) if p != "" else "" for p in probs]]
            )

    _write_csv(out_dir / "decisions.csv", _DECISION_COLUMNS, decision_rows)

    review_path = out_dir / "review.csv"
    out_dir.mkdir(parents=True, exist_ok=True)
    is_new = not review_path.exists()
    with open(review_path, "a", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        if is_new:
            writer.writerow(_REVIEW_COLUMNS)
        writer.writerows(review_rows)

    accepted = sum(1 for r in results if r.decision.accepted)
    print(f"inferred {len(results)} addresses: {accepted} accepted, {len(results) - accepted} flagged")
    return EXIT_OK


def _read_predictions(path: str | Path) -> list[tuple[GeoPoint, PredictionResult]]:
    rows = []
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            raw = [float(row[f"p{i}"]) for i in range(5)]
            total = sum(raw)
            rows.append(
                (
                    GeoPoint(lat=float(row["lat"]), lon=float(row["lon"])),
                    PredictionResult(probs=tuple(p / total for p in raw)),
                )
            )
    return rows


def cmd_report(args: argparse.Namespace) -> int:
    config = build_config(args)
    if not Path(args.dataset).exists():
        return _fail(EXIT_MISSING_INPUT, "missing-input", f"dataset not found: {args.dataset}")
    if args.predictions and not Path(args.predictions).exists():
        return _fail(EXIT_MISSING_INPUT, "missing-input", f"predictions not found: {args.predictions}")
    dataset = read_fused_csv(args.dataset)
    out_dir = Path(args.output_dir)

    distribution = cohort_distribution(dataset)
    _write_json(
        out_dir / "cohort_shares.json",
        {c.label: {"count": n, "share_pct": share} for c, (n, share) in distribution.items()},
    )
    _write_csv(
        out_dir / "cohort_shares.csv",
        ["cohort", "count", "share_pct"],
        [[c.label, str(n), f"{share:.2f}"] for c, (n, share) in distribution.items()],
    )

    if config.universe:
        share = analytics.coverage_report(len(dataset), config.universe)
        _write_json(
            out_dir / "coverage.json",
            {"labeled": len(dataset), "universe": config.universe, "share_pct": share},
        )
        _write_csv(
            out_dir / "coverage.csv",
            ["labeled", "universe", "share_pct"],
            [[str(len(dataset)), str(config.universe), f"{share:.2f}"]],
        )

    if args.predictions:
        predictions = _read_predictions(args.predictions)
        rows = flag_rate_report([p for _, p in predictions], config.taus)
        _write_json(
            out_dir / "flag_rates.json",
            [{"tau": r.tau, "count": r.count, "share_pct": r.share_pct} for r in rows],
        )
        _write_csv(
            out_dir / "flag_rates.csv",
            ["tau", "count", "share_pct"],
            [[f"{r.tau:.2f}", str(r.count), f"{r.share_pct:.2f}"] for r in rows],
        )

        by_key = {
            (r.location.lat, r.location.lon): r.cohort for r in dataset
        }
        pairs = []
        for point, prediction in predictions:
            truth = by_key.get((point.lat, point.lon))
            if truth is not None:
                pairs.append((truth, prediction.argmax))
        if pairs:
            matrix = analytics.confusion_matrix(pairs)
            result = analytics.metrics(matrix)
            result["confusion_counts"] = [list(row) for row in matrix.counts]
            result["pairs"] = len(pairs)
            _write_json(out_dir / "metrics.json", result)
            _write_csv(
                out_dir / "metrics.csv",
                ["cohort", "precision", "recall", "f1"],
                [
                    [
                        cohort_from_index(i).label,
                        repr(result["per_class_precision"][i]),
                        repr(result["per_class_recall"][i]),
                        repr(result["per_class_f1"][i]),
                    ]
                    for i in range(5)
                ],
            )

    print(f"reports written to {out_dir}")
    return EXIT_OK


def cmd_energy(args: argparse.Namespace) -> int:
    if not Path(args.dataset).exists():
        return _fail(EXIT_MISSING_INPUT, "missing-input", f"dataset not found: {args.dataset}")
    dataset = read_fused_csv(args.dataset)
    annotated = analytics.annotate_uvalues(dataset)
    rows = []
    for record, uv in annotated:
        rows.append(
            fused_to_csv_row(record)
            + [f"{uv.roof:.2f}", f"{uv.upper_ceiling:.2f}", f"{uv.wall:.2f}", f"{uv.floor:.2f}"]
        )
    _write_csv(
        Path(args.output),
        FUSED_CSV_COLUMNS + ["u_roof", "u_upper_ceiling", "u_wall", "u_floor"],
        rows,
    )
    print(f"wrote {len(rows)} energy rows")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohortmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--offline", action="store_const", const=True, default=None,
                       help="refuse network traffic; serve everything from caches")

    p_fuse = sub.add_parser("fuse", help="run agents and build the fused dataset")
    add_common(p_fuse)
    p_fuse.add_argument("--zensus-cells", help="CSV of grid_id,period_label")
    p_fuse.add_argument("--osm-bbox", help="s,w,n,e box for the year-tag query")
    p_fuse.add_argument("--monument-page", action="append", default=[],
                        help="registry HTML file (repeatable)")
    p_fuse.add_argument("--output-dir", required=True)
    p_fuse.add_argument("--coord-decimals", type=int, dest="coord_decimals")
    p_fuse.add_argument("--cache-dir", dest="cache_dir")
    p_fuse.add_argument("--scrape-config", dest="scrape_config")
    p_fuse.add_argument("--geocoder-fixture", dest="geocoder_fixture")

    p_folds = sub.add_parser("folds", help="assign spatial CV folds")
    add_common(p_folds)
    p_folds.add_argument("--dataset", required=True)
    p_folds.add_argument("--output", required=True)
    p_folds.add_argument("--k", type=int, dest="folds_k")
    p_folds.add_argument("--seed", type=int, dest="folds_seed")

    p_infer = sub.add_parser("infer", help="address file -> decisions + review queue")
    add_common(p_infer)
    p_infer.add_argument("--addresses", required=True)
    p_infer.add_argument("--output-dir", required=True)
    p_infer.add_argument("--backend", choices=["uniform", "stub", "sidecar"])
    p_infer.add_argument("--stub-table", dest="stub_table")
    p_infer.add_argument("--sidecar-cmd", dest="sidecar_cmd")
    p_infer.add_argument("--tau", type=float)
    p_infer.add_argument("--zoom", type=int)
    p_infer.add_argument("--geocoder-fixture", dest="geocoder_fixture")
    p_infer.add_argument("--tile-cache", dest="tile_cache")

    p_report = sub.add_parser("report", help="coverage, cohort shares, flag rates, metrics")
    add_common(p_report)
    p_report.add_argument("--dataset", required=True)
    p_report.add_argument("--predictions", help="CSV lat,lon,p0..p4")
    p_report.add_argument("--output-dir", required=True)
    p_report.add_argument("--universe", type=int)
    p_report.add_argument("--taus", type=lambda v: tuple(float(t) for t in v.split(",")))

    p_energy = sub.add_parser("energy", help="join reference U-values onto the dataset")
    add_common(p_energy)
    p_energy.add_argument("--dataset", required=True)
    p_energy.add_argument("--output", required=True)

    return parser


_COMMANDS = {
    "fuse": cmd_fuse,
    "folds": cmd_folds,
    "infer": cmd_infer,
    "report": cmd_report,
    "energy": cmd_energy,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
