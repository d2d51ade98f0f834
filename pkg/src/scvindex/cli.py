"""Command-line front door: ingestion, scoring runs, analyses, figure export.

Every subcommand reads its inputs, writes artifacts into --out DIR through
atomic renames, and drops a manifest.json sufficient to reproduce the run.
Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    SAMPLED_WEIGHT_NAMES,
    WeightRangeSpec,
    format_p_value,
    group_aggregate,
    group_summaries_from_csv,
    group_summaries_to_csv,
    monte_carlo,
    run_to_jsonl_lines,
    sensitivity_sweep,
)
from .artifacts import (
    RunManifest,
    ScoredRecord,
    atomic_write_text,
    factor_matrix,
    read_scores_csv,
    write_jsonl,
    write_manifest,
    write_scores_csv,
)
from .comparators import (
    COMPARISON_LABELS,
    bundled_mapping_path,
    cvss_like,
    load_mapping,
    svi_context,
    svi_like,
)
from .core import AsiFactors, IviFactors, WeightConfig, score_factors, validate_weights
from .errors import ScvindexError
from .heatmap import render_choropleth
from .reddit import (
    CorpusContext,
    ProviderUnavailableError,
    annotate,
    attack_components,
    bundled_lexicons_path,
    default_provider,
    extract_features,
    load_lexicons,
    load_reports,
    observed_types,
    reddit_ivi_factors,
    with_emotions_from_features,
)
from .errors import MissingAnnotationError, NoFlaggedReportsError
from .survey import (
    bundled_schema_path,
    ingest_survey,
    ipoll_asi,
    ipoll_ivi,
    load_schema,
)
from .vocab import STATE_NAMES

ASI_DIMENSION_SLOTS = {
    "frequency": "attempted_attacks",
    "consequence": "financial_impact",
    "sophistication": "mimicry",
}


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    return p


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_weights(spec: str) -> WeightConfig:
    if spec == "uniform":
        return WeightConfig.uniform()
    doc = json.loads(_require_file(spec).read_text(encoding="utf-8"))
    return validate_weights(doc)


def _load_ranges(path: str | None) -> WeightRangeSpec:
    if path is None:
        return WeightRangeSpec.unrestricted()
    doc = json.loads(_require_file(path).read_text(encoding="utf-8"))
    return WeightRangeSpec.from_dict(doc)


def _schema_bundle(args):
    path = Path(args.schema) if args.schema else bundled_schema_path()
    if not path.is_file():
        raise FileNotFoundError(f"schema file not found: {path}")
    return path, load_schema(path)


def _manifest(args, subcommand, inputs, versions, seed=None, notes=None) -> RunManifest:
    params = {
        key: value for key, value in vars(args).items()
        if key not in ("func",) and value is not None
    }
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()}
    return RunManifest(
        subcommand=subcommand,
        params=params,
        inputs={k: str(v) for k, v in inputs.items()},
        versions=versions,
        seed=seed,
        tool_version=__version__,
        notes=notes or {},
    )


# ---------------------------------------------------------------------------
# encode / score


def _score_survey(records, strict_seven, weights):
    scored = []
    scoring_rejects = []
    for record in records:
        ivi_dims = {k: v for k, v in record.dimension_scores.get("ivi", {}).items()
                    if v is not None}
        asi_dims = record.dimension_scores.get("asi", {})
        try:
            ivi_factors = IviFactors(**ivi_dims)
        except TypeError:
            raise ScvindexError(
                "individual-side schema dimensions must be named after the "
                f"factor sub-scores; got {sorted(ivi_dims)}"
            ) from None
        unknown = set(asi_dims) - set(ASI_DIMENSION_SLOTS)
        if unknown:
            raise ScvindexError(
                f"attack-side schema dimensions must be {sorted(ASI_DIMENSION_SLOTS)}; "
                f"got extra {sorted(unknown)}"
            )
        asi_factors = AsiFactors(**{
            ASI_DIMENSION_SLOTS[dim]: value
            for dim, value in asi_dims.items() if value is not None
        })
        try:
            breakdown = score_factors(ivi_factors, asi_factors, weights)
            realized_ivi = ipoll_ivi(record, strict_seven=strict_seven)
            realized_asi = ipoll_asi(record)
        except ScvindexError as exc:
            scoring_rejects.append({
                "row": None, "question": None, "answer": None,
                "reason": f"respondent {record.respondent_id}: {exc}",
            })
            continue
        scored.append(ScoredRecord(
            respondent_id=record.respondent_id,
            demographics=record.demographics,
            factors=breakdown.factor_values(),
            ivi=breakdown.ivi,
            asi=breakdown.asi,
            scvi=breakdown.scvi,
            svi=record.svi,
            cvss=record.cvss,
            ipoll_ivi=realized_ivi,
            ipoll_asi=realized_asi,
        ))
    return scored, scoring_rejects


def run_encode(args) -> int:
    input_path = _require_file(args.input)
    schema_path, bundle = _schema_bundle(args)
    with input_path.open(encoding="utf-8", newline="") as stream:
        records, rejects = ingest_survey(stream, bundle)
    out = _out_dir(args)
    write_jsonl(out / "encoded.jsonl", [r.to_json_dict() for r in records])
    write_jsonl(out / "rejects.jsonl", [r.to_json_dict() for r in rejects])
    write_manifest(out, _manifest(
        args, "encode",
        inputs={"input": input_path, "schema": schema_path},
        versions={"schema": f"{bundle.name}/{bundle.version}"},
        notes={"records": len(records), "rejects": len(rejects)},
    ))
    return 0


def run_score(args) -> int:
    input_path = _require_file(args.input)
    schema_path, bundle = _schema_bundle(args)
    weights = _load_weights(args.weights)
    with input_path.open(encoding="utf-8", newline="") as stream:
        records, rejects = ingest_survey(stream, bundle)
    scored, scoring_rejects = _score_survey(records, args.strict_seven, weights)
    out = _out_dir(args)
    write_scores_csv(out / "scores.csv", scored)
    write_jsonl(out / "rejects.jsonl",
                [r.to_json_dict() for r in rejects] + scoring_rejects)
    write_manifest(out, _manifest(
        args, "score",
        inputs={"input": input_path, "schema": schema_path},
        versions={"schema": f"{bundle.name}/{bundle.version}"},
        notes={"records": len(scored),
               "rejects": len(rejects) + len(scoring_rejects),
               "weights": weights.as_dict()},
    ))
    return 0


# ---------------------------------------------------------------------------
# reddit-score


def run_reddit_score(args) -> int:
    input_path = _require_file(args.input)
    lexicon_dir = Path(args.lexicons) if args.lexicons else bundled_lexicons_path()
    lexicons = load_lexicons(lexicon_dir)
    weights = _load_weights(args.weights)
    with input_path.open(encoding="utf-8") as stream:
        reports = load_reports(stream)
    if not reports:
        raise ScvindexError("report input is empty")

    features = {r.report_id: extract_features(r.normalized_text, lexicons) for r in reports}
    reports = [with_emotions_from_features(r, features[r.report_id]) for r in reports]

    provider = None
    unannotated = 0
    prepared = []
    for report in reports:
        if report.annotation is None:
            provider = provider or default_provider()
            try:
                report = replace(report, annotation=annotate(report, provider))
            except ProviderUnavailableError:
                unannotated += 1
        prepared.append(report)
    reports = prepared

    context = CorpusContext.from_corpus([(r, features[r.report_id]) for r in reports])
    components = {}
    skipped_types = []
    for scam_type in observed_types(reports):
        try:
            components[scam_type] = attack_components(reports, scam_type)
        except NoFlaggedReportsError:
            skipped_types.append(scam_type)

    rows = []
    unscored = 0
    for report in reports:
        if report.annotation is None or report.annotation.scam_type not in components:
            unscored += 1
            continue
        try:
            ivi_factors = reddit_ivi_factors(report, features[report.report_id], context)
        except MissingAnnotationError:
            unscored += 1
            continue
        comp = components[report.annotation.scam_type]
        asi_factors = AsiFactors(
            attempted_attacks=comp["frequency"],
            financial_impact=comp["consequence"],
            mimicry=comp["sophistication"],
        )
        breakdown = score_factors(ivi_factors, asi_factors, weights)
        success = report.annotation.success
        rows.append([
            report.report_id,
            report.annotation.scam_type,
            "" if success is None else str(success),
            *(repr(v) for v in breakdown.factor_values().values()),
            repr(breakdown.ivi), repr(breakdown.asi), repr(breakdown.scvi),
        ])

    out = _out_dir(args)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([
        "report_id", "scam_type", "success",
        "awareness", "behavior", "psychology", "experience",
        "frequency", "consequence", "sophistication",
        "ivi", "asi", "scvi",
    ])
    writer.writerows(rows)
    atomic_write_text(out / "report_scores.csv", buffer.getvalue())

    counts: dict[str, int] = {}
    for report in reports:
        if report.annotation is not None:
            key = report.annotation.scam_type
            counts[key] = counts.get(key, 0) + 1
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["scam_type", "count", "frequency", "consequence", "sophistication"])
    for scam_type in sorted(components):
        comp = components[scam_type]
        writer.writerow([
            scam_type, counts.get(scam_type, 0),
            repr(comp["frequency"]), repr(comp["consequence"]), repr(comp["sophistication"]),
        ])
    atomic_write_text(out / "type_scores.csv", buffer.getvalue())

    lexicon_version = next(iter(lexicons.values())).version if lexicons else "unversioned"
    write_manifest(out, _manifest(
        args, "reddit-score",
        inputs={"input": input_path, "lexicons": lexicon_dir},
        versions={"lexicons": lexicon_version},
        notes={
            "reports": len(reports),
            "scored": len(rows),
            "unscored": unscored,
            "unannotated": unannotated,
            "skipped_types": skipped_types,
            "provider": getattr(provider, "name", None),
            "weights": weights.as_dict(),
        },
    ))
    return 0


# ---------------------------------------------------------------------------
# analyses


def run_sensitivity(args) -> int:
    input_path = _require_file(args.input)
    weights = _load_weights(args.weights)
    records = read_scores_csv(input_path)
    factors = factor_matrix(records)
    grid = ([float(v) for v in args.grid.split(",")] if args.grid
            else [round(v, 10) for v in np.linspace(0.0, 1.0, 11)])
    curve = sensitivity_sweep(factors, args.target, grid, weights)
    out = _out_dir(args)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["target", "value", "mean_scvi", "std_scvi", "degenerate_redistribution"])
    for point in curve:
        writer.writerow([
            args.target, repr(point.value), repr(point.mean_scvi),
            repr(point.std_scvi), str(point.degenerate_redistribution).lower(),
        ])
    atomic_write_text(out / "sensitivity.csv", buffer.getvalue())
    write_manifest(out, _manifest(
        args, "sensitivity",
        inputs={"input": input_path},
        versions={},
        notes={"records": len(records), "baseline": weights.as_dict(),
               "redistribution": "proportional-to-baseline"},
    ))
    return 0


def run_montecarlo(args) -> int:
    input_path = _require_file(args.input)
    ranges = _load_ranges(args.ranges)
    records = read_scores_csv(input_path)
    run = monte_carlo(factor_matrix(records), ranges,
                      iterations=args.iterations, seed=args.seed)
    out = _out_dir(args)
    atomic_write_text(out / "run.jsonl", "".join(line + "\n" for line in run_to_jsonl_lines(run)))
    atomic_write_text(out / "summary.json",
                      json.dumps(run.summary(), sort_keys=True, indent=2) + "\n")
    write_manifest(out, _manifest(
        args, "montecarlo",
        inputs={"input": input_path},
        versions={},
        seed=args.seed,
        notes={"records": len(records), "ranges": ranges.ranges},
    ))
    return 0


def run_compare(args) -> int:
    from .comparators import compare_indices

    input_path = _require_file(args.input)
    records = read_scores_csv(input_path)
    if not records:
        raise ScvindexError("scores input is empty")
    mappings = {}
    for path in args.mapping or []:
        mapping = load_mapping(_require_file(path))
        mappings[mapping.kind] = (mapping, path)

    fields = [r.comparator_fields() for r in records]
    scvi = [r.scvi for r in records]

    if all(r.cvss is not None for r in records):
        cvss_values = [r.cvss for r in records]
        cvss_source = "record-supplied"
    else:
        mapping, path = mappings.get("cvss-like") or (
            load_mapping(bundled_mapping_path("cvss-like")), str(bundled_mapping_path("cvss-like")))
        cvss_values = [cvss_like(f, mapping) for f in fields]
        cvss_source = f"{mapping.name} ({path})"

    if all(r.svi is not None for r in records):
        svi_values = [r.svi for r in records]
        svi_source = "record-supplied"
    else:
        mapping, path = mappings.get("svi-like") or (
            load_mapping(bundled_mapping_path("svi-like")), str(bundled_mapping_path("svi-like")))
        context = svi_context(fields, mapping)
        svi_values = [svi_like(f, mapping, context) for f in fields]
        svi_source = f"{mapping.name} ({path})"

    comparison = compare_indices(scvi, cvss_values, svi_values,
                                 [r.demographics for r in records])
    out = _out_dir(args)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["a", "b", "rho", "p", "p_display"])
    for i, a in enumerate(COMPARISON_LABELS):
        for j, b in enumerate(COMPARISON_LABELS):
            rho = comparison.rho[i, j]
            p = comparison.p[i, j]
            writer.writerow([a, b, repr(float(rho)), repr(float(p)), format_p_value(float(p))])
    atomic_write_text(out / "correlations.csv", buffer.getvalue())

    for field_name, rows in comparison.tables.items():
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow([field_name, "svi", "cvss", "scvi"])
        for group, svi_mean, cvss_mean, scvi_mean in rows:
            writer.writerow([group, f"{svi_mean:.2f}", f"{cvss_mean:.2f}", f"{scvi_mean:.2f}"])
        atomic_write_text(out / f"by_{field_name}.csv", buffer.getvalue())

    write_manifest(out, _manifest(
        args, "compare",
        inputs={"input": input_path},
        versions={"cvss": cvss_source, "svi": svi_source},
        notes={"records": len(records),
               "rescale": "comparator scores on [0, 5] to match cross-index tables"},
    ))
    return 0


def run_aggregate(args) -> int:
    input_path = _require_file(args.input)
    records = read_scores_csv(input_path)
    key = args.group_by
    kept = [r for r in records if r.demographics.get(key)]
    skipped = len(records) - len(kept)
    if not kept:
        raise ScvindexError(f"no records carry the group key {key!r}")

    def label(record) -> str:
        value = record.demographics[key]
        return STATE_NAMES[value] if key == "state" else value

    summaries = group_aggregate(
        [label(r) for r in kept],
        [r.ivi for r in kept],
        [r.asi for r in kept],
        [r.scvi for r in kept],
        ci=args.ci,
    )
    out = _out_dir(args)
    atomic_write_text(out / "groups.csv", group_summaries_to_csv(summaries))
    write_manifest(out, _manifest(
        args, "aggregate",
        inputs={"input": input_path},
        versions={},
        notes={"groups": len(summaries), "skipped_missing_key": skipped,
               "ci_convention": args.ci},
    ))
    return 0


def run_heatmap(args) -> int:
    input_path = _require_file(args.input)
    summaries = group_summaries_from_csv(input_path.read_text(encoding="utf-8"))
    svg = render_choropleth(summaries)
    out = _out_dir(args)
    atomic_write_text(out / "choropleth.svg", svg)
    atomic_write_text(out / "groups.csv", group_summaries_to_csv(summaries))
    write_manifest(out, _manifest(
        args, "heatmap",
        inputs={"input": input_path},
        versions={},
        notes={"states": len(summaries)},
    ))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scvindex",
        description="Social cyber vulnerability scoring engine and analyses",
    )
    parser.add_argument("--version", action="version", version=f"scvindex {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, weights=False):
        p.add_argument("--input", required=True, help="input file")
        p.add_argument("--out", required=True, help="output directory")
        if weights:
            p.add_argument("--weights", default="uniform",
                           help="'uniform' or path to a weights JSON file")

    p = sub.add_parser("encode", help="encode a survey CSV into per-dimension scores")
    add_common(p)
    p.add_argument("--schema", help="schema document (default: bundled)")
    p.set_defaults(func=run_encode)

    p = sub.add_parser("score", help="score survey records end to end")
    add_common(p, weights=True)
    p.add_argument("--schema", help="schema document (default: bundled)")
    p.add_argument("--strict-seven", action="store_true",
                   help="divide the realized individual index by the full "
                        "dimension count instead of the measured count")
    p.set_defaults(func=run_score)

    p = sub.add_parser("reddit-score", help="score scam-report text (JSON-lines)")
    add_common(p, weights=True)
    p.add_argument("--lexicons", help="lexicon directory (default: bundled)")
    p.set_defaults(func=run_reddit_score)

    p = sub.add_parser("sensitivity", help="one-at-a-time weight sweep")
    add_common(p, weights=True)
    p.add_argument("--target", required=True, choices=SAMPLED_WEIGHT_NAMES)
    p.add_argument("--grid", help="comma-separated grid values in [0, 1] "
                                  "(default: 11 evenly spaced)")
    p.set_defaults(func=run_sensitivity)

    p = sub.add_parser("montecarlo", help="weight-variability simulation")
    add_common(p)
    p.add_argument("--ranges", help="weight range JSON (default: unrestricted)")
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=run_montecarlo)

    p = sub.add_parser("compare", help="comparator indices and correlation tables")
    add_common(p)
    p.add_argument("--mapping", action="append",
                   help="comparator mapping file(s); may repeat (default: bundled)")
    p.set_defaults(func=run_compare)

    p = sub.add_parser("aggregate", help="grouped means with confidence intervals")
    add_common(p)
    p.add_argument("--group-by", required=True,
                   choices=["gender", "race_ethnicity", "age_group", "state"])
    p.add_argument("--ci", choices=["z", "t"], default="z")
    p.set_defaults(func=run_aggregate)

    p = sub.add_parser("heatmap", help="render the state choropleth SVG")
    add_common(p)
    p.set_defaults(func=run_heatmap)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScvindexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
