"""``sspalign`` command-line entry point.

Exit status: 0 success, 1 validation failure, 2 I/O or configuration
error, 3 scoring error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .errors import AlignmentError, ConfigError, EmptyInput
from .ingest import scan_observations, scan_projections
from .model import SCENARIOS
from .report import (
    RunConfig,
    build_pairs,
    check_provenance_inputs,
    config_from_provenance,
    dump_json,
    load_inputs,
    load_matrix_json,
    read_score_dir,
    render_texts,
    resolve_weights,
    run_score,
    write_bundle,
)
from .trace import TargetPolicy, TraceConfig, calibrate_lambda, lambda_correlations

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3


def _coverage_violations(obs_rows, proj_rows) -> list[tuple[int, str, str]]:
    """(line, rule, message) for observed (region, feature) pairs lacking projections."""
    first_line: dict[tuple[str, str], int] = {}
    for line, (region, feature, _, _) in obs_rows:
        first_line.setdefault((region, feature), line)
    have = {(s, r, f) for _, (s, r, f, _, _) in proj_rows}
    out = []
    for (region, feature), line in sorted(first_line.items(), key=lambda kv: kv[1]):
        missing = [s.value for s in SCENARIOS if (s.value, region, feature) not in have]
        if missing:
            out.append((line, "MissingFeature", f"no {', '.join(missing)} projection for {region}/{feature}"))
    return out


def cmd_validate(args) -> int:
    try:
        obs_text = Path(args.obs).read_bytes()
        proj_text = Path(args.proj).read_bytes()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    obs = scan_observations(obs_text)
    proj = scan_projections(proj_text)
    lines = [f"{args.obs}:{e.line}: {e.name}: {e.detail}" for e in obs.issues]
    lines += [f"{args.proj}:{e.line}: {e.name}: {e.detail}" for e in proj.issues]
    if not obs.issues and not proj.issues:
        lines += [f"{args.obs}:{ln}: {rule}: {msg}" for ln, rule, msg in _coverage_violations(obs.rows, proj.rows)]
    for line in lines:
        print(line)
    return EXIT_INVALID if lines else EXIT_OK


def _config_from_args(args) -> RunConfig:
    if args.from_provenance:
        text = Path(args.from_provenance).read_text(encoding="utf-8")
        changed = check_provenance_inputs(text)
        if changed:
            raise ConfigError(f"inputs changed since the recorded run: {', '.join(changed)}")
        return config_from_provenance(text)
    if not args.obs or not args.proj:
        raise ConfigError("--obs and --proj are required unless --from-provenance is given")
    return RunConfig(
        obs=args.obs,
        proj=args.proj,
        window=args.window,
        method=args.method,
        lam=args.lam,
        weights=args.weights,
        normalize=args.normalize,
        weight_denominator=args.weight_denominator,
        target_policy=args.target_policy,
        temperature=args.temperature,
        ensemble_with_classifier=args.ensemble_with_classifier,
    )


def cmd_score(args) -> int:
    cfg = _config_from_args(args)
    bundle = run_score(cfg)
    write_bundle(bundle.files, Path(args.out))
    for name in sorted(bundle.files):
        print(Path(args.out) / name)
    return EXIT_OK


def cmd_render(args) -> int:
    files = read_score_dir(Path(args.in_dir))
    if not files:
        raise EmptyInput(f"no score files in {args.in_dir}")
    svgs = render_texts(files)
    write_bundle(svgs, Path(args.out))
    for name in sorted(svgs):
        print(Path(args.out) / name)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = RunConfig(
        obs=args.obs,
        proj=args.proj,
        window=args.window,
        weights=args.weights,
        normalize=args.normalize,
        target_policy=args.target_policy,
    )
    reference, _, _ = load_matrix_json(Path(args.reference).read_text(encoding="utf-8"))
    raw, datasets, projections = load_inputs(cfg)
    features = sorted({f for d in datasets for f in d.series})
    weights = resolve_weights(cfg, raw, features)
    pairs = build_pairs(cfg, datasets, projections)
    base = TraceConfig(target_policy=TargetPolicy.parse(cfg.target_policy), feature_weights=weights)
    lam = calibrate_lambda(pairs, reference, base)
    corr = lambda_correlations(pairs, reference, base)
    print(
        dump_json(
            {
                "lambda": lam,
                "reference_method": reference.method.value,
                "spearman": None if corr[lam] != corr[lam] else corr[lam],
            }
        )
    )
    return EXIT_OK


def _add_scoring_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", default="2015:2022", help="inclusive year range START:END")
    p.add_argument("--weights", default="equal", help="'equal' or a feature,weight / group,weight CSV")
    p.add_argument("--normalize", default="on", choices=("on", "off"))
    p.add_argument("--target-policy", default="same-year", help="same-year, next-year or horizon:<year>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sspalign", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sspalign {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check input files and report violations")
    p.add_argument("--obs", required=True)
    p.add_argument("--proj", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", help="compute score matrices and reports")
    p.add_argument("--method", default="all", choices=("norm", "trace", "classify", "ensemble", "all"))
    p.add_argument("--obs")
    p.add_argument("--proj")
    p.add_argument("--lambda", dest="lam", type=float, default=0.9)
    p.add_argument("--weight-denominator", default="l2", choices=("l2", "l1"))
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument(
        "--ensemble-with-classifier",
        action="store_true",
        help="include classifier probabilities in the ensemble",
    )
    p.add_argument("--from-provenance", help="re-run the configuration recorded in a provenance.json")
    p.add_argument("--out", required=True)
    _add_scoring_options(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("render", help="render SVGs from a score directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("calibrate-lambda", help="choose lambda that best agrees with reference scores")
    p.add_argument("--obs", required=True)
    p.add_argument("--proj", required=True)
    p.add_argument("--reference", required=True, help="scores_<method>.json to agree with")
    _add_scoring_options(p)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AlignmentError as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
