"""Command-line front end.

Exit status: 0 when every case was scored, 2 when some case ended in an
error, 1 on a fatal configuration or I/O problem.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import LesionwiseError
from .evaluation import (
    build_run_report,
    case_csv,
    config_echo,
    dumps,
    evaluate_case,
    pair_cases,
    run_cases,
    standings_csv,
)
from .metrics import MIN_LESION_VOXELS, ScoringOptions
from .nifti import write_volume
from .phantom import generate, load_spec
from .ranking import MetricTable, distribution_csv, distribution_json, summary_stats

EXIT_OK, EXIT_FATAL, EXIT_CASE_ERRORS = 0, 1, 2

log = logging.getLogger("lesionwise")


class Fatal(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors: exit 1, keeping 2 for case errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def _add_scoring_args(p):
    p.add_argument("--min-lesion-voxels", type=int, default=MIN_LESION_VOXELS, metavar="N",
                   help="reference lesions with fewer voxels are ignored (default: %(default)s)")
    p.add_argument("--percentile", choices=["interp", "nearest"], default="interp",
                   help="95th-percentile convention for HD95 (default: %(default)s)")
    p.add_argument("--match", choices=["undilated", "dilated"], default="undilated",
                   help="test prediction overlap against the raw or the dilated reference lesion")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="format", action="store_const", const="json")
    fmt.add_argument("--csv", dest="format", action="store_const", const="csv")
    p.set_defaults(format="json")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")


def _options(args) -> ScoringOptions:
    if args.min_lesion_voxels < 0:
        raise Fatal("--min-lesion-voxels must be >= 0")
    return ScoringOptions(args.min_lesion_voxels, args.percentile, args.match)


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise Fatal(f"cannot write {out}: {exc}") from exc


def cmd_evaluate(args) -> int:
    options = _options(args)
    case_id = Path(args.prediction).name
    for suffix in (".nii.gz", ".nii"):
        if case_id.endswith(suffix):
            case_id = case_id[: -len(suffix)]
    report = evaluate_case(case_id, str(args.reference), {"prediction": str(args.prediction)}, options)["prediction"]
    if args.format == "csv":
        _emit(case_csv([("prediction", report)]), args.out)
    else:
        report = {
            "tool": "lesionwise",
            "version": __version__,
            "config": config_echo(options, reference=str(args.reference), prediction=str(args.prediction)),
            **report,
        }
        _emit(dumps(report), args.out)
    if report["status"] != "scored":
        log.error("%s: %s", report["error"]["type"], report["error"]["message"])
        return EXIT_CASE_ERRORS
    return EXIT_OK


def _parse_teams(specs) -> dict[str, str]:
    teams = {}
    for spec in specs or []:
        name, sep, directory = spec.partition("=")
        if not sep:
            directory = name
            name = Path(directory.rstrip("/")).name
        if name in teams:
            raise Fatal(f"team {name!r} given twice")
        if not Path(directory).is_dir():
            raise Fatal(f"team directory not found: {directory}")
        teams[name] = directory
    return teams


def cmd_leaderboard(args) -> int:
    options = _options(args)
    teams = _parse_teams(args.team)
    manifest = None
    if args.manifest:
        try:
            manifest = json.loads(Path(args.manifest).read_text())
        except (OSError, ValueError) as exc:
            raise Fatal(f"cannot read manifest {args.manifest}: {exc}") from exc
        teams_in_manifest = manifest.get("teams", {})
        if not teams and not teams_in_manifest:
            raise Fatal("no prediction source given")
    elif not teams:
        raise Fatal("at least one --team NAME=DIR is required")
    if args.reference_dir is None and manifest is None:
        raise Fatal("--reference-dir is required without --manifest")
    if args.reference_dir is not None and manifest is None and not Path(args.reference_dir).is_dir():
        raise Fatal(f"reference directory not found: {args.reference_dir}")
    if args.workers is not None and args.workers < 1:
        raise Fatal("--workers must be >= 1")

    try:
        team_names, jobs = pair_cases(args.reference_dir, teams, manifest)
    except (LesionwiseError, OSError) as exc:
        raise Fatal(str(exc)) from exc
    if len(team_names) < 2:
        log.warning("only one team: per-team statistics are reported without a leaderboard")

    results = run_cases([(*job, options) for job in jobs], args.workers)
    case_ids = [job[0] for job in jobs]
    inputs = {
        "reference_dir": None if args.reference_dir is None else str(args.reference_dir),
        "teams": {name: teams.get(name, "<manifest>") for name in team_names},
        "manifest": None if args.manifest is None else str(args.manifest),
    }
    report = build_run_report(case_ids, team_names, results, options, inputs)

    if args.format == "csv":
        if report["leaderboard"] is not None:
            text = standings_csv(report["leaderboard"])
        else:
            text = case_csv([(t, r) for t in team_names for r in report["teams"][t]["cases"]])
        _emit(text, args.out)
    else:
        _emit(dumps(report), args.out)

    if args.distribution:
        table = MetricTable.from_records(
            {t: {c["case_id"]: (c["dsc"], c["hd95"]) for c in report["teams"][t]["cases"] if c["status"] == "scored"}
             for t in team_names},
            case_ids,
        )
        text = distribution_csv(table) if str(args.distribution).endswith(".csv") else distribution_json(table) + "\n"
        _emit(text, args.distribution)

    if args.format == "json" and args.out is not None:
        _print_standings(report)
    failed = any(c["status"] != "scored" for t in team_names for c in report["teams"][t]["cases"])
    return EXIT_CASE_ERRORS if failed else EXIT_OK


def _print_standings(report) -> None:
    board = report.get("leaderboard")
    if board:
        print("Rank  Team                  BraTS score")
        for s in board["standings"]:
            print(f"{s['rank']:>4}  {s['team']:<20}  {s['rendered']}")
    for metric, label in (("dsc", "DSC"), ("hd95", "95HD (mm)")):
        print(f"\n{label}  mean ± SD (median)")
        for team, text in report["rendered"][metric].items():
            print(f"  {team:<20}  {text}")


def summarize_report(report: dict) -> dict:
    """Summary statistics per team and pooled over all teams."""
    if "teams" in report:
        cases = {team: section["cases"] for team, section in report["teams"].items()}
    elif "case_id" in report:
        cases = {"prediction": [report]}
    else:
        raise Fatal("not a lesionwise report")
    out = {"teams": {}, "overall": {}}
    pooled = {"dsc": [], "hd95": []}
    for team, reports in cases.items():
        scored = [r for r in reports if r.get("status") == "scored"]
        entry = {}
        for metric in ("dsc", "hd95"):
            values = [r[metric] for r in scored]
            pooled[metric].extend(values)
            entry[metric] = summary_stats(values).as_dict() if values else None
        out["teams"][team] = entry
    for metric, values in pooled.items():
        if not values:
            out["overall"][metric] = None
            continue
        stats = summary_stats(values).as_dict()
        best_key = (lambda e: -e[metric]["mean"]) if metric == "dsc" else (lambda e: e[metric]["mean"])
        ranked = sorted((e for e in out["teams"].values() if e[metric]), key=best_key)
        stats["best_team_mean"] = ranked[0][metric]["mean"]
        stats["best_team_median"] = ranked[0][metric]["median"]
        out["overall"][metric] = stats
    return out


def _render_summary(summary) -> str:
    lines = []
    digits = {"dsc": 3, "hd95": 2}
    for team, entry in summary["teams"].items():
        parts = []
        for metric in ("dsc", "hd95"):
            s = entry[metric]
            if s is None:
                parts.append(f"{metric}: n/a")
            else:
                d = digits[metric]
                parts.append(f"{metric}: {s['mean']:.{d}f} ± {s['std']:.{d}f} ({s['median']:.{d}f})")
        lines.append(f"{team:<20}  " + "   ".join(parts))
    lines.append("")
    lines.append(f"{'Statistic':<16}{'DSC':>18}{'95HD (mm)':>20}")
    rows = [("Average", "mean"), ("Std", "std"), ("Median", "median"), ("(Q1, Q3)", None),
            ("Best Team Avg", "best_team_mean"), ("Best Team Med", "best_team_median")]
    for label, key in rows:
        cells = []
        for metric in ("dsc", "hd95"):
            s = summary["overall"][metric]
            d = digits[metric]
            if s is None:
                cells.append("n/a")
            elif key is None:
                cells.append(f"[{s['q1']:.{d}f}, {s['q3']:.{d}f}]")
            else:
                cells.append(f"{s[key]:.{d}f}")
        lines.append(f"{label:<16}{cells[0]:>18}{cells[1]:>20}")
    return "\n".join(lines) + "\n"


def cmd_summarize(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text())
    except (OSError, ValueError) as exc:
        raise Fatal(f"cannot read report {args.report}: {exc}") from exc
    summary = summarize_report(report)
    _emit(dumps(summary) if args.json else _render_summary(summary), args.out)
    return EXIT_OK


def cmd_phantom(args) -> int:
    try:
        spec = load_spec(args.spec)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise Fatal(f"cannot read phantom spec {args.spec}: {exc}") from exc
    try:
        ref, pred, manifest = generate(spec, min_lesion_voxels=args.min_lesion_voxels, match=args.match)
    except LesionwiseError as exc:
        raise Fatal(str(exc)) from exc
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_volume(ref, out / f"reference{args.suffix}")
        write_volume(pred, out / f"prediction{args.suffix}")
        (out / "manifest.json").write_text(dumps(manifest))
    except OSError as exc:
        raise Fatal(f"cannot write to {out}: {exc}") from exc
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lesionwise", description="Lesion-wise segmentation scoring.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evaluate", help="score one prediction against one reference")
    p.add_argument("--reference", required=True, type=Path)
    p.add_argument("--prediction", required=True, type=Path)
    _add_scoring_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("leaderboard", help="score several teams over a reference directory and rank them")
    p.add_argument("--reference-dir", type=Path)
    p.add_argument("--team", action="append", metavar="NAME=DIR",
                   help="prediction directory of one team (repeatable)")
    p.add_argument("--manifest", type=Path, help="explicit case -> file mapping (JSON)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--distribution", type=Path, help="also write per-team value lists (.csv or .json)")
    _add_scoring_args(p)
    p.set_defaults(func=cmd_leaderboard)

    p = sub.add_parser("summarize", help="summary statistics of a report")
    p.add_argument("--report", required=True, type=Path)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("phantom", help="write a synthetic reference/prediction pair")
    p.add_argument("--spec", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--suffix", choices=[".nii.gz", ".nii"], default=".nii.gz")
    p.add_argument("--min-lesion-voxels", type=int, default=MIN_LESION_VOXELS)
    p.add_argument("--match", choices=["undilated", "dilated"], default="undilated",
                   help="matching rule assumed by the manifest's expected outcomes")
    p.set_defaults(func=cmd_phantom)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except Fatal as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
