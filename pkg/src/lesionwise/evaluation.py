"""Batch evaluation: case reports, run reports and the worker pool behind the CLI.

Reports are plain dicts ready for ``json.dumps``. Their content depends only
on the inputs and the scoring options, never on the worker count, so reruns
produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Mapping, Optional

from . import __version__
from .errors import LesionwiseError
from .metrics import ScoringOptions, prepare_reference, score_prepared
from .nifti import binarize, check_same_geometry, read_volume
from .ranking import (
    MetricTable,
    brats_scores,
    emit_distribution_data,
    render_team_table,
    summary_stats,
)

log = logging.getLogger(__name__)

NIFTI_SUFFIXES = (".nii.gz", ".nii")
CASE_FIELDS = ["case_id", "status", "dsc", "hd95", "L", "TP", "FN", "FP", "diagonal_mm", "error"]


def case_id_of(path) -> Optional[str]:
    name = Path(path).name
    for suffix in NIFTI_SUFFIXES:
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return None


def discover_cases(directory) -> dict[str, str]:
    """``{case_id: path}`` for every NIfTI file directly inside ``directory``."""
    found = {}
    for entry in sorted(os.listdir(directory)):
        cid = case_id_of(entry)
        if cid is None:
            continue
        if cid in found:
            raise LesionwiseError(f"case {cid!r} appears twice in {directory}")
        found[cid] = str(Path(directory) / entry)
    return found


def _error_report(case_id: str, kind: str, message: str) -> dict:
    report = {"case_id": case_id, "status": "error"}
    report.update({k: None for k in CASE_FIELDS[2:9]})
    report["per_lesion"] = []
    report["error"] = {"type": kind, "message": message}
    return report


def _scored_report(case_id: str, metrics) -> dict:
    report = {"case_id": case_id, "status": "scored"}
    report.update(metrics.as_dict())
    report["error"] = None
    return report


def _load_mask(path, role: str):
    if path is None or not os.path.exists(path):
        raise FileNotFoundError(f"{role} not found" + (f": {path}" if path else ""))
    return binarize(read_volume(path))


def evaluate_case(case_id: str, reference_path, prediction_paths: Mapping[str, Optional[str]], options: ScoringOptions) -> dict[str, dict]:
    """Score one reference against each team's prediction.

    The reference is parsed and grouped into lesions once. Failures become
    typed error reports instead of exceptions.
    """
    try:
        ref_mask = _load_mask(reference_path, "reference")
        prepared = prepare_reference(ref_mask, options)
    except FileNotFoundError as exc:
        return {team: _error_report(case_id, "ReferenceNotFound", str(exc)) for team in prediction_paths}
    except LesionwiseError as exc:
        return {team: _error_report(case_id, type(exc).__name__, str(exc)) for team in prediction_paths}

    out = {}
    for team, pred_path in prediction_paths.items():
        try:
            pred_mask = _load_mask(pred_path, "prediction")
            check_same_geometry(ref_mask, pred_mask)
            out[team] = _scored_report(case_id, score_prepared(prepared, pred_mask))
        except FileNotFoundError as exc:
            out[team] = _error_report(case_id, "PredictionNotFound", str(exc))
        except LesionwiseError as exc:
            out[team] = _error_report(case_id, type(exc).__name__, str(exc))
    return out


def _evaluate_job(args):
    return evaluate_case(*args)


def run_cases(jobs, workers: Optional[int] = None) -> list[dict[str, dict]]:
    """Evaluate ``(case_id, reference, {team: prediction}, options)`` jobs, in order."""
    jobs = list(jobs)
    workers = workers or os.cpu_count() or 1
    if workers <= 1 or len(jobs) <= 1:
        return [_evaluate_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_evaluate_job, jobs))


def config_echo(options: ScoringOptions, **extra) -> dict:
    config = dict(extra)
    config.update(options.as_dict())
    return config


def build_run_report(case_ids, teams, results, options: ScoringOptions, inputs: dict) -> dict:
    """Assemble the run-level report from per-case results (ordered like ``case_ids``)."""
    per_team = {team: [results[i][team] for i in range(len(case_ids))] for team in teams}
    records = {
        team: {
            r["case_id"]: (r["dsc"], r["hd95"]) if r["status"] == "scored" else None for r in reports
        }
        for team, reports in per_team.items()
    }
    table = MetricTable.from_records(records, list(case_ids))
    team_section = {}
    for t, team in enumerate(teams):
        section = {"cases": per_team[team]}
        for metric in ("dsc", "hd95"):
            values = table.metric(metric)[t]
            section[metric] = summary_stats(values).as_dict() if not all(math.isnan(v) for v in values) else None
        team_section[team] = section

    report = {
        "tool": "lesionwise",
        "version": __version__,
        "config": config_echo(options, **inputs),
        "teams": team_section,
        "rendered": {metric: dict(render_team_table(table, metric)) for metric in ("dsc", "hd95")},
        "leaderboard": None,
        "distribution": emit_distribution_data(table),
    }
    if len(teams) >= 2:
        try:
            report["leaderboard"] = brats_scores(table).as_dict()
        except LesionwiseError as exc:
            log.warning("leaderboard not built: %s", exc)
    return report


def pair_cases(reference_dir, team_dirs: Mapping[str, str], manifest: Optional[dict] = None):
    """Match reference and prediction files by basename, or via an explicit manifest.

    The manifest has the form ``{"reference": {case: path}, "teams": {team: {case: path}}}``;
    relative paths resolve against the current directory.
    """
    if manifest is not None:
        refs = dict(manifest["reference"])
        team_files = {team: dict(files) for team, files in manifest.get("teams", {}).items()}
        for team, directory in team_dirs.items():
            team_files.setdefault(team, discover_cases(directory))
    else:
        refs = discover_cases(reference_dir)
        team_files = {team: discover_cases(directory) for team, directory in team_dirs.items()}
    if not refs:
        raise LesionwiseError(f"no reference cases found in {reference_dir}")
    common = [c for c in sorted(refs) if any(c in files for files in team_files.values())]
    if not common:
        raise LesionwiseError("no common cases between the reference and any prediction source")
    teams = sorted(team_files)
    jobs = [(c, refs[c], {team: team_files[team].get(c) for team in teams}) for c in sorted(refs)]
    return teams, jobs


def case_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["team"] + CASE_FIELDS)
    for team, report in reports:
        row = [team]
        for key in CASE_FIELDS:
            value = report.get(key)
            if key == "error":
                value = "" if value is None else f"{value['type']}: {value['message']}"
            elif value is None:
                value = ""
            elif isinstance(value, float):
                value = repr(value)
            row.append(value)
        writer.writerow(row)
    return buf.getvalue()


def standings_csv(leaderboard: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "team", "brats_score", "brats_score_std", "n_cases"])
    for s in leaderboard["standings"]:
        writer.writerow([s["rank"], s["team"], repr(s["brats_score"]), repr(s["brats_score_std"]), s["n_cases"]])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(report) -> str:
    return json.dumps(_clean(report), indent=2, ensure_ascii=False) + "\n"
