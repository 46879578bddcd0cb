"""Per-case ranking, composite BraTS scores and summary statistics.

Conventions:

* rank 1 is best; tied values share the average of the positions they span;
* teams without a value for a case tie for the bottom positions (a single
  missing team therefore gets rank T);
* a team's case score is its DSC rank plus its HD95 rank, and its BraTS score
  the mean over cases (lower is better);
* standard deviations use the n-1 denominator, quartiles linear interpolation.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import LesionwiseError

log = logging.getLogger(__name__)

HIGHER_BETTER = "higher"
LOWER_BETTER = "lower"
METRICS = {"dsc": HIGHER_BETTER, "hd95": LOWER_BETTER}


@dataclass(frozen=True)
class MetricTable:
    """Teams x cases DSC and HD95 values; NaN marks a missing prediction."""

    teams: tuple[str, ...]
    cases: tuple[str, ...]
    dsc: np.ndarray
    hd95: np.ndarray

    def __post_init__(self):
        teams, cases = tuple(self.teams), tuple(self.cases)
        object.__setattr__(self, "teams", teams)
        object.__setattr__(self, "cases", cases)
        if len(set(teams)) != len(teams):
            raise ValueError("team identifiers must be unique")
        for name in METRICS:
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.shape != (len(teams), len(cases)):
                raise ValueError(f"{name} must have shape {(len(teams), len(cases))}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        present = self.dsc[~np.isnan(self.dsc)]
        if np.any((present < 0) | (present > 1)):
            raise ValueError("dsc values must lie in [0, 1]")
        if np.any(self.hd95[~np.isnan(self.hd95)] < 0):
            raise ValueError("hd95 values must be >= 0")

    @classmethod
    def from_records(cls, records: Mapping[str, Mapping[str, tuple]], cases: Sequence[str] | None = None):
        """Build from ``{team: {case: (dsc, hd95) or None}}``."""
        teams = list(records)
        if cases is None:
            cases = sorted({c for per_case in records.values() for c in per_case})
        dsc = np.full((len(teams), len(cases)), np.nan)
        hd = np.full((len(teams), len(cases)), np.nan)
        for t, team in enumerate(teams):
            for c, case in enumerate(cases):
                value = records[team].get(case)
                if value is not None:
                    dsc[t, c], hd[t, c] = value
        return cls(tuple(teams), tuple(cases), dsc, hd)

    def metric(self, name: str) -> np.ndarray:
        return getattr(self, name)


def per_case_ranks(values, direction: str = HIGHER_BETTER) -> np.ndarray:
    """Fractional ranks (1 = best) for one case; NaN entries tie for last."""
    values = np.asarray(values, dtype=float)
    if direction not in (HIGHER_BETTER, LOWER_BETTER):
        raise ValueError(f"direction must be {HIGHER_BETTER!r} or {LOWER_BETTER!r}")
    missing = np.isnan(values)
    if missing.all():
        raise LesionwiseError("all values missing for this case")
    keys = -values if direction == HIGHER_BETTER else values.copy()
    keys[missing] = np.inf
    return rankdata(keys, method="average")


@dataclass(frozen=True)
class TeamStanding:
    team: str
    score_mean: float
    score_std: float
    rank: int
    n_cases: int


@dataclass(frozen=True)
class Leaderboard:
    teams: tuple[str, ...]
    cases: tuple[str, ...]
    dsc_ranks: np.ndarray
    hd95_ranks: np.ndarray
    standings: tuple[TeamStanding, ...]
    excluded_cases: tuple[str, ...] = ()

    @property
    def case_scores(self) -> np.ndarray:
        return self.dsc_ranks + self.hd95_ranks

    def standing(self, team: str) -> TeamStanding:
        for s in self.standings:
            if s.team == team:
                return s
        raise KeyError(team)

    def as_dict(self):
        return {
            "conventions": {
                "ties": "average rank",
                "missing": "missing entries tie for the worst ranks",
                "score_std": "sample (n-1)",
                "order": "ascending BraTS score, then score std, then team id",
            },
            "cases": list(self.cases),
            "excluded_cases": list(self.excluded_cases),
            "standings": [
                {
                    "rank": s.rank,
                    "team": s.team,
                    "brats_score": s.score_mean,
                    "brats_score_std": s.score_std,
                    "n_cases": s.n_cases,
                    "rendered": format_mean_std(s.score_mean, s.score_std, 2),
                }
                for s in self.standings
            ],
            "case_ranks": {
                team: {
                    "dsc": self.dsc_ranks[t].tolist(),
                    "hd95": self.hd95_ranks[t].tolist(),
                }
                for t, team in enumerate(self.teams)
            },
        }


def sample_std(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def brats_scores(table: MetricTable) -> Leaderboard:
    """Rank every case on both metrics and average the rank sums per team."""
    if not table.teams or not table.cases:
        raise LesionwiseError("empty metric table")
    kept, excluded, dsc_cols, hd_cols = [], [], [], []
    for c, case in enumerate(table.cases):
        if np.isnan(table.dsc[:, c]).all() and np.isnan(table.hd95[:, c]).all():
            log.warning("case %s has no scored prediction from any team; excluded from ranking", case)
            excluded.append(case)
            continue
        kept.append(case)
        dsc_cols.append(_ranks_or_worst(table.dsc[:, c], HIGHER_BETTER))
        hd_cols.append(_ranks_or_worst(table.hd95[:, c], LOWER_BETTER))
    if not kept:
        raise LesionwiseError("no case has any scored prediction")
    dsc_ranks = np.column_stack(dsc_cols)
    hd_ranks = np.column_stack(hd_cols)
    scores = dsc_ranks + hd_ranks
    means = scores.mean(axis=1)
    stds = [sample_std(row) for row in scores]
    order = sorted(range(len(table.teams)), key=lambda t: (means[t], stds[t], table.teams[t]))
    standings = [None] * len(table.teams)
    for rank, t in enumerate(order, start=1):
        standings[rank - 1] = TeamStanding(table.teams[t], float(means[t]), float(stds[t]), rank, len(kept))
    return Leaderboard(table.teams, tuple(kept), dsc_ranks, hd_ranks, tuple(standings), tuple(excluded))


def _ranks_or_worst(values, direction):
    # one metric can be missing while the other is present only for malformed
    # input; rank whatever is there and let NaN fall to the bottom
    if np.isnan(values).all():
        return np.full(len(values), (len(values) + 1) / 2.0)
    return per_case_ranks(values, direction)


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    median: float
    q1: float
    q3: float
    n: int

    def as_dict(self):
        return {"mean": self.mean, "std": self.std, "median": self.median, "q1": self.q1, "q3": self.q3, "n": self.n}

    def render(self, digits: int = 3) -> str:
        """``mean ± std (median)`` at fixed precision."""
        return f"{format_mean_std(self.mean, self.std, digits)} ({self.median:.{digits}f})"


def summary_stats(values) -> SummaryStats:
    """Mean, sample std, median and linearly interpolated quartiles."""
    values = np.asarray(list(values), dtype=float)
    values = values[~np.isnan(values)]
    if values.size == 0:
        raise LesionwiseError("summary statistics of an empty list")
    q1, median, q3 = np.percentile(values, [25, 50, 75])
    return SummaryStats(float(values.mean()), sample_std(values), float(median), float(q1), float(q3), int(values.size))


def format_mean_std(mean: float, std: float, digits: int) -> str:
    return f"{mean:.{digits}f} ± {std:.{digits}f}"


METRIC_DIGITS = {"dsc": 3, "hd95": 2}


def render_team_table(table: MetricTable, metric: str) -> list[tuple[str, str]]:
    """Teams ordered best-first on the metric mean, each rendered as
    ``mean ± std (median)``."""
    rows = []
    for t, team in enumerate(table.teams):
        values = table.metric(metric)[t]
        if np.isnan(values).all():
            continue
        rows.append((team, summary_stats(values)))
    sign = -1 if METRICS[metric] == HIGHER_BETTER else 1
    rows.sort(key=lambda r: (sign * r[1].mean, r[0]))
    return [(team, stats.render(METRIC_DIGITS[metric])) for team, stats in rows]


def emit_distribution_data(table: MetricTable) -> dict[str, dict[str, list[float]]]:
    """Per-metric, per-team lists of present case values (for violin/box plots)."""
    out = {}
    for metric in METRICS:
        arr = table.metric(metric)
        out[metric] = {
            team: [float(v) for v in arr[t] if not math.isnan(v)] for t, team in enumerate(table.teams)
        }
    return out


def distribution_rows(table: MetricTable) -> list[dict]:
    """Long-format rows ``metric, team, case_id, value`` (missing entries skipped)."""
    rows = []
    for metric in METRICS:
        arr = table.metric(metric)
        for t, team in enumerate(table.teams):
            for c, case in enumerate(table.cases):
                if not math.isnan(arr[t, c]):
                    rows.append({"metric": metric, "team": team, "case_id": case, "value": float(arr[t, c])})
    return rows


def distribution_csv(table: MetricTable) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["metric", "team", "case_id", "value"], lineterminator="\n")
    writer.writeheader()
    for row in distribution_rows(table):
        writer.writerow({**row, "value": repr(row["value"])})
    return buf.getvalue()


def distribution_json(table: MetricTable) -> str:
    return json.dumps(emit_distribution_data(table), indent=2)


def read_distribution_csv(text: str) -> dict[str, dict[str, list[float]]]:
    out: dict[str, dict[str, list[float]]] = {}
    for row in csv.DictReader(io.StringIO(text)):
        out.setdefault(row["metric"], {}).setdefault(row["team"], []).append(float(row["value"]))
    return out
