import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lesionwise.errors import LesionwiseError
from lesionwise.ranking import (
    HIGHER_BETTER,
    LOWER_BETTER,
    MetricTable,
    brats_scores,
    distribution_csv,
    distribution_json,
    emit_distribution_data,
    per_case_ranks,
    read_distribution_csv,
    render_team_table,
    summary_stats,
)


def test_strict_order():
    assert per_case_ranks([0.9, 0.8, 0.7], HIGHER_BETTER).tolist() == [1, 2, 3]


def test_ties_get_average_rank():
    ranks = per_case_ranks([2.0, 2.0, 5.0], LOWER_BETTER)
    assert ranks.tolist() == [1.5, 1.5, 3.0]
    assert ranks.sum() == 6


def test_missing_gets_worst_rank():
    assert per_case_ranks([0.5, np.nan, 0.9], HIGHER_BETTER).tolist() == [2.0, 3.0, 1.0]


def test_several_missing_share_bottom():
    ranks = per_case_ranks([np.nan, 3.0, np.nan, 1.0], LOWER_BETTER)
    assert ranks.tolist() == [3.5, 2.0, 3.5, 1.0]


def test_all_missing_raises():
    with pytest.raises(LesionwiseError):
        per_case_ranks([np.nan, np.nan])


def test_two_team_dominance():
    table = MetricTable(("A", "B"), ("c1",), [[0.9], [0.5]], [[1.0], [4.0]])
    board = brats_scores(table)
    assert board.standing("A").score_mean == 2.0 and board.standing("A").rank == 1
    assert board.standing("B").score_mean == 4.0


def test_identical_teams_tie_break_by_id():
    dsc = [[0.7, 0.8], [0.7, 0.8], [0.6, 0.9]]
    hd = [[3.0, 2.0], [3.0, 2.0], [5.0, 1.0]]
    board = brats_scores(MetricTable(("zed", "amy", "bob"), ("c1", "c2"), dsc, hd))
    assert board.standing("zed").score_mean == board.standing("amy").score_mean
    order = [s.team for s in board.standings]
    assert order.index("amy") < order.index("zed")


def test_case_without_any_value_is_excluded(caplog):
    dsc = [[0.7, np.nan], [0.6, np.nan]]
    hd = [[3.0, np.nan], [5.0, np.nan]]
    board = brats_scores(MetricTable(("a", "b"), ("c1", "c2"), dsc, hd))
    assert board.cases == ("c1",)
    assert board.excluded_cases == ("c2",)
    assert "excluded" in caplog.text


def test_empty_table():
    with pytest.raises(LesionwiseError):
        brats_scores(MetricTable((), (), np.zeros((0, 0)), np.zeros((0, 0))))


def test_table_validation():
    with pytest.raises(ValueError):
        MetricTable(("a",), ("c",), [[1.5]], [[1.0]])
    with pytest.raises(ValueError):
        MetricTable(("a",), ("c",), [[0.5]], [[-1.0]])
    with pytest.raises(ValueError):
        MetricTable(("a", "a"), ("c",), [[0.5], [0.5]], [[1.0], [1.0]])


tables = st.integers(2, 7).flatmap(
    lambda t: st.integers(1, 6).flatmap(
        lambda c: st.tuples(
            st.just(t),
            st.just(c),
            st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), min_size=t * c, max_size=t * c),
            st.lists(st.sampled_from([0.0, 1.0, 2.5, 7.0, 40.0]), min_size=t * c, max_size=t * c),
        )
    )
)


def _table(t, c, dsc, hd, names=None):
    names = names or tuple(f"team{i}" for i in range(t))
    return MetricTable(names, tuple(f"case{j}" for j in range(c)), np.reshape(dsc, (t, c)), np.reshape(hd, (t, c)))


@settings(max_examples=100, deadline=None)
@given(tables)
def test_rank_sums_and_score_range(args):
    t, c, dsc, hd = args
    board = brats_scores(_table(t, c, dsc, hd))
    assert np.all(board.dsc_ranks.sum(axis=0) == t * (t + 1) / 2)
    assert np.all(board.hd95_ranks.sum(axis=0) == t * (t + 1) / 2)
    assert np.all((board.case_scores >= 2) & (board.case_scores <= 2 * t))
    means = [s.score_mean for s in board.standings]
    assert means == sorted(means)


@settings(max_examples=100, deadline=None)
@given(tables, st.randoms())
def test_permutation_equivariance(args, random):
    t, c, dsc, hd = args
    table = _table(t, c, dsc, hd)
    perm = list(range(t))
    random.shuffle(perm)
    shuffled = MetricTable(
        tuple(table.teams[i] for i in perm), table.cases, table.dsc[perm], table.hd95[perm]
    )
    a, b = brats_scores(table), brats_scores(shuffled)
    assert [(s.team, s.score_mean, s.score_std, s.rank) for s in a.standings] == [
        (s.team, s.score_mean, s.score_std, s.rank) for s in b.standings
    ]


@settings(max_examples=100, deadline=None)
@given(tables)
def test_monotone_transform_invariance(args):
    t, c, dsc, hd = args
    table = _table(t, c, dsc, hd)
    warped = MetricTable(table.teams, table.cases, np.sqrt(table.dsc), np.exp(table.hd95 / 10.0))
    a, b = brats_scores(table), brats_scores(warped)
    assert np.array_equal(a.dsc_ranks, b.dsc_ranks)
    assert np.array_equal(a.hd95_ranks, b.hd95_ranks)


@settings(max_examples=100, deadline=None)
@given(tables)
def test_adding_worst_team_keeps_order(args):
    t, c, dsc, hd = args
    # existing DSCs lifted into [0.5, 1] so a DSC of 0 is strictly worst
    base = _table(t, c, np.asarray(dsc) * 0.5 + 0.5, hd)
    extended = MetricTable(
        base.teams + ("zzz_worst",),
        base.cases,
        np.vstack([base.dsc, np.zeros((1, c))]),
        np.vstack([base.hd95, np.full((1, c), 1000.0)]),
    )
    before = [s.team for s in brats_scores(base).standings]
    after = brats_scores(extended).standings
    assert [s.team for s in after if s.team != "zzz_worst"] == before
    assert after[-1].team == "zzz_worst"


@settings(max_examples=100, deadline=None)
@given(tables)
def test_dominated_team_never_scores_better(args):
    t, c, dsc, hd = args
    board = brats_scores(_table(t, c, dsc, hd))
    ranks = np.stack([board.dsc_ranks, board.hd95_ranks])
    for i in range(t):
        for j in range(t):
            if np.all(ranks[:, i] > ranks[:, j]):
                assert board.case_scores[i].mean() > board.case_scores[j].mean()


# -- summary stats ----------------------------------------------------------------


def test_summary_constant():
    s = summary_stats([5, 5, 5, 5])
    assert (s.mean, s.std, s.median, s.q1, s.q3, s.n) == (5, 0, 5, 5, 5, 4)


def test_summary_quartiles():
    s = summary_stats([1, 2, 3, 4])
    assert (s.median, s.q1, s.q3) == (2.5, 1.75, 3.25)
    assert s.mean == 2.5
    # sample variance: (2.25 + 0.25 + 0.25 + 2.25) / 3 = 5/3
    assert s.std == pytest.approx((5 / 3) ** 0.5, abs=1e-15)


def test_summary_empty():
    with pytest.raises(LesionwiseError):
        summary_stats([])


def test_render_layout():
    s = summary_stats([0.615, 1.015])
    assert s.render(3) == "0.815 ± 0.283 (0.815)"


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=50))
def test_summary_ordering(values):
    s = summary_stats(values)
    assert s.q1 <= s.median <= s.q3
    assert s.std >= 0


# -- distribution data -------------------------------------------------------------


def test_distribution_rows():
    table = MetricTable(("a",), ("c1", "c2"), [[0.5, 0.75]], [[2.0, 3.0]])
    text = distribution_csv(table)
    lines = text.strip().splitlines()
    assert lines[0] == "metric,team,case_id,value"
    assert sum(l.startswith("dsc,") for l in lines) == 2
    assert sum(l.startswith("hd95,") for l in lines) == 2


def test_distribution_roundtrip_reproduces_stats():
    rng = np.random.default_rng(3)
    table = MetricTable(
        tuple(f"t{i}" for i in range(6)),
        tuple(f"c{j}" for j in range(9)),
        rng.random((6, 9)),
        rng.random((6, 9)) * 50,
    )
    data = emit_distribution_data(table)
    assert set(data) == {"dsc", "hd95"}
    assert all(len(data[m]) == 6 and all(len(v) == 9 for v in data[m].values()) for m in data)
    for parsed in (read_distribution_csv(distribution_csv(table)), json.loads(distribution_json(table))):
        for metric in ("dsc", "hd95"):
            for t, team in enumerate(table.teams):
                assert summary_stats(parsed[metric][team]) == summary_stats(table.metric(metric)[t])


def test_distribution_skips_missing():
    table = MetricTable(("a", "b"), ("c1", "c2"), [[0.5, np.nan], [0.1, 0.2]], [[1.0, np.nan], [2.0, 3.0]])
    assert emit_distribution_data(table)["dsc"] == {"a": [0.5], "b": [0.1, 0.2]}


def test_team_table_is_best_first():
    table = MetricTable(("a", "b"), ("c1", "c2"), [[0.5, 0.7], [0.8, 0.9]], [[10.0, 12.0], [1.0, 2.0]])
    assert [t for t, _ in render_team_table(table, "dsc")] == ["b", "a"]
    assert render_team_table(table, "hd95")[0] == ("b", "1.50 ± 0.71 (1.50)")
