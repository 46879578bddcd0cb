"""Rank four simulated teams over a handful of cases.

Each team's prediction is the reference shifted and noised by a
team-specific amount, so better teams should land on top. Per case, teams
get a DSC rank and an HD95 rank; their sum averaged over cases is the
team's score (lower is better).

    python3 demos/leaderboard.py
"""

import numpy as np

from lesionwise.errors import NoEvaluableLesionsError
from lesionwise.metrics import prepare_reference, score_prepared
from lesionwise.nifti import BinaryMask, binarize
from lesionwise.phantom import generate, random_spec
from lesionwise.ranking import MetricTable, brats_scores, render_team_table

rng = np.random.default_rng(42)
teams = {"precise": 0.0, "decent": 0.02, "sloppy": 0.06, "noisy": 0.12}
cases = [f"case{i}" for i in range(8)]
records = {team: {} for team in teams}

for i, case in enumerate(cases):
    ref_vol, _, _ = generate(random_spec(i, dims=(40, 40, 40), n_lesions=3, max_size=6.0))
    reference = binarize(ref_vol)
    try:
        prepared = prepare_reference(reference)
    except NoEvaluableLesionsError as exc:
        print(f"{case}: skipped ({exc})")
        continue
    for team, flip in teams.items():
        noisy = reference.bits ^ (rng.random(reference.dims) < flip * reference.bits)
        noisy = np.roll(noisy, int(round(flip * 20)), axis=0)
        m = score_prepared(prepared, BinaryMask(noisy, reference.spacing))
        records[team][case] = (m.lesionwise_dsc, m.lesionwise_hd95)

table = MetricTable.from_records(records, cases)
board = brats_scores(table)
print("Rank  Team      BraTS score")
for s in board.standings:
    print(f"{s.rank:>4}  {s.team:<8}  {s.score_mean:.2f} ± {s.score_std:.2f}")
print("\nDSC, mean ± SD (median)")
for team, text in render_team_table(table, "dsc"):
    print(f"  {team:<8} {text}")
print("\n95HD (mm), mean ± SD (median)")
for team, text in render_team_table(table, "hd95"):
    print(f"  {team:<8} {text}")
