"""Compare the fast scorer with the brute-force reference implementation.

The oracle uses flood fill, explicit neighbour scans and all-pairs distances.
It is slow but simple enough to check by eye. Both paths should agree to
floating-point rounding on every phantom.

    python3 demos/oracle_cross_check.py
"""

import time

from lesionwise.errors import NoEvaluableLesionsError
from lesionwise.metrics import ScoringOptions, score_case
from lesionwise.nifti import binarize
from lesionwise.oracle import oracle_score_case
from lesionwise.phantom import generate, random_spec

options = ScoringOptions(min_lesion_voxels=20)
worst, n = 0.0, 0
t_fast = t_slow = 0.0
for seed in range(40):
    ref, pred, _ = generate(random_spec(seed, dims=(22, 22, 22), spacing=(1.0, 0.8, 1.5), boundary_noise=0.2))
    ref, pred = binarize(ref), binarize(pred)
    try:
        t0 = time.perf_counter()
        fast = score_case(ref, pred, options)
        t1 = time.perf_counter()
        slow = oracle_score_case(ref, pred, options)
        t2 = time.perf_counter()
    except NoEvaluableLesionsError:
        continue
    t_fast += t1 - t0
    t_slow += t2 - t1
    n += 1
    worst = max(worst, abs(fast.lesionwise_dsc - slow.lesionwise_dsc), abs(fast.lesionwise_hd95 - slow.lesionwise_hd95))

print(f"{n} phantoms compared, largest disagreement {worst:.2e}")
print(f"fast path {t_fast:.2f} s, oracle {t_slow:.2f} s")
