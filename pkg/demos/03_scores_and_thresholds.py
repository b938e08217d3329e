"""Solving for scores and searching for the smallest certified p1.

Run: python demos/03_scores_and_thresholds.py   (about 30 s)
"""
from catpoison.lattice import INFINITE
from catpoison.scores import SolverConfig, fixed_point_solve, table1, threshold_search

# Scores making every non-reference block's worst-case drift exactly 0.
solved, report = fixed_point_solve(SolverConfig(L=3, n=4, p1=0.4685))
print(f"converged in {report.sweeps} sweeps, reference-block drift {report.reference_value:+.5f}")
published = table1()
for block, value in solved.to_dict().items():
    print(f"  {block}  solved {value:.3f}  published {published[block]:.3f}")

# Threshold search: bisect on "solver converges and the reference block is
# positive", then freeze the scores at three decimals and bisect again on
# the certificate with those frozen scores.
for n, L in [(4, 3), (INFINITE, 2), (3, 5), (3, 6), (4, 5)]:
    res = threshold_search(n, L)
    print(f"n={n} L={L}: fixed point {res.p1_fixed_point:.4f}, certified {res.p1_star:.4f}")
