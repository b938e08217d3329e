"""Whole trajectories: absorption statistics, a p1 sweep and a Monte Carlo
estimate of the weight drift.

Run: python demos/04_simulation.py
"""
from catpoison import Boundary, Configuration, ModelSpec, empirical_drift, estimate_absorption, run, sweep
from catpoison.scores import table1

spec = ModelSpec.equal_others(4, 0.47)
tr = run(spec, Configuration.uniform(128, 0, Boundary.TORUS), seed=1)
print(f"one run: {tr.status} to gas {tr.absorbed} at t = {tr.time:.1f} after {tr.n_events} events")
print(f"fingerprint {tr.fingerprint}")

est = estimate_absorption(spec, 128, Boundary.TORUS, runs=50, seed=2)
print("absorbing gas counts at p1 = 0.47:", est.counts)

res = sweep(4, [0.30, 0.34, 0.38, 0.42], size=64, runs=40, seed=3)
for row in res.rows:
    print(f"  p1 = {row['p1']:.2f}: gas-1 frequency {row['gas1_frequency']:.2f}")
print("50% crossing:", res.crossing)

start = Configuration.parse("110" + "2" * 61)
d = empirical_drift(spec, start, horizon=0.2, replicas=5000, seed=4, table=table1())
print(f"weight drift {d.mean:.5f} (95% CI {d.ci[0]:.5f} to {d.ci[1]:.5f})")
