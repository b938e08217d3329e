"""Two systems sharing every arrival except its type.  System A has
rates (1/3, 1/3, 1/3) and B has (1/2, 1/4, 1/4), yet a 1 can appear in A
where B has none.

Run: python demos/05_coupling.py
"""
from catpoison.coupling import COUNTEREXAMPLE_LAW, golden_script, monotonicity_check, replay, violation_frequency

for order in "LR":
    states = replay(golden_script(order))
    print(f"final tie-break {order}:")
    for s in states:
        print("  ", s)
    print("   sites with a 1 only in A:", monotonicity_check(states[-1]))

freq = violation_frequency(COUNTEREXAMPLE_LAW, size=32, horizon=50.0, runs=100, seed=5)
print(f"runs showing such a site within t = 50: {freq:.2f}")
