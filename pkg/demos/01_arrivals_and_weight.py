"""Single arrivals and the weight of a configuration.

Run: python demos/01_arrivals_and_weight.py
"""
from catpoison import Boundary, Configuration, apply_arrival, weight
from catpoison.lattice import LEFT_FIRST, RIGHT_FIRST
from catpoison.scores import table1

# A gas lands on a vacant site and sticks unless a neighbor holds a
# different gas; then the two react and both sites end up empty.
c = Configuration.parse("103")
for name, order in [("left first", LEFT_FIRST), ("right first", RIGHT_FIRST)]:
    out = apply_arrival(c, 1, 2, order)
    print(f"2 lands between 1 and 3, {name}: {out.kind.name} -> {out.config}")

# Occupied sites ignore arrivals.
print("arrival on an occupied site:", apply_arrival(Configuration.parse("030"), 1, 2).kind.name)

# The torus wraps, the blocked lattice does not.
for b in Boundary:
    print(b.value, apply_arrival(Configuration.parse("0002", b), 0, 1).config)

# Weight: length of the run of 1's at the origin plus the score of the
# three sites after the first vacancy that follows it.
table = table1()
for text in ["110000000", "1110220000", "0222000"]:
    rep = weight(Configuration.parse(text), table)
    print(f"{text}: block {rep.block_len}, window {rep.window}, W = {rep.weight:.3f}")
