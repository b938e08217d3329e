"""Drift of the weight and the positivity certificate for the published
length-3 scores at p1 = 0.47 with four gases.

Run: python demos/02_drift_certificate.py
"""
from catpoison.scores import TABLE1, block_str, drift, table1, verify_certificate, worst_case_drift

table = table1()

# Drift at the listed worst follower, next to the printed value.  The last
# column is the per-site worst case over every follower of length 6.
print("block  printed  at-follower  per-site-worst")
for block, (score, printed, follower) in TABLE1.items():
    at = drift(block, table, 0.47, 4, follower).value
    termwise = worst_case_drift(block, table, 0.47, 4, 6, "termwise").value
    print(f"{block}    {printed:.4f}   {at:+.4f}      {termwise:+.4f}")

# A whole follower string shared by all sites is the tighter worst case;
# it is what the certificate uses.
cert = verify_certificate(0.47, 4, 3, table, K=6)
print(f"\ncertificate: {cert.verdict}, c = {cert.c:.5f} at block {block_str(cert.argmin_block)}")
worst = cert.worst[(1, 1, 1)]
print(f"block 111: worst follower {block_str(worst.scenario)}, drift {worst.value:.4f}")
