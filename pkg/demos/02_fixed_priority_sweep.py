"""
Fixed priority: the secondary user's trade-off
==============================================

U1 always gets its required packet. U2's throughput tracks min(p1, p2),
and its smoothness climbs faster once its own channel beats U1's.
"""

import numpy as np

from inorder_multicast import fixed_priority_tradeoff, joint_probabilities, transient_tradeoff
from inorder_multicast.simulator import SimConfig, run_simulation

p1 = 0.4
print(f"p1 = {p1}")
print("  p2   tau2    sigma2  delta2  omega2")
for p2 in np.arange(0.1, 1.0001, 0.1):
    m = fixed_priority_tradeoff(joint_probabilities(p1, p2)).user(2)
    print(f"{p2:4.1f}  {m.tau:.4f}  {m.sigma:.4f}  {m.delta:.4f}  {m.omega:.4f}")

# slope of sigma2 below and above p2 = p1
lo = [fixed_priority_tradeoff(joint_probabilities(p1, x)).user(2).sigma for x in (0.1, 0.35)]
hi = [fixed_priority_tradeoff(joint_probabilities(p1, x)).user(2).sigma for x in (0.45, 0.9)]
print(f"\nd sigma2 / d p2: {(lo[1] - lo[0]) / 0.25:.3f} below p1, {(hi[1] - hi[0]) / 0.45:.3f} above")

# when U2's channel is worse, U1 runs away and U2's buffer grows without bound;
# compare the textbook recurrent-style values with the drift limits and a simulation
ch = joint_probabilities(0.8, 0.5)
sim = run_simulation(SimConfig("fixed:u1", ch, horizon=2_000_000, drift_limit=None)).report.user(2)
closed, drift = fixed_priority_tradeoff(ch).user(2), transient_tradeoff(ch).user(2)
print("\np1=0.8, p2=0.5       tau2    sigma2  omega2")
for name, m in (("recurrent-style", closed), ("drift limit", drift), ("simulated", sim)):
    print(f"{name:<20} {m.tau:.4f}  {m.sigma:.4f}  {m.omega:.4f}")
