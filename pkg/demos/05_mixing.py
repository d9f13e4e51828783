"""
Mixing two codes
================

Running NM(1,1) for a block and NM(20,20) for the next gives the average of
the two trade-offs. Picking the code at random in every slot instead lands
close to the same point.
"""

from inorder_multicast import composite_tradeoff, joint_probabilities, nm_tradeoff
from inorder_multicast.simulator import SimConfig, run_simulation

ch = joint_probabilities(0.6, 0.6)
lo, hi = nm_tradeoff(ch, 1, 1), nm_tradeoff(ch, 20, 20)

print("  x    mix tau  mix sigma | blocks tau sigma | random tau sigma")
for x in (0.25, 0.5, 0.75):
    mix = composite_tradeoff([(lo, x), (hi, 1 - x)]).user(1)
    blocks = f"timeshare:[nm:1,1@{x},nm:20,20@{1 - x}]:10000"
    rand = f"random:[nm:1,1@{x},nm:20,20@{1 - x}]"
    b = run_simulation(SimConfig(blocks, ch, horizon=4_000_000)).report.user(1)
    r = run_simulation(SimConfig(rand, ch, horizon=4_000_000)).report.user(1)
    print(f"{x:4.2f}   {mix.tau:.4f}   {mix.sigma:.4f}   | {b.tau:.4f} {b.sigma:.4f}    "
          f"| {r.tau:.4f} {r.sigma:.4f}")
