"""
Greedy coding
=============

With unequal channels the better user settles into optimal smoothness while
the other one mostly collects packets ahead of time. With equal channels the
gap between the users is a fair random walk and the averages never settle.
"""

from inorder_multicast import greedy_tradeoff, joint_probabilities, transient_tradeoff
from inorder_multicast.simulator import SimConfig, run_simulation

ch = joint_probabilities(0.8, 0.5)
sim = run_simulation(SimConfig("greedy", ch, horizon=2_000_000, drift_limit=None)).report
drift = transient_tradeoff(ch)
for u in (1, 2):
    s, d = sim.user(u), drift.user(u)
    print(f"U{u}: simulated sigma {s.sigma:.4f} omega {s.omega:.4f}  "
          f"| drift limit sigma {d.sigma:.4f} omega {d.omega:.4f}")
print(f"closed form for the worse user, composed: sigma2 = {greedy_tradeoff(ch).user(2).sigma:.4f}")

# equal channels: the two halves of a run disagree
ch = joint_probabilities(0.5, 0.5)
print("\np1 = p2 = 0.5, sigma1 per half")
for seed in range(6):
    r = run_simulation(SimConfig("greedy", ch, horizon=2_000_000, seed=seed))
    a, b = (h.user(1).sigma for h in r.halves)
    print(f"seed {seed}: {a:.4f} {b:.4f}  converged={r.converged}")
