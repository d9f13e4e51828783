"""
The (N, N) family at p1 = p2 = 0.6
==================================

Raising the threshold lets the leader run further ahead. Throughput rises
with N. Smoothness drops sharply from N=1 to N=2 and then creeps back up.
"""

from inorder_multicast import joint_probabilities, nm_tradeoff
from inorder_multicast.simulator import SimConfig, run_simulation

ch = joint_probabilities(0.6, 0.6)
print(" N   tau     sigma   delta   omega")
for N in (1, 2, 3, 4, 5, 8, 12, 20, 30):
    m = nm_tradeoff(ch, N, N).user(1)
    print(f"{N:2d}  {m.tau:.4f}  {m.sigma:.4f}  {m.delta:.4f}  {m.omega:.4f}")

# spot-check two points against long simulations
for N in (2, 20):
    r = run_simulation(SimConfig(f"nm:{N},{N}", ch, horizon=4_000_000, seed=1)).report.user(1)
    print(f"simulated N={N}: tau {r.tau:.4f} sigma {r.sigma:.4f}")

# occupancy of the chain states for N = 3
r = run_simulation(SimConfig("nm:3,3", ch, horizon=1_000_000, track_occupancy=True))
total = sum(r.occupancy.values())
print("\nstate occupancy, nm:3,3")
for state, count in r.occupancy.items():
    print(f"{str(state):>4}  {count / total:.4f}")
