"""
Two scripted walk-throughs
==========================

Each row is one slot: what the source sent and what each user decoded.
``x`` marks an erased slot and ``-`` a reception that brought nothing new.
"""

from inorder_multicast.simulator import ScriptedChannel, SimConfig, run_simulation


def show(scheme, script):
    cfg = SimConfig(scheme, script=ScriptedChannel.parse(script), trace_length=len(script))
    print(f"\n{scheme}  ({script})")
    print("Time | Sent   | U1   | U2   | state")
    for rec in run_simulation(cfg).trace:
        cells = []
        for u in (1, 2):
            r = rec.receptions[u - 1]
            cells.append("x" if r is None else "-" if r.packet is None else f"s{r.packet}")
        print(f"{rec.slot:>4} | {str(rec.sent):<6} | {cells[0]:<4} | {cells[1]:<4} | {rec.state}")


# U1 has priority: U2 only gets an XOR once it holds s_r1
show("fixed:u1", "u1,u2,both,u1,both")

# greedy serves whoever leads, and XORs as soon as the lagger can use it
show("greedy", "u1,u2,u2,u1,both")

# the (1,1) code never lets either user get more than one packet ahead
show("nm:1,1", "u1,u1,u2,both,u2,u1,both")
