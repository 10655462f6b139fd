"""
Star-extended topologies and their transmission schedules
=========================================================

A central node sits at the origin and every other device is linked to it;
extra leaf-to-leaf links appear with probability p. We build the mixing
matrix, then look at how many slots the digital and analog schedules need.
"""
import numpy as np

from wireless_dsgd.scheduler import (format_analog_schedule, format_digital_schedule,
                                     make_analog_schedule, make_digital_schedule)
from wireless_dsgd.topology import build_mixing_matrix, generate_star_extended

g = generate_star_extended(seed=3, K=8, p=0.3)
print("edges (1-based):", [(i + 1, j + 1) for i, j in g.sorted_edges()])
print("degrees:", g.degrees())

# Laplacian consensus weights: uniform alpha off the diagonal, rows sum to one
W = build_mixing_matrix(g)
print("alpha = %.4f" % W.alpha)
print("row sums:", np.round(W.W.sum(axis=1), 12))

# Digital: devices that share a neighbor cannot transmit together
dig = make_digital_schedule(g)
print("\ndigital schedule, M = %d slots" % dig.num_slots)
print(format_digital_schedule(dig))

# Analog: each round picks star centers; the neighbors transmit over the air,
# then the centers broadcast. Two slots per round.
ana = make_analog_schedule(g)
print("\nanalog schedule, M = %d slots" % ana.num_slots)
print(format_analog_schedule(ana))

# Sparser graphs need fewer rounds: compare a handful of p values
for p in (0.0, 0.1, 0.3, 0.6, 1.0):
    slots = [(make_digital_schedule(h).num_slots, make_analog_schedule(h).num_slots)
             for h in (generate_star_extended(s, 8, p) for s in range(50))]
    d, a = np.mean(slots, axis=0)
    print(f"p={p:.1f}: mean digital M={d:.1f}, mean analog M={a:.1f}")
