#!/usr/bin/env python
"""Incidence ratios on random Katz-Tao instances, then pocket regularization of a clustered family."""
import numpy as np

from frostman_lab.constructions import clustered_instance, random_incidence_instance
from frostman_lab.incidence import check_bound_main, regularize_pockets

s, t = 0.5, 0.7
for level in (8, 10, 12):
    ratios = []
    for seed in range(20):
        inst = random_incidence_instance(level, s, t, seed=np.random.SeedSequence(seed, spawn_key=(level,)))
        ratios.append(check_bound_main(inst.T, inst.F_of_q, s, t).ratio)
    print(f"level {level:2d}: max ratio {max(ratios):.4f}  median {np.median(ratios):.4f}")

F, T = clustered_instance(9, 0.5, 2.0, seed=1)
Fw, rep = regularize_pockets(F, T, 0.5, 2.0)
print(f"\nclustered family: {len(F)} cubes, {len(rep.regions)} heavy regions replaced")
print(f"sum of weights {rep.sum_weights}  c_P1 {rep.c_P1:.3f}  c_P2 {rep.c_P2:.3f}")
print(f"incidences before {rep.incidences_before}, weighted after {rep.incidences_after}")
