#!/usr/bin/env python
"""Covering numbers of the lattice construction on the parabola across scales."""
import math

from frostman_lab.constructions import sharpness_sweep

tau, s = 1.2, 0.3
rows, slope = sharpness_sweep(range(8, 13), tau, s)
keys = ("A+A", "psi(A)+B", "AxB", "AxB+G(D)")
print("delta      " + "  ".join(f"{k:>10}" for k in keys))
for delta, cov, _ in rows:
    print(f"2^{-round(math.log2(delta)):<3}     " + "  ".join(f"{cov[k]:>10}" for k in keys))
print("\nratios cover * delta^predicted")
for delta, _, rat in rows:
    print("          " + "  ".join(f"{rat[k]:>10.3f}" for k in keys))
print(f"\nfitted slope of the sum-set cover: {slope:.3f} (tau = {tau})")
