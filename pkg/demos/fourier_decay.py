#!/usr/bin/env python
"""Print the normalized Fourier decay profile of arclength on two convex curves."""
import numpy as np

from frostman_lab.curve import exp_curve, parabola
from frostman_lab.spectral import arclength_measure, decay_profile


def main():
    Rs = 2.0 ** np.arange(0, 9)
    for spec in (parabola(), exp_curve()):
        m = arclength_measure(spec)
        print(f"{spec.name}: mass {m.mass:.6f}")
        print("       R   sup|m^|   sup|m^| R^1/2")
        for R, v, nv in decay_profile(m, Rs):
            print(f"{R:8.0f}  {v:9.5f}  {nv:9.5f}")
        print()


if __name__ == "__main__":
    main()
