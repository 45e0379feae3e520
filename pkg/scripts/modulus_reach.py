#!/usr/bin/env python3
"""Quantify the reach of the log-log modulus family in double precision.

omega_B(d) = delta - delta^{3/2} + gamma log(1 + log(B d / delta) / 4) grows
double-logarithmically in B, so even at the largest representable B it
saturates.  This script tabulates, over the admissible parameter region
(monotone and concave: delta <= 4/9, gamma <= 4 delta (1 - 1.5 sqrt(delta))),

  * the saturated omega_B(d) at B = 1e280,
  * the largest force level ||f||_inf admitted by the selection condition
    omega_B(d)/d >= 4 pi ||f||_inf,
  * the largest field oscillation a strict modulus can ever cover.

Any spectrally unstable shear state needs velocity amplitude >= ~6.6 (see
stability_map.py), hence oscillation >= ~13, far beyond the reach printed
here: that gap is why trajectory modulus monitoring applies only to
small-amplitude runs.

Usage: python scripts/modulus_reach.py
"""

import math

from sqglab.modulus import B_CAP, ModulusParams, omega

D = 2 * math.pi * math.sqrt(2)


def main():
    print(f"{'delta':>8} {'gamma':>8} {'omega_B(d) @ B=1e280':>22} "
          f"{'max ||f||_inf':>14} {'max oscillation':>16}")
    best = (0.0, None)
    for delta in (1e-3, 1e-2, 0.05, 0.1, 0.1975, 0.3, 0.4):
        gamma_cap = 4 * delta * (1 - 1.5 * math.sqrt(delta))
        if gamma_cap <= 0:
            continue
        for frac in (0.1, 0.5, 1.0):
            gamma = min(frac * gamma_cap, delta)
            p = ModulusParams(delta_mod=delta, gamma_mod=gamma, B=1.0)
            reach = float(omega(p, B_CAP * D))
            f_max = reach / (4 * math.pi * D)
            print(f"{delta:8.4f} {gamma:8.4f} {reach:22.4f} {f_max:14.3e} {reach:16.4f}")
            if reach > best[0]:
                best = (reach, (delta, gamma))
    print(f"\nbest reach omega_B(d) = {best[0]:.4f} at (delta, gamma) = {best[1]}")
    print("an unstable shear state needs oscillation >= ~13: out of reach")


if __name__ == "__main__":
    main()
