#!/usr/bin/env python3
"""Map the spectral stability boundary of the shear family theta0 = -a cos(m x2).

For each wavenumber m and amplitude a, computes the rightmost eigenvalue of
the linearized operator and writes a CSV; the zero crossing in a is the
measured instability threshold (roughly a ~ 6.6, nearly independent of m:
the velocity amplitude a plays the role of a Reynolds-like parameter, since
advective production and the critical dissipation carry the same scaling in m).

Usage: python scripts/stability_map.py [out.csv]
"""

import sys

from sqglab.dynamics import shear_steady_state
from sqglab.linop import LinearOperator, rightmost_eigenpair
from sqglab.spectral import GridSpec


def main(path="stability_map.csv"):
    rows = []
    for m in (2, 3, 4):
        n = 48 if m <= 3 else 64
        grid = GridSpec(n)
        for a in (2.0, 4.0, 6.0, 6.5, 7.0, 8.0, 10.0, 12.0):
            ss = shear_steady_state(grid, m, a)
            res = rightmost_eigenpair(LinearOperator(ss), K=grid.dealias_radius)
            lam = res.rightmost.real
            rows.append((m, a, lam, res.rightmost.imag, res.residual))
            print(f"m={m} a={a:5.1f}  lambda = {lam:+.8f}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("m,amplitude,re_mu,im_mu,residual\n")
        for r in rows:
            fh.write(",".join(f"{x:.17g}" for x in r) + "\n")
    print(f"wrote {path} ({len(rows)} rows)")


if __name__ == "__main__":
    main(*sys.argv[1:])
