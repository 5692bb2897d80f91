"""Sup-norm decay slopes of the drift-free fractional heat flow.

Fits ``log ||u(t)||_inf`` against ``log t`` for the critical profile and for a
Gaussian bump over windows starting a few cells above the grid scale, and
reports the saturation time at which the lowest modes take over.
"""

import argparse
import warnings
from pathlib import Path

import numpy as np

from driftlab.degiorgi import decay_exponent, predicted_decay_exponent
from driftlab.errors import PrecisionWarning
from driftlab.fields import critical_profile, gaussian_bump
from driftlab.grid import Grid
from driftlab.io import write_csv
from driftlab.solver import heat_trajectory


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="decay-out")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for d, N, s in ((1, 1024, 0.5), (1, 4096, 0.5), (1, 1024, 0.25), (2, 128, 0.5)):
        g = Grid(d, N)
        h = g.h
        for name, u0 in (("critical", critical_profile(g)), ("gaussian", gaussian_bump(g, 1.0, 4 * h))):
            for start, decades in ((2, 0.5), (3, 0.5), (3, 1.0)):
                # windows are in units of the diffusive time of one cell, h**(2s)
                t0 = start * h ** (2 * s)
                t1 = t0 * 10**decades
                times = np.concatenate([[0.0], np.geomspace(t0, t1, 24)])
                traj = heat_trajectory(u0, s, times)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", PrecisionWarning)
                    fit = decay_exponent(traj, (t0, t1))
                target = predicted_decay_exponent(d, s)
                rows.append((d, N, s, name, t0, t1, fit.slope, target, fit.t_sat))
                print(f"d={d} N={N:<5} s={s:<5} {name:<9} window [{t0:.2e}, {t1:.2e}] "
                      f"slope {fit.slope:+.4f} (target {target:+.3f}) t_sat {fit.t_sat:.3g}")
    write_csv(out / "decay.csv", ["d[1]", "N[1]", "s[1]", "profile[-]", "t0[time]", "t1[time]", "slope[1]",
                                  "target[1]", "t_sat[time]"], rows)


if __name__ == "__main__":
    main()
