"""Parameter sweeps through the sweep runner.

``dt``: energy-law defect of an SQG run as the step halves.
``forcing``: L-infinity level against forcing amplitude, with the log-log
slope compared to the sum of the a priori bound's exponents.
"""

import argparse
from pathlib import Path

import numpy as np

from driftlab.cli import run_sweep
from driftlab.config import validate_config
from driftlab.degiorgi import bound_exponents


def dt_sweep(out: Path):
    base = validate_config({"schema": 1, "grid": {"d": 2, "N": 32}, "kernel": {"s": 0.5}, "drift": {"mode": "sqg"},
                            "initial": {"kind": "random", "amplitude": 2.0}, "time": {"dt": 0.02, "t_end": 0.4}})
    for picard in (2, 4):
        base["time"]["picard"] = picard
        recs = run_sweep({"base": base, "axes": {"time.dt": [0.04, 0.02, 0.01]}, "mode": "grid",
                          "metrics": ["max_energy_defect"]}, out / f"dt-picard{picard}")
        for r in recs:
            print(f"picard={picard} dt={r['params']['time.dt']:<5} defect={r['max_energy_defect']:.3e}")


def forcing_sweep(out: Path, q: float):
    base = validate_config({"schema": 1, "grid": {"d": 2, "N": 32}, "kernel": {"s": 0.5}, "drift": {"mode": "sqg"},
                            "forcing": {"kind": "bump", "amplitude": 1.0, "width": 0.6, "q": q},
                            "time": {"dt": 0.02, "t_end": 1.2}})
    amps = [0.25, 0.5, 1.0, 2.0, 4.0]
    recs = run_sweep({"base": base, "axes": {"forcing.amplitude": amps}, "mode": "grid",
                      "metrics": ["linfty_level"]}, out / "forcing")
    levels = np.array([r["linfty_level"] for r in recs])
    slope = np.polyfit(np.log(amps), np.log(levels), 1)[0]
    a, b = bound_exponents(q, 2, 0.5)
    for A, lv in zip(amps, levels):
        print(f"amplitude={A:<5} level={lv:.6f}")
    print(f"log-log slope {slope:.4f}; exponents {a:.4f} + {b:.4f} = {a + b:.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("which", choices=["dt", "forcing", "all"], nargs="?", default="all")
    ap.add_argument("--out", default="sweeps-out")
    ap.add_argument("--q", type=float, default=8.0)
    args = ap.parse_args()
    out = Path(args.out)
    if args.which in ("dt", "all"):
        dt_sweep(out)
    if args.which in ("forcing", "all"):
        forcing_sweep(out, args.q)


if __name__ == "__main__":
    main()
