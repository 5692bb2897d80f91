"""Convergence of the principal-value quadrature against the spectral multiplier.

Compares the corrected scheme (default) with plain symmetric exclusion for
several ``s`` in one and two dimensions and writes ``quadrature.csv``.
"""

import argparse
from pathlib import Path

import numpy as np

from driftlab.io import write_csv
from driftlab.kernel import KernelSpec
from driftlab.nonlocal_op import quadrature_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="quadrature-out")
    ap.add_argument("--s", type=float, nargs="+", default=[0.1, 0.25, 0.5, 0.75])
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    f1 = lambda x: np.cos(x) + 0.5 * np.sin(3 * x)
    f2 = lambda x, y: np.cos(x) * np.sin(2 * y) + np.cos(x + y)
    for s in args.s:
        for scheme in ("corrected", "symmetric-exclusion"):
            for d, f, Ns in ((1, f1, [64, 128, 256, 512]), (2, f2, [16, 32, 64])):
                errs = quadrature_study(lambda dd: KernelSpec(dd, s), f, Ns, s, d=d, pv_scheme=scheme)
                for i, (N, e) in enumerate(errs):
                    ratio = errs[i - 1][1] / e if i else float("nan")
                    rows.append((s, scheme, d, N, e, ratio))
                    print(f"s={s:<5} {scheme:<20} d={d} N={N:<4} err={e:.3e} ratio={ratio:.2f}")
    write_csv(out / "quadrature.csv", ["s[1]", "scheme[-]", "d[1]", "N[1]", "rel_l2_error[1]", "ratio[1]"], rows)


if __name__ == "__main__":
    main()
