"""Acceptance criteria 1-13, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines go straight to the
terminal (and to any ``tee``), bypassing output capture.
"""

import time
import warnings

import numpy as np
import pytest

from driftlab.algebra import comparability_scan, comparison_batch, lemmaA_sides, draw_samples
from driftlab.cli import preset_path, run_simulation
from driftlab.config import load_config, validate_config
from driftlab.degiorgi import (audit_trajectory, decay_exponent, linfty_level, predicted_alpha,
                               ramp_family_sweep, rho_exponent, truncation_energies, zoom_sequence)
from driftlab.errors import PrecisionWarning
from driftlab.extension import dtn_limit, extend, extend_at, poisson_normalization, weighted_energy, ZGrid
from driftlab.fields import critical_profile, random_smooth
from driftlab.grid import Grid, GridField, gagliardo_seminorm
from driftlab.kernel import ExpSumModulation, KernelSpec, SumCosineModulation
from driftlab.nonlocal_op import apply_fractional_laplacian, build_plan, quadrature_study
from driftlab.solver import heat_trajectory, simulate


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {n}: {detail}"
    return emit


def _rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def test_c01_spectral_correctness(report):
    t0 = time.perf_counter()
    worst = 0.0
    for L in (2 * np.pi, 10.0):
        g = Grid(1, 64, L)
        x = g.axis()
        for s in (0.25, 0.5):
            for m in (1, 2, 4):
                k = 2 * np.pi * m / L
                out = apply_fractional_laplacian(GridField(g, np.cos(k * x)), s).values
                worst = max(worst, _rel(out, k ** (2 * s) * np.cos(k * x)))
    dt = time.perf_counter() - t0
    report(1, worst <= 1e-12 and dt < 1.0, f"max rel error {worst:.2e} (tol 1e-12), {dt:.3f}s")


def test_c02_quadrature_consistency(report):
    t0 = time.perf_counter()
    f = lambda x: np.cos(x) + 0.5 * np.sin(3 * x)
    parts, ok = [], True
    for s in (0.25, 0.5):
        (_, e256), (_, e512) = quadrature_study(lambda d: KernelSpec(d, s), f, [256, 512], s)
        ratio = e256 / e512
        ok &= e256 <= 5e-2 and ratio >= 3
        parts.append(f"s={s}: err(256)={e256:.2e} ratio={ratio:.2f}")
    dt = time.perf_counter() - t0
    report(2, ok and dt < 30, "; ".join(parts) + f"; {dt:.1f}s")


def test_c03_poisson_and_extension(report):
    t0 = time.perf_counter()
    mass = max(abs(poisson_normalization(z, s, d) - 1) for z in (0.1, 1.0, 10.0) for s in (0.25, 0.5) for d in (1, 2))
    g = Grid(1, 64)
    cosx = GridField(g, np.cos(g.axis()))
    ext_err = max(np.max(np.abs(extend_at(cosx, 0.5, z).values - np.exp(-z) * cosx.values))
                  for z in (0.01, 0.1, 0.5, 1.0, 3.0, 10.0))
    zg = ZGrid.geometric(0.01, 5.0, 30)
    ext = extend(cosx, 0.5, zg)
    ext_err = max(ext_err, float(np.max(np.abs(ext.values - np.exp(-zg.z_levels)[:, None] * cosx.values))))
    dtn = 0.0
    for s in (0.25, 0.5):
        for d, N in ((1, 64), (2, 32)):
            f = random_smooth(Grid(d, N), 21, kmax=5)
            dtn = max(dtn, _rel(dtn_limit(extend(f, s)).field.values, apply_fractional_laplacian(f, s).values))
    dt = time.perf_counter() - t0
    ok = mass <= 1e-6 and ext_err <= 1e-6 and dtn <= 0.05 and dt < 60
    report(3, ok, f"|mass-1| {mass:.1e}, extension err {ext_err:.1e}, dtn rel L2 {dtn:.3f}, {dt:.1f}s")


def test_c04_energy_identity(report):
    t0 = time.perf_counter()
    g = Grid(1, 64)
    parts, ok = [], True
    for s in (0.25, 0.5):
        r = np.array([weighted_energy(extend(f, s)) / gagliardo_seminorm(f, s) ** 2
                      for f in (random_smooth(g, 500 + i) for i in range(20))])
        cv = r.std() / r.mean()
        ok &= cv <= 0.01
        parts.append(f"s={s}: mean {r.mean():.4f} std/mean {cv:.2e}")
    dt = time.perf_counter() - t0
    report(4, ok and dt < 120, "; ".join(parts) + f"; {dt:.1f}s")


def _decay_slope(d, N):
    g = Grid(d, N)
    h = g.h
    window = (2 * h, 2 * h * 10**0.5)
    times = np.concatenate([[0.0], np.geomspace(window[0], window[1], 24)])
    traj = heat_trajectory(critical_profile(g), 0.5, times)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PrecisionWarning)
        return decay_exponent(traj, window)


def test_c05_decay_exponent(report):
    t0 = time.perf_counter()
    f2 = _decay_slope(2, 128)
    f1 = _decay_slope(1, 1024)
    decades = np.log10(f2.window[1] / f2.window[0])
    dt = time.perf_counter() - t0
    ok = abs(f2.slope + 1.0) <= 0.1 and abs(f1.slope + 0.5) <= 0.05 and decades >= 0.5 - 1e-9 and dt < 300
    report(5, ok, f"d=2 slope {f2.slope:.4f} (target -1 +/- 0.1), d=1 slope {f1.slope:.4f} "
                  f"(target -0.5 +/- 0.05), window {decades:.2f} decades, {dt:.1f}s")


def test_c06_truncation_ladder(report):
    t0 = time.perf_counter()
    times = np.linspace(0, 1.25, 51)
    non_monotone = unsound = 0
    lams = (1.1, 1.5, 2.0, 3.0, 5.0)
    for seed in range(10):
        d = 1 + seed % 2
        g = Grid(d, 64 if d == 1 else 16)
        s = (0.25, 0.5)[(seed // 2) % 2]
        traj = heat_trajectory(random_smooth(g, seed, amplitude=2.0), s, times)
        for lam in lams:
            non_monotone += not truncation_energies(traj, lam, K=8).is_monotone()
        lev = linfty_level(traj)
        unsound += lev.level < lev.ledger_sup
    dt = time.perf_counter() - t0
    report(6, non_monotone == 0 and unsound == 0 and dt < 300,
           f"non-monotone ladders {non_monotone}/{10 * len(lams)}, soundness violations {unsound}/10, {dt:.1f}s")


AUDIT_RUNS = [(1, 128, 0.5, 1.5, 0.3), (1, 128, 0.5, 1.8, 0.5), (1, 128, 0.25, 1.8, 0.5),
              (2, 32, 0.5, 1.8, 0.5), (2, 32, 0.5, 2.5, 0.6)]


def test_c07_energy_inequality_audit(report):
    parts, ok = [], True
    for d, N, s, offset, width in AUDIT_RUNS:
        g = Grid(d, N)
        plan = build_plan(KernelSpec(d, s), g)
        Cmax = []
        for dt in (0.02, 0.01):
            cfg = validate_config({"schema": 1, "grid": {"d": d, "N": N}, "kernel": {"s": s},
                                   "time": {"dt": dt, "t_end": 0.3},
                                   "initial": {"kind": "bump", "amplitude": 1.0, "width": width,
                                               "center": [np.pi + offset] + [np.pi] * (d - 1)}})
            rows = audit_trajectory(simulate(cfg), plan, check_pairing=False)
            Cmax.append(max(r.constant for r in rows))
        ok &= all(np.isfinite(Cmax)) and Cmax[0] > 0 and abs(Cmax[1] / Cmax[0] - 1) <= 0.2
        parts.append(f"{Cmax[0]:.3f}->{Cmax[1]:.3f}")
    report(7, ok, "max C under dt 0.02->0.01: " + ", ".join(parts))


def test_c08_isoperimetric(report):
    t0 = time.perf_counter()
    parts, ok = [], True
    for d, s, p in ((2, 0.5, 2.0), (1, 0.25, 4.0)):
        g = Grid(d, 64, 4.0)
        c = [2.0 + g.h / 2] * d
        fit = ramp_family_sweep(g, s, p, 1.0, center=c)
        rng = np.random.default_rng(0)
        held = ramp_family_sweep(g, s, p, 1.0, widths=rng.uniform(0.1, 1.0, 6), shifts=rng.uniform(-0.6, 0.4, 4),
                                 tilts=(0.25, 1.0), center=c)
        over = sum(r.ratio > fit.c_fit for r in held.results)
        rho_ok = fit.rho == rho_exponent(d, s, p)
        ok &= fit.violations == 0 and over == 0 and np.isfinite(fit.c_fit) and rho_ok
        parts.append(f"(d,s,p)=({d},{s},{p:g}): rho {fit.rho:.4g}, C_fit {fit.c_fit:.4f}, "
                     f"held-out max {held.c_fit:.4f}, violations {fit.violations}+{over}")
    dt = time.perf_counter() - t0
    report(8, ok and rho_exponent(2, 0.5, 2) == 1.75 and dt < 120, "; ".join(parts) + f"; {dt:.1f}s")


def test_c09_comparison_scans(report):
    t0 = time.perf_counter()
    parts, ok = [], True
    for v in ("Z4", "Z5"):
        reps = [comparability_scan(v, 10**6, seed=seed) for seed in range(3)]
        lo = np.array([r.c_lower for r in reps])
        hi = np.array([r.c_upper for r in reps])
        stable = np.ptp(lo) <= 0.1 * lo.mean() and np.ptp(hi) <= 0.1 * hi.mean()
        viol = sum(r.violations + r.proof_violations for r in reps)
        ok &= stable and viol == 0 and np.all(np.isfinite(hi)) and np.all(lo > 0)
        parts.append(f"{v}: c in [{lo.min():.4f}, {hi.max():.4f}] violations {viol}")
    hard = comparability_scan("Z5", 10**5, "mixed_sign", seed=0)
    ok &= hard.violations == 0 and hard.proof_violations == 0
    a1, a2, b, b2 = draw_samples(10**5, "equal_b", seed=11)
    lhs, core, _ = lemmaA_sides(a1, a2, b, b2, "Z4")
    ident = float(np.max(np.abs(lhs - core) / np.maximum(b**2 * (np.abs(a1) + np.abs(a2)) ** 2, 1e-300)))
    ok &= ident <= 8 * np.finfo(float).eps
    dt = time.perf_counter() - t0
    report(9, ok and dt < 60, "; ".join(parts) + f"; b1=b2 defect {ident:.1e} (units of scale); {dt:.1f}s")


def test_c10_pairing_comparability(report):
    g = Grid(1, 32)
    lam = 2.0
    parts, ok = [], True
    for s in (0.25, 0.5):
        frac = build_plan(KernelSpec(1, s), g)
        for name, mod in (("sum_cosine", SumCosineModulation(0.6, (1, 2))), ("exp_sum", ExpSumModulation(2.0))):
            general = build_plan(KernelSpec(1, s, lam, "modulated", mod), g)
            band = comparison_batch(general, frac, n=100, seed=0)
            ok &= band.within(1 / (2 * lam), 2 * lam) and band.max_identity_defect <= 1e-8
            parts.append(f"s={s} {name}: [{band.lower:.3f}, {band.upper:.3f}] id {band.max_identity_defect:.0e}")
    report(10, ok, "; ".join(parts))


def test_c11_sqg_integrity(report):
    t0 = time.perf_counter()
    cfg = validate_config({"schema": 1, "seed": 3, "grid": {"d": 2, "N": 128}, "kernel": {"s": 0.5},
                           "drift": {"mode": "sqg"}, "initial": {"kind": "random", "amplitude": 1.0, "kmax": 6},
                           "time": {"dt": 0.01, "t_end": 1.0}})
    traj = simulate(cfg)
    div = max(i.divergence for i in traj.info)
    mean0 = float(traj.fields[0].mean())
    mean = max(abs(i.mean_drift - mean0) for i in traj.info)
    mean = max(mean, float(np.max(np.abs(traj.fields.mean(axis=tuple(range(1, traj.fields.ndim))) - mean0))))
    defect = max(i.energy_defect for i in traj.info)
    dt = time.perf_counter() - t0
    ok = div <= 1e-10 and mean <= 1e-12 and defect <= 0.02 and dt < 600
    report(11, ok, f"{len(traj.info)} steps: max div {div:.1e}, mean drift {mean:.1e}, "
                   f"max energy defect {defect:.2e}, {dt:.1f}s")


def test_c12_zoom(report):
    g = Grid(1, 64)
    times = np.linspace(0.0, 2.0, 81)
    traj = heat_trajectory(random_smooth(g, 4), 0.5, times)
    res = zoom_sequence(traj, 0.5, 0.05, K_max=6)
    levels = len(res.osc) - 1
    ratios = np.asarray(res.ratios[:4])
    q = float(ratios.max()) if len(ratios) else np.inf
    geometric = levels >= 4 and q < 1 and all(res.osc[k] <= res.osc[0] * q**k * (1 + 1e-12) for k in range(5))
    traj.drifts = np.zeros((len(times), 1) + g.shape)
    zero = zoom_sequence(traj, 0.5, 0.05, K_max=4)
    still = all(np.all(st.path_x == 0) for st in zero.states)
    report(12, geometric and still, f"{levels} levels, ratios {np.round(res.ratios, 3).tolist()}, "
                                    f"alpha_fit {res.alpha_fit:.3f} (predicted floor {predicted_alpha(0.05, 0.5):.4f}), "
                                    f"x_k == 0 with B = 0: {still}")


def test_c13_determinism(report, tmp_path):
    cfg = load_config(preset_path("sqg"))
    a = run_simulation(cfg, tmp_path / "a")
    b = run_simulation(cfg, tmp_path / "b")
    ma = (tmp_path / "a" / "manifest.json").read_bytes()
    mb = (tmp_path / "b" / "manifest.json").read_bytes()
    report(13, ma == mb and a["steps"] == b["steps"], f"manifests identical: {ma == mb} ({len(ma)} bytes)")
