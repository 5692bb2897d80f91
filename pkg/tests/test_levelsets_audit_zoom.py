import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab.degiorgi import (audit_trajectory, energy_inequality_audit, isoperimetric_check,
                               level_set_measures, predicted_alpha, ramp_family_sweep, rho_exponent,
                               space_cutoff, zoom_sequence)
from driftlab.degiorgi.audit import pair_weight_sum, pair_weight_sum_symmetrized
from driftlab.degiorgi.levelsets import box_weighted_volume, field_extension, ramp
from driftlab.degiorgi.zoom import SpaceTimeInterpolant
from driftlab.errors import CadenceError, DomainError, HypothesisViolation, PreconditionError
from driftlab.extension import Region, ZGrid
from driftlab.fields import gaussian_bump, random_smooth
from driftlab.grid import Grid, GridField, interpolate
from driftlab.kernel import ExpSumModulation, KernelSpec, SumCosineModulation
from driftlab.nonlocal_op import build_plan
from driftlab.solver import heat_trajectory, simulate, trajectory_from_fields
from helpers import make_config

G2 = Grid(2, 32, 4.0)
ZG = ZGrid.geometric(G2.h / 8, 1.0, 24)
C2 = (2.0 + G2.h / 2, 2.0 + G2.h / 2)


def _ext(values, grid=G2, zg=ZG, s=0.5):
    return field_extension(grid, np.broadcast_to(values, (zg.M,) + grid.shape).copy(), s, zg)


def test_level_sets_constant_cases():
    reg = Region(1.0, 1.0, center=C2)
    vol = box_weighted_volume(_ext(0.0), reg)
    assert vol == pytest.approx(4.0, rel=1e-12)
    assert level_set_measures(_ext(2.0), reg) == (0.0, pytest.approx(vol), 0.0)
    assert level_set_measures(_ext(-1.0), reg) == (pytest.approx(vol), 0.0, 0.0)


def test_level_sets_linear_field():
    g = Grid(2, 64, 4.0)
    zg = ZGrid.geometric(g.h / 8, 1.0, 24)
    c = (2.0 + g.h / 2,) * 2
    x1 = np.broadcast_to(g.mesh()[0] - c[0], (zg.M,) + g.shape)
    ext = field_extension(g, x1.copy(), 0.5, zg)
    reg = Region(1.0, 1.0, center=c)
    half = box_weighted_volume(ext, reg) / 2
    a, b, cc = level_set_measures(ext, reg)
    assert a == pytest.approx(half, rel=1e-3) and cc == pytest.approx(half, rel=1e-3) and b <= 1e-3 * half
    a, b, cc = level_set_measures(ext, Region(1.0, 1.0, center=c), low=-1.0, high=1.0)
    assert cc == pytest.approx(2 * half, rel=1e-12)


@given(st.integers(0, 10**6), st.floats(-1, 1), st.floats(0.1, 2))
def test_level_sets_partition(seed, low, gap):
    vals = np.random.default_rng(seed).normal(size=(ZG.M,) + G2.shape)
    ext = field_extension(G2, vals, 0.3, ZG)
    reg = Region(0.9, 0.7, center=C2)
    total = sum(level_set_measures(ext, reg, low, low + gap))
    vol = box_weighted_volume(ext, reg)
    assert abs(total - vol) <= 1e-9 * vol


def test_rho_values_and_hypothesis():
    assert rho_exponent(2, 0.5, 2) == pytest.approx(1.75)
    assert rho_exponent(1, 0.25, 4) == pytest.approx(1.4375)
    with pytest.raises(HypothesisViolation):
        isoperimetric_check(_ext(0.0, s=0.25), p=2.0, r=1.0, center=C2)
    res = isoperimetric_check(_ext(2.0), p=2.0, r=1.0, center=C2)
    assert res.lhs == 0.0 and res.ratio == 0.0


def test_isoperimetric_on_ramp_has_finite_ratio():
    ext = ramp(G2, ZG, 0.5, 0.5, center=C2)
    res = isoperimetric_check(ext, 2.0, 1.0, center=C2)
    assert res.A > 0 and res.B > 0 and res.C > 0 and np.isfinite(res.ratio)
    # (1/w)**2 over the unclipped strip, smeared by the central differences at the kinks
    assert 0.5 * 4.0 < res.K < 1.5 * 4.0


def test_family_sweep_single_constant():
    sw = ramp_family_sweep(G2, 0.5, 2.0, center=C2, widths=(0.2, 0.6), shifts=(0.0,), tilts=(0.0,), zgrid=ZG)
    assert sw.violations == 0 and np.isfinite(sw.c_fit) and sw.rho == 1.75


# -- audit ----------------------------------------------------------------------------

def _bump_run(d=1, N=64, offset=1.8, dt=0.02, t_end=0.2):
    g = Grid(d, N, 8.0)
    center = [4.0 + offset] + [4.0] * (d - 1)
    u0 = gaussian_bump(g, 1.0, 0.5, center)
    traj = heat_trajectory(u0, 0.5, np.arange(0, t_end + dt / 2, dt))
    return g, traj


def test_pair_sum_routes_agree():
    g = Grid(1, 32, 8.0)
    u = np.maximum(random_smooth(g, 2).values, 0)
    phi, _ = space_cutoff(g)
    for spec in (KernelSpec(1, 0.5), KernelSpec(1, 0.4, 2.0, "modulated", SumCosineModulation(0.5, (1,))),
                 KernelSpec(1, 0.4, 2.0, "modulated", ExpSumModulation(2.0))):
        plan = build_plan(spec, g)
        a, b = pair_weight_sum(plan, u, phi), pair_weight_sum_symmetrized(plan, u, phi)
        assert abs(a - b) <= 1e-8 * abs(a)


def test_audit_zero_when_negative():
    g = Grid(1, 32, 8.0)
    fields = -np.ones((3, 32)) - random_smooth(g, 1).values ** 2
    traj = trajectory_from_fields(g, 0.5, [0.0, 0.1, 0.2], fields)
    row = energy_inequality_audit(traj, 1, build_plan(KernelSpec(1, 0.5), g))
    for name in ("dt_energy", "ext_energy", "pair", "ext_cutoff", "drift_term", "forcing_term", "lhs", "rhs"):
        assert getattr(row, name) == 0.0
    assert row.constant == 0.0


def test_audit_cadence_error():
    g, traj = _bump_run()
    with pytest.raises(CadenceError):
        energy_inequality_audit(traj, 0, build_plan(KernelSpec(1, 0.5), g))


def test_audit_bump_finite_constant():
    g, traj = _bump_run()
    rows = audit_trajectory(traj, build_plan(KernelSpec(1, 0.5), g), center=[4.0], check_pairing=True)
    assert all(np.isfinite(r.constant) and r.constant >= 0 for r in rows)
    assert all(abs(r.pair - r.pair_check) <= 1e-8 * abs(r.pair) for r in rows)
    assert max(r.constant for r in rows) > 0


def test_audit_with_drift_records_transport():
    cfg = make_config(d=2, N=32, s=0.5, dt=0.01, t_end=0.03, L=8.0, drift={"mode": "sqg"},
                      initial={"kind": "bump", "width": 0.6, "center": [5.5, 4.0]})
    traj = simulate(cfg)
    row = energy_inequality_audit(traj, 1, build_plan(KernelSpec(2, 0.5), traj.grid), center=[4.0, 4.0],
                                  check_pairing=False)
    assert row.M0 > 0 and row.drift_term > 0 and np.isfinite(row.constant)


# -- zoom -----------------------------------------------------------------------------

def test_space_time_interpolant_exact_on_grid_and_modes():
    g = Grid(2, 16)
    u0 = random_smooth(g, 4, kmax=3)
    times = np.linspace(0, 1, 11)
    traj = heat_trajectory(u0, 0.5, times)
    I = SpaceTimeInterpolant(g, times, traj.fields)
    pts = np.array([[0.3, 1.1], [4.0, 2.2]])
    assert np.allclose(I(pts, 0.5), interpolate(traj.snapshot(5), pts), atol=1e-13)
    exact = interpolate(heat_trajectory(u0, 0.5, [0.55]).snapshot(0), pts)
    assert np.allclose(I(pts, 0.55), exact, atol=1e-4)


def test_zoom_validation():
    g = Grid(1, 32)
    traj = heat_trajectory(random_smooth(g, 1), 0.5, np.linspace(0, 1, 21))
    with pytest.raises(DomainError):
        zoom_sequence(traj, 1.5, 0.05)
    with pytest.raises(DomainError):
        zoom_sequence(traj, 0.5, 0.2)
    with pytest.raises(PreconditionError):
        zoom_sequence(traj, 0.5, 0.05, t_ref=0.2)
    assert predicted_alpha(0.05, 0.5) == pytest.approx(0.009054, rel=1e-3)


def test_zoom_identity_sigma_one():
    g = Grid(1, 64)
    traj = heat_trajectory(random_smooth(g, 2), 0.5, np.linspace(0, 2, 41))
    res = zoom_sequence(traj, 1.0, 0.05, K_max=3)
    base = (res.states[0].F - res.states[0].offset) / res.states[0].amplification
    for st_ in res.states[1:]:
        assert np.allclose((st_.F - st_.offset) / st_.amplification, base, atol=1e-14)
        assert np.all(st_.path_x == 0)


def test_zoom_constant_has_zero_oscillation():
    g = Grid(1, 32)
    traj = trajectory_from_fields(g, 0.5, np.linspace(0, 1.5, 31), np.full((31, 32), 0.7))
    res = zoom_sequence(traj, 0.5, 0.05, K_max=3)
    assert np.all(res.osc <= 1e-12)


def test_zoom_zero_drift_paths_vanish():
    g = Grid(2, 16)
    times = np.linspace(0, 1.5, 16)
    traj = heat_trajectory(random_smooth(g, 1), 0.5, times)
    traj.drifts = np.zeros((len(times), 2) + g.shape)
    res = zoom_sequence(traj, 0.5, 0.05, K_max=3, n_y=5, n_t=5, quad_n=8)
    assert all(np.all(st_.path_x == 0) for st_ in res.states)


def test_zoom_constant_drift_centers_move():
    g = Grid(1, 64, 16.0)
    times = np.linspace(0, 2.0, 41)
    traj = heat_trajectory(random_smooth(g, 1), 0.5, times)
    traj.drifts = np.full((len(times), 1) + g.shape, 0.3)
    res = zoom_sequence(traj, 0.5, 0.05, K_max=3, n_y=5, n_t=5)
    assert res.states[0].sup_x == pytest.approx(0.3, rel=1e-6)
    assert res.states[-1].b is not None
