import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import kv, gamma

from driftlab.errors import DomainError, PrecisionWarning
from driftlab.fields import random_smooth
from driftlab.grid import Grid, GridField, field_from_function, gagliardo_seminorm
from driftlab.extension import (Region, ZGrid, calibrate_dtn_constant, dtn_constant_exact, dtn_limit, extend,
                                extend_at, interpolant_bounds, mode_profile, periodic_poisson_convolution,
                                poisson_kernel_value, poisson_normalization, weighted_energy, weighted_measure)
from driftlab.nonlocal_op import apply_fractional_laplacian

seeds = st.integers(0, 2**31 - 1)


def _rel(a, b):
    return float(np.sqrt(np.sum((a - b) ** 2) / np.sum(b * b)))


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("s", [0.25, 0.5])
@pytest.mark.parametrize("z", [0.1, 1.0, 10.0])
def test_poisson_unit_mass(d, s, z):
    assert poisson_normalization(z, s, d) == pytest.approx(1.0, abs=1e-6)


def test_poisson_values():
    assert poisson_kernel_value(0.0, 1.0, 0.5, 1) == pytest.approx(1 / np.pi, rel=1e-15)
    assert poisson_kernel_value(2.0, 2.0, 0.3, 1) == pytest.approx(0.5 * poisson_kernel_value(1.0, 1.0, 0.3, 1),
                                                                    rel=1e-14)
    with pytest.raises(DomainError):
        poisson_kernel_value(0.0, 0.0, 0.5)


@given(st.floats(-5, 5), st.floats(0.01, 10), st.sampled_from([0.2, 0.35, 0.5]))
def test_poisson_self_similarity(x, z, s):
    a = poisson_kernel_value(x, z, s, 1)
    b = z ** (-1) * poisson_kernel_value(x / z, 1.0, s, 1)
    assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("s", [0.1, 0.25, 0.4, 0.5])
def test_mode_profile_against_bessel(s):
    # the decaying solution is r**s K_s(r) 2**(1-s) / Gamma(s)
    r = np.geomspace(1e-3, 20, 50)
    ref = 2 ** (1 - s) / gamma(s) * r**s * kv(s, r)
    assert np.allclose(mode_profile(s)(r), ref, rtol=1e-7, atol=1e-12)
    assert mode_profile(s).d_s == pytest.approx(dtn_constant_exact(s), rel=1e-8)


def test_extension_of_constant_and_cosine():
    g = Grid(1, 64)
    zg = ZGrid.geometric(0.01, 5.0, 30)
    c = extend(GridField(g, np.full(64, 1.7)), 0.3, zg)
    assert np.allclose(c.values, 1.7, atol=1e-14)
    f = field_from_function(g, np.cos)
    e = extend(f, 0.5, zg)
    ref = np.exp(-zg.z_levels)[:, None] * np.cos(g.axis())[None]
    assert np.max(np.abs(e.values - ref)) < 1e-6


@pytest.mark.parametrize("s", [0.25, 0.5])
def test_extension_vs_direct_convolution(s):
    g = Grid(1, 64)
    f = random_smooth(g, 3, kmax=6)
    for z in (0.5, 2.0):
        a = extend_at(f, s, z).values
        b = periodic_poisson_convolution(f, z, s).values
        assert np.max(np.abs(a - b)) <= 1e-4 * np.max(np.abs(a))


def test_extension_vs_convolution_2d():
    g = Grid(2, 32)
    f = random_smooth(g, 1, kmax=4)
    a = extend_at(f, 0.25, 0.5).values
    b = periodic_poisson_convolution(f, 0.5, 0.25, n_images=60).values
    assert np.max(np.abs(a - b)) <= 1e-4 * np.max(np.abs(a))


def test_semigroup_half():
    g = Grid(2, 32)
    f = random_smooth(g, 5)
    z1, z2 = 0.3, 0.7
    two = extend_at(extend_at(f, 0.5, z1), 0.5, z2).values
    one = extend_at(f, 0.5, z1 + z2).values
    assert np.max(np.abs(two - one)) <= 1e-8


def test_maximum_principle_on_random_fields():
    g = Grid(1, 32)
    zg = ZGrid.geometric(g.h / 4, g.L, 24)
    for i in range(100):
        f = random_smooth(g, i, kmax=8)
        lo, hi = interpolant_bounds(f)
        assert lo <= f.values.min() + 1e-12 and hi >= f.values.max() - 1e-12
        e = extend(f, 0.25 if i % 2 else 0.5, zg)
        assert e.values.max() <= hi + 1e-9 and e.values.min() >= lo - 1e-9


def test_slice_approaches_boundary():
    g = Grid(1, 64)
    f = random_smooth(g, 2)
    errs = [np.max(np.abs(extend_at(f, 0.3, z).values - f.values)) for z in (1e-2, 1e-4, 1e-6)]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-3


@pytest.mark.parametrize("s", [0.25, 0.5])
def test_energy_ratio_constant(s):
    g = Grid(1, 64)
    ratios = []
    for i in range(20):
        f = random_smooth(g, 100 + i)
        ratios.append(weighted_energy(extend(f, s)) / gagliardo_seminorm(f, s) ** 2)
    ratios = np.array(ratios)
    assert ratios.std() / ratios.mean() <= 0.01
    assert ratios.mean() == pytest.approx(dtn_constant_exact(s), rel=0.02)


def test_energy_tail_decay():
    g = Grid(1, 64)
    f = field_from_function(g, lambda x: np.cos(x) + np.sin(3 * x))
    e1 = weighted_energy(extend(f, 0.25, ZGrid.geometric(g.h / 4, 3.0, 64)))
    e2 = weighted_energy(extend(f, 0.25, ZGrid.geometric(g.h / 4, 6.0, 64)))
    e3 = weighted_energy(extend(f, 0.25, ZGrid.geometric(g.h / 4, 12.0, 64)))
    assert abs(e3 - e2) <= 0.01 * e3 and abs(e3 - e1) >= abs(e3 - e2)
    assert weighted_energy(extend(GridField(g, np.ones(64)), 0.25)) == 0.0


def test_weighted_measure_examples():
    g = Grid(1, 64, 4.0)
    zg = ZGrid.geometric(g.h / 4, 4.0, 64)
    ext = extend(GridField(g, np.zeros(64)), 0.5, zg)
    reg = Region(1.0, 1.0, center=(2.0,))
    assert weighted_measure(ext, lambda v: np.ones_like(v, bool), reg) == pytest.approx(2.0, rel=1e-12)
    assert weighted_measure(ext, lambda v: np.zeros_like(v, bool), reg) == 0.0
    ext4 = extend(GridField(g, np.zeros(64)), 0.25, zg)
    assert weighted_measure(ext4, lambda v: v == 0, reg) == pytest.approx(4 / 3, abs=1e-3)
    g2 = Grid(2, 32, 4.0)
    ext2 = extend(GridField(g2, np.zeros(g2.shape)), 0.5, zg)
    assert weighted_measure(ext2, lambda v: v == 0, Region(1.0, 1.0, center=(2.0, 2.0))) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        Region(1.0, 0.0)


def test_dtn_examples():
    g = Grid(1, 64)
    r = dtn_limit(extend(GridField(g, np.full(64, 2.0)), 0.3))
    assert np.max(np.abs(r.field.values)) < 1e-10
    f = field_from_function(g, np.cos)
    assert _rel(dtn_limit(extend(f, 0.5)).field.values, f.values) < 1e-6
    f2 = field_from_function(g, lambda x: np.cos(2 * x))
    assert _rel(dtn_limit(extend(f2, 0.25)).field.values, np.sqrt(2) * f2.values) < 0.05


@pytest.mark.parametrize("s", [0.25, 0.5])
@pytest.mark.parametrize("d", [1, 2])
def test_dtn_matches_spectral(s, d):
    g = Grid(d, 64 if d == 1 else 32)
    f = random_smooth(g, 9, kmax=5)
    r = dtn_limit(extend(f, s))
    assert r.in_regime
    assert _rel(r.field.values, apply_fractional_laplacian(f, s).values) <= 0.05


@pytest.mark.parametrize("s", [0.25, 0.5])
def test_calibrated_constant_close_to_closed_form(s):
    assert calibrate_dtn_constant(s) == pytest.approx(dtn_constant_exact(s), rel=0.02)


def test_dtn_warns_outside_regime():
    g = Grid(1, 64)
    f = random_smooth(g, 1, kmax=30)
    with pytest.warns(PrecisionWarning):
        dtn_limit(extend(f, 0.25, ZGrid.geometric(0.5, 20.0, 16)))


def test_zgrid_validation():
    z = ZGrid.geometric(0.01, 1.0, 10)
    assert z.ratio == pytest.approx(10 ** (2 / 9))
    with pytest.raises(DomainError):
        ZGrid(np.array([0.1, 0.2, 0.5]))
    with pytest.raises(DomainError):
        ZGrid(np.array([0.0, 1.0]))
