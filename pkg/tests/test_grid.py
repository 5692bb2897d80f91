import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab.errors import DimensionError, DomainError, GridMismatchError
from driftlab.grid import (Grid, GridField, box_weights, divergence, field_from_function, gagliardo_seminorm,
                           gradient, interpolate, lp_norm, perp_gradient, spectral_energy, to_physical,
                           to_spectral, truncate)
from conftest import random_field

seeds = st.integers(0, 2**31 - 1)


def test_grid_validation():
    g = Grid(1, 16, 3.0)
    assert g.h == 3.0 / 16
    for bad in (4, 12, 0):
        with pytest.raises(DomainError):
            Grid(1, bad)
    with pytest.raises(DimensionError):
        Grid(3, 16)
    with pytest.raises(DomainError):
        Grid(1, 16, -1.0)


def test_gridfield_rejects_bad_values():
    g = Grid(1, 8)
    with pytest.raises(DomainError):
        GridField(g, np.zeros(7))
    with pytest.raises(DomainError):
        GridField(g, np.full(8, np.nan))


def test_constant_has_only_zero_mode():
    g = Grid(2, 16)
    F = to_spectral(GridField(g, np.full(g.shape, 2.5)))
    assert F.modes[0, 0] == pytest.approx(2.5, abs=1e-14)
    F.modes[0, 0] = 0
    assert np.max(np.abs(F.modes)) < 1e-14


def test_cosine_modes():
    g = Grid(1, 32, 5.0)
    f = field_from_function(g, lambda x: np.cos(2 * np.pi * x / 5.0))
    m = to_spectral(f).modes
    assert m[1] == pytest.approx(0.5, abs=1e-13) and m[-1] == pytest.approx(0.5, abs=1e-13)
    rest = np.delete(m, [1, 31])
    assert np.max(np.abs(rest)) <= 1e-13


@given(seeds, st.sampled_from([1, 2]))
def test_roundtrip_parseval_hermitian(seed, d):
    g = Grid(d, 64 if d == 1 else 16)
    f = random_field(g, seed)
    F = to_spectral(f)
    back = to_physical(F)
    assert np.max(np.abs(back.values - f.values)) <= 1e-12 * max(1.0, np.max(np.abs(f.values)))
    assert F.hermitian_defect() < 1e-13
    n2 = lp_norm(f, 2) ** 2
    assert abs(n2 - spectral_energy(f)) <= 1e-10 * n2


def test_lp_norm_examples():
    g = Grid(1, 64)
    assert lp_norm(GridField(g, np.full(64, 3.0)), 2) == pytest.approx(3 * np.sqrt(2 * np.pi), rel=1e-14)
    f = field_from_function(g, np.sin)
    assert lp_norm(f, 2) == pytest.approx(np.sqrt(np.pi), abs=1e-12)
    assert lp_norm(f, np.inf) == np.max(np.abs(f.values))
    with pytest.raises(DomainError):
        lp_norm(f, 0.5)


def test_gagliardo_examples():
    g = Grid(1, 64)
    assert gagliardo_seminorm(GridField(g, np.ones(64)), 0.3) == 0.0
    f = field_from_function(g, np.cos)
    assert gagliardo_seminorm(f, 0.37) == pytest.approx(lp_norm(f), rel=1e-13)
    f2 = field_from_function(g, lambda x: np.cos(2 * x))
    assert gagliardo_seminorm(f2, 0.5) ** 2 == pytest.approx(2 * lp_norm(f2) ** 2, rel=1e-12)
    for s in (0.0, 1.0):
        with pytest.raises(DomainError):
            gagliardo_seminorm(f, s)


def test_gradient_and_perp():
    g = Grid(2, 32)
    c = GridField(g, np.full(g.shape, 4.0))
    assert all(np.max(np.abs(v.values)) < 1e-13 for v in gradient(c))
    f = field_from_function(g, lambda x, y: np.sin(x))
    p1, p2 = perp_gradient(f)
    x = g.mesh()[0]
    assert np.max(np.abs(p1.values)) < 1e-13
    assert np.max(np.abs(p2.values - np.cos(x))) < 1e-12
    with pytest.raises(DimensionError):
        perp_gradient(GridField(Grid(1, 16), np.zeros(16)))


@given(seeds)
def test_perp_gradient_divergence_free(seed):
    g = Grid(2, 32)
    f = random_field(g, seed)
    div = divergence(perp_gradient(f))
    assert lp_norm(div) <= 1e-10 * lp_norm(f)


def test_truncate_examples():
    g = Grid(1, 256)
    assert np.all(truncate(GridField(g, np.ones(256)), 2.0).values == 0)
    assert np.all(truncate(GridField(g, np.full(256, 3.0)), 1.0).values == 2.0)
    f = field_from_function(g, np.sin)
    assert lp_norm(truncate(f, 0.0), 1) == pytest.approx(2.0, rel=1e-4)
    m = truncate(f, 0.5, "minus").values
    assert np.all(m >= 0) and np.allclose(m, np.maximum(-f.values - 0.5, 0))
    with pytest.raises(DomainError):
        truncate(f, 0.0, "both")


@given(seeds, st.floats(-2, 2), st.sampled_from(["plus", "minus"]))
def test_truncate_is_one_lipschitz(seed, level, sign):
    g = Grid(1, 32)
    f, h = random_field(g, seed, "a"), random_field(g, seed, "b")
    lhs = np.max(np.abs(truncate(f, level, sign).values - truncate(h, level, sign).values))
    assert lhs <= np.max(np.abs(f.values - h.values)) + 1e-15
    assert np.all(truncate(f, level, sign).values >= 0)


def test_grid_mismatch():
    a, b = GridField(Grid(1, 8), np.zeros(8)), GridField(Grid(1, 16), np.zeros(16))
    with pytest.raises(GridMismatchError):
        a + b


def test_interpolate_band_limited_exact():
    g = Grid(2, 16)
    f = field_from_function(g, lambda x, y: np.cos(x - 2 * y) + np.sin(3 * y))
    pts = np.array([[0.3, 1.7], [2.2, 5.9], [6.0, 0.01]])
    exact = np.cos(pts[:, 0] - 2 * pts[:, 1]) + np.sin(3 * pts[:, 1])
    assert np.max(np.abs(interpolate(f, pts) - exact)) < 1e-12


def test_box_weights_volume():
    g = Grid(2, 32, 4.0)
    w = box_weights(g, 0.77, center=[2.0, 2.0])
    assert w.sum() * g.cell_volume == pytest.approx(1.54**2, rel=1e-12)
    with pytest.raises(DomainError):
        box_weights(g, 3.0)
