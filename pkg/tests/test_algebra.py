from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab.algebra import (ComparisonSample, comparability_scan, comparison_batch, draw_samples,
                              lemmaA_sides, quadratic_form_comparison, sample)
from driftlab.errors import DomainError, PreconditionError
from driftlab.fields import random_smooth
from driftlab.grid import Grid, GridField
from driftlab.kernel import KernelSpec, SumCosineModulation
from driftlab.nonlocal_op import build_plan


def _expanded(a1, a2, b1, b2, variant):
    """Monomial expansion in exact arithmetic, written independently of the library."""
    a1, a2, b1, b2 = map(Fraction, (a1, a2, b1, b2))
    if variant == "Z4":
        lhs = b1 * b1 * a1 * a1 - 2 * b1 * b2 * a1 * a2 + b2 * b2 * a2 * a2
        core = b1 * b1 * a1 * a1 - b2 * b2 * a1 * a2 - b1 * b1 * a1 * a2 + b2 * b2 * a2 * a2
        corr = abs(a1) * abs(a2) * (b1 * b1 - 2 * b1 * b2 + b2 * b2)
    else:
        p1, p2 = max(a1, 0), max(a2, 0)
        lhs = b1 * b1 * a1 * p1 - b1 * b2 * a1 * p2 - b1 * b2 * a2 * p1 + b2 * b2 * a2 * p2
        core = b1 * b1 * a1 * p1 - b2 * b2 * a1 * p2 - b1 * b1 * a2 * p1 + b2 * b2 * a2 * p2
        corr = (abs(a1) * p2 + p1 * abs(a2)) * (b1 * b1 - 2 * b1 * b2 + b2 * b2)
    return lhs, core, corr


def test_z5_example_matches_expansion():
    got = lemmaA_sides(1, -1, 2, 1, "Z5")
    assert tuple(float(v) for v in got) == (6.0, 8.0, 1.0)
    assert tuple(float(v) for v in _expanded(1, -1, 2, 1, "Z5")) == (6.0, 8.0, 1.0)


@given(st.sampled_from(["Z4", "Z5"]), st.integers(-20, 20), st.integers(-20, 20),
       st.integers(0, 20), st.integers(0, 20))
def test_sides_match_expansion_on_integers(variant, a1, a2, b1, b2):
    got = lemmaA_sides(a1, a2, b1, b2, variant)
    assert tuple(float(v) for v in got) == tuple(float(v) for v in _expanded(a1, a2, b1, b2, variant))


def test_trivial_examples():
    assert tuple(map(float, lemmaA_sides(0.7, 0.7, 0.3, 0.3))) == (0.0, 0.0, 0.0)
    lhs, core, corr = lemmaA_sides(1.3, 0.0, 0.8, 0.2)
    assert lhs == pytest.approx((0.8 * 1.3) ** 2, rel=1e-15) and core == pytest.approx(lhs, rel=1e-15) and corr == 0
    with pytest.raises(DomainError):
        lemmaA_sides(1, 1, -0.1, 1)
    with pytest.raises(DomainError):
        ComparisonSample(1, 1, -1, 0, 0, 0, 0)
    assert sample("Z5", 1, -1, 2, 1).lhs == 6.0


def test_equal_b_identity():
    a1, a2, b, b2 = draw_samples(10**5, "equal_b", seed=3)
    lhs, core, corr = lemmaA_sides(a1, a2, b, b2, "Z4")
    assert np.all(corr == 0)
    ref = b**2 * (np.abs(a1) + np.abs(a2)) ** 2
    assert np.max(np.abs(lhs - core) / np.maximum(ref, 1e-300)) <= 8 * np.finfo(float).eps


@pytest.mark.parametrize("variant", ["Z4", "Z5"])
def test_scan_has_no_violations(variant):
    rep = comparability_scan(variant, 4 * 10**4, seed=1)
    assert rep.violations == 0 and rep.proof_violations == 0
    assert 0 < rep.c_lower <= rep.c_upper < np.inf
    assert rep.identity_defect <= 8 * np.finfo(float).eps


def test_scan_hard_case_and_determinism():
    rep = comparability_scan("Z5", 2 * 10**4, "mixed_sign", seed=5)
    assert rep.violations == 0 and rep.proof_violations == 0
    again = comparability_scan("Z5", 2 * 10**4, "mixed_sign", seed=5)
    assert rep.to_dict() == again.to_dict()
    with pytest.raises(DomainError):
        comparability_scan("Z4", 100)
    with pytest.raises(DomainError):
        comparability_scan("Z6", 10**4)


G = Grid(1, 32)


def test_pairing_identical_plans_ratio_one():
    plan = build_plan(KernelSpec(1, 0.5), G)
    h = GridField(G, 1.2 + random_smooth(G, 1).values)
    f = random_smooth(G, 2)
    res = quadratic_form_comparison(plan, plan, h, f)
    assert abs(res.ratio - 1) <= 1e-12
    assert res.identity_defect <= 1e-10


def test_pairing_negative_f_and_h():
    plan = build_plan(KernelSpec(1, 0.5), G)
    h = GridField(G, np.ones(32))
    res = quadratic_form_comparison(plan, plan, h, GridField(G, -1.0 - np.abs(random_smooth(G, 0).values)))
    assert (res.pair_general, res.pair_fractional, res.corr_general, res.corr_fractional) == (0, 0, 0, 0)
    with pytest.raises(PreconditionError):
        quadratic_form_comparison(plan, plan, GridField(G, -np.ones(32)), random_smooth(G, 0))


def test_modulated_band_is_finite():
    spec = KernelSpec(1, 0.5, 2.0, "modulated", SumCosineModulation(0.5, (1, 2)))
    band = comparison_batch(build_plan(spec, G), build_plan(KernelSpec(1, 0.5), G), n=10, seed=0)
    assert band.within(0.25, 4.0) and band.max_identity_defect <= 1e-8
