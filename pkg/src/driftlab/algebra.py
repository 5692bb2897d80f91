"""Sampling harness for the pointwise comparison inequalities behind the kernel comparison.

For reals ``a1, a2`` and nonnegative ``b1, b2`` the two variants compare

* ``Z4``: ``(b1 a1 - b2 a2)**2 + corr`` with ``(a1 - a2)(b1**2 a1 - b2**2 a2) + C corr``,
  where ``corr = |a1||a2|(b1 - b2)**2``;
* ``Z5``: ``(b1 a1 - b2 a2)(b1 a1+ - b2 a2+) + corr`` with
  ``(a1 - a2)(b1**2 a1+ - b2**2 a2+) + C corr``, where
  ``corr = (|a1| a2+ + a1+ |a2|)(b1 - b2)**2`` and ``a+ = max(a, 0)``.

Comparability is reported as the range of the ratio of the two sides over
large random scans; the pairing form on grids compares an operator with the
fractional Laplacian through the same identities.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, PreconditionError
from .grid import GridField, check_same_grid
from .nonlocal_op import OperatorPlan, dense_matrix, pairing
from .rng import make_rng

VARIANTS = ("Z4", "Z5")
C_USED = 2.0
PAIRING_C = 1.0
# relative guard applied to the fitted constants so that re-multiplying a
# ratio by its denominator cannot produce a one-ulp violation
ROUND_GUARD = 1e-12


@dataclass
class ComparisonSample:
    a1: float
    a2: float
    b1: float
    b2: float
    lhs: float
    rhs_core: float
    correction: float

    def __post_init__(self):
        if self.b1 < 0 or self.b2 < 0:
            raise DomainError("b1 and b2 must be nonnegative")


def lemmaA_sides(a1, a2, b1, b2, variant: str = "Z4") -> tuple:
    """``(lhs, rhs_core, correction)`` evaluated elementwise."""
    a1, a2, b1, b2 = (np.asarray(v, dtype=float) for v in (a1, a2, b1, b2))
    if np.any(b1 < 0) or np.any(b2 < 0):
        raise DomainError("b1 and b2 must be nonnegative")
    db2 = (b1 - b2) ** 2
    if variant == "Z4":
        lhs = (b1 * a1 - b2 * a2) ** 2
        core = (a1 - a2) * (b1**2 * a1 - b2**2 * a2)
        corr = np.abs(a1) * np.abs(a2) * db2
    elif variant == "Z5":
        p1, p2 = np.maximum(a1, 0.0), np.maximum(a2, 0.0)
        lhs = (b1 * a1 - b2 * a2) * (b1 * p1 - b2 * p2)
        core = (a1 - a2) * (b1**2 * p1 - b2**2 * p2)
        corr = (np.abs(a1) * p2 + p1 * np.abs(a2)) * db2
    else:
        raise DomainError(f"unknown variant {variant!r}")
    return lhs, core, corr


def sample(variant: str, a1, a2, b1, b2) -> ComparisonSample:
    lhs, core, corr = (float(v) for v in lemmaA_sides(a1, a2, b1, b2, variant))
    return ComparisonSample(float(a1), float(a2), float(b1), float(b2), lhs, core, corr)


DISTRIBUTIONS = ("mixture", "uniform", "heavy", "sign", "small_b", "equal_b", "mixed_sign", "near_equal_a")


def draw_samples(n: int, distribution: str = "mixture", seed: int = 0, stream: str = "algebra") -> tuple:
    """Arrays ``(a1, a2, b1, b2)`` from the named distribution.

    ``mixture`` draws equal shares of: uniform, heavy-tailed (Cauchy), signs
    forced opposite, ``b`` spread over eight decades toward 0, ``b1 = b2``,
    ``a1 >= 0 > a2`` and ``|a2|`` within a relative ``1e-6`` of ``|a1|``.
    """
    rng = make_rng(seed, f"{stream}:{distribution}")
    if distribution == "mixture":
        parts = DISTRIBUTIONS[1:]
        sizes = [n // len(parts) + (1 if i < n % len(parts) else 0) for i in range(len(parts))]
        chunks = [draw_samples(m, p, seed, stream) for p, m in zip(parts, sizes)]
        return tuple(np.concatenate([c[i] for c in chunks]) for i in range(4))
    u = lambda lo, hi: rng.uniform(lo, hi, n)
    if distribution == "uniform":
        return u(-1, 1), u(-1, 1), u(0, 1), u(0, 1)
    if distribution == "heavy":
        return rng.standard_cauchy(n), rng.standard_cauchy(n), np.abs(rng.standard_cauchy(n)), np.abs(rng.standard_cauchy(n))
    if distribution == "sign":
        a1 = u(0, 1) * rng.choice([-1.0, 1.0], n)
        return a1, -np.sign(a1) * u(0, 1), u(0, 1), u(0, 1)
    if distribution == "small_b":
        return u(-1, 1), u(-1, 1), 10.0 ** u(-8, 0), 10.0 ** u(-8, 0)
    if distribution == "equal_b":
        b = u(0, 1)
        return u(-1, 1), u(-1, 1), b, b.copy()
    if distribution == "mixed_sign":
        return u(0, 1), -u(0, 1) * 10.0 ** u(-6, 0), u(0, 1), u(0, 1)
    if distribution == "near_equal_a":
        a1 = u(-1, 1)
        return a1, a1 * (1 - 10.0 ** u(-12, -6)) * rng.choice([-1.0, 1.0], n), u(0, 1), u(0, 1)
    raise DomainError(f"unknown distribution {distribution!r}")


@dataclass
class ComparabilityReport:
    variant: str
    n_samples: int
    n_used: int
    C_used: float
    c_lower: float
    c_upper: float
    violations: int
    witness_lower: tuple
    witness_upper: tuple
    proof_C_fit: float
    proof_violations: int
    identity_defect: float
    seed: int
    distribution: str

    def to_dict(self) -> dict:
        return asdict(self)


def _proof_inequality(a1, a2, b1, b2, variant: str) -> tuple:
    """Fitted constant of the proof's explicit bound and its samples.

    ``Z4`` (after ordering ``|a1| >= |a2|``):
    ``|core - lhs| <= lhs/10 + C (a2**2 + |a1 a2|)(b1 - b2)**2``.
    ``Z5`` on ``a1 >= 0 > a2``, with ``m = (b1 a1 - b2 a2) b1 a1+``:
    ``|core - m| <= m/10 + C |a2| a1+ (b1 - b2)**2``.
    Returns ``(excess, scale)`` arrays with ``excess <= C * scale`` required.
    """
    db2 = (b1 - b2) ** 2
    if variant == "Z4":
        swap = np.abs(a2) > np.abs(a1)
        a1, a2 = np.where(swap, a2, a1), np.where(swap, a1, a2)
        b1, b2 = np.where(swap, b2, b1), np.where(swap, b1, b2)
        lhs, core, _ = lemmaA_sides(a1, a2, b1, b2, "Z4")
        return np.abs(core - lhs) - lhs / 10, (a2**2 + np.abs(a1 * a2)) * db2
    sel = (a1 >= 0) & (a2 < 0)
    a1, a2, b1, b2, db2 = a1[sel], a2[sel], b1[sel], b2[sel], db2[sel]
    _, core, _ = lemmaA_sides(a1, a2, b1, b2, "Z5")
    m = (b1 * a1 - b2 * a2) * b1 * a1
    return np.abs(core - m) - m / 10, np.abs(a2) * a1 * db2


def fit_proof_constant(excess: np.ndarray, scale: np.ndarray, atol: float = 1e-13) -> tuple:
    """Smallest ``C`` with ``excess <= C scale`` (entries with ``scale = 0`` must have ``excess <= atol``)."""
    pos = scale > 0
    C = float(np.max(excess[pos] / scale[pos])) if np.any(pos) else 0.0
    C = max(C, 0.0) * (1 + ROUND_GUARD)
    viol = int(np.sum(excess[pos] > C * scale[pos]) + np.sum(excess[~pos] > atol))
    return C, viol


def comparability_scan(variant: str = "Z4", n_samples: int = 10**6, distribution: str = "mixture",
                       seed: int = 0, C_used: float = C_USED) -> ComparabilityReport:
    """Two-sided constants ``c_lower <= (lhs + corr)/(core + C corr) <= c_upper`` over a random scan.

    Samples where both sides vanish carry no information and are skipped
    (``n_used`` counts the rest). ``identity_defect`` is the largest
    ``|lhs - core| / (b**2 (|a1| + |a2|)**2)`` over samples with ``b1 = b2``,
    i.e. the identity error in units of the rounding scale of its terms.
    """
    if n_samples < 10**4:
        raise DomainError("comparability scans need at least 1e4 samples")
    if variant not in VARIANTS:
        raise DomainError(f"unknown variant {variant!r}")
    a1, a2, b1, b2 = draw_samples(n_samples, distribution, seed)
    lhs, core, corr = lemmaA_sides(a1, a2, b1, b2, variant)
    num = lhs + corr
    den = core + C_used * corr
    scale = np.abs(num) + np.abs(den)
    tiny = scale <= 1e-300
    used = ~tiny
    ratio = np.full(n_samples, np.nan)
    bad_den = used & (den <= 0)
    ratio[used & ~bad_den] = num[used & ~bad_den] / den[used & ~bad_den]
    if np.any(bad_den):
        c_lower, c_upper = -np.inf, np.inf
        i = int(np.flatnonzero(bad_den)[0])
        wl = wu = (a1[i], a2[i], b1[i], b2[i])
    else:
        il = int(np.nanargmin(ratio))
        iu = int(np.nanargmax(ratio))
        c_lower = float(ratio[il]) * (1 - ROUND_GUARD)
        c_upper = float(ratio[iu]) * (1 + ROUND_GUARD)
        wl = (a1[il], a2[il], b1[il], b2[il])
        wu = (a1[iu], a2[iu], b1[iu], b2[iu])
    viol = int(np.sum(used & ((num < c_lower * den) | (num > c_upper * den))))
    excess, pscale = _proof_inequality(a1, a2, b1, b2, variant)
    pC, pviol = fit_proof_constant(excess, pscale)
    eq = b1 == b2
    ident = 0.0
    if np.any(eq):
        # rounding scale of both expressions: b**2 (|a1| + |a2|)**2
        ref = b1[eq] ** 2 * (np.abs(a1[eq]) + np.abs(a2[eq])) ** 2
        nz = ref > 0
        if np.any(nz):
            ident = float(np.max(np.abs(lhs[eq] - core[eq])[nz] / ref[nz]))
    return ComparabilityReport(variant, n_samples, int(used.sum()), C_used, c_lower, c_upper, viol,
                               tuple(float(v) for v in wl), tuple(float(v) for v in wu), pC, pviol,
                               ident, seed, distribution)


# -- pairing form on grids --------------------------------------------------------------

def _pair_matrix(plan: OperatorPlan, t: float) -> np.ndarray:
    """Pair weights ``W(x, y)``; translation-invariant plans are expanded from their offsets."""
    return dense_matrix(plan, t)


def pair_correction(plan: OperatorPlan, h: np.ndarray, fplus: np.ndarray, t: float = 0.0) -> float:
    """``h**d sum_x sum_y f+(x) f+(y) (h(x) - h(y))**2 W(x, y)``."""
    M = _pair_matrix(plan, t)
    p = fplus.reshape(-1)
    hv = h.reshape(-1)
    return float(plan.grid.cell_volume * np.sum(M * np.outer(p, p) * (hv[:, None] - hv[None, :]) ** 2))


def symmetrized_pairing(plan: OperatorPlan, h: np.ndarray, f: np.ndarray, t: float = 0.0) -> float:
    """``(1/2) h**d sum_x sum_y (a1 - a2)(b1**2 a1+ - b2**2 a2+) W`` with ``a = f``, ``b = h``."""
    M = _pair_matrix(plan, t)
    a = f.reshape(-1)
    b = h.reshape(-1)
    _, core, _ = lemmaA_sides(a[:, None], a[None, :], b[:, None], b[None, :], "Z5")
    return float(0.5 * plan.grid.cell_volume * np.sum(core * M))


@dataclass
class PairingComparison:
    """The four quantities of the comparison and the resulting ratio.

    ``ratio = (pair_general + corr_general) / (pair_fractional + C corr_fractional)``;
    with the default ``C = 1`` identical plans give a ratio of exactly one.
    ``identity_defect`` is the largest relative mismatch between the operator
    pairings and their symmetrized double sums.
    """

    pair_general: float
    pair_fractional: float
    corr_general: float
    corr_fractional: float
    C_used: float
    ratio: float
    identity_defect: float

    def to_dict(self) -> dict:
        return asdict(self)


def quadratic_form_comparison(plan_general: OperatorPlan, plan_fractional: OperatorPlan, h: GridField,
                              f: GridField, t: float = 0.0, C_used: float = PAIRING_C,
                              check_identity: bool = True) -> PairingComparison:
    """Compare ``int h**2 f+ L f`` with ``int h**2 f+ (-Delta)**s f`` plus their corrections."""
    check_same_grid(plan_general.grid, plan_fractional.grid)
    check_same_grid(plan_general.grid, h.grid)
    check_same_grid(plan_general.grid, f.grid)
    if plan_general.spec.s != plan_fractional.spec.s:
        raise DomainError("plans must share s")
    if np.any(h.values < 0):
        raise PreconditionError("h must be nonnegative")
    fp = np.maximum(f.values, 0.0)
    w = GridField(f.grid, h.values**2 * fp)
    pg = pairing(plan_general, w, f, t)
    pf = pairing(plan_fractional, w, f, t)
    cg = pair_correction(plan_general, h.values, fp, t)
    cf = pair_correction(plan_fractional, h.values, fp, t)
    num = pg + cg
    den = pf + C_used * cf
    if den > 0:
        ratio = num / den
    else:
        ratio = 1.0 if num == den == 0 else float("nan")
    defect = float("nan")
    if check_identity:
        sg = symmetrized_pairing(plan_general, h.values, f.values, t)
        sf = symmetrized_pairing(plan_fractional, h.values, f.values, t)
        defect = max(abs(pg - sg) / max(abs(sg), 1e-300) if sg or pg else 0.0,
                     abs(pf - sf) / max(abs(sf), 1e-300) if sf or pf else 0.0)
    return PairingComparison(pg, pf, cg, cf, C_used, float(ratio), defect)


@dataclass
class BatchBand:
    n: int
    lower: float
    upper: float
    lam: float
    max_identity_defect: float
    ratios: np.ndarray = field(repr=False)

    def within(self, lo: float, hi: float) -> bool:
        return bool(lo <= self.lower and self.upper <= hi)

    def to_dict(self) -> dict:
        return {"n": self.n, "lower": self.lower, "upper": self.upper, "lam": self.lam,
                "max_identity_defect": self.max_identity_defect}


def comparison_batch(plan_general: OperatorPlan, plan_fractional: OperatorPlan, n: int = 100, seed: int = 0,
                     kmax: int = 6, C_used: float = PAIRING_C) -> BatchBand:
    """Ratio band over ``n`` random pairs ``(h, f)``; ``h`` positive, ``f`` sign-changing."""
    from .fields import random_smooth
    grid = plan_general.grid
    ratios = []
    defect = 0.0
    for i in range(n):
        f = random_smooth(grid, seed, 1.0, 1.5, kmax, stream=f"cmp-f-{i}")
        hraw = random_smooth(grid, seed, 1.0, 2.0, kmax, stream=f"cmp-h-{i}")
        h = GridField(grid, 1.05 + hraw.values)
        rng = make_rng(seed, f"cmp-shift-{i}")
        f = GridField(grid, f.values + rng.uniform(-0.5, 0.5))
        res = quadratic_form_comparison(plan_general, plan_fractional, h, f, 0.0, C_used)
        ratios.append(res.ratio)
        defect = max(defect, res.identity_defect)
    r = np.array(ratios)
    return BatchBand(n, float(np.nanmin(r)), float(np.nanmax(r)), plan_general.spec.lam, defect, r)
