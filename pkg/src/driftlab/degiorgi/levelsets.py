"""Weighted level-set measures and the isoperimetric-type inequality in the extension.

For a function ``f`` on the half-space with weighted measure
``z**(1-2s) dx dz`` over the box ``B_r x (0, r)`` the sets are
``A = {f <= 0}``, ``B = {f >= 1}`` and ``C = {0 < f < 1}``; the inequality
compared is ``|A| |B| <= C r**rho K**(1/2) |C|**(1/(2p))`` with
``K = int z**(1-2s) |grad f|**2`` over the same box.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import DomainError, HypothesisViolation
from ..extension import ExtensionField, Region, ZGrid, weighted_cell_measures
from ..grid import Grid, GridField
from ..fields import periodic_offsets


def level_set_measures(ext: ExtensionField, region: Region, low: float = 0.0, high: float = 1.0) -> tuple:
    """Weighted measures of ``{f <= low}``, ``{f >= high}`` and ``{low < f < high}``."""
    if not high > low:
        raise DomainError("thresholds must satisfy low < high")
    w = weighted_cell_measures(ext, region)
    v = ext.values
    a = float(np.sum(w[v <= low]))
    b = float(np.sum(w[v >= high]))
    c = float(np.sum(w[(v > low) & (v < high)]))
    return a, b, c


def box_weighted_volume(ext: ExtensionField, region: Region) -> float:
    return float(np.sum(weighted_cell_measures(ext, region)))


def rho_exponent(d: int, s: float, p: float) -> float:
    """``1 + (d + 1 - ((p + 1)/(p - 1)) (1 - 2s)) (1 - 1/p) / 2``."""
    if p <= 1:
        raise DomainError("p must exceed 1")
    return 1.0 + 0.5 * (d + 1 - (p + 1) / (p - 1) * (1 - 2 * s)) * (1 - 1 / p)


def gradient_energy(ext: ExtensionField, region: Region) -> float:
    """``int z**(1-2s) |grad f|**2`` over the region by finite differences.

    Central periodic differences in x and second-order one-sided or central
    differences on the (non-uniform) z levels; each node carries its cell weight.
    """
    v = ext.values
    h = ext.grid.h
    g2 = np.zeros_like(v)
    for a in range(ext.grid.d):
        ax = a + 1
        g2 += ((np.roll(v, -1, axis=ax) - np.roll(v, 1, axis=ax)) / (2 * h)) ** 2
    if ext.zgrid.M > 1:
        g2 += np.gradient(v, ext.zgrid.z_levels, axis=0) ** 2
    return float(np.sum(weighted_cell_measures(ext, region) * g2))


@dataclass
class IsoperimetricResult:
    A: float
    B: float
    C: float
    K: float
    rho: float
    lhs: float
    rhs_core: float
    ratio: float

    def to_dict(self) -> dict:
        return asdict(self)


def isoperimetric_check(ext: ExtensionField, p: float, r: float, center=None,
                        K: Optional[float] = None) -> IsoperimetricResult:
    """Both sides of the inequality on ``B_r x (0, r)`` and their ratio.

    Raises :class:`HypothesisViolation` unless ``p > (1 - s)/s``.
    """
    s = ext.s
    if not p > (1 - s) / s:
        raise HypothesisViolation(f"p = {p} must exceed (1 - s)/s = {(1 - s) / s:g}")
    if not r > 0:
        raise DomainError("r must be positive")
    region = Region(r, r, 0.0, None if center is None else tuple(np.atleast_1d(center)))
    a, b, c = level_set_measures(ext, region)
    if K is None:
        K = gradient_energy(ext, region)
    rho = rho_exponent(ext.grid.d, s, p)
    lhs = a * b
    rhs = r**rho * np.sqrt(K) * c ** (1 / (2 * p))
    if rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs == 0 else float("inf")
    return IsoperimetricResult(a, b, c, float(K), rho, lhs, float(rhs), float(ratio))


def field_extension(grid: Grid, values: np.ndarray, s: float, zgrid: ZGrid) -> ExtensionField:
    """Wrap a prescribed half-space function sampled as ``(M, *grid)`` values."""
    values = np.asarray(values, dtype=float)
    if values.shape != (zgrid.M,) + grid.shape:
        raise DomainError("values must have shape (M, *grid.shape)")
    return ExtensionField(grid, zgrid, values, s, GridField(grid, values[0]))


def ramp(grid: Grid, zgrid: ZGrid, s: float, width: float, shift: float = 0.0, center=None,
         tilt: float = 0.0) -> ExtensionField:
    """``clip((x_1 - shift + tilt z)/width, 0, 1)`` as a half-space function."""
    x1 = periodic_offsets(grid, center)[0]
    z = zgrid.z_levels.reshape((-1,) + (1,) * grid.d)
    vals = np.clip((x1[None] - shift + tilt * z) / width, 0.0, 1.0)
    return field_extension(grid, vals, s, zgrid)


@dataclass
class FamilySweep:
    d: int
    s: float
    p: float
    r: float
    rho: float
    results: list
    c_fit: float
    violations: int

    def to_dict(self) -> dict:
        return {"d": self.d, "s": self.s, "p": self.p, "r": self.r, "rho": self.rho,
                "c_fit": self.c_fit, "violations": self.violations,
                "members": [m.to_dict() for m in self.results]}


def ramp_family_sweep(grid: Grid, s: float, p: float, r: float = 1.0,
                      widths: Sequence[float] = tuple(np.round(np.arange(0.1, 1.01, 0.1), 10)),
                      shifts: Sequence[float] = (-0.5, -0.25, 0.0, 0.25),
                      tilts: Sequence[float] = (0.0, 0.5),
                      center=None, zgrid: Optional[ZGrid] = None) -> FamilySweep:
    """Ratios over the ramp family; the fitted constant is the largest ratio.

    ``violations`` counts members with ``lhs > c_fit * rhs_core`` (zero by
    construction unless a ratio is infinite or NaN).
    """
    zgrid = zgrid or ZGrid.geometric(grid.h / 8, r, 48)
    out = []
    for w in widths:
        for sh in shifts:
            for tl in tilts:
                ext = ramp(grid, zgrid, s, w, sh, center, tl)
                out.append(isoperimetric_check(ext, p, r, center))
    ratios = np.array([m.ratio for m in out])
    c_fit = float(np.max(ratios)) if np.all(np.isfinite(ratios)) else float("inf")
    viol = int(sum(1 for m in out if not (m.lhs <= c_fit * m.rhs_core * (1 + 1e-12))))
    return FamilySweep(grid.d, s, p, r, rho_exponent(grid.d, s, p), out, c_fit, viol)
