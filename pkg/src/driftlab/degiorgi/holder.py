"""Parabolic distance and Hoelder quotients of trajectories."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import CadenceError, DomainError
from ..rng import make_rng


@dataclass(frozen=True)
class ParabolicPoint:
    x: tuple
    t: float

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        if not (np.all(np.isfinite(x)) and np.isfinite(self.t)):
            raise DomainError("parabolic point must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))


def parabolic_distance(x1, t1, x2, t2, s: float, L: Optional[float] = None) -> np.ndarray:
    """``|x1 - x2| + |t1 - t2|**(1/(2s))``, vectorized over leading axes.

    Points have shape ``(..., d)``; plain scalars are one-dimensional points.
    Spatial offsets use the minimum image when the period ``L`` is given.
    """
    dx = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    if L is not None:
        dx = dx - L * np.round(dx / L)
    r = np.abs(dx) if dx.ndim == 0 else np.sqrt(np.sum(dx**2, axis=-1))
    return r + np.abs(np.asarray(t1, dtype=float) - np.asarray(t2, dtype=float)) ** (1.0 / (2 * s))


def point_distance(p: ParabolicPoint, q: ParabolicPoint, s: float, L: Optional[float] = None) -> float:
    dx = np.asarray(p.x) - np.asarray(q.x)
    if L is not None:
        dx = dx - L * np.round(dx / L)
    return float(np.sqrt(np.sum(dx**2)) + abs(p.t - q.t) ** (1.0 / (2 * s)))


@dataclass
class HolderResult:
    quotient: float
    witness: Optional[tuple]
    n_pairs: int
    radius: float
    alpha: float


def holder_quotient(traj, alpha: float, s: Optional[float] = None, radius: float = 0.1,
                    region: Optional[dict] = None, n_pairs: Optional[int] = None, seed: int = 0) -> HolderResult:
    """Largest ``|u(X1) - u(X2)| / ||X1 - X2||_s**alpha`` over grid pairs within ``radius``.

    ``region`` may hold ``center`` and ``half_width`` (spatial box of base
    points, default the whole torus) and ``t_min``/``t_max`` (base times).
    All pairs of grid points and snapshots closer than ``radius`` are scanned,
    or a seeded random subset of ``n_pairs`` base points when given.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if radius <= 0:
        raise DomainError("radius must be positive")
    s = traj.s if s is None else s
    grid = traj.grid
    times = np.asarray(traj.times)
    region = dict(region or {})
    t_min = region.get("t_min", times[0])
    t_max = region.get("t_max", times[-1])
    tsel = np.where((times >= t_min - 1e-12) & (times <= t_max + 1e-12))[0]
    if len(tsel) == 0:
        raise DomainError("no snapshots inside the region")
    if len(times) > 1:
        local = np.diff(times[max(tsel[0] - 1, 0): tsel[-1] + 2])
        need = radius ** (2 * s) / 4
        if len(local) and local.max() > need * (1 + 1e-9):
            raise CadenceError(f"snapshot spacing {local.max():.3g} exceeds radius**(2s)/4 = {need:.3g}; "
                               f"record snapshots at least every {need:.3g}")
    base = np.ones(grid.shape, dtype=bool)
    if "half_width" in region:
        c = np.asarray(region.get("center", [grid.L / 2] * grid.d), dtype=float)
        for a, x in enumerate(grid.mesh()):
            r = x - c[a]
            r = r - grid.L * np.round(r / grid.L)
            base &= np.abs(r) <= region["half_width"]
    if n_pairs is not None:
        rng = make_rng(seed, "holder")
        flat = np.flatnonzero(base)
        keep = rng.choice(flat, size=min(n_pairs, len(flat)), replace=False)
        base = np.zeros(grid.shape, dtype=bool)
        base.flat[keep] = True
    h = grid.h
    m = int(np.floor(radius / h))
    rng_ = np.arange(-m, m + 1)
    offs = np.array(np.meshgrid(*([rng_] * grid.d), indexing="ij")).reshape(grid.d, -1).T
    dist_x = np.sqrt(np.sum((offs * h) ** 2, axis=1))
    best = 0.0
    witness = None
    count = 0
    for i in tsel:
        for j in range(len(times)):
            dt = abs(times[j] - times[i])
            tpart = dt ** (1.0 / (2 * s))
            if tpart > radius:
                continue
            ok = dist_x + tpart <= radius * (1 + 1e-12)
            for o, dx in zip(offs[ok], dist_x[ok]):
                dist = dx + tpart
                if dist == 0:
                    continue
                shifted = np.roll(traj.fields[j], shift=tuple(-o), axis=tuple(range(grid.d)))
                diff = np.abs(shifted - traj.fields[i])[base]
                count += int(base.sum())
                q = float(diff.max()) / dist**alpha if diff.size else 0.0
                if q > best:
                    k = int(np.argmax(diff))
                    idx = np.unravel_index(np.flatnonzero(base)[k], grid.shape)
                    x1 = tuple(float(v) * h for v in idx)
                    best = q
                    witness = (x1, float(times[i]), tuple(float(v) for v in o * h), float(times[j]))
    return HolderResult(best, witness, count, radius, alpha)
