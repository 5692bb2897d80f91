"""Power-law fits of the sup-norm decay of drift-free, unforced runs."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from ..errors import DomainError, PrecisionWarning
from ..grid import wavenumber_magnitude


@dataclass
class DecayFit:
    slope: float
    band: tuple
    stderr: float
    n_points: int
    window: tuple
    t_sat: float
    in_power_law: bool
    intercept: float
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"slope": self.slope, "band": list(self.band), "stderr": self.stderr, "n": self.n_points,
                "window": list(self.window), "t_sat": self.t_sat, "in_power_law": self.in_power_law,
                "warnings": list(self.warnings)}


def saturation_time(traj, fraction: float = 0.5) -> float:
    """First snapshot time at which the lowest nonzero shell carries ``fraction`` of the sup norm of ``u - mean``."""
    grid = traj.grid
    xi = wavenumber_magnitude(grid)
    low = np.isclose(xi, 2 * np.pi / grid.L)
    for t, u in zip(traj.times, traj.fields):
        F = np.fft.fftn(u)
        F.flat[0] = 0.0
        fluct = np.max(np.abs(np.fft.ifftn(F).real))
        lowest = np.max(np.abs(np.fft.ifftn(np.where(low, F, 0.0)).real))
        if fluct > 0 and lowest >= fraction * fluct:
            return float(t)
    return float("inf")


def decay_exponent(traj, window: Sequence[float], norm: str = "sup", confidence: float = 0.95) -> DecayFit:
    """Least-squares slope of ``log ||u(t)||`` against ``log t`` over ``window``.

    ``norm`` is ``sup`` (the default) or ``osc`` for ``sup - inf``. A window
    narrower than half a decade, or one that reaches past the saturation time
    ``t_sat``, adds a :class:`PrecisionWarning`.
    """
    t0, t1 = (float(w) for w in window)
    if not 0 < t0 < t1:
        raise DomainError("window must satisfy 0 < t0 < t1")
    times = np.asarray(traj.times)
    sel = (times >= t0 - 1e-12) & (times <= t1 + 1e-12)
    if sel.sum() < 3:
        raise DomainError(f"only {int(sel.sum())} snapshots inside the window")
    U = np.asarray(traj.fields)[sel]
    axes = tuple(range(1, U.ndim))
    if norm == "sup":
        y = np.max(np.abs(U), axis=axes)
    elif norm == "osc":
        y = np.max(U, axis=axes) - np.min(U, axis=axes)
    else:
        raise DomainError(f"unknown norm {norm!r}")
    x = np.log(times[sel])
    ly = np.log(y)
    fit = stats.linregress(x, ly)
    n = int(sel.sum())
    tq = stats.t.ppf(0.5 + confidence / 2, n - 2) if n > 2 else np.inf
    msgs = []
    if np.log10(t1 / t0) < 0.5:
        msgs.append(f"window spans {np.log10(t1 / t0):.2f} decades (< 0.5)")
    t_sat = saturation_time(traj)
    in_pl = t1 < t_sat
    if not in_pl:
        msgs.append(f"window reaches the saturation time t_sat = {t_sat:.3g}; pure exponential regime")
    for m in msgs:
        warnings.warn(m, PrecisionWarning, stacklevel=2)
    return DecayFit(float(fit.slope), (float(fit.slope - tq * fit.stderr), float(fit.slope + tq * fit.stderr)),
                    float(fit.stderr), n, (t0, t1), t_sat, bool(in_pl), float(fit.intercept), msgs)


def predicted_decay_exponent(d: int, s: float) -> float:
    """``-d / (4 s)``."""
    return -d / (4.0 * s)
