"""Truncation energies at the levels ``C_k = lambda (1 - 2**-k)`` and the L-infinity level search."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import CadenceError, DomainError, NumericalError, PreconditionError
from ..grid import wavenumber_magnitude


@dataclass
class TruncationLadder:
    """Energies of ``u_k = (u - C_k)_+`` over ``t >= T_k``.

    ``U[k] = sup_{t >= T_k} ||u_k(t)||_2**2 + int_{T_k} ||(-Delta)**(s/2) u_k||_2**2 dt``.
    """

    lam: float
    levels: np.ndarray
    times: np.ndarray
    U: np.ndarray
    sup_part: np.ndarray
    integral_part: np.ndarray
    cadence_defect: Optional[float] = None
    warnings: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.levels) - 1

    def is_monotone(self, rtol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.U) <= rtol * np.maximum(self.U[:-1], 1e-300)))


def _level_norms(fields: np.ndarray, level: float, grid, s: float) -> tuple:
    """``||(u - level)_+||_2**2`` and its squared seminorm for each snapshot."""
    cv = grid.cell_volume
    sym = wavenumber_magnitude(grid) ** (2 * s)
    n = len(fields)
    l2 = np.zeros(n)
    hs = np.zeros(n)
    axes = tuple(range(1, fields.ndim))
    v = np.maximum(fields - level, 0.0)
    active = np.any(v > 0, axis=axes)
    if np.any(active):
        va = v[active]
        l2[active] = cv * np.sum(va * va, axis=axes)
        F = np.fft.fftn(va, axes=axes) / grid.size
        hs[active] = grid.volume * np.sum(sym * np.abs(F) ** 2, axis=axes)
    return l2, hs


def _interp_at(times, values, t0):
    return float(np.interp(t0, times, values))


def _energy_from_series(times, l2, hs, T):
    """Sup and trapezoid integral of the piecewise-linear series over ``[T, t_end]``."""
    after = times > T
    sup = max(_interp_at(times, l2, T), float(np.max(l2[after])) if np.any(after) else -np.inf)
    tt = np.concatenate([[T], times[after]])
    yy = np.concatenate([[_interp_at(times, hs, T)], hs[after]])
    integral = float(np.sum(0.5 * (yy[1:] + yy[:-1]) * np.diff(tt))) if len(tt) > 1 else 0.0
    return max(sup, 0.0), integral


def _ladder(traj, lam: float, K: int, s: float, stride: int = 1):
    times = np.asarray(traj.times)[::stride]
    fields = np.asarray(traj.fields)[::stride]
    if stride > 1 and times[-1] != traj.times[-1]:
        times = np.append(times, traj.times[-1])
        fields = np.concatenate([fields, traj.fields[-1:]])
    k = np.arange(K + 1)
    levels = lam * (1.0 - 2.0 ** (-k))
    Tk = 1.0 - 2.0 ** (-k)
    sup = np.zeros(K + 1)
    integ = np.zeros(K + 1)
    for j in range(K + 1):
        sel = times >= Tk[j] - 1e-15
        # include the snapshot just before T_k so the interpolation at T_k is available
        first = max(int(np.argmax(sel)) - 1, 0)
        l2, hs = _level_norms(fields[first:], levels[j], traj.grid, s)
        sup[j], integ[j] = _energy_from_series(times[first:], l2, hs, Tk[j])
    return levels, Tk, sup, integ


def _check_coverage(traj):
    times = np.asarray(traj.times)
    if times[-1] < 1.0:
        raise PreconditionError(f"trajectory ends at t = {times[-1]:g}; truncation energies need t_end >= 1")
    if times[0] > 0.0:
        raise PreconditionError("trajectory must start at t = 0")
    n_window = int(np.sum((times >= 0.5) & (times <= 1.0)))
    if n_window < 3:
        spacing = float(np.max(np.diff(times))) if len(times) > 1 else np.inf
        raise CadenceError(f"only {n_window} snapshots in [0.5, 1]; need at least 3 "
                           f"(snapshot spacing {spacing:g}, required <= 0.25)")


def truncation_energies(traj, lam: float, K: int = 10, s: Optional[float] = None,
                        cadence_check: bool = True) -> TruncationLadder:
    """Energies ``U_0 .. U_K`` by trapezoid quadrature over the snapshots.

    When ``cadence_check`` is set and the trajectory holds enough snapshots,
    the ladder is recomputed from every other snapshot and the largest
    relative change of ``U_k`` is stored as ``cadence_defect``; values above
    2% add a warning.
    """
    if not lam > 1:
        raise DomainError(f"lambda must exceed 1, got {lam}")
    s = traj.s if s is None else s
    _check_coverage(traj)
    levels, Tk, sup, integ = _ladder(traj, lam, K, s)
    U = sup + integ
    ladder = TruncationLadder(lam, levels, Tk, U, sup, integ)
    if cadence_check and len(traj.times) >= 9:
        _, _, sup2, int2 = _ladder(traj, lam, K, s, stride=2)
        U2 = sup2 + int2
        scale = np.maximum(np.abs(U), 1e-300)
        mask = U > 1e-14 * max(U.max(), 1e-300)
        ladder.cadence_defect = float(np.max(np.abs(U2 - U)[mask] / scale[mask])) if np.any(mask) else 0.0
        if ladder.cadence_defect > 0.02:
            ladder.warnings.append(f"half-cadence rerun changes U_k by {ladder.cadence_defect:.1%}")
    return ladder


def top_energy(traj, lam: float, K: int, s: float) -> float:
    """``U_K`` at level ``lam`` (any ``lam >= 0``)."""
    Tk = 1.0 - 2.0 ** (-K)
    level = lam * (1.0 - 2.0 ** (-K))
    times = np.asarray(traj.times)
    first = max(int(np.argmax(times >= Tk - 1e-15)) - 1, 0)
    l2, hs = _level_norms(np.asarray(traj.fields)[first:], level, traj.grid, s)
    sup, integ = _energy_from_series(times[first:], l2, hs, Tk)
    return sup + integ


@dataclass
class LevelResult:
    level: float
    lower: float
    energy: float
    ledger_sup: float
    iterations: int


def linfty_level(traj, tolerance: float = 0.0, K: int = 20, lam_min: float = 1e-6,
                 s: Optional[float] = None, rtol: float = 1e-6, max_doublings: int = 80) -> LevelResult:
    """Smallest ``lambda`` (to relative ``rtol``) with ``U_K(lambda) <= tolerance``.

    Returns the upper end of the final bisection bracket, so ``U_K`` at the
    reported level is within tolerance. ``ledger_sup`` is the largest value of
    ``u_+`` over snapshots with ``t >= 1``.
    """
    s = traj.s if s is None else s
    times = np.asarray(traj.times)
    if times[-1] < 1.0:
        raise PreconditionError("trajectory must reach t = 1")
    late = times >= 1.0 - 1e-15
    ledger_sup = float(max(np.max(traj.fields[late]), 0.0))
    f = lambda lam: top_energy(traj, lam, K, s)
    if f(lam_min) <= tolerance:
        return LevelResult(lam_min, 0.0, f(lam_min), ledger_sup, 0)
    lo = lam_min
    hi = max(1.0, 2.0 * float(np.max(np.abs(traj.fields))))
    n = 0
    while f(hi) > tolerance:
        lo, hi = hi, 2 * hi
        n += 1
        if n > max_doublings or not np.isfinite(hi):
            raise NumericalError(f"no level with U_K <= {tolerance} below {hi:g} (ledger sup {ledger_sup:g})")
    it = 0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) <= tolerance:
            hi = mid
        else:
            lo = mid
        it += 1
    return LevelResult(hi, lo, f(hi), ledger_sup, it)


def bound_exponents(q: float, d: int, s: float) -> tuple:
    """Exponents on ``||g||`` in ``L^{2(d+1)/(d+1+2s)}`` and on ``||g||_q`` in the a priori L-infinity bound."""
    if not q > d + 2 * s:
        raise DomainError("the bound needs q > d + 2s")
    den = 2 * (q - d - 2 * s) + q * d
    return 2 * (q - d - 2 * s) / den, q * d / den


def forcing_norms(g: np.ndarray, grid, q: float, s: float, t_span: float) -> dict:
    """Space-time norms of a time-independent forcing over ``[0, t_span]``.

    ``low`` is the ``L^p`` norm with ``p = 2(d+1)/(d+1+2s)``.
    """
    d = grid.d
    cv = grid.cell_volume
    a = np.abs(np.asarray(g))

    def norm(p):
        return float((cv * np.sum(a**p) * t_span) ** (1 / p))

    p_low = 2 * (d + 1) / (d + 1 + 2 * s)
    return {"L1": norm(1.0), "low": norm(p_low), "p_low": p_low, "Lq": norm(q), "q": q}


def bound_prediction(g_low: float, g_q: float, q: float, d: int, s: float) -> float:
    """Trend predictor ``||g||_low**a * ||g||_q**b`` (constant factor omitted)."""
    a, b = bound_exponents(q, d, s)
    return float(g_low**a * g_q**b)
