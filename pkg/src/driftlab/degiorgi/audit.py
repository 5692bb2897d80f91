"""Term-by-term audit of the local energy inequality along a trajectory.

For cutoffs ``phi`` (space, 1 on ``B_1``, 0 outside ``B_2``) and ``psi``
(height, 1 on ``(-1, 1)``, 0 outside ``(-2, 2)``) with ``eta = phi psi`` the
audit evaluates

    left  = d/dt int (phi u_+)**2 + int z**(1-2s) |grad(eta u*_+)|**2
    right = pair + ext_cutoff + M0 int |grad phi|**2 u_+**2 + int phi**2 u_+ |g|

where ``pair`` is the double sum of ``u_+(x) u_+(y) (phi(x) - phi(y))**2``
against the pair weights of the operator plan and ``u*_+`` is the positive
part of the extension of ``u``. The smallest constant with
``left <= C * right`` is reported per snapshot.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..errors import CadenceError, DomainError
from ..extension import ZGrid, boundary_layer, extend, extension_gradient, weighted_integral
from ..grid import Grid, GridField
from ..nonlocal_op import OperatorPlan, dense_matrix, quadratic_form
from ..fields import periodic_offsets


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity transition: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def smooth_step_derivative(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    out = np.zeros_like(t)
    ti = t[inside]
    a = np.exp(-1.0 / ti)
    b = np.exp(-1.0 / (1.0 - ti))
    da = a / ti**2
    db = -b / (1.0 - ti) ** 2
    out[inside] = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return out


def space_cutoff(grid: Grid, center=None, inner: float = 1.0, outer: float = 2.0) -> tuple:
    """Radial cutoff (1 for ``|x| <= inner``, 0 for ``|x| >= outer``) and its gradient."""
    if not 0 < inner < outer <= grid.L / 2:
        raise DomainError("cutoff radii must satisfy 0 < inner < outer <= L/2")
    r_vec = periodic_offsets(grid, center)
    r = np.sqrt(sum(c**2 for c in r_vec))
    arg = (outer - r) / (outer - inner)
    phi = smooth_step(arg)
    dphi = -smooth_step_derivative(arg) / (outer - inner)
    safe = np.where(r > 0, r, 1.0)
    grad = np.stack([dphi * c / safe for c in r_vec])
    return phi, grad


def height_cutoff(z: np.ndarray, inner: float = 1.0, outer: float = 2.0) -> tuple:
    """Cutoff in ``z`` (1 for ``|z| <= inner``, 0 for ``|z| >= outer``) and its derivative."""
    z = np.abs(np.asarray(z, dtype=float))
    arg = (outer - z) / (outer - inner)
    return smooth_step(arg), -smooth_step_derivative(arg) / (outer - inner)


def pair_weight_sum(plan: OperatorPlan, u_plus: np.ndarray, phi: np.ndarray, t: float = 0.0) -> float:
    """``h**d sum_x sum_y u_+(x) u_+(y) (phi(x) - phi(y))**2 W(x, y)``."""
    cv = plan.grid.cell_volume
    if plan.translation_invariant:
        what = np.fft.fftn(plan.weights)

        def conv(g):
            return np.fft.ifftn(what * np.fft.fftn(g)).real

        # (phi_x - phi_y)**2 = phi_x**2 - 2 phi_x phi_y + phi_y**2, symmetric in x and y
        total = 2 * np.sum(u_plus * phi**2 * conv(u_plus)) - 2 * np.sum(u_plus * phi * conv(u_plus * phi))
        return float(cv * total)
    M = dense_matrix(plan, t)
    u = u_plus.reshape(-1)
    p = phi.reshape(-1)
    return float(cv * np.sum(M * np.outer(u, u) * (p[:, None] - p[None, :]) ** 2))


def pair_weight_sum_symmetrized(plan: OperatorPlan, u_plus: np.ndarray, phi: np.ndarray, t: float = 0.0) -> float:
    """Same sum through ``2 [Q(phi u, phi u) - Q(phi**2 u, u)]`` with the quadratic form ``Q``."""
    g = plan.grid
    a = GridField(g, phi * u_plus)
    b = GridField(g, phi**2 * u_plus)
    c = GridField(g, u_plus)
    return 2 * (quadratic_form(plan, a, a, t) - quadratic_form(plan, b, c, t))


@dataclass
class AuditRow:
    """All terms of the audited inequality at one snapshot."""

    index: int
    t: float
    dt_energy: float
    ext_energy: float
    pair: float
    pair_check: float
    ext_cutoff: float
    drift_term: float
    forcing_term: float
    transport: float
    M0: float
    lhs: float
    rhs: float
    constant: float

    def to_dict(self) -> dict:
        return asdict(self)


AUDIT_COLUMNS = ("index", "t", "dt_energy", "ext_energy", "pair", "pair_check", "ext_cutoff",
                 "drift_term", "forcing_term", "transport", "M0", "lhs", "rhs", "constant")


def _local_energy(u: np.ndarray, phi: np.ndarray, cv: float) -> float:
    return float(cv * np.sum((phi * np.maximum(u, 0.0)) ** 2))


def _drift_bound(B: Optional[np.ndarray], phi_support: np.ndarray, d: int, s: float, cv: float) -> float:
    """``||B||_{L^{d/s}(B_2)}**2``."""
    if B is None:
        return 0.0
    mag = np.sqrt(np.sum(np.asarray(B) ** 2, axis=0))
    p = d / s
    return float((cv * np.sum(mag[phi_support] ** p)) ** (2 / p))


def energy_inequality_audit(traj, index: int, plan: OperatorPlan, center=None,
                            zgrid: Optional[ZGrid] = None, check_pairing: bool = True) -> AuditRow:
    """Audit row at snapshot ``index`` (needs both neighbouring snapshots)."""
    n = len(traj.times)
    if not 0 < index < n - 1:
        raise CadenceError(f"snapshot {index} needs neighbours on both sides (have {n} snapshots)")
    grid = traj.grid
    s = traj.s
    cv = grid.cell_volume
    phi, gphi = space_cutoff(grid, center)
    u = traj.fields[index]
    up = np.maximum(u, 0.0)
    t = float(traj.times[index])

    e_prev = _local_energy(traj.fields[index - 1], phi, cv)
    e_next = _local_energy(traj.fields[index + 1], phi, cv)
    dt_energy = (e_next - e_prev) / (traj.times[index + 1] - traj.times[index - 1])

    zgrid = zgrid or ZGrid.geometric(grid.h / 4, 2.0, 64)
    ext = extend(GridField(grid, u, t), s, zgrid)
    gx, dz = extension_gradient(ext)
    z = zgrid.z_levels
    psi, dpsi = height_cutoff(z)
    shp = (-1,) + (1,) * grid.d
    psi_, dpsi_ = psi.reshape(shp), dpsi.reshape(shp)
    vstar = ext.values
    vplus = np.maximum(vstar, 0.0)
    on = vstar > 0
    eta = phi[None] * psi_
    # grad(eta v+) = v+ grad(eta) + eta 1{v > 0} grad(v)
    comp_x = vplus[:, None] * (gphi[None] * psi_[:, None]) + (eta * on)[:, None] * gx
    comp_z = vplus * phi[None] * dpsi_ + eta * on * dz
    dens = np.sum(comp_x**2, axis=1) + comp_z**2
    flux, grad = boundary_layer(ext)
    z0 = z[0]
    on0 = u > 0
    d_s = ext.profile.d_s
    grad_phu = np.stack([gphi[a] * up + phi * on0 * grad[a] for a in range(grid.d)])
    layer = (on0 * phi**2 * d_s**2 * flux**2 * z0 ** (2 * s) / (2 * s)
             + np.sum(grad_phu**2, axis=0) * z0 ** (2 - 2 * s) / (2 - 2 * s))
    ext_energy = weighted_integral(ext, dens, None, layer)
    cut_dens = np.sum((gphi[None] * psi_[:, None]) ** 2, axis=1) + (phi[None] * dpsi_) ** 2
    ext_cutoff = weighted_integral(ext, cut_dens * vplus**2, None,
                                   np.sum(gphi**2, axis=0) * up**2 * z0 ** (2 - 2 * s) / (2 - 2 * s))

    pair = pair_weight_sum(plan, up, phi, t)
    pair_check = pair_weight_sum_symmetrized(plan, up, phi, t) if check_pairing else float("nan")

    B = None
    if traj.drifts is not None:
        B = traj.drifts[index]
    M0 = _drift_bound(B, phi > 0, grid.d, s, cv)
    grad_phi2 = np.sum(gphi**2, axis=0)
    drift_term = M0 * cv * float(np.sum(grad_phi2 * up**2))
    transport = 0.0
    if B is not None:
        transport = cv * float(np.sum(sum(B[a] * 2 * phi * gphi[a] for a in range(grid.d)) * up**2 / 2))
    g = traj.forcing
    forcing_term = 0.0 if g is None else cv * float(np.sum(phi**2 * up * np.abs(g)))

    lhs = dt_energy + ext_energy
    rhs = pair + ext_cutoff + drift_term + forcing_term
    if rhs > 0:
        const = max(lhs, 0.0) / rhs
    else:
        const = 0.0 if lhs <= 0 else float("inf")
    return AuditRow(index, t, dt_energy, ext_energy, pair, pair_check, ext_cutoff, drift_term,
                    forcing_term, transport, M0, lhs, rhs, const)


def audit_trajectory(traj, plan: OperatorPlan, center=None, zgrid: Optional[ZGrid] = None,
                     check_pairing: bool = False) -> list:
    """Audit rows at every interior snapshot."""
    return [energy_inequality_audit(traj, i, plan, center, zgrid, check_pairing)
            for i in range(1, len(traj.times) - 1)]
