"""Time stepping for ``u_t + B . grad u + L_t u = g`` on a periodic grid.

The diffusion part ``kappa (-Delta)**s`` is diagonal in Fourier space and
treated implicitly. For the fractional family ``kappa = 1`` and the remainder
vanishes; for other kernels ``kappa`` is the midpoint of the modulation bounds
and the remainder ``R = L_t - kappa (-Delta)**s`` is explicit.

Schemes
-------
``cn``
    Implicit midpoint (Crank-Nicolson for the diagonal part) with the
    explicit terms evaluated at the midpoint state, found by a short Picard
    iteration. Mean-square energy then obeys the discrete law
    ``|u+|^2 - |u|^2 = -2 dt Q(u_mid) + 2 dt <g, u_mid>`` up to the Picard residual.
``euler``
    First-order IMEX Euler.
``etd``
    Exponential integrator; exact for drift-free, unforced fractional diffusion.

Transport is written as ``P (B~ . D u~ + D . (B~ u~)) / 2`` with ``P`` the 2/3
dealiasing projection and ``~`` denoting projected fields, so that its
pairing with ``u`` vanishes identically for divergence-free ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .config import RunConfig
from .errors import CFLError, NumericalError, PreconditionError
from .fields import drift_preset, forcing_function, initial_field, leray_project, spectral_divergence
from .grid import Grid, GridField, dealias_mask, derivative_wavevectors, gagliardo_seminorm, wavenumber_magnitude
from .kernel import KernelSpec, modulation_from_dict
from .nonlocal_op import OperatorPlan, apply_operator, build_plan, invert_operator

LEDGER_COLUMNS = ("t", "l2", "linf", "hs", "dissipation", "drift_power", "forcing_power", "cfl")
LEDGER_UNITS = ("time", "u*len^(d/2)", "u", "u*len^(d/2-s)", "u^2*len^(d-2s)", "u^2*len^d/time",
                "u^2*len^d/time", "1")
CFL_LIMIT = 0.5


@dataclass
class DriftSpec:
    """Drift description: ``none``, ``prescribed`` or ``sqg``.

    ``field`` returns the components at time ``t`` for prescribed drifts.
    ``inversion`` selects the SQG inversion route; ``auto`` uses the spectral
    multiplier for the fractional family and the iterative solver otherwise.
    """

    mode: str = "none"
    field: Optional[Callable[[float], list]] = None
    project: bool = False
    tol: float = 1e-10
    inversion: str = "auto"
    max_iter: int = 500


@dataclass
class EnergyLedger:
    """Per-step rows in the fixed column order of :data:`LEDGER_COLUMNS`."""

    rows: List[tuple] = field(default_factory=list)

    def append(self, row: tuple) -> None:
        if len(row) != len(LEDGER_COLUMNS):
            raise ValueError("ledger row has the wrong length")
        if self.rows and row[0] < self.rows[-1][0]:
            raise ValueError("ledger times must be nondecreasing")
        self.rows.append(tuple(float(v) for v in row))

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        j = LEDGER_COLUMNS.index(name)
        return np.array([r[j] for r in self.rows])

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, len(LEDGER_COLUMNS))


@dataclass
class StepInfo:
    """Audit data for one accepted step."""

    t: float
    dt: float
    energy_defect: float
    divergence: float
    picard_residual: float
    inversion_route: str
    inversion_iterations: int
    mean_drift: float
    substeps: int = 1


@dataclass
class Model:
    """Everything the stepper needs, built once per run."""

    grid: Grid
    spec: KernelSpec
    plan: Optional[OperatorPlan]
    kappa: float
    drift: DriftSpec
    forcing: Optional[Callable[[float], np.ndarray]]
    scheme: str = "cn"
    picard: int = 4

    def __post_init__(self):
        g = self.grid
        self.xi = wavenumber_magnitude(g)
        self.frac_symbol = self.xi ** (2 * self.spec.s)
        self.implicit_symbol = self.kappa * self.frac_symbol
        self.kd = derivative_wavevectors(g)
        self.mask = dealias_mask(g)
        self.exact = self.spec.family == "fractional"

    # -- operators -------------------------------------------------------------------------

    def apply_L(self, u: np.ndarray, t: float) -> np.ndarray:
        if self.exact:
            return np.fft.ifftn(np.fft.fftn(u) * self.frac_symbol).real
        return apply_operator(self.plan, GridField(self.grid, u), t).values

    def remainder(self, u: np.ndarray, t: float) -> np.ndarray:
        if self.exact:
            return np.zeros_like(u)
        return self.apply_L(u, t) - np.fft.ifftn(np.fft.fftn(u) * self.implicit_symbol).real

    def dissipation(self, u: np.ndarray, t: float) -> float:
        """``Q(u, u) = <u, L_t u>``."""
        return float(self.grid.cell_volume * np.sum(u * self.apply_L(u, t)))

    def velocity(self, u: np.ndarray, t: float) -> tuple:
        """Drift components, inversion route and iteration count."""
        g = self.grid
        mode = self.drift.mode
        if mode == "none":
            return None, "none", 0
        if mode == "prescribed":
            comps = [np.asarray(c, dtype=float) for c in self.drift.field(t)]
            if self.drift.project:
                comps = leray_project(comps, g)
            return comps, "prescribed", 0
        return sqg_velocity(GridField(g, u), self.spec.s, self.drift, self.plan, t)

    def transport(self, u: np.ndarray, B: Optional[list]) -> np.ndarray:
        if B is None:
            return np.zeros_like(u)
        m = self.mask
        U = np.fft.fftn(u) * m
        ut = np.fft.ifftn(U).real
        Bt = [np.fft.ifftn(np.fft.fftn(b) * m).real for b in B]
        adv = sum(b * np.fft.ifftn(1j * k * U).real for b, k in zip(Bt, self.kd))
        cons = sum(1j * k * np.fft.fftn(b * ut) for b, k in zip(Bt, self.kd))
        T = 0.5 * (np.fft.fftn(adv) + cons) * m
        T.flat[0] = 0.0
        return np.fft.ifftn(T).real

    def explicit(self, u: np.ndarray, t: float) -> tuple:
        """``N(u) = T(u) + R(u) - g``, plus the drift used."""
        B, route, its = self.velocity(u, t)
        N = self.transport(u, B) + self.remainder(u, t)
        if self.forcing is not None:
            N = N - self.forcing(t)
        return N, B, route, its


def sqg_velocity(u: GridField, s: float, drift: Optional[DriftSpec] = None,
                 plan: Optional[OperatorPlan] = None, t: float = 0.0) -> tuple:
    """``B = grad_perp L^{-1} (u - mean u)`` in two dimensions.

    Returns ``(components, route, iterations)``. The spectral route divides by
    ``|xi|**(2s)``; the iterative route inverts the quadrature operator of ``plan``.
    """
    grid = u.grid
    if grid.d != 2:
        raise PreconditionError("the SQG drift needs d = 2")
    drift = drift or DriftSpec(mode="sqg")
    route = drift.inversion
    if route == "auto":
        route = "spectral-fractional" if plan is None or plan.spec.family == "fractional" else "iterative-general"
    if route == "spectral-fractional":
        res = invert_operator(float(s), u, tol=drift.tol)
    else:
        if plan is None:
            raise PreconditionError("iterative inversion needs an operator plan")
        res = invert_operator(plan, u, tol=drift.tol, max_iter=drift.max_iter, t=t)
    psi = np.fft.fftn(res.field.values)
    k1, k2 = derivative_wavevectors(grid)
    comps = [np.fft.ifftn(-1j * k2 * psi).real, np.fft.ifftn(1j * k1 * psi).real]
    return comps, res.route, res.iterations


@dataclass
class SolverState:
    u: GridField
    t: float
    step_index: int = 0
    B: Optional[list] = None
    ledger: EnergyLedger = field(default_factory=EnergyLedger)
    info: List[StepInfo] = field(default_factory=list)


def build_kernel(cfg: RunConfig) -> KernelSpec:
    k = cfg["kernel"]
    mod = modulation_from_dict(k["modulation"]) if k["family"] == "modulated" else None
    table = None
    if k["family"] == "tabulated":
        table = (np.asarray(k["table"]["r"], dtype=float), np.asarray(k["table"]["k"], dtype=float))
    return KernelSpec(cfg.d, k["s"], k["lambda"], k["family"], mod, table)


def build_model(cfg: RunConfig) -> Model:
    g = cfg["grid"]
    grid = Grid(g["d"], g["N"], g["L"])
    spec = build_kernel(cfg)
    plan = None
    kappa = 1.0
    if spec.family != "fractional":
        plan = build_plan(spec, grid, pv_scheme=cfg["kernel"]["pv_scheme"])
        lo, hi = spec.modulation_bounds()
        kappa = 0.5 * (lo + hi)
    dc = cfg["drift"]
    drift = DriftSpec(dc["mode"], None, bool(dc["project"]), dc["tol"], dc["inversion"], int(dc["max_iter"]))
    if dc["mode"] == "prescribed":
        drift.field = drift_preset(grid, dc)
        comps = drift.field(0.0)
        nb = np.sqrt(sum(np.sum(c * c) for c in comps))
        nd = np.sqrt(np.sum(spectral_divergence(comps, grid) ** 2))
        if nd > 1e-8 * nb and not drift.project:
            raise PreconditionError(f"prescribed drift is not divergence free (|div B|/|B| = {nd / nb:.2e})")
    t = cfg["time"]
    return Model(grid, spec, plan, kappa, drift, forcing_function(grid, cfg["forcing"]), t["scheme"], t["picard"])


def _cfl(model: Model, B: Optional[list], dt: float) -> float:
    if B is None:
        return 0.0
    return float(dt * max(np.max(np.abs(b)) for b in B) / model.grid.h)


def _check_finite(u: np.ndarray, state: SolverState) -> None:
    if not np.all(np.isfinite(u)):
        raise NumericalError(f"non-finite values at step {state.step_index + 1}", last_state=state)


def _advance(model: Model, u: np.ndarray, t: float, dt: float):
    """One step from ``u`` at ``t``; returns ``(u_new, u_mid, B_mid, route, its, picard_res)``."""
    S = model.implicit_symbol
    U = np.fft.fftn(u)
    if model.scheme == "etd":
        N, B, route, its = model.explicit(u, t)
        z = S * dt
        E = np.exp(-z)
        phi1 = np.where(z > 1e-12, -np.expm1(-z) / np.where(z > 0, z, 1.0), 1.0 - z / 2)
        un = np.fft.ifftn(E * U - dt * phi1 * np.fft.fftn(N)).real
        return un, 0.5 * (u + un), B, route, its, 0.0
    if model.scheme == "euler":
        N, B, route, its = model.explicit(u, t)
        un = np.fft.ifftn((U - dt * np.fft.fftn(N)) / (1 + dt * S)).real
        return un, 0.5 * (u + un), B, route, its, 0.0
    tm = t + 0.5 * dt
    num = (1 - 0.5 * dt * S) * U
    den = 1 + 0.5 * dt * S
    mid = u
    res = np.inf
    for _ in range(model.picard):
        N, B, route, its = model.explicit(mid, tm)
        un = np.fft.ifftn((num - dt * np.fft.fftn(N)) / den).real
        new_mid = 0.5 * (u + un)
        scale = np.sqrt(np.sum(new_mid**2))
        res = float(np.sqrt(np.sum((new_mid - mid) ** 2)) / scale) if scale > 0 else 0.0
        mid = new_mid
    return un, mid, B, route, its, res


def step(state: SolverState, model: Model, dt: float, energy_tol: Optional[float] = None) -> SolverState:
    """Advance one step of size ``dt`` and append a ledger row.

    Raises
    ------
    CFLError
        If ``dt * max|B| / h`` exceeds 0.5 for the drift at the start of the step.
    NumericalError
        If the new state is not finite.
    """
    u = state.u.values
    t = state.t
    grid = model.grid
    B0, _, _ = model.velocity(u, t)
    cfl0 = _cfl(model, B0, dt)
    if cfl0 > CFL_LIMIT:
        bmax = max(np.max(np.abs(b)) for b in B0)
        raise CFLError(f"CFL number {cfl0:.3f} exceeds {CFL_LIMIT}", suggested_dt=0.9 * CFL_LIMIT * grid.h / bmax,
                       last_state=state)
    un, mid, B, route, its, pres = _advance(model, u, t, dt)
    _check_finite(un, state)
    tm = t + 0.5 * dt
    cv = grid.cell_volume
    Q = model.dissipation(mid, tm)
    drift_power = float(cv * np.sum(model.transport(mid, B) * mid)) if B is not None else 0.0
    forcing_power = float(cv * np.sum(model.forcing(tm) * mid)) if model.forcing is not None else 0.0
    e_old = cv * np.sum(u * u)
    e_new = cv * np.sum(un * un)
    balance = e_new - e_old + 2 * dt * (Q - forcing_power)
    defect = abs(balance) / (dt * Q) if Q > 0 else abs(balance)
    if energy_tol is not None and model.forcing is None and defect > energy_tol:
        raise NumericalError(f"energy law defect {defect:.3e} exceeds {energy_tol}", last_state=state)
    div = 0.0
    if B is not None:
        nb = np.sqrt(sum(np.sum(b * b) for b in B))
        div = float(np.sqrt(np.sum(spectral_divergence(B, grid) ** 2)) / nb) if nb > 0 else 0.0
    t_new = t + dt
    ufield = GridField(grid, un, t_new)
    row = (t_new, float(np.sqrt(e_new)), float(np.max(np.abs(un))), gagliardo_seminorm(ufield, model.spec.s),
           Q, drift_power, forcing_power, _cfl(model, B, dt))
    state.ledger.append(row)
    state.info.append(StepInfo(t_new, dt, float(defect), div, pres, route, its, float(np.mean(un))))
    return SolverState(ufield, t_new, state.step_index + 1, B, state.ledger, state.info)


def step_adaptive(state: SolverState, model: Model, dt: float, max_halvings: int = 6,
                  energy_tol: Optional[float] = None) -> SolverState:
    """Take a step of size ``dt``, splitting it into halves on CFL or energy-law failure."""
    for level in range(max_halvings + 1):
        n = 2**level
        h = dt / n
        trial = SolverState(state.u, state.t, state.step_index, state.B, EnergyLedger(list(state.ledger.rows)),
                            list(state.info))
        try:
            for _ in range(n):
                trial = step(trial, model, h, energy_tol)
        except (CFLError, NumericalError) as exc:
            if level == max_halvings or not np.all(np.isfinite(state.u.values)):
                raise
            if isinstance(exc, NumericalError) and not isinstance(exc, CFLError) and "energy" not in str(exc):
                raise
            continue
        if n > 1:
            # keep one ledger row per requested step: collapse the substeps
            rows = trial.ledger.rows[len(state.ledger):]
            infos = trial.info[len(state.info):]
            last = rows[-1]
            merged = last[:4] + (float(np.mean([r[4] for r in rows])), float(np.mean([r[5] for r in rows])),
                                 float(np.mean([r[6] for r in rows])), max(r[7] for r in rows))
            state.ledger.append(merged)
            info = infos[-1]
            info.substeps = n
            info.energy_defect = max(i.energy_defect for i in infos)
            info.dt = dt
            state.info.append(info)
            return SolverState(trial.u, trial.t, state.step_index + 1, trial.B, state.ledger, state.info)
        state.ledger.rows[:] = trial.ledger.rows
        state.info[:] = trial.info
        return SolverState(trial.u, trial.t, trial.step_index, trial.B, state.ledger, state.info)
    raise AssertionError("unreachable")


@dataclass
class Trajectory:
    """Snapshots of a run together with its ledger and model."""

    grid: Grid
    s: float
    times: np.ndarray
    fields: np.ndarray
    ledger: EnergyLedger
    info: List[StepInfo]
    model: Optional[Model] = None
    drifts: Optional[np.ndarray] = None
    config: Optional[RunConfig] = None

    def snapshot(self, i: int) -> GridField:
        return GridField(self.grid, self.fields[i], float(self.times[i]))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def forcing(self) -> Optional[np.ndarray]:
        if self.model is None or self.model.forcing is None:
            return None
        return self.model.forcing(0.0)


def simulate(cfg: RunConfig, u0: Optional[GridField] = None, model: Optional[Model] = None,
             record_drift: bool = True) -> Trajectory:
    """Run the configured simulation and return snapshots plus ledger."""
    model = model or build_model(cfg)
    grid = model.grid
    if u0 is None:
        u0 = initial_field(grid, cfg["initial"], cfg.seed)
    tc = cfg["time"]
    dt, t_end = tc["dt"], tc["t_end"]
    n_steps = int(round(t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - t_end) > 1e-9 * t_end:
        raise PreconditionError("time.t_end must be a positive multiple of time.dt")
    every = cfg["diagnostics"]["snapshot_every"]
    energy_tol = tc["energy_tol"] if (tc["adaptive"] and cfg["diagnostics"]["energy_law"]) else None
    state = SolverState(GridField(grid, u0.values, 0.0), 0.0)
    times = [0.0]
    snaps = [state.u.values.copy()]
    B0, _, _ = model.velocity(state.u.values, 0.0)
    drifts = [np.stack(B0) if (B0 is not None and record_drift) else None]
    for n in range(n_steps):
        if tc["adaptive"]:
            state = step_adaptive(state, model, dt, tc["max_halvings"], energy_tol)
        else:
            state = step(state, model, dt)
        # keep t on the nominal grid to avoid drift from repeated addition
        state.t = (n + 1) * dt
        if (n + 1) % every == 0 or n + 1 == n_steps:
            times.append(state.t)
            snaps.append(state.u.values.copy())
            if record_drift:
                Bn, _, _ = model.velocity(state.u.values, state.t)
                drifts.append(np.stack(Bn) if Bn is not None else None)
    dr = None
    if record_drift and drifts[0] is not None:
        dr = np.stack(drifts)
    return Trajectory(grid, model.spec.s, np.array(times), np.stack(snaps), state.ledger, state.info, model, dr, cfg)


def trajectory_from_fields(grid: Grid, s: float, times, fields, drifts=None) -> Trajectory:
    """Wrap precomputed snapshots (e.g. closed-form evolutions) as a trajectory."""
    times = np.asarray(times, dtype=float)
    fields = np.asarray(fields, dtype=float).reshape((len(times),) + grid.shape)
    return Trajectory(grid, s, times, fields, EnergyLedger(), [], None,
                      None if drifts is None else np.asarray(drifts, dtype=float))


def heat_trajectory(u0: GridField, s: float, times) -> Trajectory:
    """Exact drift-free, unforced fractional heat evolution at the given times."""
    times = np.asarray(times, dtype=float)
    sym = wavenumber_magnitude(u0.grid) ** (2 * s)
    U = np.fft.fftn(u0.values)
    fields = np.stack([np.fft.ifftn(U * np.exp(-sym * t)).real for t in times])
    return trajectory_from_fields(u0.grid, s, times, fields)
