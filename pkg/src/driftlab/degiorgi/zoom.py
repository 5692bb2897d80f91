"""Renormalization zoom: drift-following rescalings of a trajectory.

Level ``k`` uses the map ``Phi_k(y, t) = (sigma y + sigma**(2s) x_k(t), sigma**(2s) t)``
on ``t in [-1, 0]``. The center path solves

    x_k' = mean over B_4 of b_{k-1}(Phi_k(y, t)),   x_k(0) = 0,

with ``b_{-1} = B(x_ref + ., t_ref + .)`` and
``b_k = sigma**(2s-1) (b_{k-1} o Phi_k - x_k')``. The rescaled fields are
``F_k = a (F_{k-1} o Phi_k +- lambda*/4)`` with ``a = 8/(8 - lambda*)`` and
``F_{-1} = u(x_ref + ., t_ref + .)``; all compositions are evaluated exactly,
so ``x_m`` enters at the rescaled time ``sigma**(2s(k-m)) t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import DomainError, PreconditionError
from ..grid import Grid, interpolate_modes


class SpaceTimeInterpolant:
    """Trigonometric interpolation in x and cubic Lagrange interpolation in t.

    ``data`` has shape ``(n_t, *grid)`` (scalar) or ``(n_t, c, *grid)``
    (``c`` components). Times outside the snapshot range raise.
    """

    def __init__(self, grid: Grid, times: np.ndarray, data: np.ndarray):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        data = np.asarray(data, dtype=float)
        self.scalar = data.ndim == grid.d + 1
        if self.scalar:
            data = data[:, None]
        self.n_comp = data.shape[1]
        axes = tuple(range(2, data.ndim))
        self._modes = np.fft.fftn(data, axes=axes) / grid.size

    def _stencil(self, t: float):
        T = self.times
        if not (T[0] - 1e-12 <= t <= T[-1] + 1e-12):
            raise DomainError(f"time {t:g} outside the snapshot range [{T[0]:g}, {T[-1]:g}]")
        n = len(T)
        if n < 4:
            i = int(np.clip(np.searchsorted(T, t) - 1, 0, n - 2))
            idx = np.array([i, i + 1])
        else:
            i = int(np.clip(np.searchsorted(T, t, side="right") - 1, 0, n - 2))
            lo = int(np.clip(i - 1, 0, n - 4))
            idx = np.arange(lo, lo + 4)
        tt = T[idx]
        w = np.ones(len(idx))
        for a in range(len(idx)):
            for b in range(len(idx)):
                if a != b:
                    w[a] *= (t - tt[b]) / (tt[a] - tt[b])
        return idx, w

    def __call__(self, points: np.ndarray, t: float) -> np.ndarray:
        """Values at ``points`` (shape ``(P,)`` or ``(P, d)``) and time ``t``: ``(P,)`` or ``(c, P)``."""
        idx, w = self._stencil(float(t))
        pts = np.asarray(points, dtype=float)
        out = []
        for c in range(self.n_comp):
            F = sum(wi * self._modes[i, c] for i, wi in zip(idx, w))
            out.append(interpolate_modes(self.grid, F, pts))
        out = np.array(out)
        return out[0] if self.scalar else out


def ball_quadrature(d: int, radius: float = 4.0, n: int = 16) -> tuple:
    """Nodes ``(P, d)`` and weights (summing to one) for the average over a ball."""
    x, w = np.polynomial.legendre.leggauss(n)
    if d == 1:
        return (radius * x)[:, None], w / 2
    r = radius * (x + 1) / 2
    wr = w * r
    n_th = 2 * n
    th = 2 * np.pi * np.arange(n_th) / n_th
    R, TH = np.meshgrid(r, th, indexing="ij")
    W = np.repeat(wr[:, None], n_th, axis=1)
    nodes = np.stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()], axis=1)
    W = W.ravel()
    return nodes, W / W.sum()


@dataclass
class ZoomState:
    """One level of the zoom sequence.

    ``path_t``/``path_x`` sample the center path on ``[-1, 0]``; ``F`` holds
    the rescaled field on the sample cylinder ``sample_y x sample_t``.
    """

    level: int
    sigma: float
    lambda_star: float
    path_t: np.ndarray
    path_x: np.ndarray
    path_xdot: np.ndarray
    sample_y: np.ndarray
    sample_t: np.ndarray
    F: np.ndarray
    b: Optional[np.ndarray]
    amplification: float
    offset: float
    sign: int
    osc: float
    sup_x: float
    sup_xdot: float


@dataclass
class ZoomResult:
    states: list
    osc: np.ndarray
    ratios: np.ndarray
    alpha_fit: float
    alpha_pred: float
    truncated_at: Optional[int] = None
    truncation_reason: str = ""
    warnings: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"levels": len(self.states), "osc": self.osc.tolist(), "ratios": self.ratios.tolist(),
                "alpha_fit": self.alpha_fit, "alpha_pred": self.alpha_pred,
                "signs": [st.sign for st in self.states],
                "sup_x": [st.sup_x for st in self.states], "sup_xdot": [st.sup_xdot for st in self.states],
                "truncated_at": self.truncated_at, "truncation_reason": self.truncation_reason,
                "warnings": list(self.warnings)}


def predicted_alpha(lambda_star: float, sigma: float) -> float:
    """``|log(1 - lambda*/8)| / |log sigma|``."""
    return abs(np.log(1 - lambda_star / 8)) / abs(np.log(sigma))


class _Chain:
    """Recursive evaluation of ``b_k`` and of the composed position maps."""

    def __init__(self, drift: Optional[SpaceTimeInterpolant], x_ref: np.ndarray, t_ref: float,
                 sigma: float, s: float, d: int, L: float, quad_n: int):
        self.drift = drift
        self.x_ref = x_ref
        self.t_ref = t_ref
        self.sigma = sigma
        self.s = s
        self.d = d
        self.L = L
        self.paths = []
        self.nodes, self.weights = ball_quadrature(d, 4.0, quad_n)
        self._xdot_cache: dict = {}

    def x(self, j: int, t: float) -> np.ndarray:
        if self.drift is None:
            return np.zeros(self.d)
        return self.paths[j].sol(t)

    def xdot(self, j: int, t: float) -> np.ndarray:
        if self.drift is None:
            return np.zeros(self.d)
        key = (j, float(t))
        if key not in self._xdot_cache:
            self._xdot_cache[key] = self.rhs(j, t, self.x(j, t))
        return self._xdot_cache[key]

    def rhs(self, k: int, t: float, xk: np.ndarray) -> np.ndarray:
        """Average of ``b_{k-1}(sigma y + sigma**(2s) x_k, sigma**(2s) t)`` over ``B_4``."""
        sg, s2 = self.sigma, self.sigma ** (2 * self.s)
        Y = sg * self.nodes + s2 * np.asarray(xk)[None, :]
        vals = self.b(k - 1, Y, s2 * t)
        return vals @ self.weights

    def b(self, j: int, Y: np.ndarray, t: float) -> np.ndarray:
        """``b_j`` at points ``Y`` (shape ``(P, d)``) and time ``t``: shape ``(d, P)``."""
        if self.drift is None:
            return np.zeros((self.d, len(Y)))
        if j == -1:
            pts = self.x_ref[None, :] + Y
            return self.drift(pts if self.d > 1 else pts[:, 0], self.t_ref + t)
        sg, s2 = self.sigma, self.sigma ** (2 * self.s)
        inner = self.b(j - 1, sg * Y + s2 * self.x(j, t)[None, :], s2 * t)
        return sg ** (2 * self.s - 1) * (inner - self.xdot(j, t)[:, None])

    def position(self, k: int, Y: np.ndarray, t: float) -> tuple:
        """Physical point and time reached from level-``k`` coordinates ``(Y, t)``."""
        sg, s2 = self.sigma, self.sigma ** (2 * self.s)
        P = np.asarray(Y, dtype=float)
        tau = float(t)
        for j in range(k, -1, -1):
            P = sg * P + s2 * self.x(j, tau)[None, :]
            tau = s2 * tau
        return self.x_ref[None, :] + P, self.t_ref + tau


def _cylinder(d: int, radius: float, height: float, n_y: int, n_t: int) -> tuple:
    """Sample points of ``B_radius x [-height, 0]`` (cube-inscribed ball grid)."""
    ax = np.linspace(-radius, radius, n_y)
    if d == 1:
        Y = ax[:, None]
    else:
        g = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
        Y = g[np.sum(g**2, axis=1) <= radius**2 * (1 + 1e-12)]
    return Y, np.linspace(-height, 0.0, n_t)


def zoom_sequence(traj, sigma: float, lambda_star: float, K_max: int = 6, s: Optional[float] = None,
                  t_ref: Optional[float] = None, x_ref: Optional[Sequence[float]] = None,
                  n_y: int = 9, n_t: int = 9, quad_n: int = 16, path_samples: int = 33,
                  rtol: float = 1e-8, atol: float = 1e-10) -> ZoomResult:
    """Zoom levels ``0 .. K_max`` with oscillations over ``Q_{1/16}`` and the fitted exponent.

    ``t_ref`` defaults to the final snapshot time and ``x_ref`` to the domain
    center. The sequence stops early (with a recorded reason) when the
    composed center leaves the resolved region ``|x - x_ref| < L/4`` or the
    mapped times leave the trajectory.
    """
    if not 0 < sigma <= 1:
        raise DomainError("sigma must lie in (0, 1]")
    if not 0 < lambda_star <= 0.1:
        raise DomainError("lambda_star must lie in (0, 0.1]")
    s = traj.s if s is None else s
    grid = traj.grid
    d = grid.d
    times = np.asarray(traj.times)
    t_ref = float(times[-1] if t_ref is None else t_ref)
    x_ref = np.full(d, grid.L / 2) if x_ref is None else np.asarray(x_ref, dtype=float).reshape(d)
    if t_ref - sigma ** (2 * s) < times[0] - 1e-12 or t_ref > times[-1] + 1e-12:
        raise PreconditionError(f"trajectory must cover [t_ref - sigma**(2s), t_ref] = "
                                f"[{t_ref - sigma ** (2 * s):g}, {t_ref:g}]")
    u_interp = SpaceTimeInterpolant(grid, times, traj.fields)
    drift = None
    if traj.drifts is not None and np.any(traj.drifts != 0):
        drift = SpaceTimeInterpolant(grid, times, traj.drifts)
    chain = _Chain(drift, x_ref, t_ref, sigma, s, d, grid.L, quad_n)
    a = 8.0 / (8.0 - lambda_star)
    Yq, Tq = _cylinder(d, 1.0 / 16, (1.0 / 16) ** (2 * s), n_y, n_t)
    Y1, T1 = _cylinder(d, 1.0, 1.0, n_y, n_t)
    path_t = np.linspace(-1.0, 0.0, path_samples)

    def raw(k, Y, T):
        """``u`` composed with the level-``k`` maps, shape ``(len(T), len(Y))``."""
        out = np.empty((len(T), len(Y)))
        for i, t in enumerate(T):
            P, tau = chain.position(k, Y, t)
            out[i] = u_interp(P if d > 1 else P[:, 0], tau)
        return out

    states = []
    offset = 0.0
    truncated, reason = None, ""
    for k in range(K_max + 1):
        if drift is None:
            chain.paths.append(None)
        else:
            sol = solve_ivp(lambda t, x: chain.rhs(k, t, x), (0.0, -1.0), np.zeros(d), method="RK45",
                            dense_output=True, rtol=rtol, atol=atol)
            if not sol.success or not np.all(np.isfinite(sol.y)):
                truncated, reason = k, f"center ODE failed at level {k}: {sol.message}"
                break
            chain.paths.append(sol)
        px = np.array([chain.x(k, t) for t in path_t])
        pxd = np.array([chain.xdot(k, t) for t in path_t])
        far = max(float(np.max(np.linalg.norm(chain.position(k, np.zeros((1, d)), t)[0] - x_ref, axis=1)))
                  for t in path_t)
        if far >= grid.L / 4:
            chain.paths.pop()
            truncated, reason = k, f"composed center moved {far:.3g} >= L/4 at level {k}"
            break
        U1 = raw(k, Y1, T1)
        amp = a ** (k + 1)
        # F_k = amp * u(...) + offset_k with offset_k = a (offset_{k-1} +- lambda*/4)
        cand = []
        for sign in (1, -1):
            off = a * (offset + sign * lambda_star / 4)
            cand.append((float(np.max(np.abs(amp * U1 + off))), sign, off))
        sup, sign, offset = min(cand, key=lambda c: (c[0], -c[1]))
        Uq = raw(k, Yq, Tq)
        osc = float(amp * (Uq.max() - Uq.min()))
        b_samp = None
        if drift is not None:
            b_samp = np.stack([chain.b(k, Y1, t) for t in T1])
        states.append(ZoomState(k, sigma, lambda_star, path_t, px, pxd, Y1, T1, amp * U1 + offset, b_samp,
                                amp, offset, sign, osc, float(np.max(np.abs(px))), float(np.max(np.abs(pxd)))))
    osc = np.array([st.osc for st in states])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = osc[1:] / osc[:-1] if len(osc) > 1 else np.array([])
    alpha_fit = float("nan")
    warn = []
    pos = osc > 0
    if np.sum(pos) >= 2 and sigma < 1:
        k_idx = np.arange(len(osc))[pos]
        slope = np.polyfit(k_idx, np.log(osc[pos]), 1)[0]
        alpha_fit = float((slope - np.log(a)) / np.log(sigma))
    elif np.all(osc == 0):
        warn.append("oscillation vanishes at every level")
    return ZoomResult(states, osc, ratios, alpha_fit, predicted_alpha(lambda_star, sigma) if sigma < 1 else float("nan"),
                      truncated, reason, warn)
