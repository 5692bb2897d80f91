"""Symmetric kernels comparable to ``|x - y|**(-d-2s)`` and their validation.

The fractional Laplacian kernel is ``c(d,s) |x-y|**(-d-2s)`` with

    c(d,s) = s * 4**s * Gamma(d/2 + s) / (pi**(d/2) * Gamma(1 - s)),

the constant for which ``(1/2) iint (f(x)-f(y))**2 K = ||(-Delta)**(s/2) f||**2``.
It equals ``1/pi`` for ``d = 1, s = 1/2``.

Modulated kernels are ``a(x, y, t) * c(d,s) * |x-y|**(-d-2s)`` with a
dimensionless modulation ``a``. Ellipticity is checked on the raw ratio
``|x-y|**(d+2s) K`` against ``[c/Lambda, c*Lambda]``. Distances are
minimum-image distances on the torus of period ``L``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gamma

from .errors import DomainError, SingularityError
from .rng import make_rng

KERNEL_FAMILIES = ("fractional", "modulated", "tabulated")


def fractional_constant(d: int, s: float) -> float:
    """Normalization ``c(d,s)`` of the fractional Laplacian kernel."""
    return float(s * 4.0**s * gamma(d / 2.0 + s) / (np.pi ** (d / 2.0) * gamma(1.0 - s)))


def min_image(r: np.ndarray, L: float) -> np.ndarray:
    return (np.asarray(r, dtype=float) + L / 2.0) % L - L / 2.0


def _as_points(x, d):
    a = np.asarray(x, dtype=float)
    return a.reshape(-1, d) if d > 1 else a.reshape(-1, 1)


def _unordered(x, y):
    """Order each pair lexicographically so that f(x, y) == f(y, x) bitwise."""
    swap = np.zeros(len(x), dtype=bool)
    undecided = np.ones(len(x), dtype=bool)
    for a in range(x.shape[1]):
        gt = undecided & (x[:, a] > y[:, a])
        lt = undecided & (x[:, a] < y[:, a])
        swap |= gt
        undecided &= ~(gt | lt)
    lo = np.where(swap[:, None], y, x)
    hi = np.where(swap[:, None], x, y)
    return lo, hi


# -- modulations -----------------------------------------------------------------------

class Modulation:
    """Dimensionless factor ``a(x, y, t)`` multiplying the fractional kernel."""

    kind = "abstract"
    translation_invariant = False
    time_dependent = False

    def __call__(self, x: np.ndarray, y: np.ndarray, t: float, L: float) -> np.ndarray:
        raise NotImplementedError

    def bounds(self) -> tuple:
        """Analytic lower and upper bounds of ``a`` (used for IMEX splitting)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantModulation(Modulation):
    value: float = 1.0
    kind = "constant"
    translation_invariant = True

    def __call__(self, x, y, t, L):
        return np.full(len(x), float(self.value))

    def of_offset(self, r, t, L):
        return np.full(np.shape(r)[:-1] if np.ndim(r) > 1 else np.shape(r), float(self.value))

    def bounds(self):
        return (self.value, self.value)

    def to_dict(self):
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class RadialModulation(Modulation):
    """``a = 1 + amplitude * cos(2 pi |x-y| / wavelength)`` on the minimum-image distance."""

    amplitude: float = 0.3
    wavelength: float = 1.0
    kind = "radial"
    translation_invariant = True

    def of_offset(self, r, t, L):
        r = np.asarray(r, dtype=float)
        if L is not None:
            r = min_image(r, L)
        rho = np.abs(r) if r.ndim == 1 else np.sqrt(np.sum(r**2, axis=-1))
        return 1.0 + self.amplitude * np.cos(2.0 * np.pi * rho / self.wavelength)

    def __call__(self, x, y, t, L):
        r = x - y
        return self.of_offset(r if r.shape[1] > 1 else r[:, 0], t, L)

    def bounds(self):
        return (1.0 - abs(self.amplitude), 1.0 + abs(self.amplitude))

    def to_dict(self):
        return {"type": "radial", "amplitude": self.amplitude, "wavelength": self.wavelength}


@dataclass(frozen=True)
class SumCosineModulation(Modulation):
    """``a = 1 + amplitude * cos(q . (x + y)) * cos(omega t)`` with ``q = 2 pi k / L``.

    Symmetric but not translation invariant, and odd in the direction of
    ``x - y`` about a fixed ``x``, so angular moments do not cancel. The
    factorization ``cos(q.(x+y)) = cos(qx)cos(qy) - sin(qx)sin(qy)`` lets the
    operator be applied with a few periodic convolutions.
    """

    amplitude: float = 0.3
    wavevector: tuple = (1,)
    omega: float = 0.0
    kind = "sum_cosine"

    @property
    def time_dependent(self):
        return self.omega != 0.0

    def _q(self, L, d):
        k = np.zeros(d)
        kv = np.atleast_1d(np.asarray(self.wavevector, dtype=float))
        k[: len(kv)] = kv[:d]
        return 2.0 * np.pi * k / L

    def time_factor(self, t):
        return self.amplitude * np.cos(self.omega * t)

    def __call__(self, x, y, t, L):
        q = self._q(L, x.shape[1])
        return 1.0 + self.time_factor(t) * np.cos((x + y) @ q)

    def rank_terms(self, coords: Sequence[np.ndarray], t: float, L: float) -> list:
        """Terms ``(coef, phi)`` with ``a(x,y) = sum coef * phi(x) * phi(y)``."""
        q = self._q(L, len(coords))
        phase = sum(qa * c for qa, c in zip(q, coords))
        e = self.time_factor(t)
        one = np.ones_like(phase)
        return [(1.0, one), (e, np.cos(phase)), (-e, np.sin(phase))]

    def bounds(self):
        return (1.0 - abs(self.amplitude), 1.0 + abs(self.amplitude))

    def to_dict(self):
        return {"type": "sum_cosine", "amplitude": self.amplitude,
                "wavevector": list(np.atleast_1d(self.wavevector).tolist()), "omega": self.omega}


@dataclass(frozen=True)
class ExpSumModulation(Modulation):
    """``a = contrast ** tanh(zeta(x) + zeta(y))`` for a smooth seeded random field ``zeta``.

    Values lie strictly inside ``(1/contrast, contrast)``.
    """

    contrast: float = 2.0
    seed: int = 0
    modes: int = 3
    scale: float = 1.0
    kind = "exp_sum"

    def _coeffs(self, d):
        g = make_rng(self.seed, "kernel.exp_sum")
        n = 2 * self.modes + 1
        shape = (n,) * d
        c = g.standard_normal(shape) + 1j * g.standard_normal(shape)
        return c / np.sqrt(c.size)

    def zeta(self, x: np.ndarray, L: float) -> np.ndarray:
        d = x.shape[1]
        c = self._coeffs(d)
        ks = np.arange(-self.modes, self.modes + 1)
        if d == 1:
            ph = np.exp(2j * np.pi * np.outer(x[:, 0], ks) / L)
            return self.scale * (ph @ c).real
        e1 = np.exp(2j * np.pi * np.outer(x[:, 0], ks) / L)
        e2 = np.exp(2j * np.pi * np.outer(x[:, 1], ks) / L)
        return self.scale * np.sum((e1 @ c) * e2, axis=1).real

    def __call__(self, x, y, t, L):
        return self.contrast ** np.tanh(self.zeta(x, L) + self.zeta(y, L))

    def bounds(self):
        return (1.0 / self.contrast, self.contrast)

    def to_dict(self):
        return {"type": "exp_sum", "contrast": self.contrast, "seed": self.seed,
                "modes": self.modes, "scale": self.scale}


@dataclass(frozen=True)
class CallableModulation(Modulation):
    """User-supplied ``fn(x, y, t)`` on arrays of shape (P, d); evaluated at ordered pairs."""

    fn: Callable = None
    lower: float = 0.0
    upper: float = np.inf
    kind = "callable"
    time_dependent = True

    def __call__(self, x, y, t, L):
        lo, hi = _unordered(x, y)
        return np.asarray(self.fn(lo, hi, t), dtype=float).reshape(-1)

    def bounds(self):
        return (self.lower, self.upper)

    def to_dict(self):
        return {"type": "callable"}


def modulation_from_dict(cfg: dict) -> Modulation:
    cfg = dict(cfg)
    kind = cfg.pop("type")
    table = {"constant": ConstantModulation, "radial": RadialModulation,
             "sum_cosine": SumCosineModulation, "exp_sum": ExpSumModulation}
    if kind not in table:
        raise DomainError(f"unknown modulation type {kind!r}")
    if kind == "sum_cosine" and "wavevector" in cfg:
        cfg["wavevector"] = tuple(np.atleast_1d(cfg["wavevector"]).tolist())
    return table[kind](**cfg)


# -- kernel description ----------------------------------------------------------------

@dataclass(frozen=True)
class KernelSpec:
    """Kernel description.

    Parameters
    ----------
    d : int
        Spatial dimension.
    s : float
        Order, ``0 < s <= 1/2``.
    lam : float
        Ellipticity constant ``Lambda > 1``.
    family : str
        ``fractional``, ``modulated`` or ``tabulated``.
    modulation : Modulation, optional
        Required for the modulated family.
    table : tuple of (separations, values), optional
        Isotropic samples ``K(r)`` for the tabulated family.
    """

    d: int
    s: float
    lam: float = 2.0
    family: str = "fractional"
    modulation: Optional[Modulation] = None
    table: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if self.d not in (1, 2):
            raise DomainError(f"d must be 1 or 2, got {self.d}")
        if not 0 < self.s <= 0.5:
            raise DomainError(f"s must lie in (0, 1/2], got {self.s}")
        if not self.lam > 1:
            raise DomainError(f"lambda must exceed 1, got {self.lam}")
        if self.family not in KERNEL_FAMILIES:
            raise DomainError(f"unknown kernel family {self.family!r}")
        if self.family == "modulated" and self.modulation is None:
            raise DomainError("modulated family needs a modulation")
        if self.family == "tabulated":
            if self.table is None:
                raise DomainError("tabulated family needs a table")
            r, k = (np.asarray(a, dtype=float) for a in self.table)
            if r.ndim != 1 or r.shape != k.shape or len(r) < 2:
                raise DomainError("table must hold two equal-length 1-d arrays")
            if np.any(np.diff(r) <= 0) or r[0] <= 0 or np.any(k <= 0):
                raise DomainError("table separations must increase from > 0 and values be positive")
            object.__setattr__(self, "table", (r, k))

    @property
    def c(self) -> float:
        return fractional_constant(self.d, self.s)

    @property
    def time_dependent(self) -> bool:
        return self.family == "modulated" and bool(self.modulation.time_dependent)

    @property
    def translation_invariant(self) -> bool:
        if self.family == "modulated":
            return bool(self.modulation.translation_invariant)
        return True

    def modulation_bounds(self) -> tuple:
        """Bounds of ``|x-y|**(d+2s) K / c``."""
        if self.family == "fractional":
            return (1.0, 1.0)
        if self.family == "modulated":
            return self.modulation.bounds()
        r, k = self.table
        ratio = r ** (self.d + 2 * self.s) * k / self.c
        return (float(ratio.min()), float(ratio.max()))

    def profile(self, rho: np.ndarray) -> np.ndarray:
        """Isotropic part: ``c rho**(-d-2s)`` or the interpolated table."""
        rho = np.asarray(rho, dtype=float)
        if self.family != "tabulated":
            return self.c * rho ** (-(self.d + 2 * self.s))
        return _loglog_interp(rho, *self.table)

    def to_dict(self) -> dict:
        out = {"family": self.family, "s": self.s, "lambda": self.lam}
        if self.modulation is not None:
            out["modulation"] = self.modulation.to_dict()
        if self.table is not None:
            out["table"] = {"r": self.table[0].tolist(), "k": self.table[1].tolist()}
        return out


def _loglog_interp(rho, r, k):
    """Piecewise-linear interpolation of log K against log r, end slopes extended."""
    lr, lk = np.log(r), np.log(k)
    x = np.log(rho)
    y = np.interp(x, lr, lk)
    lo_slope = (lk[1] - lk[0]) / (lr[1] - lr[0])
    hi_slope = (lk[-1] - lk[-2]) / (lr[-1] - lr[-2])
    y = np.where(x < lr[0], lk[0] + lo_slope * (x - lr[0]), y)
    y = np.where(x > lr[-1], lk[-1] + hi_slope * (x - lr[-1]), y)
    return np.exp(y)


def tabulate(spec: KernelSpec, separations: np.ndarray) -> KernelSpec:
    """Sample an isotropic kernel's profile and return a tabulated spec."""
    r = np.asarray(separations, dtype=float)
    k = spec.profile(r)
    if spec.family == "modulated":
        if not spec.translation_invariant:
            raise DomainError("only translation-invariant kernels can be tabulated")
        k = k * spec.modulation.of_offset(r, 0.0, None)
    return KernelSpec(spec.d, spec.s, spec.lam, "tabulated", table=(r, k))


def evaluate_kernel(spec: KernelSpec, x, y, t: float = 0.0, L: float = 2 * np.pi) -> np.ndarray:
    """``K_t(x, y)`` on the torus of period ``L`` using minimum-image distance.

    Accepts single points or arrays of shape (P, d). Raises
    :class:`SingularityError` when ``x`` and ``y`` coincide on the torus.
    """
    xa, ya = _as_points(x, spec.d), _as_points(y, spec.d)
    xa, ya = np.broadcast_arrays(xa, ya)
    lo, hi = _unordered(xa, ya)
    r = min_image(hi - lo, L)
    rho = np.sqrt(np.sum(r * r, axis=1))
    if np.any(rho == 0):
        raise SingularityError("kernel evaluated at coincident points")
    val = spec.profile(rho)
    if spec.family == "modulated":
        val = val * spec.modulation(lo, hi, t, L)
    scalar = np.ndim(x) <= (0 if spec.d == 1 else 1) and np.ndim(y) <= (0 if spec.d == 1 else 1)
    return float(val[0]) if scalar else val


# -- validation ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    condition: str
    n_samples: int
    worst_ratio: float
    passed: bool
    witness: dict
    min_ratio: float = float("nan")
    max_ratio: float = float("nan")
    bound: tuple = ()

    def to_dict(self) -> dict:
        return {"condition": self.condition, "n_samples": self.n_samples, "worst_ratio": self.worst_ratio,
                "pass": bool(self.passed), "witness": self.witness, "min_ratio": self.min_ratio,
                "max_ratio": self.max_ratio, "bound": list(self.bound)}


def validate_symmetry(spec: KernelSpec, n_samples: int = 1000, seed: int = 0, L: float = 2 * np.pi,
                      t_range: tuple = (0.0, 1.0)) -> ValidationReport:
    g = make_rng(seed, "kernel.symmetry")
    x = g.uniform(0, L, (n_samples, spec.d))
    y = g.uniform(0, L, (n_samples, spec.d))
    t = g.uniform(*t_range, n_samples)
    kxy = np.array([evaluate_kernel(spec, x[i:i + 1], y[i:i + 1], t[i], L)[0] for i in range(n_samples)])
    kyx = np.array([evaluate_kernel(spec, y[i:i + 1], x[i:i + 1], t[i], L)[0] for i in range(n_samples)])
    diff = np.abs(kxy - kyx) / np.abs(kxy)
    i = int(np.argmax(diff))
    return ValidationReport("symmetry", n_samples, float(diff[i]), bool(diff[i] == 0.0),
                            {"x": x[i].tolist(), "y": y[i].tolist(), "t": float(t[i])})


def validate_ellipticity(spec: KernelSpec, n_samples: int = 1000, seed: int = 0, L: float = 2 * np.pi,
                         t_range: tuple = (0.0, 1.0), rtol: float = 1e-9) -> ValidationReport:
    """Sample ``|x-y|**(d+2s) K`` and compare with ``[c/Lambda, c*Lambda]``."""
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    g = make_rng(seed, "kernel.ellipticity")
    x = g.uniform(0, L, (n_samples, spec.d))
    y = g.uniform(0, L, (n_samples, spec.d))
    t = g.uniform(*t_range, n_samples)
    rho = np.sqrt(np.sum(min_image(x - y, L) ** 2, axis=1))
    ok = rho > 0
    x, y, t, rho = x[ok], y[ok], t[ok], rho[ok]
    if spec.family == "modulated" and spec.time_dependent:
        k = np.concatenate([evaluate_kernel(spec, x[i:i + 1], y[i:i + 1], t[i], L) for i in range(len(t))])
    else:
        k = evaluate_kernel(spec, x, y, float(t[0]) if len(t) else 0.0, L)
    ratio = rho ** (spec.d + 2 * spec.s) * k
    c = spec.c
    lo, hi = c / spec.lam, c * spec.lam
    dev = np.abs(np.log(ratio / c))
    i = int(np.argmax(dev))
    passed = bool(ratio.min() >= lo * (1 - rtol) and ratio.max() <= hi * (1 + rtol))
    return ValidationReport("ellipticity", int(len(ratio)), float(ratio[i]), passed,
                            {"x": x[i].tolist(), "y": y[i].tolist(), "t": float(t[i])},
                            float(ratio.min()), float(ratio.max()), (lo, hi))


def angular_moment(spec: KernelSpec, centers: np.ndarray, rho: float, t: float = 0.0,
                   L: float = 2 * np.pi, n_theta: int = 64) -> np.ndarray:
    """``int_{S^{d-1}} theta K(x, x + rho theta) dH(theta)`` for each center."""
    centers = _as_points(centers, spec.d)
    if spec.d == 1:
        thetas = np.array([[1.0], [-1.0]])
        w = np.ones(2)
    else:
        ang = 2 * np.pi * np.arange(n_theta) / n_theta
        thetas = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        w = np.full(n_theta, 2 * np.pi / n_theta)
    out = np.zeros((len(centers), spec.d))
    for th, wt in zip(thetas, w):
        k = evaluate_kernel(spec, centers, centers + rho * th, t, L)
        out += wt * np.outer(np.atleast_1d(k), th)
    return out


def validate_angular_cancellation(spec: KernelSpec, radii: Sequence[float], n_centers: int = 64, seed: int = 0,
                                  L: float = 2 * np.pi, t: float = 0.0, n_theta: int = 64,
                                  quad_tol: float = 1e-6) -> ValidationReport:
    """Max over centers and radii of ``|angular moment| * rho**d`` against ``Lambda``."""
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii):
        raise DomainError("radii must be positive")
    g = make_rng(seed, "kernel.angular")
    centers = g.uniform(0, L, (n_centers, spec.d))
    worst, wit = -1.0, {}
    for rho in radii:
        m = angular_moment(spec, centers, rho, t, L, n_theta)
        val = np.sqrt(np.sum(m * m, axis=1)) * rho**spec.d
        i = int(np.argmax(val))
        if val[i] > worst:
            worst, wit = float(val[i]), {"x": centers[i].tolist(), "rho": rho, "t": t}
    passed = worst <= spec.lam * (1 + quad_tol)
    return ValidationReport("angular_cancellation", n_centers * len(radii), worst, bool(passed), wit,
                            bound=(0.0, spec.lam))
