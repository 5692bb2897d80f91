"""Periodic uniform grids, spectral transforms, derivatives and norms.

Spectral coefficients use the normalization ``F_k = fftn(f) / N**d`` so that
``cos(2*pi*x/L)`` carries ``1/2`` on the modes ``k = +1`` and ``k = -1``.
With that choice the continuous L2 norm on the torus satisfies
``||f||_2**2 = L**d * sum |F_k|**2`` (Parseval).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, DomainError, GridMismatchError

SEMINORM_NORMALIZATION = "hs(f)^2 = L^d * sum_k |xi_k|^(2s) |F_k|^2, F = fftn(f)/N^d, xi = 2 pi k / L"


@dataclass(frozen=True)
class Grid:
    """Periodic grid with ``N`` points per axis on ``[0, L)^d``.

    Parameters
    ----------
    d : int
        Dimension, 1 or 2.
    N : int
        Points per axis, a power of two, at least 8.
    L : float
        Period length.
    """

    d: int
    N: int
    L: float = 2.0 * np.pi

    def __post_init__(self):
        if self.d not in (1, 2):
            raise DimensionError(f"d must be 1 or 2, got {self.d}")
        n = int(self.N)
        if n != self.N or n < 8 or (n & (n - 1)) != 0:
            raise DomainError(f"N must be a power of two >= 8, got {self.N}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise DomainError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "N", n)
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N**self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def volume(self) -> float:
        return self.L**self.d

    def axis(self) -> np.ndarray:
        """Sample positions ``j*h`` along one axis."""
        return np.arange(self.N) * self.h

    def centered_axis(self) -> np.ndarray:
        """Sample positions wrapped into ``[-L/2, L/2)``."""
        x = self.axis()
        return np.where(x >= self.L / 2, x - self.L, x)

    def mesh(self, centered: bool = False) -> list:
        ax = self.centered_axis() if centered else self.axis()
        return list(np.meshgrid(*([ax] * self.d), indexing="ij"))

    def radius(self) -> np.ndarray:
        """Minimum-image distance of every sample to the origin."""
        return np.sqrt(sum(c**2 for c in self.mesh(centered=True)))


@lru_cache(maxsize=32)
def _wavenumbers(d: int, N: int, L: float):
    k1 = 2.0 * np.pi * np.fft.fftfreq(N, d=1.0 / N) / L
    kd = k1.copy()
    kd[N // 2] = 0.0
    if d == 1:
        xi = [k1]
        xid = [kd]
    else:
        xi = list(np.meshgrid(k1, k1, indexing="ij"))
        xid = list(np.meshgrid(kd, kd, indexing="ij"))
    mag = np.sqrt(sum(c**2 for c in xi))
    for a in xi + xid + [mag]:
        a.setflags(write=False)
    return tuple(xi), tuple(xid), mag


def wavevectors(grid: Grid) -> tuple:
    """Components of ``xi = 2 pi k / L`` on the full spectral array."""
    return _wavenumbers(grid.d, grid.N, grid.L)[0]


def derivative_wavevectors(grid: Grid) -> tuple:
    """Wavevector components with the Nyquist entry zeroed, for odd derivatives."""
    return _wavenumbers(grid.d, grid.N, grid.L)[1]


def wavenumber_magnitude(grid: Grid) -> np.ndarray:
    return _wavenumbers(grid.d, grid.N, grid.L)[2]


def dealias_mask(grid: Grid) -> np.ndarray:
    """Boolean mask of the modes kept by the two-thirds rule."""
    k = np.abs(np.fft.fftfreq(grid.N, d=1.0 / grid.N))
    keep = k < grid.N / 3.0
    if grid.d == 1:
        return keep
    return np.logical_and.outer(keep, keep)


@dataclass
class GridField:
    """Real samples of a field on a periodic grid."""

    grid: Grid
    values: np.ndarray
    time_tag: Optional[float] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise DomainError(f"expected {self.grid.size} samples, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise DomainError("field contains non-finite values")
        self.values = v

    def copy(self, values: Optional[np.ndarray] = None) -> "GridField":
        vals = self.values.copy() if values is None else values
        return GridField(self.grid, vals, self.time_tag)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def __add__(self, other):
        return GridField(self.grid, self.values + _vals(other, self.grid), self.time_tag)

    def __sub__(self, other):
        return GridField(self.grid, self.values - _vals(other, self.grid), self.time_tag)

    def __mul__(self, a):
        return GridField(self.grid, self.values * _vals(a, self.grid), self.time_tag)

    __rmul__ = __mul__

    def __neg__(self):
        return GridField(self.grid, -self.values, self.time_tag)


def _vals(other, grid):
    if isinstance(other, GridField):
        check_same_grid(grid, other.grid)
        return other.values
    return other


@dataclass
class SpectralField:
    """Fourier coefficients in numpy FFT ordering, normalized by ``N**d``."""

    grid: Grid
    modes: np.ndarray
    time_tag: Optional[float] = field(default=None)

    def hermitian_defect(self) -> float:
        """Largest mismatch between the mode of ``-k`` and the conjugate of ``k``."""
        m = self.modes
        flipped = np.conj(np.roll(np.flip(m), 1, axis=tuple(range(m.ndim))))
        return float(np.max(np.abs(m - flipped)))


def check_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def field_from_function(grid: Grid, fn, centered: bool = False, t: Optional[float] = None) -> GridField:
    """Sample ``fn(*coords)`` on the grid."""
    return GridField(grid, np.asarray(fn(*grid.mesh(centered=centered)), dtype=float) * np.ones(grid.shape), t)


def to_spectral(f: GridField) -> SpectralField:
    return SpectralField(f.grid, np.fft.fftn(f.values) / f.grid.size, f.time_tag)


def to_physical(F: SpectralField) -> GridField:
    vals = np.fft.ifftn(F.modes * F.grid.size).real
    return GridField(F.grid, vals, F.time_tag)


def apply_multiplier(f: GridField, symbol: np.ndarray) -> GridField:
    """Apply a real Fourier multiplier given on the full spectral array."""
    vals = np.fft.ifftn(np.fft.fftn(f.values) * symbol).real
    return GridField(f.grid, vals, f.time_tag)


def lp_norm(f: GridField, p: float = 2.0) -> float:
    """Discrete Lp norm with quadrature weight ``h**d`` per sample."""
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    w = f.grid.cell_volume
    if p == 2:
        return float(np.sqrt(w * np.sum(a * a)))
    return float((w * np.sum(a**p)) ** (1.0 / p))


def inner(f: GridField, g: GridField) -> float:
    check_same_grid(f.grid, g.grid)
    return float(f.grid.cell_volume * np.sum(f.values * g.values))


def spectral_energy(f: GridField) -> float:
    """``L**d * sum |F_k|**2``, equal to ``lp_norm(f, 2)**2`` by Parseval."""
    F = np.fft.fftn(f.values) / f.grid.size
    return float(f.grid.volume * np.sum(np.abs(F) ** 2))


def gagliardo_seminorm(f: GridField, s: float) -> float:
    """Spectral H^s seminorm ``||(-Delta)^(s/2) f||_2``.

    The normalization is stored in ``SEMINORM_NORMALIZATION``. With the kernel
    constant used by :mod:`driftlab.kernel`, the square equals the Gagliardo
    double integral ``(c/2) * iint (f(x)-f(y))**2 / |x-y|**(d+2s)``.
    """
    if not 0 < s < 1:
        raise DomainError(f"s must lie in (0, 1), got {s}")
    F = np.fft.fftn(f.values) / f.grid.size
    xi = wavenumber_magnitude(f.grid)
    return float(np.sqrt(f.grid.volume * np.sum(xi ** (2 * s) * np.abs(F) ** 2)))


def gradient(f: GridField) -> list:
    """Spectral gradient, Nyquist first derivative set to zero."""
    F = np.fft.fftn(f.values)
    return [GridField(f.grid, np.fft.ifftn(1j * k * F).real, f.time_tag) for k in derivative_wavevectors(f.grid)]


def perp_gradient(f: GridField) -> list:
    """``(-d f/dx2, d f/dx1)``; only defined for ``d = 2``."""
    if f.grid.d != 2:
        raise DimensionError("perp_gradient requires d = 2")
    g1, g2 = gradient(f)
    return [-g2, g1]


def divergence(components: Sequence[GridField]) -> GridField:
    grid = components[0].grid
    kd = derivative_wavevectors(grid)
    acc = np.zeros(grid.shape, dtype=complex)
    for c, k in zip(components, kd):
        acc += 1j * k * np.fft.fftn(c.values)
    return GridField(grid, np.fft.ifftn(acc).real, components[0].time_tag)


def truncate(f: GridField, level: float, sign: str = "plus") -> GridField:
    """``(f - level)_+`` for ``plus`` and ``(-f - level)_+`` for ``minus``."""
    if sign == "plus":
        v = np.maximum(f.values - level, 0.0)
    elif sign == "minus":
        v = np.maximum(-f.values - level, 0.0)
    else:
        raise DomainError(f"sign must be 'plus' or 'minus', got {sign!r}")
    return GridField(f.grid, v, f.time_tag)


def _axis_eval_matrix(grid: Grid, x: np.ndarray) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.fftfreq(grid.N, d=1.0 / grid.N) / grid.L
    E = np.exp(1j * np.outer(x, k))
    E[:, grid.N // 2] = np.cos(x * k[grid.N // 2])
    return E


def interpolate(f: GridField, points: np.ndarray) -> np.ndarray:
    """Evaluate the real trigonometric interpolant of ``f`` at arbitrary points.

    Parameters
    ----------
    points : ndarray, shape (P,) for d = 1 or (P, 2) for d = 2

    Returns
    -------
    ndarray, shape (P,)
    """
    F = np.fft.fftn(f.values) / f.grid.size
    return interpolate_modes(f.grid, F, points)


def interpolate_modes(grid: Grid, F: np.ndarray, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if grid.d == 1:
        return (_axis_eval_matrix(grid, pts.reshape(-1)) @ F).real
    pts = pts.reshape(-1, 2)
    E1 = _axis_eval_matrix(grid, pts[:, 0])
    E2 = _axis_eval_matrix(grid, pts[:, 1])
    return np.sum((E1 @ F) * E2, axis=1).real


def box_weights(grid: Grid, half_width: float, center: Optional[Sequence[float]] = None) -> np.ndarray:
    """Fraction of each grid cell lying inside the box ``center + [-r, r]^d``.

    Cells are ``[x_j - h/2, x_j + h/2]`` and distances are taken with the
    minimum-image convention, so the box must be narrower than the period.
    """
    if half_width <= 0:
        raise DomainError("box half-width must be positive")
    if 2 * half_width > grid.L:
        raise DomainError("box wider than the period")
    c = np.zeros(grid.d) if center is None else np.asarray(center, dtype=float)
    h = grid.h
    out = np.ones(grid.shape)
    for a in range(grid.d):
        x = grid.axis() - c[a]
        x = (x + grid.L / 2) % grid.L - grid.L / 2
        lo = np.maximum(x - h / 2, -half_width)
        hi = np.minimum(x + h / 2, half_width)
        w = np.clip(hi - lo, 0.0, None) / h
        shape = [1] * grid.d
        shape[a] = grid.N
        out = out * w.reshape(shape)
    return out
