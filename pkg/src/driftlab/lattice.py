"""Exact periodic sums of inverse powers over the lattice ``L * Z^d``.

``lattice_power_sum(r, L, p)`` returns ``sum_n |r + n L|**(-p)`` for ``p > d``.
In one dimension this is a pair of Hurwitz zeta values; in any dimension it
can be split into a rapidly convergent real-space part and a reciprocal-space
part (Ewald summation with incomplete gamma functions). Both routes are kept
so tests can check one against the other.
"""

from __future__ import annotations

from functools import lru_cache

import mpmath
import numpy as np
from scipy.special import gamma, gammaincc, zeta


def hurwitz_periodic_sum(r: np.ndarray, L: float, p: float) -> np.ndarray:
    """One-dimensional ``sum_n |r + n L|**(-p)`` for ``r`` not on the lattice."""
    q = np.mod(np.asarray(r, dtype=float), L) / L
    return L ** (-p) * (zeta(p, q) + zeta(p, 1.0 - q))


def _upper_gamma_negative(a: float, x: np.ndarray) -> np.ndarray:
    # Gamma(-a, x) for 0 < a < 1 via Gamma(1-a, x) = -a Gamma(-a, x) + x**(-a) e**(-x)
    return (x ** (-a) * np.exp(-x) - gammaincc(1.0 - a, x) * gamma(1.0 - a)) / a


def ewald_periodic_sum(r: np.ndarray, L: float, p: float, d: int, n_real: int = 4, n_recip: int = 5) -> np.ndarray:
    """``sum_n |r + n L|**(-p)`` by Ewald splitting.

    Parameters
    ----------
    r : ndarray, shape (..., d)
        Offsets, none of them on the lattice.
    p : float
        Exponent with ``d < p < d + 2``.
    """
    r = np.asarray(r, dtype=float).reshape(-1, d)
    nu = p / 2.0
    sexp = nu - d / 2.0
    if not 0 < sexp < 1:
        raise ValueError("ewald_periodic_sum needs d < p < d + 2")
    alpha = np.pi / L**2
    rng_ = np.arange(-n_real, n_real + 1)
    shifts = np.array(np.meshgrid(*([rng_] * d), indexing="ij")).reshape(d, -1).T * L
    real = np.zeros(len(r))
    for sh in shifts:
        rr = np.sum((r + sh) ** 2, axis=1)
        real += rr ** (-nu) * gammaincc(nu, alpha * rr)
    kr = np.arange(-n_recip, n_recip + 1)
    ks = np.array(np.meshgrid(*([kr] * d), indexing="ij")).reshape(d, -1).T
    ks = ks[np.any(ks != 0, axis=1)]
    xi = 2.0 * np.pi * ks / L
    a = np.sum(xi**2, axis=1) / 4.0
    coef = a**sexp * _upper_gamma_negative(sexp, a / alpha)
    recip = alpha**sexp / sexp + np.cos(r @ xi.T) @ coef
    return real + np.pi ** (d / 2.0) / (L**d * gamma(nu)) * recip


def lattice_power_sum(r: np.ndarray, L: float, p: float, d: int) -> np.ndarray:
    """Exact periodization of ``|r|**(-p)``; Hurwitz route for ``d = 1``."""
    if d == 1:
        return hurwitz_periodic_sum(np.asarray(r).reshape(-1), L, p)
    return ewald_periodic_sum(r, L, p, d)


@lru_cache(maxsize=64)
def epstein_constant(d: int, s: float) -> float:
    """Regularized ``sum_{j != 0} |j|**(2 - d - 2s)`` over ``Z^d``.

    For ``d = 1`` this is ``2 zeta(2s - 1)``; for ``d = 2`` the square-lattice
    identity ``sum |j|**(-2z) = 4 zeta(z) beta(z)`` with the Dirichlet beta
    function gives ``4 zeta(s) beta(s)``. Both are analytic continuations and
    negative for ``0 < s <= 1/2``.
    """
    if d == 1:
        return float(2 * mpmath.zeta(2 * s - 1))
    if d == 2:
        beta = mpmath.mpf(4) ** (-s) * (mpmath.zeta(s, 0.25) - mpmath.zeta(s, 0.75))
        return float(4 * mpmath.zeta(s) * beta)
    raise ValueError("d must be 1 or 2")
