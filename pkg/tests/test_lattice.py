import numpy as np
import pytest

from driftlab.lattice import epstein_constant, ewald_periodic_sum, hurwitz_periodic_sum, lattice_power_sum


def _brute_1d(r, L, p, n=200000):
    k = np.arange(-n, n + 1)
    # tail beyond |k| > n integrated: 2 * (nL)**(1-p) / ((p-1) L)
    tail = 2 * (n * L) ** (1 - p) / ((p - 1) * L)
    return np.array([np.sum(np.abs(x + k * L) ** (-p)) + tail for x in r])


@pytest.mark.parametrize("p", [1.5, 1.9])
def test_hurwitz_vs_ewald_vs_brute_1d(p):
    L = 2.0
    r = np.array([0.1, 0.5, 1.3, -0.7])
    h = hurwitz_periodic_sum(r, L, p)
    e = ewald_periodic_sum(r[:, None], L, p, 1)
    assert np.allclose(h, e, rtol=1e-12)
    assert np.allclose(h, _brute_1d(r, L, p), rtol=1e-6)


def test_ewald_vs_brute_2d():
    L, p = 3.0, 2.6
    r = np.array([[0.2, 0.1], [1.0, -1.4], [1.5, 1.5]])
    n = 400
    k = np.arange(-n, n + 1)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    brute = []
    for x in r:
        d2 = (x[0] + K1 * L) ** 2 + (x[1] + K2 * L) ** 2
        inside = np.sqrt(d2) < (n - 1) * L
        # far field approximated by the integral over |y| > R of |y|**(-p) / L**2
        R = (n - 1) * L
        brute.append(np.sum(d2[inside] ** (-p / 2)) + 2 * np.pi * R ** (2 - p) / ((p - 2) * L**2))
    e = lattice_power_sum(r, L, p, 2)
    assert np.allclose(e, brute, rtol=1e-4)


def test_epstein_formulas_in_convergent_range():
    # d = 1 with s = 3/2 is the plain sum of |j|**-2
    assert epstein_constant(1, 1.5) == pytest.approx(np.pi**2 / 3, rel=1e-14)
    # d = 2 with s = 2 is the convergent sum of |j|**-4
    n = 600
    k = np.arange(-n, n + 1)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    r2 = (K1**2 + K2**2).astype(float)
    mask = (r2 > 0) & (r2 < (n - 1) ** 2)
    brute = np.sum(r2[mask] ** -2.0) + 2 * np.pi / (2 * (n - 1) ** 2)
    assert epstein_constant(2, 2.0) == pytest.approx(brute, rel=1e-6)


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("s", [0.25, 0.5])
def test_epstein_negative_in_working_range(d, s):
    assert epstein_constant(d, s) < 0
