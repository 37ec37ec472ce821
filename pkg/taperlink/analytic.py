"""
Closed-form guided-mode roots used as oracles for the numerical solver.
"""

import logging

import numpy as np
from scipy.optimize import brentq
from scipy.special import j0, j1, jn_zeros, kv, kvp

from taperlink.errors import NoGuidedModeError

logger = logging.getLogger(__name__)


def slab_te_neff(
    thickness: float,
    n_core: float,
    n_clad: float,
    wavelength: float,
    order: int = 0,
) -> float:
    """
    Effective index of the TE_m mode of a symmetric planar slab.

    Solves u tan(u) = v (even orders) or -u cot(u) = v (odd orders) with
    u^2 + v^2 = V^2 and V = k0 t/2 sqrt(n_core^2 - n_clad^2).

    Args:
        thickness: Slab thickness, nm
        n_core: Core index
        n_clad: Cladding index (both sides)
        wavelength: Free-space wavelength, nm
        order: Mode order m >= 0

    Returns:
        Effective index of TE_m
    """
    k0 = 2.0 * np.pi / wavelength
    half = thickness / 2.0
    V = k0 * half * np.sqrt(n_core ** 2 - n_clad ** 2)
    lo = order * np.pi / 2.0
    if lo >= V:
        raise NoGuidedModeError(f"TE{order} is cut off (V = {V:.4f})")
    hi = min((order + 1) * np.pi / 2.0, V)

    if order % 2 == 0:
        def f(u):
            return u * np.tan(u) - np.sqrt(max(V ** 2 - u ** 2, 0.0))
    else:
        def f(u):
            return -u / np.tan(u) - np.sqrt(max(V ** 2 - u ** 2, 0.0))

    eps = 1e-12 * max(V, 1.0)
    u = brentq(f, lo + eps, hi - eps, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(np.sqrt(n_core ** 2 - (u / (k0 * half)) ** 2))


def _he1_characteristic(u: float, V: float, c: float) -> float:
    """HE_1m eigenvalue function; zero on a guided HE_1m mode (c = n_clad^2/n_core^2)"""
    w = np.sqrt(V ** 2 - u ** 2)
    Y = kvp(1, w) / (w * kv(1, w))
    Q = (1.0 / u ** 2 + 1.0 / w ** 2) * (1.0 / u ** 2 + c / w ** 2)
    R = np.sqrt(((1.0 - c) * Y / 2.0) ** 2 + Q)
    return j0(u) / (u * j1(u)) - (1.0 / u ** 2 - (1.0 + c) * Y / 2.0 - R)


def fiber_he11_neff(
    diameter: float,
    n_core: float,
    n_clad: float,
    wavelength: float,
    n_scan: int = 2000,
) -> float:
    """
    Effective index of the HE11 mode of a step-index rod from the exact
    vector characteristic equation.

    Args:
        diameter: Rod diameter, nm
        n_core: Rod index
        n_clad: Surrounding index
        wavelength: Free-space wavelength, nm
        n_scan: Points of the bracketing scan in u

    Returns:
        HE11 effective index
    """
    k0 = 2.0 * np.pi / wavelength
    a = diameter / 2.0
    V = k0 * a * np.sqrt(n_core ** 2 - n_clad ** 2)
    c = n_clad ** 2 / n_core ** 2
    u_max = min(V, jn_zeros(0, 1)[0])

    us = np.linspace(1e-6 * u_max, u_max * (1.0 - 1e-9), n_scan)
    values = np.array([_he1_characteristic(u, V, c) for u in us])
    crossings = np.nonzero((values[:-1] > 0) & (values[1:] <= 0) & np.isfinite(values[1:]))[0]
    if crossings.size == 0:
        raise NoGuidedModeError(f"no HE11 root found for V = {V:.4f}")
    i = crossings[0]
    u = brentq(_he1_characteristic, us[i], us[i + 1], args=(V, c), xtol=1e-15, maxiter=500)
    n_eff = float(np.sqrt(n_core ** 2 - (u / (k0 * a)) ** 2))
    logger.debug("HE11 root: V=%.4f u=%.6f n_eff=%.6f", V, u, n_eff)
    return n_eff


def fiber_v_number(diameter: float, n_core: float, n_clad: float, wavelength: float) -> float:
    """Normalized frequency V = (pi d / lambda) sqrt(n_core^2 - n_clad^2)"""
    return float(np.pi * diameter / wavelength * np.sqrt(n_core ** 2 - n_clad ** 2))
