"""Noise law of ``log Z**2`` for standard normal ``Z``.

The characteristic function is ``pi**-0.5 * 2**(it) * Gamma(1/2 + it)``.
Everything here is evaluated in log space so that reciprocals at large
``|t|`` (which grow like ``exp(pi |t| / 2)``) never overflow.
"""

import numpy as np
from scipy import special

LOG_SQRT_PI = 0.5 * np.log(np.pi)
LOG_2 = np.log(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def log_gamma_complex(z):
    """Principal branch of ``log Gamma(z)`` for ``Re z > 0``.

    Parameters
    ----------
    z : complex or array_like of complex

    Returns
    -------
    complex or ndarray
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z.real <= 0):
        raise ValueError("log_gamma_complex requires Re(z) > 0")
    out = special.loggamma(z)
    return out[()] if out.ndim == 0 else out


def noise_density_k(x):
    """Density of ``log Z**2``: ``(2 pi)**-0.5 * exp(x/2 - exp(x)/2)``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = _INV_SQRT_2PI * np.exp(0.5 * x - 0.5 * np.exp(x))
    return out[()] if out.ndim == 0 else out


def log_phi_k(t):
    """Logarithm of the noise characteristic function (complex)."""
    t = np.asarray(t, dtype=float)
    out = -LOG_SQRT_PI + 1j * t * LOG_2 + special.loggamma(0.5 + 1j * t)
    return out[()] if out.ndim == 0 else out


def phi_k(t):
    """Noise characteristic function ``E exp(i t log Z**2)``."""
    return np.exp(log_phi_k(t))


def inverse_phi_k(t):
    """``1 / phi_k(t)`` computed as ``exp(-log phi_k(t))``."""
    return np.exp(-log_phi_k(t))


def abs_phi_k(t):
    """``|phi_k(t)|``."""
    return np.exp(np.real(log_phi_k(t)))


def phi_k_asymptotic_magnitude(t):
    """Stirling magnitude ``sqrt(2) * exp(-pi |t| / 2)``; undefined at 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t == 0):
        raise ValueError("asymptotic magnitude is undefined at t = 0")
    out = np.sqrt(2.0) * np.exp(-0.5 * np.pi * np.abs(t))
    return out[()] if out.ndim == 0 else out
