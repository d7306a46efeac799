"""Deconvolution kernel and the volatility density estimator.

With ``psi_h(s) = phi_w(s) / phi_k(s / h)`` the deconvolution kernel is

.. math::

    v_h(x) = \\frac{1}{\\pi} \\int_0^1 \\mathrm{Re}\\left[\\psi_h(s) e^{-isx}\\right] ds

and the estimate at ``x`` from log-squares ``y_j`` is
``(1 / (n h)) * sum_j v_h((x - y_j) / h)``. Two evaluation routes are
provided: the direct double sum and the empirical characteristic function
route, which swaps the sum and the integral.
"""

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import specfun
from ._quadrature import PANEL_ORDER, gauss_legendre, panels_for
from .kernels import KernelSpec, default_kernel, get_kernel
from .observe import as_log_squares

MIN_BANDWIDTH = 0.05
# complex entries per matrix block
_BLOCK = 1 << 21


class RegimeWarning(UserWarning):
    """Bandwidth constant outside the range covered by the asymptotic theory."""


def _phase_rate(h):
    # |d/ds arg(1/phi_k(s/h))| plus the exponential growth rate of |1/phi_k|
    digamma_bound = max(2.0, np.log(1.0 / h) + 1.0)
    return (specfun.LOG_2 + digamma_bound + 0.5 * np.pi) / h


def _panel_counts(omega, minimum):
    p = np.maximum(minimum, np.ceil(np.abs(omega) / 3.0).astype(int) + 2)
    return 4 * ((p + 3) // 4)


def _resolve_kernel(spec):
    if spec is None:
        return default_kernel()
    if isinstance(spec, str):
        return get_kernel(spec)
    if isinstance(spec, KernelSpec):
        return spec
    raise TypeError("kernel must be a name or a KernelSpec")


def gamma0(spec, h):
    """``(1/2pi) int_{-1}^{1} |phi_w(s) / phi_k(s/h)| ds``; bounds ``|v_h|``."""
    spec = _resolve_kernel(spec)
    if not h >= MIN_BANDWIDTH:
        raise ValueError(f"h={h!r} below {MIN_BANDWIDTH}: 1/phi_k overflows")
    s, w = gauss_legendre(0.0, 1.0, panels_for(0.5 * np.pi / h, minimum=8))
    mag = np.abs(spec.phi_w(s)) * np.exp(-np.real(specfun.log_phi_k(s / h)))
    return float(np.dot(mag, w) / np.pi)


class DeconvKernel:
    """The deconvolution kernel ``v_h`` at a fixed bandwidth.

    Parameters
    ----------
    h : float
        Bandwidth, at least 0.05.
    spec : KernelSpec or str, optional
        Kernel characteristic function (default ``poly3``).
    quadrature_points : int
        Minimum number of quadrature nodes on ``[0, 1]``; more are added in
        proportion to the oscillation frequency of the integrand.
    """

    def __init__(self, h, spec=None, quadrature_points=64):
        h = float(h)
        if not np.isfinite(h) or h < MIN_BANDWIDTH:
            raise ValueError(f"bandwidth must be >= {MIN_BANDWIDTH}, got {h!r}")
        if quadrature_points < 1:
            raise ValueError("quadrature_points must be positive")
        self.h = h
        self.spec = _resolve_kernel(spec)
        self.quadrature_points = int(quadrature_points)
        self.gamma0 = gamma0(self.spec, h)
        self.phase_rate = _phase_rate(h)
        self._min_panels = max(1, -(-self.quadrature_points // PANEL_ORDER))

    def __repr__(self):
        return f"DeconvKernel(h={self.h!r}, spec={self.spec.name!r})"

    def psi(self, s):
        """``phi_w(s) / phi_k(s / h)`` as a complex array."""
        s = np.asarray(s, dtype=float)
        return self.spec.phi_w(s) * specfun.inverse_phi_k(s / self.h)

    def panels(self, omega):
        return _panel_counts(np.asarray(omega) + self.phase_rate, self._min_panels)

    def __call__(self, x):
        return v_h_eval(self, x)

    def l2_norm(self, method="parseval", radius=200.0):
        return v_h_l2_norm(self, method=method, radius=radius)


def v_h_eval(kernel, x):
    """Evaluate ``v_h`` at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty_like(flat)
    panels = kernel.panels(np.abs(flat))
    for p in np.unique(panels):
        idx = np.flatnonzero(panels == p)
        s, w = gauss_legendre(0.0, 1.0, int(p))
        ps = kernel.psi(s) * w
        re, im = ps.real, ps.imag
        step = max(1, _BLOCK // s.size)
        for a in range(0, idx.size, step):
            sel = idx[a:a + step]
            arg = np.outer(flat[sel], s)
            out[sel] = np.cos(arg) @ re + np.sin(arg) @ im
    out = out.reshape(x.shape) / np.pi
    return out[()] if out.ndim == 0 else out


def v_h_l2_norm(kernel, method="parseval", radius=200.0):
    """``||v_h||_2`` by Parseval (frequency side) or spatial quadrature."""
    if method == "parseval":
        s, w = gauss_legendre(0.0, 1.0, kernel.panels(0.0))
        return float(np.sqrt(np.dot(np.abs(kernel.psi(s)) ** 2, w) / np.pi))
    if method == "spatial":
        # v_h is not even (phi_k is complex), so both half-lines are needed
        u, w = gauss_legendre(-radius, radius, int(np.ceil(2.0 * radius)))
        return float(np.sqrt(np.dot(v_h_eval(kernel, u) ** 2, w)))
    raise ValueError(f"unknown method {method!r}")


@dataclass
class DensityEstimate:
    """Estimated density values on an increasing grid."""

    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("estimate contains non-finite values")

    def integral(self):
        return float(np.trapezoid(self.values, self.grid))


def _check_grid(grid):
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.ndim != 1 or grid.size == 0 or not np.all(np.isfinite(grid)):
        raise ValueError("grid must be a non-empty finite 1-D array")
    return grid


def _meta(data, kernel, variant, **extra):
    meta = {
        "n": int(getattr(data, "n", np.size(as_log_squares(data)))),
        "Delta": float(getattr(data, "Delta", np.nan)),
        "dropped": int(getattr(data, "dropped", 0)),
        "h": kernel.h,
        "kernel": kernel.spec.name,
        "variant": variant,
    }
    meta.update(extra)
    return meta


def direct_values(y, kernel, grid):
    """Direct double sum, one ``v_h`` evaluation per (grid point, datum)."""
    n, h = y.size, kernel.h
    out = np.empty(grid.size)
    for i, x in enumerate(grid):
        out[i] = np.sum(v_h_eval(kernel, (x - y) / h)) / (n * h)
    return out


def ecf_values(y, kernel, grid):
    """Empirical characteristic function route; returns (values, imaginary part)."""
    h = kernel.h
    reach = max(abs(grid.max() - y.min()), abs(y.max() - grid.min())) / h
    s, w = gauss_legendre(0.0, 1.0, int(kernel.panels(reach)))
    s = np.concatenate([-s[::-1], s])
    w = np.concatenate([w[::-1], w])
    t = s / h
    step = max(1, _BLOCK // t.size)
    acc = np.zeros(t.size, dtype=complex)
    for a in range(0, y.size, step):
        acc += np.exp(1j * np.outer(y[a:a + step], t)).sum(axis=0)
    weighted = kernel.psi(s) * (acc / y.size) * w
    full = np.exp(-1j * np.outer(grid, t)) @ weighted / (2.0 * np.pi * h)
    return full.real, full.imag


def estimate_direct(data, kernel, grid):
    """Density estimate by the direct sum over observations."""
    y = as_log_squares(data)
    grid = _check_grid(grid)
    vals = direct_values(y, kernel, grid)
    return DensityEstimate(grid, vals, _meta(data, kernel, "direct"))


def estimate_ecf(data, kernel, grid):
    """Density estimate through the empirical characteristic function."""
    y = as_log_squares(data)
    grid = _check_grid(grid)
    vals, imag = ecf_values(y, kernel, grid)
    resid = float(np.max(np.abs(imag)))
    if resid > 1e-10:
        raise FloatingPointError(f"imaginary residue {resid:.3g} exceeds 1e-10")
    return DensityEstimate(grid, vals, _meta(data, kernel, "ecf", imag_residue=resid))


ESTIMATORS = {"direct": estimate_direct, "ecf": estimate_ecf}


def estimate(data, kernel, grid, variant="ecf"):
    try:
        fn = ESTIMATORS[variant]
    except KeyError:
        raise ValueError(f"variant must be one of {sorted(ESTIMATORS)}") from None
    return fn(data, kernel, grid)


class BandwidthSchedule(NamedTuple):
    h: float
    Delta: float
    in_regime: bool


def bandwidth_schedule(n, delta, gamma, warn=True):
    """Sampling gap ``n**-delta`` and bandwidth ``gamma * pi / log(n)``.

    ``in_regime`` is False when ``gamma <= 4 / delta``, outside the range the
    consistency result covers; the schedule is still returned.
    """
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    in_regime = gamma > 4.0 / delta
    if warn and not in_regime:
        warnings.warn(
            f"gamma={gamma:g} <= 4/delta={4.0 / delta:g}: outside the "
            "consistency regime", RegimeWarning, stacklevel=2,
        )
    return BandwidthSchedule(gamma * np.pi / np.log(n), float(n) ** -delta, in_regime)


def default_grid(y, h, points=101):
    """Uniform grid over mean +- 4 standard deviations of the log-squares."""
    y = as_log_squares(y)
    center, spread = float(np.mean(y)), float(np.std(y))
    if spread == 0.0:
        spread = h
    return np.linspace(center - 4.0 * spread, center + 4.0 * spread, points)
