"""Kernels defined through a characteristic function supported on [-1, 1].

A kernel ``w`` is specified by its Fourier transform ``phi_w``; the spatial
kernel is recovered by inversion,

.. math::

    w(x) = \\frac{1}{\\pi} \\int_0^1 \\phi_w(s) \\cos(s x)\\, ds .

Polynomial characteristic functions get an exact tail expansion, exact
moments and a closed-form spatial kernel away from the origin.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P

from ._quadrature import gauss_legendre, panels_for

# Below this |x| the closed form loses digits to cancellation.
_CLOSED_FORM_MIN_X = 8.0


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A symmetric kernel given through its characteristic function.

    Attributes
    ----------
    name : str
    phi_w : callable
        Vectorised even function, zero outside ``[-1, 1]``.
    tail_A, tail_alpha : float
        ``phi_w(1 - t) ~ tail_A * t**tail_alpha`` as ``t -> 0``.
    second_moment : float
        ``int u**2 w(u) du``, equal to ``-phi_w''(0)``.
    coefficients : tuple of float, optional
        Power-series coefficients of ``phi_w`` on ``[-1, 1]`` when polynomial.
    """

    name: str
    phi_w: Callable
    tail_A: float
    tail_alpha: float
    second_moment: float
    coefficients: Optional[tuple] = field(default=None)

    @classmethod
    def from_polynomial(cls, coefficients, name="custom"):
        """Build a kernel whose ``phi_w`` is the even polynomial ``sum c_k s**k``.

        Tail parameters and the second moment are read off exactly from the
        coefficients.
        """
        c = np.trim_zeros(np.asarray(coefficients, dtype=float), "b")
        if c.size == 0:
            raise ValueError("polynomial kernel needs at least one coefficient")
        if np.any(c[1::2] != 0):
            raise ValueError("phi_w must be even: odd coefficients must vanish")
        c.flags.writeable = False

        def phi_w(s):
            s = np.asarray(s, dtype=float)
            out = np.where(np.abs(s) <= 1.0, P.polyval(s, c), 0.0)
            return out[()] if out.ndim == 0 else out

        shifted = _compose_shift(c)
        scale = max(1.0, np.max(np.abs(shifted)))
        nz = np.flatnonzero(np.abs(shifted) > 1e-12 * scale)
        alpha = int(nz[0]) if nz.size else 0
        A = float(shifted[alpha]) if nz.size else 0.0
        second = -2.0 * c[2] if c.size > 2 else 0.0
        return cls(name, phi_w, A, float(alpha), float(second), tuple(c))


def _compose_shift(c):
    """Coefficients in ``t`` of ``p(1 - t)`` given coefficients of ``p(s)``."""
    out = np.zeros(1)
    power = np.ones(1)
    one_minus_t = np.array([1.0, -1.0])
    for ck in c:
        out = P.polyadd(out, ck * power)
        power = P.polymul(power, one_minus_t)
    return out


def default_kernel():
    """The kernel with ``phi_w(s) = (1 - s**2)**3`` on ``[-1, 1]``."""
    return KernelSpec.from_polynomial([1, 0, -3, 0, 3, 0, -1], name="poly3")


KERNELS = {
    "poly3": default_kernel,
    "poly2": lambda: KernelSpec.from_polynomial([1, 0, -2, 0, 1], name="poly2"),
    # Not a valid kernel for the theory; kept for diagnostics.
    "flat": lambda: KernelSpec.from_polynomial([1], name="flat"),
}


def get_kernel(name):
    """Look up a registered kernel by name."""
    try:
        return KERNELS[name]()
    except KeyError:
        raise ValueError(
            f"unknown kernel {name!r}; choose from {sorted(KERNELS)}"
        ) from None


def _closed_form_cos_integral(c, x):
    """``int_0^1 p(s) cos(s x) ds`` by repeated integration by parts."""
    ix = 1j * x
    total = np.zeros_like(x, dtype=complex)
    d = np.asarray(c, dtype=float)
    e1 = np.exp(ix)
    denom = ix
    sign = 1.0
    while d.size and np.any(d != 0):
        total += sign * (P.polyval(1.0, d) * e1 - P.polyval(0.0, d)) / denom
        d = P.polyder(d)
        denom = denom * ix
        sign = -sign
    return total.real


def _quadrature_cos_integral(phi_w, x):
    out = np.empty_like(x)
    panels = np.array([panels_for(v) for v in x])
    for p in np.unique(panels):
        sel = panels == p
        s, wts = gauss_legendre(0.0, 1.0, p)
        vals = phi_w(s) * wts
        out[sel] = np.cos(np.outer(x[sel], s)) @ vals
    return out


def kernel_w(spec, x):
    """Spatial kernel ``w(x)`` obtained by Fourier inversion of ``phi_w``."""
    x = np.abs(np.asarray(x, dtype=float))
    flat = np.atleast_1d(x).ravel()
    out = np.empty_like(flat)
    if spec.coefficients is not None:
        far = flat >= _CLOSED_FORM_MIN_X
        out[far] = _closed_form_cos_integral(spec.coefficients, flat[far])
        near = ~far
    else:
        near = np.ones_like(flat, dtype=bool)
    if np.any(near):
        out[near] = _quadrature_cos_integral(spec.phi_w, flat[near])
    out = out.reshape(np.shape(x)) / np.pi
    return out[()] if out.ndim == 0 else out


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    detail: str = ""


@dataclass
class ConditionWReport:
    """Outcome of :func:`validate_condition_w`, one :class:`Check` per item."""

    kernel: str
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "kernel": self.kernel,
            "passed": self.passed,
            "checks": {
                c.name: {"passed": c.passed, "value": c.value, "detail": c.detail}
                for c in self.checks
            },
        }

    def __str__(self):
        lines = [f"kernel {self.kernel}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            flag = "pass" if c.passed else "FAIL"
            lines.append(f"  [{flag}] {c.name} = {c.value:.10g}  {c.detail}")
        return "\n".join(lines)


def _spatial_integral(spec, R, transform=None, start=0.0):
    """``2 * int_start^R g(w(u)) du`` on unit-width panels."""
    n = int(np.ceil(R - start))
    if n <= 0:
        return 0.0
    u, wts = gauss_legendre(start, R, n)
    vals = kernel_w(spec, u)
    if transform is not None:
        vals = transform(u, vals)
    return 2.0 * float(np.dot(vals, wts))


def _doubling(spec, transform, r0, r_max):
    """Integrals over growing radii; returns radii, cumulative values, increments."""
    radii = [r0]
    totals = [_spatial_integral(spec, r0, transform)]
    incs = []
    while radii[-1] < r_max:
        r = 2 * radii[-1]
        inc = _spatial_integral(spec, r, transform, start=radii[-1])
        radii.append(r)
        totals.append(totals[-1] + inc)
        incs.append(abs(inc))
    return radii, totals, incs


def tail_ratios(spec, ts=(1e-2, 1e-3, 1e-4)):
    """``phi_w(1 - t) / t**alpha`` along a shrinking ``t`` grid."""
    ts = np.asarray(ts, dtype=float)
    alpha = spec.tail_alpha
    return spec.phi_w(1.0 - ts) / ts**alpha


def measured_tail_exponent(spec, t1=1e-3, t2=1e-4):
    """Log-log slope of ``phi_w(1 - t)`` between two small ``t``."""
    a, b = spec.phi_w(1.0 - t1), spec.phi_w(1.0 - t2)
    if a <= 0 or b <= 0:
        return 0.0
    return float(np.log(a / b) / np.log(t1 / t2))


def finite_difference_second_moment(spec, step=1e-4):
    p = spec.phi_w
    return float(-(p(step) - 2.0 * p(0.0) + p(-step)) / step**2)


def validate_condition_w(spec, tol_increment=1e-9, r_max=6400.0):
    """Check a kernel numerically against the admissibility conditions.

    Never raises for a bad kernel; every item is reported with its measured
    value so callers can print diagnostics.
    """
    checks = []

    s = np.linspace(-3.0, 3.0, 6001)
    vals = spec.phi_w(s)
    outside = np.abs(s) > 1.0
    asym = float(np.max(np.abs(vals - spec.phi_w(-s))))
    leak = float(np.max(np.abs(vals[outside])))
    checks.append(Check(
        "support", leak == 0.0 and asym <= 1e-14, leak,
        f"max |phi_w| outside [-1,1]; asymmetry {asym:.3g}",
    ))

    radii, totals, incs = _doubling(spec, lambda u, v: np.abs(v), 25.0, r_max)
    ok = incs[-1] < tol_increment
    checks.append(Check(
        "abs_integrable", ok, totals[-1],
        f"int |w| to R={radii[-1]:g}; last doubling added {incs[-1]:.3g}",
    ))

    total = _spatial_integral(spec, 3200.0)
    checks.append(Check(
        "normalized", abs(total - 1.0) <= 1e-8, total,
        f"int w over [-3200, 3200]; phi_w(0) = {float(spec.phi_w(0.0)):.10g}",
    ))

    radii, totals, incs = _doubling(spec, lambda u, v: u * u * np.abs(v), 200.0, 3200.0)
    ratios = [b / a if a > 0 else np.inf for a, b in zip(incs, incs[1:])]
    ok = all(r <= 0.75 for r in ratios[-3:])
    r = ratios[-1]
    extrapolated = totals[-1] + (incs[-1] * r / (1 - r) if r < 1 else np.inf)
    checks.append(Check(
        "second_abs_moment", ok, extrapolated,
        f"increment ratios under doubling {', '.join(f'{x:.3f}' for x in ratios)}",
    ))

    ratios = tail_ratios(spec)
    dist = np.abs(ratios - spec.tail_A)
    ok = (
        spec.tail_alpha > 0
        and spec.tail_A > 0
        and bool(np.all(np.diff(dist) < 0))
        and dist[-1] <= 0.02 * spec.tail_A
    )
    checks.append(Check(
        "tail_expansion", ok, float(ratios[-1]),
        f"A={spec.tail_A:g}, alpha={spec.tail_alpha:g}, "
        f"measured alpha={measured_tail_exponent(spec):.6g}",
    ))

    fd = finite_difference_second_moment(spec)
    denom = max(abs(spec.second_moment), 1e-300)
    rel = abs(fd - spec.second_moment) / denom
    checks.append(Check(
        "second_moment", rel <= 1e-6, fd,
        f"declared {spec.second_moment:g}, relative error {rel:.3g}",
    ))
    return ConditionWReport(spec.name, checks)
