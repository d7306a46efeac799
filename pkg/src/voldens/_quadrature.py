"""Composite Gauss-Legendre rules shared by the Fourier integrals."""

from functools import lru_cache

import numpy as np

PANEL_ORDER = 16


@lru_cache(maxsize=None)
def _unit_rule(panels):
    x, w = np.polynomial.legendre.leggauss(PANEL_ORDER)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def gauss_legendre(a, b, panels):
    """Nodes and weights of a composite 16-point rule on ``[a, b]``."""
    nodes, weights = _unit_rule(int(panels))
    return a + (b - a) * nodes, (b - a) * weights


def panels_for(omega, per_radian=1.0 / 3.0, minimum=4):
    """Panel count keeping the phase sweep per panel under three radians.

    Counts are rounded up to a multiple of four so nearby frequencies share
    a rule, which keeps vectorised evaluation cheap.
    """
    p = max(minimum, int(np.ceil(abs(omega) * per_radian)) + 2)
    return 4 * ((p + 3) // 4)
