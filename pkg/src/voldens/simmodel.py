"""Stationary volatility diffusions and discretely sampled log-prices.

The volatility state ``X`` (either ``sigma**2`` or ``log sigma**2``) solves
``dX = b(X) dt + a(X) dB`` on an interval ``(l, r)``; its invariant density is
proportional to ``a(x)**-2 * exp(2 * int_{x0}^{x} b / a**2)``. The log-price
is ``dS = b_t dt + sigma_t dW`` with ``W`` independent of ``B``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np
from scipy import integrate, special

from .observe import ObservationSeries

STATES = ("sigma2", "log_sigma2")
ROLES = {"init": 0, "volatility": 1, "price": 2}
TABLE_SIZE = 2048


def _zero(t):
    return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A stationary volatility diffusion.

    Attributes
    ----------
    name : str
    state : {"sigma2", "log_sigma2"}
        Which transform of the volatility the SDE drives.
    drift, diffusion : callable
        Vectorised coefficient functions ``b`` and ``a`` of the state.
    state_space : tuple of float
        Open interval ``(l, r)``; infinite ends allowed.
    price_drift : callable
        ``b_t`` of the log-price, a vectorised function of time.
    affine : tuple, optional
        ``(b0, b1, c, p)`` when ``b(x) = b0 + b1 x`` and ``a(x) = c |x|**p``;
        enables the compiled Euler loop.
    point_mass : float, optional
        Degenerate model: the state is constant at this value.
    """

    name: str
    state: str
    drift: Callable
    diffusion: Callable
    state_space: tuple = (-np.inf, np.inf)
    price_drift: Callable = _zero
    affine: Optional[tuple] = None
    point_mass: Optional[float] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.state not in STATES:
            raise ValueError(f"state must be one of {STATES}")
        l, r = self.state_space
        if not l < r:
            raise ValueError("state_space must be an interval (l, r) with l < r")
        if self.point_mass is not None:
            if not l <= self.point_mass <= r:
                raise ValueError("point mass outside the state space")
            object.__setattr__(self, "_law", None)
            return
        probe = _interior_probe(l, r)
        if np.any(np.asarray(self.diffusion(probe)) <= 0):
            raise ValueError("diffusion coefficient must be positive on the interior")
        object.__setattr__(self, "_law", InvariantLaw(self))

    @property
    def law(self):
        if self._law is None:
            raise ValueError(f"model {self.name!r} is degenerate: no invariant density")
        return self._law

    def to_sigma2(self, x):
        return np.exp(x) if self.state == "log_sigma2" else np.asarray(x, dtype=float)

    def to_log_sigma2(self, x):
        return np.asarray(x, dtype=float) if self.state == "log_sigma2" else np.log(x)

    @property
    def log_sigma2_point(self):
        """``log sigma**2`` of a degenerate model."""
        return float(self.to_log_sigma2(self.point_mass))


def _interior_probe(l, r):
    lo = l if np.isfinite(l) else (r - 50.0 if np.isfinite(r) else -50.0)
    hi = r if np.isfinite(r) else lo + 100.0
    return np.linspace(lo, hi, 203)[1:-1]


def _base_point(l, r):
    if np.isfinite(l) and np.isfinite(r):
        return 0.5 * (l + r)
    if np.isfinite(l):
        return l + 1.0
    if np.isfinite(r):
        return r - 1.0
    return 0.0


def _coordinate(l, r):
    """Map ``z in R`` onto ``(l, r)``; returns (to_x, log_jacobian, to_z).

    Finite ends are pushed to infinity logarithmically, so an integrable
    singularity of the density at a boundary becomes an exponential tail.
    """
    if np.isfinite(l) and np.isfinite(r):
        w = r - l
        return (lambda z: l + w * special.expit(z),
                lambda z: np.log(w) - np.logaddexp(0.0, z) - np.logaddexp(0.0, -z),
                lambda x: special.logit((x - l) / w))
    if np.isfinite(l):
        return (lambda z: l + np.exp(z), lambda z: z, lambda x: np.log(x - l))
    if np.isfinite(r):
        return (lambda z: r - np.exp(-z), lambda z: -z, lambda x: -np.log(r - x))
    return (lambda z: z, lambda z: 0.0 * z, lambda x: x)


class InvariantLaw:
    """Normalised invariant density of a scalar diffusion, with a sampling table.

    Quadratures run in the coordinate of :func:`_coordinate`; ``lo`` and
    ``hi`` are the state values beyond which the density (in that coordinate)
    is below ``exp(-40)`` of its value at the base point.
    """

    def __init__(self, model):
        self.model = model
        self.l, self.r = model.state_space
        self._x, self._logjac, self._z = _coordinate(self.l, self.r)
        self.x0 = _base_point(self.l, self.r)
        self.z0 = float(self._z(self.x0))
        ratio = lambda y: 2.0 * model.drift(y) / model.diffusion(y) ** 2
        self._ratio_z = lambda z: ratio(self._x(z)) * np.exp(self._logjac(z))
        self.log_norm = 0.0
        self.log_norm = self._log_density_z(self.z0)
        self.zlo, self.zhi = self._edge(-1), self._edge(+1)
        self.lo, self.hi = float(self._x(self.zlo)), float(self._x(self.zhi))
        z = sum(
            integrate.quad(self._density_z, a, b, limit=200, epsabs=0, epsrel=1e-12)[0]
            for a, b in ((self.zlo, self.z0), (self.z0, self.zhi))
        )
        if not np.isfinite(z) or z <= 0:
            raise ValueError(f"invariant density of {model.name!r} is not integrable")
        self.log_norm += np.log(z)
        self._build_table()

    def _log_density_z(self, z):
        s = integrate.quad(self._ratio_z, self.z0, z, limit=200)[0]
        x = self._x(z)
        return s - 2.0 * np.log(self.model.diffusion(x)) + self._logjac(z) - self.log_norm

    def _density_z(self, z):
        return np.exp(self._log_density_z(z))

    def pdf(self, x):
        """Density at ``x``; quadrature from the base point for every entry."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        if np.any((flat <= self.l) | (flat >= self.r)):
            raise ValueError("x must lie in the interior of the state space")
        zs = self._z(flat)
        order = np.argsort(zs)
        out = np.empty_like(flat)
        # integrate outward from z0 in sorted order so each quad spans one gap
        below = order[zs[order] < self.z0][::-1]
        above = order[zs[order] >= self.z0]
        for seq in (below, above):
            prev, acc = self.z0, 0.0
            for i in seq:
                acc += integrate.quad(self._ratio_z, prev, zs[i], limit=200)[0]
                prev = zs[i]
                out[i] = np.exp(acc - 2.0 * np.log(self.model.diffusion(flat[i])) - self.log_norm)
        out = out.reshape(x.shape)
        return out[()] if out.ndim == 0 else out

    def _edge(self, direction):
        ref = self._log_density_z(self.z0)
        step = 1.0
        while step < 1e4:
            cand = self.z0 + direction * step
            if self._log_density_z(cand) - ref < -40.0:
                return cand
            step *= 2.0
        raise ValueError(f"invariant density of {self.model.name!r} has no finite bulk")

    def _build_table(self):
        z = np.linspace(self.zlo, self.zhi, TABLE_SIZE)
        dens = self.pdf(self._x(z)) * np.exp(self._logjac(z))
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(z))])
        cdf /= cdf[-1]
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        self.table_z, self.table_cdf = z[keep], cdf[keep]
        self.table_x = self._x(self.table_z)

    def ppf(self, u):
        """Inverse CDF by monotone linear interpolation of the table."""
        return self._x(np.interp(u, self.table_cdf, self.table_z))

    def sample(self, size, rng):
        return self.ppf(rng.random(size))


def invariant_density(model, x):
    """Invariant density of the model state at ``x``."""
    return model.law.pdf(x)


def log_sigma2_density(model, y):
    """Density of ``log sigma**2`` under the invariant law."""
    y = np.asarray(y, dtype=float)
    if model.state == "log_sigma2":
        return invariant_density(model, y)
    return invariant_density(model, np.exp(y)) * np.exp(y)


def sample_log_sigma2(model, size, rng):
    """Independent draws of ``log sigma**2`` from the invariant law."""
    if model.point_mass is not None:
        return np.full(size, model.log_sigma2_point)
    return model.to_log_sigma2(model.law.sample(size, rng))


# ---------------------------------------------------------------- models

def expou(theta=1.0, mu=0.0, psi=np.sqrt(2.0), r=0.0):
    """Ornstein-Uhlenbeck log-variance; invariant law ``N(mu, psi**2 / (2 theta))``."""
    if theta <= 0 or psi <= 0:
        raise ValueError("expou needs theta > 0 and psi > 0")
    return ModelSpec(
        "expou", "log_sigma2",
        drift=lambda x: theta * (mu - x),
        diffusion=lambda x: psi + 0.0 * np.asarray(x, dtype=float),
        price_drift=_constant_drift(r),
        affine=(theta * mu, -theta, psi, 0.0),
        params=dict(theta=theta, mu=mu, psi=psi, r=r),
    )


def cir(kappa=2.0, theta=1.0, xi=1.0, r=0.0):
    """Square-root variance; invariant law Gamma(2 kappa theta / xi**2, xi**2 / (2 kappa))."""
    if kappa <= 0 or theta <= 0 or xi <= 0:
        raise ValueError("cir needs kappa, theta, xi > 0")
    return ModelSpec(
        "cir", "sigma2",
        drift=lambda x: kappa * (theta - x),
        diffusion=lambda x: xi * np.sqrt(np.maximum(x, 0.0)),
        state_space=(0.0, np.inf),
        price_drift=_constant_drift(r),
        affine=(kappa * theta, -kappa, xi, 0.5),
        params=dict(kappa=kappa, theta=theta, xi=xi, r=r),
    )


def constant(sigma2=1.0, r=0.0):
    """Degenerate model with constant variance ``sigma2``."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return ModelSpec(
        "constant", "sigma2",
        drift=_zero, diffusion=_zero, state_space=(0.0, np.inf),
        price_drift=_constant_drift(r), affine=(0.0, 0.0, 0.0, 0.0),
        point_mass=float(sigma2), params=dict(sigma2=sigma2, r=r),
    )


def _constant_drift(r):
    r = float(r)
    if r == 0.0:
        return _zero
    return lambda t: np.full(np.shape(t), r)


MODELS = {"expou": expou, "cir": cir, "constant": constant}


def make_model(name, **params):
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return factory(**params)


# ---------------------------------------------------------------- simulation

def rng_stream(seed, role, replicate=0):
    """Generator for one (seed, replicate, role) triple; streams never overlap.

    ``replicate`` may be an int or a tuple of ints (e.g. ``(cell, replicate)``).
    """
    key = tuple(int(k) for k in np.atleast_1d(replicate)) + (ROLES[role],)
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


@numba.njit(cache=True)
def _euler_affine(x0, dB, dt, b0, b1, c, p, lo, hi):
    out = np.empty(dB.size + 1)
    x = x0
    out[0] = x
    for k in range(dB.size):
        if p == 0.0:
            amp = c
        else:
            amp = c * max(x, 0.0) ** p
        x = x + (b0 + b1 * x) * dt + amp * dB[k]
        if x < lo:
            x = 2.0 * lo - x
        elif x > hi:
            x = 2.0 * hi - x
        if x < lo or x > hi:
            return out[: k + 1], k + 1
        out[k + 1] = x
    return out, -1


def _euler_generic(model, x0, dB, dt, lo, hi):
    out = np.empty(dB.size + 1)
    x = x0
    out[0] = x
    b, a = model.drift, model.diffusion
    for k in range(dB.size):
        x = x + float(b(x)) * dt + float(a(x)) * dB[k]
        if x < lo:
            x = 2.0 * lo - x
        elif x > hi:
            x = 2.0 * hi - x
        if x < lo or x > hi:
            return out[: k + 1], k + 1
        out[k + 1] = x
    return out, -1


def _volatility_state(model, steps, dt, seed, replicate=0, x0=None):
    """Euler path of the state; uses the init and volatility streams only."""
    if x0 is None:
        if model.point_mass is not None:
            x0 = model.point_mass
        else:
            x0 = float(model.law.sample(1, rng_stream(seed, "init", replicate))[0])
    dB = rng_stream(seed, "volatility", replicate).standard_normal(steps) * np.sqrt(dt)
    lo, hi = model.state_space
    if model.affine is not None:
        b0, b1, c, p = model.affine
        path, failed = _euler_affine(float(x0), dB, dt, b0, b1, c, p, float(lo), float(hi))
    else:
        path, failed = _euler_generic(model, float(x0), dB, dt, lo, hi)
    if failed >= 0:
        raise FloatingPointError(
            f"volatility state left {model.state_space} beyond reflection at step {failed}"
        )
    return path


@dataclass(frozen=True)
class SamplePath:
    """Variance and log-price on the fine simulation grid."""

    fine_step: float
    sigma2_values: np.ndarray
    logprice_values: np.ndarray
    seed: int
    draws: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.fine_step > 0:
            raise ValueError("fine_step must be positive")
        if self.sigma2_values.shape != self.logprice_values.shape:
            raise ValueError("variance and log-price paths must have equal length")
        if np.any(self.sigma2_values <= 0):
            raise ValueError("variance must stay positive")
        if self.logprice_values[0] != 0.0:
            raise ValueError("log-price must start at 0")

    @property
    def horizon(self):
        return self.fine_step * (self.sigma2_values.size - 1)


def simulate_path(model, horizon, fine_step, seed, v0=None, replicate=0):
    """Euler-Maruyama path of the volatility and the log-price.

    The state starts from its invariant law (or ``v0``). The variance path and
    the price noise come from separate random streams keyed by
    ``(seed, replicate)``.
    """
    steps = int(round(horizon / fine_step))
    if not fine_step > 0 or fine_step > horizon / 100.0 * (1 + 1e-12):
        raise ValueError("fine_step must be positive and at most horizon / 100")
    state = _volatility_state(model, steps, fine_step, seed, replicate, v0)
    sigma2 = model.to_sigma2(state)
    xi = rng_stream(seed, "price", replicate).standard_normal(steps)
    t = np.arange(steps) * fine_step
    incr = model.price_drift(t) * fine_step + np.sqrt(sigma2[:-1] * fine_step) * xi
    logprice = np.concatenate([[0.0], np.cumsum(incr)])
    draws = {"init": int(v0 is None and model.point_mass is None), "volatility": steps, "price": steps}
    return SamplePath(float(fine_step), sigma2, logprice, int(seed), draws)


def observe(path, Delta, n):
    """Normalized increments at gap ``Delta`` from a fine path."""
    ratio = Delta / path.fine_step
    K = int(round(ratio))
    if K < 1 or abs(ratio - K) > 1e-9 * max(1.0, ratio):
        raise ValueError("Delta must be an integer multiple of the fine step")
    if n * K > path.sigma2_values.size - 1:
        raise ValueError("n * Delta exceeds the simulated horizon")
    s = path.logprice_values[: n * K + 1 : K]
    return ObservationSeries.from_increments(np.diff(s) / np.sqrt(Delta), Delta)


# ---------------------------------------------------------------- condition sigma

@dataclass
class SlopeReport:
    t: np.ndarray
    means: np.ndarray
    se: np.ndarray
    slope: float
    slope_se: float
    replicates: int


def condition_sigma_diagnostic(model, t_grid, replicates, seed, fine_step=None):
    """Monte Carlo ``E|sigma2_t - sigma2_0|`` under stationary start, with log-log slope."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise ValueError("t_grid must be positive")
    if replicates < 100:
        raise ValueError("need at least 100 replicates")
    if fine_step is None:
        fine_step = t_grid.min() / 50.0
    idx = np.round(t_grid / fine_step).astype(int)
    if np.any(np.abs(idx * fine_step - t_grid) > 1e-9 * t_grid):
        raise ValueError("t_grid must be multiples of fine_step")
    steps = int(idx.max())
    dev = np.empty((replicates, t_grid.size))
    for r in range(replicates):
        v = model.to_sigma2(_volatility_state(model, steps, fine_step, seed, r))
        dev[r] = np.abs(v[idx] - v[0])
    means = dev.mean(axis=0)
    se = dev.std(axis=0, ddof=1) / np.sqrt(replicates)
    if np.all(means > 0):
        lt, lm = np.log(t_grid), np.log(means)
        c = (lt - lt.mean()) / np.sum((lt - lt.mean()) ** 2)
        slope = float(np.dot(c, lm))
        slope_se = float(np.sqrt(np.sum((c * se / means) ** 2)))
    else:
        slope = slope_se = float("nan")
    return SlopeReport(t_grid, means, se, slope, slope_se, replicates)
