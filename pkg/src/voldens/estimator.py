"""scikit-learn style front end for the volatility density estimator."""

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .deconv import DeconvKernel, RegimeWarning, bandwidth_schedule, default_grid, estimate
from .observe import ObservationSeries


def _column(X, name="X"):
    X = check_array(X, ensure_2d=False, dtype=np.float64, ensure_all_finite=False,
                    input_name=name)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"{name} must be 1-D or a single column, got {X.shape[1]} columns")
        X = X[:, 0]
    return X


class LogSquareTransformer(TransformerMixin, BaseEstimator):
    """Map increments ``x`` to ``log(x**2)``; exact zeros become NaN."""

    def fit(self, X, y=None):
        _column(X)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        x = _column(X)
        with np.errstate(divide="ignore"):
            out = np.log(x * x)
        out[~np.isfinite(out)] = np.nan
        return out.reshape(-1, 1)


class VolatilityDensityEstimator(BaseEstimator):
    """Deconvolution estimate of the density of ``log sigma**2``.

    Parameters
    ----------
    bandwidth : float, optional
        Fixed bandwidth ``h``. When omitted, ``h = gamma * pi / log(n)``.
    gamma, delta : float, optional
        Schedule constants used when ``bandwidth`` is None. ``delta`` only
        enters the regime check ``gamma > 4 / delta``.
    kernel : str or KernelSpec
    variant : {"ecf", "direct"}
    input : {"increments", "log_squares"}
        What ``fit`` receives: normalized increments, or their log-squares.
    quadrature_points : int
    Delta : float
        Sampling gap, recorded in the estimate metadata.

    Attributes
    ----------
    observations_ : ObservationSeries
    bandwidth_ : float
    kernel_ : DeconvKernel
    in_regime_ : bool or None
    """

    def __init__(self, bandwidth=None, gamma=None, delta=None, kernel="poly3",
                 variant="ecf", input="increments", quadrature_points=64, Delta=1.0):
        self.bandwidth = bandwidth
        self.gamma = gamma
        self.delta = delta
        self.kernel = kernel
        self.variant = variant
        self.input = input
        self.quadrature_points = quadrature_points
        self.Delta = Delta

    def fit(self, X, y=None):
        x = _column(X)
        if self.input == "increments":
            if not np.all(np.isfinite(x)):
                raise ValueError("increments must be finite")
            obs = ObservationSeries.from_increments(x, self.Delta)
        elif self.input == "log_squares":
            obs = ObservationSeries.from_log_squares(x, self.Delta)
        else:
            raise ValueError("input must be 'increments' or 'log_squares'")
        if obs.transformed.size == 0:
            raise ValueError("no usable observations after dropping zeros")
        if self.variant not in ("ecf", "direct"):
            raise ValueError("variant must be 'ecf' or 'direct'")

        self.in_regime_ = None
        if self.bandwidth is not None:
            h = float(self.bandwidth)
        elif self.gamma is not None and self.delta is not None:
            sched = bandwidth_schedule(obs.n, self.delta, self.gamma, warn=False)
            h, self.in_regime_ = sched.h, sched.in_regime
            if not sched.in_regime:
                warnings.warn(
                    f"gamma={self.gamma:g} <= 4/delta={4 / self.delta:g}",
                    RegimeWarning, stacklevel=2,
                )
        else:
            raise ValueError("set bandwidth, or both gamma and delta")
        self.kernel_ = DeconvKernel(h, self.kernel, self.quadrature_points)
        self.bandwidth_ = h
        self.observations_ = obs
        self.n_features_in_ = 1
        return self

    def evaluate(self, grid=None, points=101):
        """Estimate on ``grid`` (default: mean +- 4 sd of the log-squares)."""
        check_is_fitted(self, "kernel_")
        if grid is None:
            grid = default_grid(self.observations_, self.bandwidth_, points)
        return estimate(self.observations_, self.kernel_, grid, self.variant)

    def predict(self, X):
        """Density values at the points in ``X`` (any order)."""
        x = _column(X)
        order = np.argsort(x, kind="stable")
        out = np.empty_like(x)
        uniq, inv = np.unique(x[order], return_inverse=True)
        out[order] = self.evaluate(uniq).values[inv]
        return out
