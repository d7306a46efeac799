"""Normalized increments and their log-square transform."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ObservationSeries:
    """Increments ``X_i`` of a sampled log-price and ``log X_i**2``.

    ``transformed`` holds only the finite log-squares; exact zero increments
    (log-square of ``-inf``) are dropped and counted in ``dropped``.
    """

    increments: np.ndarray
    transformed: np.ndarray
    n: int
    Delta: float
    dropped: int

    def __post_init__(self):
        if not self.Delta > 0:
            raise ValueError("Delta must be positive")
        if self.transformed.size != self.n - self.dropped:
            raise ValueError("transformed length must equal n - dropped")

    @classmethod
    def from_increments(cls, increments, Delta=1.0):
        x = np.asarray(increments, dtype=float).ravel()
        if not np.all(np.isfinite(x)):
            raise ValueError("increments must be finite")
        keep = x != 0.0
        return cls(x, np.log(x[keep] ** 2), x.size, float(Delta), int(x.size - keep.sum()))

    @classmethod
    def from_log_squares(cls, values, Delta=1.0):
        """Wrap already transformed data; non-finite entries count as dropped."""
        y = np.asarray(values, dtype=float).ravel()
        keep = np.isfinite(y)
        return cls(np.full(y.size, np.nan), y[keep], y.size, float(Delta), int(y.size - keep.sum()))


def normalized_increments(logprice, Delta):
    """``(S_{i Delta} - S_{(i-1) Delta}) / sqrt(Delta)`` for an evenly sampled ``S``."""
    return np.diff(np.asarray(logprice, dtype=float)) / np.sqrt(Delta)


def as_log_squares(data):
    """Finite log-squares from an :class:`ObservationSeries` or plain array."""
    if isinstance(data, ObservationSeries):
        y = data.transformed
    else:
        y = np.asarray(data, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("no usable observations")
    if not np.all(np.isfinite(y)):
        raise ValueError("log-square observations must be finite")
    return y
