"""Market yield curves.

A curve is anything that exposes ``log_discount(T)``; discount factors,
instantaneous forwards and forward slopes are derived from it with the
finite-difference conventions below.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import DomainError, NegativeTime

FORWARD_STEP = 1e-5
SLOPE_STEP = 1e-4


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise NegativeTime("curve queried at negative time")
    return t


class Curve:
    """Base class; subclasses implement :meth:`log_discount`."""

    def log_discount(self, T):
        raise NotImplementedError

    def discount(self, T):
        """Market discount factor ``P(0, T)``."""
        T = _check_time(T)
        out = np.exp(self.log_discount(T))
        return out[()] if out.ndim == 0 else out

    def zero_rate(self, T):
        T = _check_time(T)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(T > 0, -self.log_discount(T) / np.where(T > 0, T, 1.0),
                         self.inst_forward(0.0))
        return z[()] if z.ndim == 0 else z

    def inst_forward(self, t):
        """Instantaneous forward ``-d log P / dt`` by central difference."""
        t = _check_time(t)
        out = -_derivative(self.log_discount, t, FORWARD_STEP)
        return out[()] if np.ndim(out) == 0 else out

    def forward_slope(self, t):
        """Time derivative of :meth:`inst_forward` by central difference."""
        t = _check_time(t)
        out = _derivative(self.inst_forward, t, SLOPE_STEP)
        return out[()] if np.ndim(out) == 0 else out


def _derivative(fn, t, h):
    """Central difference; second-order one-sided stencil within ``h`` of the origin."""
    central = (fn(t + h) - fn(np.maximum(t - h, 0.0))) / (2 * h)
    near = t < h
    if not np.any(near):
        return central
    tn = np.where(near, t, 0.0)
    one_sided = (-3 * fn(tn) + 4 * fn(tn + h) - fn(tn + 2 * h)) / (2 * h)
    return np.where(near, one_sided, central)


@dataclass(frozen=True, eq=False)
class YieldCurve(Curve):
    """Pillar curve, log-linear in discount factors.

    Parameters
    ----------
    times : array_like
        Strictly increasing positive pillar times in years.
    zero_rates : array_like
        Continuously compounded zero rates at the pillars.

    Notes
    -----
    Between the origin and the first pillar the first zero rate is held
    flat; beyond the last pillar the last zero rate is extrapolated flat.
    """

    times: np.ndarray
    zero_rates: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        rates = np.asarray(self.zero_rates, dtype=float).ravel()
        if times.size == 0 or times.size != rates.size:
            raise DomainError("curve needs matching, non-empty pillar arrays")
        if np.any(times <= 0) or np.any(np.diff(times) <= 0):
            raise DomainError("pillar times must be positive and strictly increasing")
        times.setflags(write=False)
        rates.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "zero_rates", rates)
        object.__setattr__(self, "_knots", np.concatenate(([0.0], times)))
        object.__setattr__(self, "_logdf", np.concatenate(([0.0], -rates * times)))

    @classmethod
    def flat(cls, rate: float, horizon: float = 100.0) -> "YieldCurve":
        return cls(np.array([horizon]), np.array([rate]))

    @classmethod
    def from_csv(cls, path) -> "YieldCurve":
        """Read a ``time,zero_rate`` CSV (``#`` lines are comments)."""
        times, rates = [], []
        with open(path, newline="") as fh:
            rows = csv.reader(line for line in fh if not line.lstrip().startswith("#"))
            header = [h.strip() for h in next(rows)]
            if header != ["time", "zero_rate"]:
                raise DomainError(f"{path}: expected header 'time,zero_rate', got {header}")
            for lineno, row in enumerate(rows, start=2):
                if not row:
                    continue
                try:
                    times.append(float(row[0]))
                    rates.append(float(row[1]))
                except (ValueError, IndexError) as exc:
                    raise DomainError(f"{path}:{lineno}: malformed row {row}") from exc
        return cls(np.array(times), np.array(rates))

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "zero_rates": self.zero_rates.tolist()}

    def log_discount(self, T):
        T = np.asarray(T, dtype=float)
        inside = np.interp(T, self._knots, self._logdf)
        beyond = -self.zero_rates[-1] * T
        return np.where(T > self.times[-1], beyond, inside)


@dataclass(frozen=True, eq=False)
class ParametricCurve(Curve):
    """Curve defined by an analytic log-discount function ``T -> log P(0,T)``."""

    log_discount_fn: Callable

    def log_discount(self, T):
        return np.asarray(self.log_discount_fn(np.asarray(T, dtype=float)), dtype=float)
