"""Exposure profiles and credit valuation adjustments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, EmptySample, Misaligned


@dataclass(frozen=True)
class CreditCurve:
    """Flat hazard-rate default model, ``PD(t) = 1 - exp(-lambda t)``."""

    hazard: float
    recovery: float = 0.0

    def __post_init__(self):
        if self.hazard < 0:
            raise DomainError("hazard rate must be non-negative")
        if not 0.0 <= self.recovery < 1.0:
            raise DomainError("recovery must lie in [0, 1)")

    def pd(self, t):
        return -np.expm1(-self.hazard * np.asarray(t, dtype=float))


def _aligned(values, discounts):
    values = np.asarray(values, dtype=float)
    discounts = np.asarray(discounts, dtype=float)
    if values.shape != discounts.shape:
        raise Misaligned(f"values {values.shape} and discounts {discounts.shape} differ in shape")
    if values.shape[0] == 0:
        raise EmptySample("no paths")
    return values, discounts


def epe(values, discounts):
    """Discounted expected positive exposure, averaged over paths (axis 0)."""
    values, discounts = _aligned(values, discounts)
    return np.mean(discounts * np.maximum(values, 0.0), axis=0)


def ene(values, discounts):
    """Discounted expected negative exposure; non-positive."""
    values, discounts = _aligned(values, discounts)
    return np.mean(discounts * np.minimum(values, 0.0), axis=0)


def _quantile(x, alpha):
    if not 0.0 < alpha < 100.0:
        raise DomainError("alpha must lie in (0, 100)")
    x = np.asarray(x, dtype=float)
    if x.shape[0] == 0:
        raise EmptySample("empty sample")
    # inf{x : alpha/100 <= F(x)} is the inverted-CDF order statistic
    return np.quantile(x, alpha / 100.0, axis=0, method="inverted_cdf")


def pfe(values, alpha=99.0):
    """Potential future exposure: alpha-quantile of ``max(V, 0)`` (undiscounted)."""
    return _quantile(np.maximum(values, 0.0), alpha)


def pfl(values, alpha=1.0):
    """Potential future loss: alpha-quantile of ``min(V, 0)`` (undiscounted)."""
    return _quantile(np.minimum(values, 0.0), alpha)


@dataclass(frozen=True, eq=False)
class ExposureProfile:
    """Per-date exposure metrics.

    ``pfe`` and ``pfl`` map an alpha level to an array over dates.
    """

    dates: np.ndarray
    epe: np.ndarray
    ene: np.ndarray
    pfe: dict = field(default_factory=dict)
    pfl: dict = field(default_factory=dict)

    @classmethod
    def from_paths(cls, dates, values, discounts, pfe_levels=(99.0,), pfl_levels=(1.0,)):
        """Aggregate path values ``(paths, dates)`` and discount factors."""
        dates = np.asarray(dates, dtype=float)
        values, discounts = _aligned(values, discounts)
        if values.shape[1] != dates.size:
            raise Misaligned("one value column per monitoring date required")
        return cls(
            dates,
            epe(values, discounts),
            ene(values, discounts),
            {float(a): pfe(values, a) for a in pfe_levels},
            {float(a): pfl(values, a) for a in pfl_levels},
        )


def _increments(curve: CreditCurve, dates):
    dates = np.asarray(dates, dtype=float)
    if dates.size and np.any(np.diff(dates) <= 0):
        raise DomainError("profile dates must be increasing")
    pd = curve.pd(dates)
    return np.diff(pd), pd[:-1]


def cva(profile: ExposureProfile, credit_c: CreditCurve, recovery=None):
    """``(1 - RR) sum_i EPE(t_i) [PD_C(t_i) - PD_C(t_{i-1})]``."""
    rr = credit_c.recovery if recovery is None else recovery
    dpd, _ = _increments(credit_c, profile.dates)
    return float((1.0 - rr) * np.sum(profile.epe[1:] * dpd))


def dva(profile: ExposureProfile, credit_i: CreditCurve, recovery=None):
    """``(1 - RR) sum_i ENE(t_i) [PD_I(t_i) - PD_I(t_{i-1})]``; non-positive."""
    rr = credit_i.recovery if recovery is None else recovery
    dpd, _ = _increments(credit_i, profile.dates)
    return float((1.0 - rr) * np.sum(profile.ene[1:] * dpd))


def bcva(profile: ExposureProfile, credit_c: CreditCurve, credit_i: CreditCurve, recovery=None,
         survival=True):
    """Bilateral CVA with first-to-default survival weights.

    The CVA increments are weighted by ``1 - PD_I(t_{i-1})`` and the DVA
    increments by ``1 - PD_C(t_{i-1})``. ``survival=False`` sets both
    weights to one (then ``bcva = cva + dva``).
    """
    rr = credit_c.recovery if recovery is None else recovery
    dpd_c, pd_c_prev = _increments(credit_c, profile.dates)
    dpd_i, pd_i_prev = _increments(credit_i, profile.dates)
    w_c = 1.0 - pd_i_prev if survival else 1.0
    w_i = 1.0 - pd_c_prev if survival else 1.0
    return float((1.0 - rr) * np.sum(profile.epe[1:] * dpd_c * w_c + profile.ene[1:] * dpd_i * w_i))
