"""Regression estimates of future zero-coupon bond prices.

An independent simulation supplies path-wise discount factors
``exp(-int_{t_i}^{T_k} r)``; regressing them on ``r(t_i)`` with a monomial
basis gives ``P(t_i, T_k; r)`` as a polynomial in the short rate.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, MissingEntry, RankDeficient, SeedCollision
from .mathkit import Polynomial, polyfit_coefficients
from .simulation import DEFAULT_STEPS_PER_YEAR, simulate

log = logging.getLogger(__name__)

ZCB_FLOOR = 1e-12
_DIGITS = 9


@dataclass(frozen=True, eq=False)
class ZcbRegressionTable:
    """Regression coefficients per observation date.

    Attributes
    ----------
    dates : ndarray
        Observation dates ``t_i``.
    maturities : tuple of ndarray
        Maturities ``T_k > t_i`` per date.
    coefficients : tuple of ndarray
        Per date an array ``(len(maturities[i]), degree + 1)`` of ascending
        monomial coefficients.
    """

    dates: np.ndarray
    maturities: tuple
    coefficients: tuple
    degree: int
    n_paths: int
    seed: int

    def _date_index(self, t):
        hits = np.flatnonzero(np.abs(self.dates - t) < 10.0**-_DIGITS)
        if hits.size == 0:
            raise MissingEntry(f"no regression entries at t={t}")
        return int(hits[0])

    def _maturity_index(self, i, T):
        mats = self.maturities[i]
        T = np.atleast_1d(np.asarray(T, dtype=float))
        pos = np.searchsorted(mats, T - 10.0**-_DIGITS)
        pos = np.minimum(pos, mats.size - 1)
        if mats.size == 0 or np.any(np.abs(mats[pos] - T) > 10.0**-_DIGITS):
            raise MissingEntry(f"maturities {T} not stored at t={self.dates[i]}")
        return pos

    def polynomial(self, t, T) -> Polynomial:
        i = self._date_index(t)
        return Polynomial(self.coefficients[i][self._maturity_index(i, T)[0]])

    def bonds(self, t, maturities, rates):
        """Bond prices for ``rates`` (rows) and ``maturities`` (columns)."""
        rates = np.atleast_1d(np.asarray(rates, dtype=float))
        mats = np.atleast_1d(np.asarray(maturities, dtype=float))
        out = np.ones((rates.size, mats.size))
        live = mats > t + 10.0**-_DIGITS
        if np.any(mats < t - 10.0**-_DIGITS):
            raise DomainError("bond maturity before observation date")
        if live.any():
            i = self._date_index(t)
            coef = self.coefficients[i][self._maturity_index(i, mats[live])]
            vander = np.vander(rates, coef.shape[1], increasing=True)
            out[:, live] = np.maximum(vander @ coef.T, ZCB_FLOOR)
        return out

    def to_csv(self, path, comment=None):
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_i", "T_k", "degree"] + [f"beta_{k}" for k in range(self.degree + 1)])
            for t, mats, coef in zip(self.dates, self.maturities, self.coefficients):
                for T, row in zip(mats, coef):
                    w.writerow([repr(float(t)), repr(float(T)), self.degree] + [repr(float(b)) for b in row])


def build_zcb_table(model, dates, maturities, n_paths, degree=3,
                    steps_per_year=DEFAULT_STEPS_PER_YEAR, seed=0) -> ZcbRegressionTable:
    """Regress simulated discount factors on the short rate.

    Parameters
    ----------
    model : RhwModel or HwParams
    dates : array_like
        Observation dates ``t_i``.
    maturities : array_like
        Candidate maturities; each date keeps those strictly after it.
    n_paths : int
        Training paths ``M_P``; must exceed ``10 (degree + 1)``.
    degree : int
    seed : int
        Seed of the training simulation; valuation runs must use another.

    Notes
    -----
    Dates where the state has no dispersion (``t_i = 0``) store the
    deterministic ratio ``P^M(0,T_k)/P^M(0,t_i)`` as a constant polynomial.
    """
    if n_paths <= 10 * (degree + 1):
        raise DomainError("n_paths must exceed 10 (degree + 1)")
    dates = np.unique(np.round(np.atleast_1d(np.asarray(dates, dtype=float)), _DIGITS))
    mats = np.unique(np.round(np.atleast_1d(np.asarray(maturities, dtype=float)), _DIGITS))
    record = np.union1d(dates, mats)
    paths = simulate(model, record, n_paths, seed, steps_per_year)
    curve = model.curve
    all_mats, all_coef = [], []
    for t in dates:
        live = mats[mats > t + 10.0**-_DIGITS]
        coef = np.zeros((live.size, degree + 1))
        if live.size:
            ci = paths.index(t)
            cols = np.searchsorted(paths.times, live - 10.0**-_DIGITS)
            disc = np.exp(-(paths.integrals[:, cols] - paths.integrals[:, ci, None]))
            try:
                coef = polyfit_coefficients(paths.rates[:, ci], disc, degree).T
            except RankDeficient:
                log.debug("degenerate state at t=%g; storing deterministic discount ratios", t)
                coef[:, 0] = curve.discount(live) / curve.discount(t)
        all_mats.append(live)
        all_coef.append(coef)
    return ZcbRegressionTable(dates, tuple(all_mats), tuple(all_coef), int(degree), int(n_paths), int(seed))


def zcb_eval(table: ZcbRegressionTable, t_i, T_k, x):
    """Regression bond price ``P(t_i, T_k; x)`` floored at ``1e-12``."""
    out = table.bonds(t_i, [T_k], x)[:, 0]
    return out[0] if np.ndim(x) == 0 else out


def check_independent(table: ZcbRegressionTable, seed_val: int):
    """Refuse a valuation seed equal to the regression-training seed."""
    if int(seed_val) == table.seed:
        raise SeedCollision(
            f"valuation seed {seed_val} equals the ZCB regression seed; use an independent simulation"
        )
