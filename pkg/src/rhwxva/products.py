"""Swaps, European swaptions and cash-settled Bermudan swaptions.

Bond prices along simulated paths come from a *bond pricer*: any object
with ``bonds(t, maturities, rates) -> ndarray (paths, maturities)`` and a
``seed`` attribute. :class:`~rhwxva.hw.HwBondPricer` is exact for
Hull-White; a :class:`~rhwxva.zcbreg.ZcbRegressionTable` serves the
mixture model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .exceptions import (
    DegenerateAnnuity,
    DomainError,
    NotPositiveDefinite,
    RankDeficient,
    SeedCollision,
)
from .hw import SwapSpec
from .mathkit import Polynomial, golub_welsch, lagrange_interp, polyfit_coefficients
from .rhw import as_mixture, rand_cdf, rand_moment
from .simulation import DEFAULT_STEPS_PER_YEAR, simulate

log = logging.getLogger(__name__)

_EPS = 1e-9


@dataclass(frozen=True)
class McEstimate:
    """Monte-Carlo mean with its standard error."""

    value: float
    stderr: float

    @classmethod
    def from_samples(cls, samples):
        samples = np.asarray(samples, dtype=float)
        return cls(float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(samples.size)))

    def __float__(self):
        return self.value


def annuity(zcb, spec: SwapSpec, t=0.0):
    """``sum tau_k P(t, T_k)`` over payments after ``t``."""
    live = spec.payment_dates > t + _EPS
    return np.asarray(zcb(spec.payment_dates[live])) @ spec.accruals[live]


def atm_strike(zcb, spec: SwapSpec):
    """Forward swap rate ``(P(T0) - P(Tm)) / A`` from a bond function ``T -> P``."""
    p0 = np.asarray(zcb(np.array([spec.start])))[..., 0]
    pm = np.asarray(zcb(np.array([spec.maturity])))[..., 0]
    a = annuity(zcb, spec, -np.inf)
    if np.any(np.asarray(a) <= 0):
        raise DegenerateAnnuity("annuity must be positive")
    return (p0 - pm) / a


def swap_value(zcb, spec: SwapSpec, t=0.0, fixing=None):
    """Value of the remaining swap cashflows at ``t``.

    Parameters
    ----------
    zcb : callable
        ``T -> P(t, T)`` for an array of maturities; may return a
        ``(paths, maturities)`` array.
    t : float
        Valuation date; only payments strictly after ``t`` count.
    fixing : float or ndarray, optional
        ``P(T_{j-1}, T_j)`` observed at the reset preceding ``t``. Needed
        when ``t`` lies strictly inside an accrual period, where the known
        floating coupon is worth ``P(t, T_j) / P(T_{j-1}, T_j)``.

    Returns
    -------
    float or ndarray
        Notional times ``delta (-floating + fixed)``.
    """
    pay = spec.payment_dates
    if t >= spec.maturity - _EPS:
        return 0.0
    live = pay > t + _EPS
    dates = pay[live]
    bonds = np.asarray(zcb(dates))
    fixed = spec.strike * (bonds @ spec.accruals[live])
    p_end = bonds[..., -1]
    if t <= spec.start + _EPS:
        p_start = np.asarray(zcb(np.array([spec.start])))[..., 0] if t < spec.start - _EPS else 1.0
        floating = p_start - p_end
    else:
        j = np.flatnonzero(live)[0]
        reset = spec.reset_dates[j]
        if abs(t - reset) < _EPS:
            floating = 1.0 - p_end
        else:
            if fixing is None:
                raise DomainError("valuation inside an accrual period needs the last fixing")
            floating = bonds[..., 0] / fixing - p_end
    return spec.notional * spec.swap_type * (fixed - floating)


def swap_values_on_paths(bond_pricer, spec: SwapSpec, paths, dates):
    """Path-wise swap values at ``dates`` (columns) from a :class:`PathSet`.

    Fixings for dates inside accrual periods are taken from the bond prices
    at the preceding reset date on the same path.
    """
    out = np.zeros((paths.n_paths, len(dates)))
    fixings = {}
    for reset, pay in zip(spec.reset_dates, spec.payment_dates):
        if any(reset < d - _EPS < pay for d in dates):
            fixings[reset] = bond_pricer.bonds(reset, [pay], paths.rate(reset))[:, 0]
    for col, t in enumerate(dates):
        if t >= spec.maturity - _EPS:
            continue
        r = paths.rate(t)
        fixing = None
        if t > spec.start + _EPS:
            j = np.flatnonzero(spec.payment_dates > t + _EPS)[0]
            reset = spec.reset_dates[j]
            if abs(t - reset) > _EPS:
                fixing = fixings[reset]
        out[:, col] = swap_value(lambda T, t=t, r=r: bond_pricer.bonds(t, T, r), spec, t, fixing)
    return out


# ---------------------------------------------------------------------------
# European swaption by simulation


def swaption_mc(model, bond_pricer, spec: SwapSpec, T_M, n_paths, seed,
                steps_per_year=DEFAULT_STEPS_PER_YEAR, scheme=None, paths=None) -> McEstimate:
    """Monte-Carlo swaption: discounted ``max(swap(T_M), 0)``."""
    check_seeds(bond_pricer, seed)
    if paths is None:
        paths = simulate(model, [T_M], n_paths, seed, steps_per_year, scheme=scheme)
    r = paths.rate(T_M)
    value = swap_value(lambda T: bond_pricer.bonds(T_M, T, r), spec, T_M)
    return McEstimate.from_samples(paths.discount(T_M) * np.maximum(value, 0.0))


def check_seeds(bond_pricer, seed):
    if getattr(bond_pricer, "seed", None) == seed:
        raise SeedCollision("valuation seed equals the ZCB regression seed")


# ---------------------------------------------------------------------------
# Bermudan swaptions


@dataclass(frozen=True, eq=False)
class BermudanSpec:
    """Cash-settled Bermudan swaption on a fixed-maturity swap.

    Exercising at ``T_E = T_j`` (a reset date) pays the value of the swap
    from ``T_j`` to the final maturity.
    """

    underlying: SwapSpec
    exercise_dates: np.ndarray

    def __post_init__(self):
        ex = np.atleast_1d(np.asarray(self.exercise_dates, dtype=float)).copy()
        if ex.size == 0 or np.any(np.diff(ex) <= 0):
            raise DomainError("exercise dates must be non-empty and increasing")
        resets = self.underlying.reset_dates
        for d in ex:
            if not np.any(np.abs(resets - d) < _EPS):
                raise DomainError(f"exercise date {d} is not a reset date of the underlying")
        ex.setflags(write=False)
        object.__setattr__(self, "exercise_dates", ex)

    def exercise_swap(self, t) -> SwapSpec:
        """Underlying swap entered by exercising at ``t``."""
        sw = self.underlying
        keep = sw.payment_dates > t + _EPS
        return SwapSpec(float(t), sw.payment_dates[keep], sw.strike, sw.swap_type, sw.notional)

    def with_exercise_dates(self, dates) -> "BermudanSpec":
        return BermudanSpec(self.underlying, dates)

    def payoff(self, bond_pricer, t, rates):
        swap = self.exercise_swap(t)
        value = swap_value(lambda T: bond_pricer.bonds(t, T, rates), swap, t)
        return np.maximum(value, 0.0)


@dataclass(frozen=True, eq=False)
class ExerciseRule:
    """Continuation-value polynomials per exercise date; ``None`` = never exercise."""

    dates: np.ndarray
    continuation: tuple

    def exercise(self, i, payoff, rates):
        """Boolean exercise decision at exercise date ``i``."""
        if i == len(self.dates) - 1:
            return payoff > 0
        poly = self.continuation[i]
        if poly is None:
            return np.zeros(payoff.shape, dtype=bool)
        return (payoff > 0) & (payoff > poly(rates))


def bermudan_first_pass(model, bond_pricer, spec: BermudanSpec, n_paths, seed, reg_degree=2,
                        steps_per_year=DEFAULT_STEPS_PER_YEAR, stream=0) -> ExerciseRule:
    """Least-squares regression of continuation values on ITM paths.

    The rule only decides exercise; prices come from an independent second
    simulation in :func:`bermudan_price`.
    """
    check_seeds(bond_pricer, seed)
    ex = spec.exercise_dates
    paths = simulate(model, ex, n_paths, seed, steps_per_year, stream=stream)
    n = ex.size
    polys = [None] * n
    value = spec.payoff(bond_pricer, ex[-1], paths.rate(ex[-1]))
    for i in range(n - 2, -1, -1):
        growth = np.exp(-(paths.integrals[:, i + 1] - paths.integrals[:, i]))
        cont = value * growth
        r = paths.rate(ex[i])
        pay = spec.payoff(bond_pricer, ex[i], r)
        itm = pay > 0
        if itm.sum() <= reg_degree + 1:
            log.info("no ITM paths at exercise date %g; never exercising there", ex[i])
            value = cont
            continue
        try:
            poly = Polynomial(polyfit_coefficients(r[itm], cont[itm], reg_degree))
        except RankDeficient:
            # no state dispersion: the conditional expectation is the mean
            log.info("degenerate ITM states at %g; constant continuation value", ex[i])
            poly = Polynomial([float(cont[itm].mean())])
        polys[i] = poly
        exercise = itm & (pay > poly(r))
        value = np.where(exercise, pay, cont)
    return ExerciseRule(ex.copy(), tuple(polys))


def _first_exercise(rule, spec, bond_pricer, paths, first_date=0):
    """Index of the exercise date used per path (-1 if never) and its payoff."""
    m = paths.n_paths
    chosen = np.full(m, -1)
    cash = np.zeros(m)
    for i in range(first_date, len(rule.dates)):
        t = rule.dates[i]
        alive = chosen < 0
        if not alive.any():
            break
        r = paths.rate(t)
        pay = spec.payoff(bond_pricer, t, r)
        ex = alive & rule.exercise(i, pay, r)
        chosen[ex] = i
        cash[ex] = pay[ex]
    return chosen, cash


def bermudan_price(model, bond_pricer, spec: BermudanSpec, rule: ExerciseRule, n_paths, seed,
                   steps_per_year=DEFAULT_STEPS_PER_YEAR, return_paths=False):
    """Price by applying a frozen exercise rule on an independent simulation."""
    check_seeds(bond_pricer, seed)
    paths = simulate(model, spec.exercise_dates, n_paths, seed, steps_per_year)
    chosen, cash = _first_exercise(rule, spec, bond_pricer, paths)
    disc = np.where(chosen >= 0, np.exp(-paths.integrals[np.arange(paths.n_paths), np.maximum(chosen, 0)]), 0.0)
    est = McEstimate.from_samples(disc * cash)
    if return_paths:
        return est, chosen
    return est


def collocation_nodes(model, t, n_colloc):
    """Gauss nodes of the short-rate law at ``t`` from its first ``2 n`` moments.

    Moments are taken of the standardized rate for conditioning; a moment
    matrix failure falls back to equal-probability quantile nodes.
    """
    mix = as_mixture(model)
    mean = rand_moment(mix, 1, t)
    var = max(rand_moment(mix, 2, t) - mean**2, 0.0)
    # at t = 0 the law is a point mass; E[r^2] - E[r]^2 is then pure roundoff
    if t <= _EPS or var <= 1e-24 + 1e-12 * mean**2:
        return np.array([mean])
    sd = np.sqrt(var)
    moments = [rand_moment(mix, k, t, center=mean, scale=sd) for k in range(2 * n_colloc)]
    try:
        u, _ = golub_welsch(moments)
        return mean + sd * np.sort(u)
    except NotPositiveDefinite:
        log.warning("moment matrix failure at t=%g; using quantile collocation nodes", t)
        probs = (np.arange(n_colloc) + 0.5) / n_colloc
        return np.array([
            optimize.brentq(lambda y, p=p: rand_cdf(mix, t, y) - p, mean - 20 * sd, mean + 20 * sd)
            for p in probs
        ])


def _nested_values(model, bond_pricer, spec, rule, t, nodes, n_nested, seed, stream,
                   steps_per_year):
    later = np.flatnonzero(rule.dates > t + _EPS)
    if later.size == 0:
        return np.zeros(nodes.size)
    ex_dates = rule.dates[later]
    init = np.repeat(nodes, n_nested)
    paths = simulate(model, ex_dates, init.size, seed, steps_per_year, stream=stream,
                     start=t, initial_rates=init)
    chosen, cash = _first_exercise(rule, spec, bond_pricer, paths, later[0])
    idx = np.maximum(chosen - later[0], 0)
    disc = np.where(chosen >= 0, np.exp(-paths.integrals[np.arange(init.size), idx]), 0.0)
    return (disc * cash).reshape(nodes.size, n_nested).mean(axis=1)


def bermudan_future_values(model, bond_pricer, rule: ExerciseRule, spec: BermudanSpec,
                           monitoring_dates, paths, exercised_at, n_colloc=5, n_nested=None,
                           seed=0, steps_per_year=DEFAULT_STEPS_PER_YEAR):
    """Future Bermudan values on valuation paths by collocation.

    At each monitoring date the option is valued by nested simulation from
    Gauss collocation nodes of the short-rate distribution, reusing the
    frozen exercise rule, and interpolated in the path's short rate.
    Paths that have exercised (cash settlement) carry value zero from their
    exercise date on.

    Parameters
    ----------
    paths : PathSet
        Valuation paths recorded at ``monitoring_dates``.
    exercised_at : ndarray
        Per path the exercise time (``inf`` if never), e.g. from applying
        ``rule`` on ``paths``.
    n_nested : int, optional
        Paths per collocation node; default ``min(M_V // 10, 2000)``.
    """
    check_seeds(bond_pricer, seed)
    if n_nested is None:
        n_nested = max(1, min(paths.n_paths // 10, 2000))
    monitoring_dates = np.asarray(monitoring_dates, dtype=float)
    out = np.zeros((paths.n_paths, monitoring_dates.size))
    last = rule.dates[-1]
    for col, t in enumerate(monitoring_dates):
        if t >= last - _EPS:
            continue
        nodes = collocation_nodes(model, t, n_colloc)
        values = _nested_values(model, bond_pricer, spec, rule, t, nodes, n_nested, seed,
                                1 + col, steps_per_year)
        r = paths.rate(t)
        if nodes.size == 1:
            v = np.full(r.size, values[0])
        else:
            v = np.maximum(lagrange_interp(nodes, values, r), 0.0)
        v[exercised_at <= t + _EPS] = 0.0
        out[:, col] = v
    return out


def exercise_times(rule, spec, bond_pricer, paths):
    """Exercise time per path on ``paths`` (must record the exercise dates)."""
    chosen, _ = _first_exercise(rule, spec, bond_pricer, paths)
    return np.where(chosen >= 0, rule.dates[np.maximum(chosen, 0)], np.inf)
