"""One-factor Hull-White model with piecewise-constant volatility.

The short rate is written as ``r(t) = x(t) + b(t)`` with
``dx = -theta x dt + sigma(t) dW`` and ``x(0) = 0``. Every time integral of
the volatility is evaluated analytically segment by segment; small and
negative mean reversions are handled through series expansions of the
exponential kernels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from math import factorial

import numpy as np
from scipy import optimize

from .curve import Curve
from .exceptions import (
    CalibrationFailure,
    DomainError,
    MaxIterations,
    NegativeVolRejected,
    NoBracket,
    NonpositiveStrike,
    RootBracketFailure,
    TimeOrder,
)
from .mathkit import black_price, find_root

log = logging.getLogger(__name__)

PAYER = -1
RECEIVER = 1

_SERIES_CUTOFF = 0.05
_H_SERIES = np.array([(-1) ** k * (2.0 - 2.0 ** (k - 1)) / factorial(k) for k in range(3, 18)])
_K_SERIES = np.array([(-1) ** k * (1.0 - 2.0**k) / factorial(k + 1) for k in range(1, 16)])


def _phi(z):
    """``(1 - exp(-z)) / z`` with the removable singularity at 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-10
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z, -np.expm1(-zs) / zs)


def _series(coeffs, z):
    return np.polynomial.polynomial.polyval(z, coeffs)


def _k_kernel(tau, theta):
    """``int_0^tau B(s) exp(-theta s) ds`` where ``B(s) = (1 - e^{-theta s})/theta``."""
    tau = np.asarray(tau, dtype=float)
    z = theta * tau
    small = np.abs(z) < _SERIES_CUTOFF
    zs = np.where(small, 1.0, z)
    direct = (_phi(zs) - _phi(2 * zs)) / zs
    return tau * tau * np.where(small, _series(_K_SERIES, z), direct)


def _g_kernel(tau, theta):
    """``int_0^tau B(s)^2 ds``."""
    tau = np.asarray(tau, dtype=float)
    z = theta * tau
    small = np.abs(z) < _SERIES_CUTOFF
    zs = np.where(small, 1.0, z)
    direct = (zs + 2 * np.expm1(-zs) - 0.5 * np.expm1(-2 * zs)) / zs**3
    return tau**3 * np.where(small, _series(_H_SERIES, z), direct)


@dataclass(frozen=True, eq=False)
class PiecewiseVol:
    """Piecewise-constant volatility on the intervals between pillar times.

    ``values[c]`` applies on ``(pillars[c-1], pillars[c]]``; the first value
    is extended back to 0 and the last one forward to infinity.
    """

    pillars: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.pillars, dtype=float)).copy()
        v = np.atleast_1d(np.asarray(self.values, dtype=float)).copy()
        if p.size == 0 or p.size != v.size:
            raise DomainError("vol pillars and values must be non-empty and equal length")
        if np.any(np.diff(p) <= 0):
            raise DomainError("vol pillars must be strictly increasing")
        if np.any(v <= 0):
            raise DomainError("volatility values must be positive")
        p.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "pillars", p)
        object.__setattr__(self, "values", v)

    @classmethod
    def flat(cls, sigma: float) -> "PiecewiseVol":
        return cls(np.array([1.0]), np.array([sigma]))

    def with_value(self, index: int, value: float) -> "PiecewiseVol":
        v = self.values.copy()
        v[index] = value
        return PiecewiseVol(self.pillars, v)

    def segments(self):
        """Iterate over ``(start, end, sigma)`` covering ``[0, inf)``."""
        edges = np.concatenate(([0.0], self.pillars[:-1], [np.inf]))
        return zip(edges[:-1], edges[1:], self.values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.pillars[:-1], t, side="left")
        out = self.values[idx]
        return out[()] if out.ndim == 0 else out

    def integrated_variance(self, s, t):
        """``int_s^t sigma(u)^2 du``."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.broadcast(s, t).shape)
        for lo, hi, sig in self.segments():
            out = out + sig**2 * np.maximum(np.minimum(t, hi) - np.maximum(s, lo), 0.0)
        return out

    def to_dict(self) -> dict:
        return {"pillars": self.pillars.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class HwParams:
    """Hull-White parameters: mean reversion, volatility strip and curve."""

    theta: float
    vol: PiecewiseVol
    curve: Curve
    warn_negative: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta))
        if self.theta < 0 and self.warn_negative:
            log.warning("negative mean reversion %.6g: extrapolation may be unstable", self.theta)


@dataclass(frozen=True, eq=False)
class SwapSpec:
    """Fixed-vs-float swap in the single-curve setting.

    Parameters
    ----------
    start : float
        First reset date ``T0``.
    payment_dates : array_like
        ``T1 < ... < Tm``.
    strike : float
        Fixed rate ``K``.
    swap_type : int
        -1 payer (pay fixed), +1 receiver.
    notional : float
        Currency notional.
    """

    start: float
    payment_dates: np.ndarray
    strike: float
    swap_type: int = RECEIVER
    notional: float = 1.0

    def __post_init__(self):
        dates = np.atleast_1d(np.asarray(self.payment_dates, dtype=float)).copy()
        if dates.size == 0:
            raise DomainError("swap needs at least one payment date")
        if np.any(np.diff(np.concatenate(([self.start], dates))) <= 0):
            raise DomainError("swap dates must be strictly increasing from the start date")
        if self.swap_type not in (PAYER, RECEIVER):
            raise DomainError("swap_type must be -1 (payer) or +1 (receiver)")
        dates.setflags(write=False)
        object.__setattr__(self, "payment_dates", dates)
        object.__setattr__(self, "start", float(self.start))
        object.__setattr__(self, "strike", float(self.strike))

    @classmethod
    def from_schedule(cls, start, end, frequency=1.0, strike=0.0, swap_type=RECEIVER, notional=1.0):
        """Regular schedule with period ``frequency`` (years) from ``start`` to ``end``."""
        n = int(round((end - start) / frequency))
        if n < 1 or abs(start + n * frequency - end) > 1e-9:
            raise DomainError("swap tenor must be a whole number of periods")
        dates = start + frequency * np.arange(1, n + 1)
        return cls(start, dates, strike, swap_type, notional)

    @property
    def reset_dates(self) -> np.ndarray:
        return np.concatenate(([self.start], self.payment_dates[:-1]))

    @property
    def accruals(self) -> np.ndarray:
        return np.diff(np.concatenate(([self.start], self.payment_dates)))

    @property
    def maturity(self) -> float:
        return float(self.payment_dates[-1])

    def cashflow_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Dates ``T0..Tm`` and weights ``w`` with ``swap = delta * sum w_k P(T_k)``."""
        dates = np.concatenate(([self.start], self.payment_dates))
        w = np.concatenate(([-1.0], self.strike * self.accruals))
        w[-1] += 1.0
        return dates, w

    def with_strike(self, strike) -> "SwapSpec":
        return replace(self, strike=float(strike))

    def with_type(self, swap_type) -> "SwapSpec":
        return replace(self, swap_type=swap_type)


def hw_B(theta, s, t):
    """``B(s,t) = (1 - exp(-theta (t-s))) / theta``; equals ``t - s`` at theta = 0."""
    tau = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
    out = tau * _phi(theta * tau)
    return out[()] if np.ndim(out) == 0 else out


def _segment_sum(params, s, t, kernel):
    """Sum over vol segments of ``sigma^2 [kernel(t - lo) - kernel(t - hi)]`` on [s, t]."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s > t + 1e-14):
        raise TimeOrder("expected s <= t")
    out = np.zeros(np.broadcast(s, t).shape)
    for lo, hi, sig in params.vol.segments():
        a = np.maximum(s, lo)
        b = np.minimum(t, hi)
        active = b > a
        if not np.any(active):
            continue
        tau_far = np.where(active, t - a, 0.0)
        tau_near = np.where(active, t - b, 0.0)
        out = out + sig**2 * kernel(tau_far, tau_near)
    return out


def _ret(x):
    return x[()] if np.ndim(x) == 0 else x


def hw_variance(params: HwParams, s, t):
    """Conditional variance ``Var[r(t) | F_s] = int_s^t sigma^2 e^{-2 theta (t-u)} du``."""
    th = params.theta

    def kernel(far, near):
        # e^{-2 th near} * int_0^{far-near} e^{-2 th v} dv
        return np.exp(-2 * th * near) * (far - near) * _phi(2 * th * (far - near))

    return _ret(_segment_sum(params, s, t, kernel))


def hw_V(params: HwParams, s, t):
    """``V(s,t) = int_s^t sigma(u)^2 B(u,t)^2 du``."""
    th = params.theta
    return _ret(_segment_sum(params, s, t, lambda far, near: _g_kernel(far, th) - _g_kernel(near, th)))


def hw_convexity(params: HwParams, t):
    """``I(t) = int_0^t sigma(u)^2 B(u,t) e^{-theta (t-u)} du``, so ``b = f + I``."""
    th = params.theta
    return _ret(_segment_sum(params, 0.0, t, lambda far, near: _k_kernel(far, th) - _k_kernel(near, th)))


def hw_b(params: HwParams, t):
    """Deterministic shift ``b(t)``; also the mean of ``r(t)``."""
    return _ret(params.curve.inst_forward(t) + hw_convexity(params, t))


def hw_zcb(params: HwParams, t, T, x):
    """Zero-coupon bond ``P(t, T)`` given the de-meaned state ``x(t) = r(t) - b(t)``.

    Written in the reduced form ``P^M(0,T)/P^M(0,t) exp(-B (x + I(t)) - B^2 Var(0,t)/2)``
    which equals ``exp(V(t,T)/2 - int_t^T b - x B)`` identically.
    """
    t = float(t)
    T = np.asarray(T, dtype=float)
    if np.any(T < t):
        raise TimeOrder("bond maturity before observation time")
    B = hw_B(params.theta, t, T)
    var = hw_variance(params, 0.0, t)
    conv = hw_convexity(params, t)
    curve = params.curve
    log_a = curve.log_discount(T) - curve.log_discount(t) - B * conv - 0.5 * B * B * var
    out = np.exp(log_a - B * np.asarray(x, dtype=float))
    return _ret(out)


def hw_zcb_matrix(params: HwParams, t, maturities, x):
    """Bond prices for states ``x`` (rows) and ``maturities`` (columns)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mats = np.atleast_1d(np.asarray(maturities, dtype=float))
    B = hw_B(params.theta, t, mats)
    var = hw_variance(params, 0.0, t)
    conv = hw_convexity(params, t)
    curve = params.curve
    log_a = curve.log_discount(mats) - curve.log_discount(t) - B * conv - 0.5 * B * B * var
    return np.exp(log_a[None, :] - x[:, None] * B[None, :])


def hw_zcbo(params: HwParams, t, T, S, K, opt_type, x=0.0):
    """European option expiring at ``T`` on the bond maturing at ``S``.

    Parameters
    ----------
    t : float
        Valuation time; ``x`` is the state at ``t``.
    T, S : float
        Option expiry and bond maturity, ``t <= T <= S``.
    K : float or ndarray
        Strike, positive.
    opt_type : int
        +1 call, -1 put.
    """
    if not (t <= T <= S):
        raise TimeOrder("expected t <= T <= S")
    K = np.asarray(K, dtype=float)
    if np.any(K <= 0):
        raise NonpositiveStrike("bond option strike must be positive")
    p_s = hw_zcb(params, t, S, x)
    p_t = hw_zcb(params, t, T, x)
    sd = hw_B(params.theta, T, S) * np.sqrt(hw_variance(params, t, T))
    return _ret(p_t * black_price(p_s / p_t, K, sd, 1.0, opt_type))


def _jamshidian_terms(params: HwParams, spec: SwapSpec, T_M: float):
    dates, w = spec.cashflow_weights()
    if dates[0] < T_M - 1e-12:
        raise TimeOrder("swaption expiry must not be after the swap start")
    keep = dates > T_M + 1e-12
    fixed_start = not keep[0]  # P(T_M, T0) = 1 is not an option
    B = hw_B(params.theta, T_M, dates)
    var = hw_variance(params, 0.0, T_M)
    conv = hw_convexity(params, T_M)
    curve = params.curve
    log_a = curve.log_discount(dates) - curve.log_discount(T_M) - B * conv - 0.5 * B * B * var
    return dates, w, B, log_a, var, keep, fixed_start


def jamshidian_objective(params: HwParams, spec: SwapSpec, T_M: float):
    """Return ``g(x) = sum_k w_k P(T_M, T_k; x)`` as a vectorized callable."""
    _, w, B, log_a, *_ = _jamshidian_terms(params, spec, T_M)

    def g(x):
        x = np.asarray(x, dtype=float)
        return np.exp(log_a - np.multiply.outer(x, B)) @ w

    return g


def _jamshidian_root(w, B, log_a):
    def g(x):
        return float(np.exp(log_a - x * B) @ w)

    lo, hi = -1.0, 1.0
    while True:
        g_lo, g_hi = g(lo), g(hi)
        if g_lo > 0 > g_hi:
            break
        if hi >= 5.0:
            raise RootBracketFailure(
                f"Jamshidian root not bracketed within |x| <= 5 (g={g_lo:.3e}, {g_hi:.3e})"
            )
        lo, hi = max(2 * lo, -5.0), min(2 * hi, 5.0)
    grid = np.linspace(lo, hi, 11)
    slope = -(np.exp(log_a - np.multiply.outer(grid, B)) * B) @ w
    if np.any(slope >= 0):
        log.debug("Jamshidian objective not monotone on [%g, %g]", lo, hi)
    return optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def hw_swaption(params: HwParams, spec: SwapSpec, T_M: float) -> float:
    """European swaption at time 0 by Jamshidian's decomposition.

    The swaption exercising at ``T_M`` into ``spec`` (``T_M <= T0``) is the
    portfolio ``sum_k w_k ZCBO(T_M, T_k, K_k, delta)`` with strikes
    ``K_k = P(T_M, T_k; x*)`` at the critical state ``x*``. A forward-start
    leg ``T0 > T_M`` enters with weight -1.
    """
    dates, w, B, log_a, var, keep, _ = _jamshidian_terms(params, spec, T_M)
    x_star = _jamshidian_root(w, B, log_a)
    strikes = np.exp(log_a - x_star * B)
    curve = params.curve
    p_m = curve.discount(T_M)
    p_k = curve.discount(dates)
    sd = B * np.sqrt(var)
    opt = black_price(p_k / p_m, strikes, sd, 1.0, spec.swap_type)
    value = p_m * np.sum(w[keep] * opt[keep])
    return float(spec.notional * value)


def hw_exact_step(params: HwParams, x_s, s, t, gaussian):
    """Exact transition of the de-meaned state from ``s`` to ``t``."""
    if not t > s:
        raise TimeOrder("expected s < t")
    decay = np.exp(-params.theta * (t - s))
    return x_s * decay + np.sqrt(hw_variance(params, s, t)) * np.asarray(gaussian, dtype=float)


# ---------------------------------------------------------------------------
# calibration


def bootstrap_vol(surface, curve, T_cot, price_fn, initial=0.01, tol=1e-12):
    """Sequential co-terminal bootstrap of a piecewise volatility strip.

    ``price_fn(vol, spec, T_M)`` returns the unit-notional model price. For
    each co-terminal ATM quote in expiry order the earlier pillars are held
    fixed and the current one solved by safeguarded Newton.
    """
    quotes = surface.coterminal_atm(T_cot)
    pillars = np.array([q.expiry for q in quotes])
    vol = PiecewiseVol(pillars, np.full(pillars.size, initial))
    guess = initial
    for c, quote in enumerate(quotes):
        spec = surface.underlying(curve, quote)
        target = surface.market_price(curve, quote)

        def resid(sig, c=c, spec=spec, T=quote.expiry):
            return price_fn(vol.with_value(c, sig), spec, T) - target

        lo, hi = 1e-8, 0.5
        try:
            r_lo = resid(lo)
            if r_lo > 0:
                raise NegativeVolRejected(
                    f"market price of {quote.label()} below model value at zero vol",
                    instrument=quote, residual=r_lo,
                )
            sig = find_root(resid, bracket=(lo, hi), x0=guess, tol=tol)
        except (NoBracket, MaxIterations) as exc:
            raise CalibrationFailure(
                f"volatility bootstrap failed at {quote.label()}: {exc}", instrument=quote,
            ) from exc
        res = resid(sig)
        if abs(res) > max(1e-8, tol):
            raise CalibrationFailure(
                f"bootstrap residual {res:.3e} at {quote.label()}", instrument=quote, residual=res,
            )
        vol = vol.with_value(c, sig)
        guess = sig
    return vol


def hw_calibrate_vol(curve, surface, theta, T_cot) -> PiecewiseVol:
    """Bootstrap the HW volatility strip to the co-terminal ATM swaptions."""

    def price(vol, spec, T_M):
        return hw_swaption(HwParams(theta, vol, curve, warn_negative=False), spec, T_M)

    return bootstrap_vol(surface, curve, T_cot, price)


def atm_vol_mse(params_fn, curve, surface, quotes):
    """Mean squared implied-vol error over ``quotes`` for pricer ``params_fn``."""
    err = []
    for q in quotes:
        spec = surface.underlying(curve, q)
        model = params_fn(spec, q.expiry)
        err.append(surface.implied_vol(curve, q, model) - q.implied_vol)
    return float(np.mean(np.square(err)))


def hw_calibrate_mean_reversion(curve, surface, T_cot=None, bounds=(-0.1, 1.0), xatol=1e-7):
    """Fit theta by minimizing the ATM implied-vol MSE over the whole ATM grid.

    Each candidate theta re-bootstraps the volatility strip on the
    co-terminal strip ending at ``T_cot`` (default: the most common
    expiry+tenor of the surface).

    Returns
    -------
    float
        The fitted mean reversion.
    """
    if T_cot is None:
        T_cot = surface.default_coterminal()
    quotes = surface.atm_quotes()
    if not quotes:
        raise CalibrationFailure("surface has no ATM quotes")

    def objective(theta):
        try:
            vol = hw_calibrate_vol(curve, surface, theta, T_cot)
        except CalibrationFailure:
            return 1.0
        params = HwParams(theta, vol, curve, warn_negative=False)
        return atm_vol_mse(lambda spec, T: hw_swaption(params, spec, T), curve, surface, quotes)

    res = optimize.minimize_scalar(objective, bounds=bounds, method="bounded",
                                   options={"xatol": xatol, "maxiter": 200})
    if not np.isfinite(res.fun) or res.fun >= 1.0:
        raise CalibrationFailure("mean-reversion fit failed", residual=res.fun)
    theta = float(res.x)
    if theta < 0:
        log.warning("calibrated mean reversion is negative (%.6g)", theta)
    return theta


@dataclass(frozen=True, eq=False)
class HwBondPricer:
    """Analytic bond prices keyed by the short rate, same interface as a regression table."""

    params: HwParams
    seed: int = -1  # never collides with a simulation seed

    def bonds(self, t, maturities, rates):
        x = np.atleast_1d(np.asarray(rates, dtype=float)) - float(hw_b(self.params, t))
        return hw_zcb_matrix(self.params, t, maturities, x)
