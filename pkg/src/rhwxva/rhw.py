"""Randomized Hull-White model.

The mean reversion of a Hull-White model is randomized over the nodes of a
Gauss rule for a normal mixing law. The resulting short rate has a
finite normal-mixture density at every time and follows a single SDE with
a state-dependent drift and the common volatility ``sigma_x(t)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import optimize

from .exceptions import CalibrationFailure, ZeroTime
from .hw import (
    HwParams,
    PiecewiseVol,
    bootstrap_vol,
    hw_convexity,
    hw_swaption,
    hw_variance,
)
from .mathkit import QuadratureSet, gauss_quadrature_normal, norm_cdf

log = logging.getLogger(__name__)

THETA_FLOOR = -0.1


@dataclass(frozen=True, eq=False)
class RhwModel:
    """Mixture of Hull-White models sharing volatility and curve.

    Parameters
    ----------
    quad : QuadratureSet
        Mean-reversion nodes and their weights.
    vol : PiecewiseVol
        Common volatility strip.
    curve : Curve
        Market curve fitted by every node.
    a_hat, b_hat : float, optional
        Mixing-law parameters the quadrature was generated from.
    """

    quad: QuadratureSet
    vol: PiecewiseVol
    curve: object
    a_hat: float | None = None
    b_hat: float | None = None
    nodes: tuple = field(init=False, repr=False)

    def __post_init__(self):
        nodes = tuple(HwParams(th, self.vol, self.curve, warn_negative=False) for th in self.quad.nodes)
        object.__setattr__(self, "nodes", nodes)
        if np.any(self.quad.nodes < 0):
            log.warning("rHW model has negative mean-reversion nodes (min %.4g)", self.quad.nodes.min())

    @classmethod
    def from_normal(cls, a_hat, b_hat, n, vol, curve) -> "RhwModel":
        return cls(gauss_quadrature_normal(a_hat, b_hat, n), vol, curve, a_hat, b_hat)

    @classmethod
    def from_hw(cls, params: HwParams) -> "RhwModel":
        """Single-node model that coincides with ``params``."""
        quad = QuadratureSet(np.array([params.theta]), np.array([1.0]))
        return cls(quad, params.vol, params.curve, params.theta, 0.0)

    @property
    def weights(self) -> np.ndarray:
        return self.quad.weights

    @property
    def thetas(self) -> np.ndarray:
        return self.quad.nodes

    def __len__(self):
        return len(self.quad)

    def node_moments(self, t):
        """Per-node mean and variance of ``r(t)``, shape ``(N,) + shape(t)``."""
        f = self.curve.inst_forward(t)
        means = np.array([f + hw_convexity(p, t) for p in self.nodes])
        variances = np.array([hw_variance(p, 0.0, t) for p in self.nodes])
        return means, variances


def as_mixture(model) -> RhwModel:
    """View a Hull-White parameter set as a one-node mixture."""
    return RhwModel.from_hw(model) if isinstance(model, HwParams) else model


def _node_stats(model, t):
    if t <= 0:
        raise ZeroTime("mixture density is degenerate at t = 0")
    means, variances = model.node_moments(float(t))
    return means, np.sqrt(variances)


def node_pdfs(model, t, y):
    """Per-node normal densities, shape ``(N,) + shape(y)``."""
    means, sds = _node_stats(as_mixture(model), t)
    y = np.asarray(y, dtype=float)
    z = (y[None, ...] - means.reshape((-1,) + (1,) * y.ndim)) / sds.reshape((-1,) + (1,) * y.ndim)
    return np.exp(-0.5 * z * z) / (np.sqrt(2 * np.pi) * sds.reshape((-1,) + (1,) * y.ndim))


def rand_pdf(model, t, y):
    """Mixture density ``sum_n w_n N(y; mean_n(t), var_n(t))``."""
    model = as_mixture(model)
    y = np.asarray(y, dtype=float)
    out = np.tensordot(model.weights, node_pdfs(model, t, y), axes=1)
    return out[()] if out.ndim == 0 else out


def rand_cdf(model, t, y):
    """Mixture distribution function."""
    model = as_mixture(model)
    means, sds = _node_stats(model, t)
    y = np.asarray(y, dtype=float)
    shape = (-1,) + (1,) * y.ndim
    z = (y[None, ...] - means.reshape(shape)) / sds.reshape(shape)
    out = np.tensordot(model.weights, norm_cdf(z), axes=1)
    return out[()] if out.ndim == 0 else out


def _normal_raw_moment(m, mu, var):
    # E[(mu + sd Z)^m] by the binomial theorem; odd normal moments vanish
    total = np.zeros(np.broadcast(mu, var).shape)
    dfact = 1.0
    for k in range(0, m + 1, 2):
        if k > 0:
            dfact *= k - 1
        total = total + comb(m, k) * mu ** (m - k) * var ** (k // 2) * dfact
    return total


def rand_moment(model, m: int, t, center=0.0, scale=1.0):
    """Raw moment ``E[((r(t) - center)/scale)^m]`` of the mixture.

    With the default ``center=0, scale=1`` this is ``E[r(t)^m]``.
    """
    model = as_mixture(model)
    means, variances = model.node_moments(float(t))
    mu = (means - center) / scale
    var = variances / scale**2
    return float(model.weights @ _normal_raw_moment(int(m), mu, var))


def _log_weight_terms(model, t, y):
    means, variances = model.node_moments(float(t))
    y = np.asarray(y, dtype=float)
    shape = (-1,) + (1,) * y.ndim
    gamma = (
        np.log(model.weights).reshape(shape)
        - 0.5 * np.log(2 * np.pi * variances).reshape(shape)
        - (y[None, ...] - means.reshape(shape)) ** 2 / (2 * variances.reshape(shape))
    )
    return gamma


def softmax_weights(gamma):
    """Normalized ``exp(gamma_n)`` along axis 0 with the max-shift for stability."""
    gamma = np.asarray(gamma, dtype=float)
    g = np.exp(gamma - gamma.max(axis=0, keepdims=True))
    return g / g.sum(axis=0, keepdims=True)


def lambda_weights(model, t, y):
    """Conditional node probabilities ``Lambda_n(t, y)``, shape ``(N,) + shape(y)``.

    At ``t = 0`` (degenerate densities) the mixing weights are returned.
    """
    model = as_mixture(model)
    y = np.asarray(y, dtype=float)
    if t <= 0:
        return np.broadcast_to(model.weights.reshape((-1,) + (1,) * y.ndim),
                               (len(model),) + y.shape).copy()
    with np.errstate(divide="ignore"):
        gamma = _log_weight_terms(model, t, y)
    return softmax_weights(gamma)


def node_drifts(model, t, y):
    """Drift of each node's short rate, shape ``(N,) + shape(y)``."""
    model = as_mixture(model)
    y = np.asarray(y, dtype=float)
    shape = (-1,) + (1,) * y.ndim
    f = model.curve.inst_forward(t)
    dfdt = model.curve.forward_slope(t)
    variances = np.array([hw_variance(p, 0.0, t) for p in model.nodes])
    th = model.thetas.reshape(shape)
    return dfdt + th * f - th * y[None, ...] + variances.reshape(shape)


def rhw_drift(model, t, y):
    """State-dependent drift ``sum_n Lambda_n(t,y) (f' + theta_n (f - y) + Var_n(t))``."""
    out = np.sum(lambda_weights(model, t, y) * node_drifts(model, t, y), axis=0)
    return out[()] if np.ndim(out) == 0 else out


def rhw_diffusion(model, t):
    """Diffusion coefficient; the common volatility ``sigma_x(t)``."""
    return model.vol(t)


def rhw_swaption(model, spec, T_M) -> float:
    """Swaption value as the weighted sum of per-node Jamshidian prices."""
    model = as_mixture(model)
    return float(sum(w * hw_swaption(p, spec, T_M) for w, p in zip(model.weights, model.nodes)))


@dataclass
class CalibrationInfo:
    objective: float
    converged: bool
    iterations: int
    trace: list


def _rhw_pricer(quad, curve):
    def price(vol, spec, T_M):
        return sum(w * hw_swaption(HwParams(th, vol, curve, warn_negative=False), spec, T_M)
                   for w, th in zip(quad.weights, quad.nodes))

    return price


def smile_objective(curve, surface, quad, T_cot, strike_set, vol=None):
    """Bootstrap the ATM strip for ``quad`` and return (MSE, vol, errors)."""
    pricer = _rhw_pricer(quad, curve)
    if vol is None:
        vol = bootstrap_vol(surface, curve, T_cot, pricer)
    errors = []
    for q in surface.coterminal_quotes(T_cot, strike_set):
        spec = surface.underlying(curve, q)
        model_vol = surface.implied_vol(curve, q, pricer(vol, spec, q.expiry))
        errors.append(model_vol - q.implied_vol)
    errors = np.asarray(errors)
    return float(np.mean(errors**2)), vol, errors


def rhw_calibrate(curve, surface, n, T_cot, strike_set=None, initial=(0.05, 0.02),
                  tol=1e-12, maxiter=200, return_info=False):
    """Fit ``(a_hat, b_hat)`` and the volatility strip to a co-terminal smile.

    For each candidate the Gauss-normal rule is generated, the volatility
    strip is bootstrapped to the ATM co-terminal quotes with the mixture
    pricer, and the mean squared implied-vol error over the co-terminal
    quotes in ``strike_set`` is returned. ``b_hat`` is reflected at zero.
    Candidates with any node below -0.1 are rejected.

    Returns
    -------
    RhwModel or (RhwModel, CalibrationInfo)
    """
    trace = []
    best = {"f": np.inf, "x": None, "vol": None}

    def objective(p):
        a, b = float(p[0]), abs(float(p[1]))
        quad = gauss_quadrature_normal(a, b, n)
        if quad.nodes.min() < THETA_FLOOR:
            return 1.0
        try:
            f, vol, _ = smile_objective(curve, surface, quad, T_cot, strike_set)
        except CalibrationFailure:
            return 1.0
        trace.append((a, b, f))
        if f < best["f"]:
            best.update(f=f, x=(a, b), vol=vol)
        return f

    def stop(*_):
        if best["f"] < tol:
            raise StopIteration

    x0 = np.asarray(initial, dtype=float)
    simplex = np.array([x0, x0 + [0.05, 0.0], x0 + [0.0, 0.03]])
    res = optimize.minimize(
        objective, x0, method="Nelder-Mead", callback=stop,
        options={"maxiter": maxiter, "xatol": 1e-9, "fatol": tol * 1e-3, "initial_simplex": simplex},
    )
    if best["x"] is None:
        raise CalibrationFailure("no admissible candidate during rHW calibration", trace=trace)
    a, b = best["x"]
    quad = gauss_quadrature_normal(a, b, n)
    if quad.nodes.min() < THETA_FLOOR:
        raise CalibrationFailure("calibrated node below the mean-reversion floor", trace=trace)
    model = RhwModel(quad, best["vol"], curve, a, b)
    info = CalibrationInfo(best["f"], best["f"] < tol, int(res.nit), trace)
    if return_info:
        return model, info
    return model
