"""Numerical kernels shared across the package.

Normal distribution helpers, (shifted) Black pricing and its inverse, Gauss
quadrature from a moment sequence, least-squares polynomial regression,
Lagrange interpolation, scalar root finding and trapezoidal integration.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg, optimize, special

from .exceptions import (
    DomainError,
    DuplicateNodes,
    GridMismatch,
    MaxIterations,
    NoBracket,
    NoSolution,
    NotPositiveDefinite,
    RankDeficient,
)

CALL = 1
PUT = -1

VOL_LOWER = 1e-6
VOL_UPPER = 5.0


def norm_cdf(x):
    """Standard normal cumulative distribution function."""
    return special.ndtr(x)


def norm_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def _check_option_type(opt_type):
    if opt_type not in (CALL, PUT):
        raise DomainError(f"option type must be +1 (call) or -1 (put), got {opt_type}")


def black_price(fwd, strike, vol, expiry, opt_type):
    """Undiscounted Black (lognormal) option value.

    Parameters
    ----------
    fwd, strike : float or ndarray
        Forward and strike, both strictly positive.
    vol : float or ndarray
        Lognormal volatility, non-negative.
    expiry : float
        Time to expiry in years.
    opt_type : int
        +1 for a call, -1 for a put.

    Returns
    -------
    float or ndarray
        ``phi * (F N(phi d1) - K N(phi d2))``; the intrinsic value when the
        total variance is zero.
    """
    _check_option_type(opt_type)
    fwd = np.asarray(fwd, dtype=float)
    strike = np.asarray(strike, dtype=float)
    if np.any(fwd <= 0) or np.any(strike <= 0):
        raise DomainError("Black formula needs positive forward and strike")
    if np.any(np.asarray(vol) < 0) or expiry < 0:
        raise DomainError("volatility and expiry must be non-negative")
    phi = float(opt_type)
    sd = np.asarray(vol, dtype=float) * np.sqrt(expiry)
    intrinsic = np.maximum(phi * (fwd - strike), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = np.log(fwd / strike) / sd + 0.5 * sd
        d2 = d1 - sd
        value = phi * (fwd * norm_cdf(phi * d1) - strike * norm_cdf(phi * d2))
    value = np.where(sd > 0, value, intrinsic)
    return value[()] if value.ndim == 0 else value


def shifted_black_price(fwd, strike, shift, vol, expiry, opt_type):
    """Displaced-lognormal price; Black on ``fwd + shift`` and ``strike + shift``."""
    f = np.asarray(fwd, dtype=float) + shift
    k = np.asarray(strike, dtype=float) + shift
    if np.any(f <= 0) or np.any(k <= 0):
        raise DomainError("displaced forward and strike must be positive")
    return black_price(f, k, vol, expiry, opt_type)


def _black_vega(fwd, strike, vol, expiry):
    sd = vol * np.sqrt(expiry)
    d1 = np.log(fwd / strike) / sd + 0.5 * sd
    return fwd * norm_pdf(d1) * np.sqrt(expiry)


def implied_vol_shifted_black(price, fwd, strike, shift, expiry, opt_type, tol=1e-12):
    """Invert :func:`shifted_black_price` for the volatility.

    Newton iterations start at 0.2 and are safeguarded by a bisection
    bracket on ``[1e-6, 5]``.

    Raises
    ------
    NoSolution
        If ``price`` lies outside the no-arbitrage bounds.
    """
    _check_option_type(opt_type)
    f = fwd + shift
    k = strike + shift
    if f <= 0 or k <= 0 or expiry <= 0:
        raise DomainError("displaced forward/strike and expiry must be positive")
    intrinsic = max(opt_type * (f - k), 0.0)
    upper_bound = f if opt_type == CALL else k
    if price < intrinsic - 1e-14 or price > upper_bound:
        raise NoSolution(
            f"price {price} outside no-arbitrage bounds [{intrinsic}, {upper_bound}]",
            lower=intrinsic,
            upper=upper_bound,
        )

    def g(v):
        return float(black_price(f, k, v, expiry, opt_type)) - price

    lo, hi = VOL_LOWER, VOL_UPPER
    g_lo, g_hi = g(lo), g(hi)
    if g_lo >= 0:
        return lo
    if g_hi <= 0:
        if g_hi > -1e-10:
            return hi
        raise NoSolution(
            f"price {price} above the value at the upper vol bracket", lower=lo, upper=hi
        )
    v = 0.2
    for _ in range(100):
        gv = g(v)
        if abs(gv) < tol:
            return v
        if gv > 0:
            hi = v
        else:
            lo = v
        vega = _black_vega(f, k, v, expiry)
        step_ok = vega > 0
        if step_ok:
            v_new = v - gv / vega
            step_ok = lo < v_new < hi
        v = v_new if step_ok else 0.5 * (lo + hi)
        if hi - lo < 1e-15:
            return v
    raise MaxIterations("implied vol inversion did not converge in 100 iterations")


@dataclass(frozen=True)
class Polynomial:
    """Polynomial in the monomial basis, coefficients in ascending power."""

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in np.atleast_1d(self.coefficients))
        if len(coeffs) == 0:
            raise DomainError("polynomial needs at least one coefficient")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.coefficients)


@dataclass(frozen=True)
class QuadratureSet:
    """Weights and nodes of a discrete mixing distribution."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if nodes.size == 0 or nodes.size != weights.size:
            raise DomainError("nodes and weights must be non-empty and of equal length")
        if np.any(weights < 0):
            raise DomainError("quadrature weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError("quadrature weights must sum to one")
        if np.any(np.diff(nodes) < 0):
            raise DomainError("quadrature nodes must be sorted")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size


def golub_welsch(moments):
    """Gauss rule matching a sequence of ``2N`` raw moments.

    The Cholesky factor of the ``N x N`` Hankel moment matrix (plus one extra
    column from ``m_N .. m_{2N-1}``) yields the Jacobi matrix of the
    three-term recurrence; its eigenvalues are the nodes and the squared
    first eigenvector components, scaled by ``m_0``, are the weights.

    Parameters
    ----------
    moments : array_like
        ``m_0, ..., m_{2N-1}``.

    Returns
    -------
    nodes, weights : ndarray
    """
    m = np.asarray(moments, dtype=float)
    if m.size < 2 or m.size % 2:
        raise DomainError("golub_welsch needs an even number (>= 2) of moments")
    n = m.size // 2
    if m[0] <= 0:
        raise NotPositiveDefinite("zeroth moment must be positive")
    if n == 1:
        return np.array([m[1] / m[0]]), np.array([m[0]])
    hankel = linalg.hankel(m[:n], m[n - 1 : 2 * n - 1])
    try:
        chol = linalg.cholesky(hankel, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Hankel moment matrix is not positive definite") from exc
    diag = np.diag(chol)
    if np.any(diag <= 0) or not np.all(np.isfinite(chol)):
        raise NotPositiveDefinite("Hankel moment matrix is not positive definite")
    extra = linalg.solve_triangular(chol, m[n : 2 * n], lower=True)
    # upper factor R = chol.T; super-diagonal r_{j,j+1} = chol[j+1, j]
    super_diag = np.append(np.diag(chol, -1), extra[n - 1])
    ratio = super_diag / diag
    alpha = ratio - np.concatenate(([0.0], ratio[:-1]))
    beta = diag[1:] / diag[:-1]
    nodes, vecs = linalg.eigh_tridiagonal(alpha, beta)
    weights = m[0] * vecs[0, :] ** 2
    return nodes, weights


def normal_moments(count: int) -> np.ndarray:
    """Raw moments ``E[Z^k]``, ``k = 0..count-1``, of the standard normal."""
    out = np.zeros(count)
    out[0] = 1.0
    for k in range(2, count, 2):
        out[k] = out[k - 2] * (k - 1)
    return out


@lru_cache(maxsize=None)
def _standard_normal_rule(n: int):
    if n < 1 or n > 20:
        raise DomainError("Gauss-normal rule supports 1 <= N <= 20")
    h, w = golub_welsch(normal_moments(2 * n))
    h = 0.5 * (h - h[::-1])  # enforce exact symmetry
    w = 0.5 * (w + w[::-1])
    return h, w / w.sum()


def gauss_quadrature_normal(a_hat: float, b_hat: float, n: int) -> QuadratureSet:
    """N-point Gauss rule for ``N(a_hat, b_hat^2)`` as a :class:`QuadratureSet`."""
    if b_hat < 0:
        raise DomainError("b_hat must be non-negative")
    h, w = _standard_normal_rule(int(n))
    return QuadratureSet(a_hat + b_hat * h, w)


def _design_scaled(xs, degree):
    center = xs.mean()
    scale = xs.std()
    if degree > 0 and not scale > 0:
        raise RankDeficient("regression states have no dispersion")
    scale = scale if scale > 0 else 1.0
    u = (xs - center) / scale
    return np.vander(u, degree + 1, increasing=True), center, scale


def _to_monomial(coef_u, center, scale):
    """Convert coefficients in ``u = (x - c)/s`` into the raw monomial basis."""
    degree = coef_u.shape[0] - 1
    out = np.zeros_like(coef_u)
    # (x - c)^k / s^k expanded binomially
    for k in range(degree + 1):
        for j in range(k + 1):
            c = special.comb(k, j, exact=True) * (-center) ** (k - j) / scale**k
            out[j] += coef_u[k] * c
    return out


def polyfit_coefficients(xs, ys, degree: int) -> np.ndarray:
    """Least-squares monomial coefficients, ascending; ``ys`` may be 2-D.

    The design matrix is built on the standardized state and solved by an
    SVD-based least-squares routine, then mapped back to raw monomials.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float)
    if ys.shape[0] != xs.size:
        raise GridMismatch("xs and ys must have equal length")
    if xs.size <= degree:
        raise RankDeficient("need more observations than coefficients")
    design, center, scale = _design_scaled(xs, degree)
    coef_u, _, rank, _ = np.linalg.lstsq(design, ys, rcond=None)
    if rank < degree + 1:
        raise RankDeficient(f"design matrix rank {rank} < {degree + 1}")
    return _to_monomial(coef_u, center, scale)


def polyfit(xs, ys, degree: int) -> Polynomial:
    """Least-squares polynomial fit of ``ys`` on ``xs``.

    Raises
    ------
    RankDeficient
        When the design matrix has rank below ``degree + 1``.
    """
    return Polynomial(polyfit_coefficients(xs, ys, degree))


def lagrange_interp(nodes, values, x):
    """Evaluate the interpolating polynomial through ``(nodes, values)`` at ``x``.

    Uses the barycentric form; node hits return the stored value exactly.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.size != values.size or nodes.size == 0:
        raise GridMismatch("nodes and values must be non-empty and of equal length")
    if np.unique(nodes).size != nodes.size:
        raise DuplicateNodes("interpolation nodes must be distinct")
    x = np.asarray(x, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / diff.prod(axis=1)
    xf = x.reshape(-1)
    d = xf[:, None] - nodes[None, :]
    hit = d == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = bw / d
        out = (t @ values) / t.sum(axis=1)
    rows = hit.any(axis=1)
    if rows.any():
        out[rows] = values[np.argmax(hit[rows], axis=1)]
    out = out.reshape(x.shape)
    return out[()] if out.ndim == 0 else out


def find_root(f, bracket=None, x0=None, fprime=None, tol=1e-12, maxiter=200):
    """Scalar root finder.

    With a bracket only, Brent's method is used. With an initial guess
    (optionally also a bracket) Newton iterations are used; the derivative
    falls back to a central difference, and a bracket, when given, turns the
    iteration into safeguarded Newton with bisection.

    Raises
    ------
    NoBracket
        Bracket endpoints do not straddle a sign change.
    MaxIterations
        No convergence within ``maxiter`` iterations.
    """
    if bracket is not None:
        a, b = float(bracket[0]), float(bracket[1])
        fa, fb = f(a), f(b)
        if fa == 0:
            return a
        if fb == 0:
            return b
        if np.sign(fa) == np.sign(fb):
            raise NoBracket(f"f({a})={fa} and f({b})={fb} have the same sign")
        if x0 is None:
            root, res = optimize.brentq(
                f, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=maxiter,
                full_output=True, disp=False,
            )
            if not res.converged:
                raise MaxIterations(f"Brent did not converge in {maxiter} iterations")
            return root
    if x0 is None:
        raise DomainError("find_root needs a bracket or an initial guess")

    def deriv(x):
        if fprime is not None:
            return fprime(x)
        h = 1e-7 * max(1.0, abs(x))
        return (f(x + h) - f(x - h)) / (2 * h)

    x = float(x0)
    if bracket is not None:
        lo, hi = (a, b) if fa < 0 else (b, a)  # f(lo) < 0 < f(hi)
    for _ in range(maxiter):
        fx = f(x)
        if abs(fx) < tol:
            return x
        if bracket is not None:
            if fx < 0:
                lo = x
            else:
                hi = x
            if abs(hi - lo) < tol:
                return x
        d = deriv(x)
        x_new = x - fx / d if d != 0 and np.isfinite(d) else np.nan
        if bracket is not None:
            left, right = min(lo, hi), max(lo, hi)
            if not (left < x_new < right):
                x_new = 0.5 * (lo + hi)
        elif not np.isfinite(x_new):
            raise MaxIterations("Newton iteration hit a zero derivative")
        if abs(x_new - x) < tol * max(1.0, abs(x)) and bracket is None:
            return x_new
        x = x_new
    raise MaxIterations(f"root finder did not converge in {maxiter} iterations")


def trapezoid(ts, vs):
    """Trapezoidal rule ``sum 0.5 (v_i + v_{i+1}) (t_{i+1} - t_i)``."""
    ts = np.asarray(ts, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if ts.ndim != 1 or vs.shape[-1] != ts.size:
        raise GridMismatch("time grid and values must have matching length")
    if ts.size > 1 and np.any(np.diff(ts) <= 0):
        raise GridMismatch("time grid must be strictly increasing")
    return np.trapezoid(vs, ts, axis=-1)
