"""Monte-Carlo simulation of the short rate.

Hull-White models are stepped exactly in the de-meaned state; mixture
models use an Euler scheme with the state-dependent drift. Normals come
from one Philox stream per path, keyed by ``(seed, stream, path index)``,
so a run with more paths reproduces the first paths of a smaller run, and
the Hull-White and mixture simulations with the same seed share their
Brownian increments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, EmptyGrid, GridMismatch
from .hw import HwParams, hw_b, hw_convexity, hw_variance
from .rhw import as_mixture


DEFAULT_STEPS_PER_YEAR = 200
_CHUNK_BYTES = 2**27
_TIME_DIGITS = 10


@dataclass(frozen=True, eq=False)
class PathSet:
    """Simulated short rates and running discount integrals at record dates.

    Attributes
    ----------
    times : ndarray
        Record dates, shape ``(n,)``.
    rates : ndarray
        Short rates, shape ``(M, n)``.
    integrals : ndarray
        ``int_start^t r(s) ds`` by the trapezoid rule on the fine grid.
    """

    times: np.ndarray
    rates: np.ndarray
    integrals: np.ndarray
    seed: int
    start: float = 0.0
    stream: int = 0

    @property
    def n_paths(self) -> int:
        return self.rates.shape[0]

    def index(self, t) -> int:
        hits = np.flatnonzero(np.abs(self.times - t) < 1e-9)
        if hits.size == 0:
            raise GridMismatch(f"time {t} is not a record date")
        return int(hits[0])

    def rate(self, t) -> np.ndarray:
        return self.rates[:, self.index(t)]

    def discount(self, t=None) -> np.ndarray:
        """Path-wise ``exp(-int r)`` at one record date or at all of them."""
        if t is None:
            return np.exp(-self.integrals)
        return np.exp(-self.integrals[:, self.index(t)])


def time_grid(record_dates, steps_per_year=DEFAULT_STEPS_PER_YEAR, start=0.0):
    """Union of a uniform grid from ``start`` and the record dates.

    Returns
    -------
    grid : ndarray
    record_index : ndarray
        Position of each record date in ``grid``.
    """
    records = np.atleast_1d(np.asarray(record_dates, dtype=float))
    if records.size == 0:
        raise EmptyGrid("no record dates")
    if np.any(records < start - 1e-12):
        raise DomainError("record dates before the simulation start")
    horizon = records.max()
    n = int(np.ceil((horizon - start) * steps_per_year - 1e-9))
    uniform = start + np.arange(n + 1) / steps_per_year
    uniform = uniform[uniform < horizon - 1e-9]
    grid = np.unique(np.round(np.concatenate((uniform, [start], records)), _TIME_DIGITS))
    idx = np.searchsorted(grid, np.round(records, _TIME_DIGITS))
    return grid, idx


def path_normals(seed, n_steps, first, count, stream=0):
    """Standard normals of shape ``(count, n_steps)`` for paths ``first..first+count-1``."""
    if not 0 <= seed < 2**64:
        raise DomainError("seed must be a non-negative 64-bit integer")
    if not 0 <= stream < 2**24 or first + count > 2**40:
        raise DomainError("stream id must be below 2**24 and path indices below 2**40")
    out = np.empty((count, n_steps))
    for j in range(count):
        key = np.array([seed, (stream << 40) + first + j], dtype=np.uint64)
        out[j] = np.random.Generator(np.random.Philox(key=key)).standard_normal(n_steps)
    return out


def _chunks(n_paths, n_steps):
    size = max(1, min(n_paths, _CHUNK_BYTES // (8 * max(n_steps, 1))))
    for first in range(0, n_paths, size):
        yield first, min(size, n_paths - first)


def _euler_coefficients(model, grid):
    t = grid[:-1]
    f = model.curve.inst_forward(grid)
    thetas = model.thetas
    variances = np.array([np.atleast_1d(hw_variance(p, 0.0, t)) for p in model.nodes])
    means = f[None, :-1] + np.array([np.atleast_1d(hw_convexity(p, t)) for p in model.nodes])
    drift_const = thetas[:, None] * f[None, :-1] + variances
    step_var = model.vol.integrated_variance(grid[:-1], grid[1:])
    degenerate = variances.min(axis=0) <= 0
    safe = np.where(degenerate[None, :], 1.0, variances)
    with np.errstate(divide="ignore"):
        log_c = np.log(model.weights)[:, None] - 0.5 * np.log(safe)
    inv2v = 0.5 / safe
    # log N(r; m, v) + log w = -inv2v r^2 + 2 m inv2v r + (log_c - m^2 inv2v)
    quad = np.stack((-inv2v, 2.0 * means * inv2v, log_c - means**2 * inv2v), axis=-1)
    return {
        "df": np.diff(f),
        "dt": np.diff(grid),
        "sd": np.sqrt(step_var),
        "means": means,
        "quad": np.ascontiguousarray(quad.transpose(1, 0, 2)),
        "drift_const": drift_const,
        "degenerate": degenerate,
    }


def _euler_chunk(model, co, r0, z, record_index, rec_r, rec_i):
    n_steps = z.shape[1]
    z = np.ascontiguousarray(z.T)
    thetas = model.thetas
    weights = model.weights
    n_nodes = thetas.size
    r = r0.copy()
    integ = np.zeros(r.size)
    feats = np.empty((3, r.size))
    feats[2] = 1.0
    rec_pos = {int(k): col for col, k in enumerate(record_index)}
    if 0 in rec_pos:
        rec_r[:, rec_pos[0]] = r
        rec_i[:, rec_pos[0]] = 0.0
    df, dt, sd = co["df"], co["dt"], co["sd"]
    quad, a_n = co["quad"], co["drift_const"]
    for i in range(n_steps):
        if n_nodes == 1:
            mu = a_n[0, i] - thetas[0] * r
        elif co["degenerate"][i]:
            mu = weights @ a_n[:, i] - (weights @ thetas) * r
        else:
            # node log-densities are quadratics in r
            np.multiply(r, r, out=feats[0])
            feats[1] = r
            g = quad[i] @ feats
            g -= g.max(axis=0)
            # weights below e^-60 of the leading node cannot move the sum;
            # clipping keeps exp off its slow underflow path
            np.maximum(g, -60.0, out=g)
            np.exp(g, out=g)
            mu = (a_n[:, i] @ g - (thetas @ g) * r) / g.sum(axis=0)
        r_new = r + df[i] + dt[i] * mu + sd[i] * z[i]
        integ += 0.5 * dt[i] * (r + r_new)
        r = r_new
        col = rec_pos.get(i + 1)
        if col is not None:
            rec_r[:, col] = r
            rec_i[:, col] = integ


def _exact_chunk(params, grid, x0, z, record_index, rec_r, rec_i):
    b = np.atleast_1d(hw_b(params, grid))
    decay = np.exp(-params.theta * np.diff(grid))
    sd = np.sqrt(np.atleast_1d(hw_variance(params, grid[:-1], grid[1:])))
    z = np.ascontiguousarray(z.T)
    x = x0.copy()
    r = x + b[0]
    integ = np.zeros(x.size)
    dt = np.diff(grid)
    rec_pos = {int(k): col for col, k in enumerate(record_index)}
    if 0 in rec_pos:
        rec_r[:, rec_pos[0]] = r
        rec_i[:, rec_pos[0]] = 0.0
    for i in range(z.shape[0]):
        x = x * decay[i] + sd[i] * z[i]
        r_new = x + b[i + 1]
        integ += 0.5 * dt[i] * (r + r_new)
        r = r_new
        col = rec_pos.get(i + 1)
        if col is not None:
            rec_r[:, col] = r
            rec_i[:, col] = integ


def simulate(model, record_dates, n_paths, seed, steps_per_year=DEFAULT_STEPS_PER_YEAR,
             stream=0, start=0.0, initial_rates=None, scheme=None) -> PathSet:
    """Simulate short-rate paths and record them at ``record_dates``.

    Parameters
    ----------
    model : HwParams or RhwModel
        Hull-White parameters are simulated exactly unless
        ``scheme="euler"``; mixture models always use Euler.
    record_dates : array_like
        Dates at which rates and discount integrals are stored.
    n_paths, seed : int
    steps_per_year : float
        Density of the uniform part of the simulation grid.
    stream : int
        Independent sub-stream id (used for nested simulations).
    start : float
        Simulation start time; ``initial_rates`` gives ``r(start)`` per path
        and defaults to the model mean ``f(0, 0)`` at the origin.
    """
    if n_paths < 1:
        raise DomainError("n_paths must be positive")
    grid, rec_idx = time_grid(record_dates, steps_per_year, start)
    records = grid[rec_idx]
    n_steps = grid.size - 1
    exact = isinstance(model, HwParams) and scheme != "euler"
    mixture = None if exact else as_mixture(model)
    if initial_rates is None:
        if start != 0.0:
            raise DomainError("initial_rates required when start > 0")
        initial_rates = np.full(n_paths, float(model.curve.inst_forward(0.0)))
    initial_rates = np.broadcast_to(np.asarray(initial_rates, dtype=float), (n_paths,))
    rates = np.empty((n_paths, records.size))
    integrals = np.empty((n_paths, records.size))
    co = None if exact else _euler_coefficients(mixture, grid)
    for first, count in _chunks(n_paths, n_steps):
        z = path_normals(seed, n_steps, first, count, stream)
        r0 = initial_rates[first:first + count].copy()
        rr = np.empty((count, records.size))
        ri = np.empty((count, records.size))
        if exact:
            x0 = r0 - float(hw_b(model, start))
            _exact_chunk(model, grid, x0, z, rec_idx, rr, ri)
        else:
            _euler_chunk(mixture, co, r0, z, rec_idx, rr, ri)
        rates[first:first + count] = rr
        integrals[first:first + count] = ri
    return PathSet(records, rates, integrals, int(seed), float(start), int(stream))


def rhw_euler_simulate(model, grid, n_paths, seed) -> PathSet:
    """Euler simulation recording every point of ``grid`` (which starts at 0)."""
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise EmptyGrid("simulation grid needs at least two points")
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise GridMismatch("grid must start at 0 and be strictly increasing")
    # a steps_per_year below the grid density leaves the grid itself
    spy = 1.0 / np.max(np.diff(grid)) * (1 - 1e-12)
    return simulate(as_mixture(model), grid, n_paths, seed, steps_per_year=spy, scheme="euler")
