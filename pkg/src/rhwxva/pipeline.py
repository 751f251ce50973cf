"""End-to-end exposure runs: bond pricer, valuation simulation, profile, xVA."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import DomainError, SeedCollision
from .hw import HwBondPricer, HwParams, SwapSpec
from .products import (
    BermudanSpec,
    McEstimate,
    bermudan_first_pass,
    bermudan_future_values,
    exercise_times,
    swap_values_on_paths,
)
from .simulation import simulate
from .xva import CreditCurve, ExposureProfile, bcva, cva, dva
from .zcbreg import build_zcb_table

FIRST_PASS_STREAM = 2**23


@dataclass
class RunConfig:
    """Settings of a calibration or exposure run (defaults follow desk-scale practice)."""

    model: str = "rhw"
    n_quad: int = 5
    coterminal: float = 30.0
    strike_ratios: tuple = (0.5, 0.75, 1.0, 1.25, 1.5)
    paths_zcb: int = 10_000
    paths_val: int = 10_000
    steps_per_year: float = 200.0
    monitor_per_year: float = 20.0
    seed_zcb: int = 1
    seed_val: int = 2
    alphas: tuple = (99.0,)
    hazard_cpty: float = 0.02
    hazard_self: float = 0.01
    recovery: float = 0.0
    degree_zcb: int = 3
    degree_lsmc: int = 2
    n_colloc: int = 5
    zcb: str = "auto"

    def __post_init__(self):
        if self.model not in ("hw", "rhw"):
            raise DomainError("model must be 'hw' or 'rhw'")
        if self.seed_zcb == self.seed_val:
            raise SeedCollision("ZCB-regression and valuation seeds must differ")
        if min(self.paths_zcb, self.paths_val) < 100:
            raise DomainError("path counts must be at least 100")
        if self.n_quad < 1:
            raise DomainError("n_quad must be at least 1")
        if self.zcb not in ("auto", "analytic", "regression"):
            raise DomainError("zcb must be 'auto', 'analytic' or 'regression'")
        self.strike_ratios = tuple(float(s) for s in self.strike_ratios)
        self.alphas = tuple(float(a) for a in self.alphas)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExposureResult:
    profile: ExposureProfile
    values: np.ndarray
    discounts: np.ndarray
    timings: dict = field(default_factory=dict)
    price: McEstimate | None = None
    exercised_at: np.ndarray | None = None


def monitoring_dates(horizon, per_year):
    n = int(round(horizon * per_year))
    return np.round(np.arange(n + 1) / per_year, 10)


def bond_pricer_for(model, config: RunConfig, dates, maturities):
    """Analytic pricer for Hull-White, regression table otherwise (or on request)."""
    use_analytic = isinstance(model, HwParams) and config.zcb != "regression"
    if config.zcb == "analytic" and not isinstance(model, HwParams):
        raise DomainError("analytic bond prices are only available for Hull-White")
    if use_analytic:
        return HwBondPricer(model)
    return build_zcb_table(model, dates, maturities, config.paths_zcb, config.degree_zcb,
                           config.steps_per_year, config.seed_zcb)


def run_swap_exposure(model, swap: SwapSpec, config: RunConfig) -> ExposureResult:
    """Exposure profile of a swap: bond pricer, independent valuation run, aggregation."""
    timings = {}
    dates = monitoring_dates(swap.maturity, config.monitor_per_year)
    record = np.union1d(dates, swap.reset_dates)
    t0 = time.perf_counter()
    pricer = bond_pricer_for(model, config, record,
                             np.union1d(swap.payment_dates, [swap.start]))
    timings["zcb"] = time.perf_counter() - t0
    if getattr(pricer, "seed", None) == config.seed_val:
        raise SeedCollision("valuation seed equals the ZCB regression seed")
    t1 = time.perf_counter()
    paths = simulate(model, record, config.paths_val, config.seed_val, config.steps_per_year)
    t2 = time.perf_counter()
    values = swap_values_on_paths(pricer, swap, paths, dates)
    cols = np.searchsorted(paths.times, dates - 1e-9)
    discounts = np.exp(-paths.integrals[:, cols])
    profile = ExposureProfile.from_paths(dates, values, discounts, config.alphas,
                                         tuple(100.0 - a for a in config.alphas))
    t3 = time.perf_counter()
    timings.update(simulation=t2 - t1, valuation=t3 - t2, exposure=t3 - t1, total=t3 - t0)
    return ExposureResult(profile, values, discounts, timings)


def run_bermudan_exposure(model, spec: BermudanSpec, config: RunConfig) -> ExposureResult:
    """Two-pass LSMC price and collocation-based exposure profile of a Bermudan."""
    timings = {}
    swap = spec.underlying
    dates = monitoring_dates(swap.maturity, config.monitor_per_year)
    record = np.union1d(dates, spec.exercise_dates)
    t0 = time.perf_counter()
    pricer = bond_pricer_for(model, config, record, np.union1d(swap.payment_dates, [swap.start]))
    t1 = time.perf_counter()
    rule = bermudan_first_pass(model, pricer, spec, config.paths_val, config.seed_val,
                               config.degree_lsmc, config.steps_per_year, stream=FIRST_PASS_STREAM)
    t2 = time.perf_counter()
    paths = simulate(model, record, config.paths_val, config.seed_val, config.steps_per_year)
    ex_time = exercise_times(rule, spec, pricer, paths)
    cash = _exercise_cash(spec, pricer, paths, ex_time)
    price = McEstimate.from_samples(cash)
    values = bermudan_future_values(model, pricer, rule, spec, dates, paths, ex_time,
                                    config.n_colloc, None, config.seed_val, config.steps_per_year)
    cols = np.searchsorted(paths.times, dates - 1e-9)
    discounts = np.exp(-paths.integrals[:, cols])
    profile = ExposureProfile.from_paths(dates, values, discounts, config.alphas,
                                         tuple(100.0 - a for a in config.alphas))
    t3 = time.perf_counter()
    timings.update(zcb=t1 - t0, first_pass=t2 - t1, exposure=t3 - t2, total=t3 - t0)
    return ExposureResult(profile, values, discounts, timings, price, ex_time)


def _exercise_cash(spec, pricer, paths, ex_time):
    """Discounted exercise cashflow per path (0 if never exercised)."""
    out = np.zeros(paths.n_paths)
    for t in spec.exercise_dates:
        hit = np.abs(ex_time - t) < 1e-9
        if hit.any():
            col = paths.index(t)
            pay = spec.payoff(pricer, t, paths.rates[hit, col])
            out[hit] = pay * np.exp(-paths.integrals[hit, col])
    return out


def xva_summary(profile: ExposureProfile, config: RunConfig) -> dict:
    c = CreditCurve(config.hazard_cpty, config.recovery)
    i = CreditCurve(config.hazard_self, config.recovery)
    return {"CVA": cva(profile, c), "DVA": dva(profile, i), "BCVA": bcva(profile, c, i)}
