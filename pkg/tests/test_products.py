import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss

from rhwxva.curve import YieldCurve
from rhwxva.exceptions import DegenerateAnnuity, DomainError, SeedCollision
from rhwxva.hw import PAYER, RECEIVER, HwBondPricer, HwParams, PiecewiseVol, SwapSpec, hw_b, hw_swaption, hw_variance
from rhwxva.mathkit import Polynomial
from rhwxva.products import (
    BermudanSpec,
    ExerciseRule,
    McEstimate,
    annuity,
    atm_strike,
    bermudan_first_pass,
    bermudan_future_values,
    bermudan_price,
    collocation_nodes,
    exercise_times,
    swap_value,
    swap_values_on_paths,
    swaption_mc,
)
from rhwxva.rhw import RhwModel, rhw_swaption
from rhwxva.simulation import simulate
from rhwxva.zcbreg import build_zcb_table

FLAT = YieldCurve.flat(0.03)
UP = YieldCurve(np.array([1.0, 3, 5, 10]), np.array([0.01, 0.02, 0.03, 0.035]))
HW = HwParams(0.05, PiecewiseVol.flat(0.01), FLAT)
PRICER = HwBondPricer(HW)
SPY = 50
FIRST = 2**23


def receiver(start=1.0, end=6.0, strike=None, curve=FLAT, notional=1e4):
    spec = SwapSpec.from_schedule(start, end, 1.0, 0.0, RECEIVER, notional)
    if strike is None:
        strike = atm_strike(curve.discount, spec)
    return spec.with_strike(strike)


def bermudan(dates=(1.0, 2.0, 3.0, 4.0, 5.0), swap=None):
    return BermudanSpec(receiver() if swap is None else swap, dates)


def two_pass(spec, n=4000, model=HW, pricer=PRICER, degree=2):
    rule = bermudan_first_pass(model, pricer, spec, n, 2, degree, SPY, stream=FIRST)
    return rule, bermudan_price(model, pricer, spec, rule, n, 2, SPY)


def within(a, b, k=3.0):
    a_v, a_s = (a.value, a.stderr) if isinstance(a, McEstimate) else (a, 0.0)
    b_v, b_s = (b.value, b.stderr) if isinstance(b, McEstimate) else (b, 0.0)
    return abs(a_v - b_v) <= k * math.hypot(a_s, b_s)


# --- swaps ---------------------------------------------------------------------------------


def test_atm_swap_is_worthless():
    for curve in (FLAT, UP):
        spec = receiver(curve=curve)
        assert swap_value(curve.discount, spec) == pytest.approx(0.0, abs=1e-12 * spec.notional)


def test_payer_receiver_antisymmetry():
    spec = receiver(strike=0.027, curve=UP)
    total = swap_value(UP.discount, spec) + swap_value(UP.discount, spec.with_type(PAYER))
    assert total == 0.0


def test_flat_curve_discount_sum():
    spec = SwapSpec.from_schedule(0.0, 5.0, 1.0, 0.03, RECEIVER, 1.0)
    disc = [math.exp(-0.03 * k) for k in range(1, 6)]
    expected = 0.03 * sum(disc) - (1.0 - disc[-1])
    assert swap_value(FLAT.discount, spec) == pytest.approx(expected, rel=1e-13)


def test_atm_strike_flat_and_single_period():
    spec = SwapSpec.from_schedule(2.0, 12.0, 1.0)
    assert atm_strike(FLAT.discount, spec) == pytest.approx(math.expm1(0.03), rel=1e-12)
    one = SwapSpec.from_schedule(3.0, 3.5, 0.5)
    fwd = (UP.discount(3.0) - UP.discount(3.5)) / (0.5 * UP.discount(3.5))
    assert atm_strike(UP.discount, one) == pytest.approx(fwd, rel=1e-13)


def test_atm_strike_needs_positive_annuity():
    with pytest.raises(DegenerateAnnuity):
        atm_strike(lambda T: np.zeros_like(T), SwapSpec.from_schedule(0.0, 2.0))


def test_annuity_counts_future_payments():
    spec = SwapSpec.from_schedule(0.0, 3.0, 1.0)
    assert annuity(FLAT.discount, spec, 1.5) == pytest.approx(FLAT.discount(2.0) + FLAT.discount(3.0))


def test_swap_after_maturity_and_fixing_required():
    spec = receiver()
    assert swap_value(FLAT.discount, spec, 6.0) == 0.0
    with pytest.raises(DomainError):
        swap_value(FLAT.discount, spec, 2.5)


def test_swap_inside_accrual_period():
    spec = receiver(strike=0.03)
    t, fixing = 2.5, 0.96
    zcb = lambda T: np.exp(-0.02 * (np.asarray(T) - t))  # noqa: E731
    pays = np.arange(3.0, 7.0)
    fixed = 0.03 * np.sum(zcb(pays))
    floating = zcb(3.0) / fixing - zcb(6.0)
    assert swap_value(zcb, spec, t, fixing) == pytest.approx(1e4 * (fixed - floating), rel=1e-13)


def test_discounted_swap_values_are_martingales():
    spec = receiver(strike=0.028)
    dates = np.array([0.0, 0.5, 1.0, 2.5, 4.25])
    paths = simulate(HW, np.union1d(dates, spec.reset_dates), 20_000, 7, SPY)
    values = swap_values_on_paths(PRICER, spec, paths, dates)
    v0 = swap_value(FLAT.discount, spec)
    assert values[:, 0] == pytest.approx(v0, rel=1e-12)
    P = FLAT.discount
    for col, t in enumerate(dates[1:], start=1):
        # coupons paid by t leave the remaining swap
        paid = sum(spec.notional * (spec.strike * tau * P(T) - P(S) + P(T))
                   for S, T, tau in zip(spec.reset_dates, spec.payment_dates, spec.accruals) if T <= t)
        sample = paths.discount(t) * values[:, col]
        se = sample.std(ddof=1) / math.sqrt(sample.size)
        assert abs(sample.mean() - (v0 - paid)) < 3 * se


def test_swaption_mc_matches_jamshidian():
    spec = SwapSpec.from_schedule(5.0, 10.0, 1.0, 0.0, PAYER, 1e4)
    spec = spec.with_strike(atm_strike(FLAT.discount, spec))
    est = swaption_mc(HW, PRICER, spec, 5.0, 20_000, 3, SPY)
    assert within(est, hw_swaption(HW, spec, 5.0))


def test_swaption_mc_refuses_training_seed():
    table = build_zcb_table(HW, [1.0], [2.0], 200, 1, SPY, seed=4)
    with pytest.raises(SeedCollision):
        swaption_mc(HW, table, receiver(), 1.0, 100, 4, SPY)


# --- Bermudan: specification and rule ------------------------------------------------------


def test_exercise_dates_must_be_resets():
    with pytest.raises(DomainError):
        bermudan(dates=(1.0, 2.5))
    with pytest.raises(DomainError):
        bermudan(dates=(3.0, 2.0))
    with pytest.raises(DomainError):
        bermudan(dates=())


def test_exercise_swap_drops_past_payments():
    sw = bermudan().exercise_swap(3.0)
    assert sw.start == 3.0 and list(sw.payment_dates) == [4.0, 5.0, 6.0]


def test_last_date_exercises_when_in_the_money():
    rule = ExerciseRule(np.array([1.0, 2.0]), (Polynomial([5.0]), None))
    pay = np.array([0.0, 1.0, 7.0])
    assert rule.exercise(1, pay, np.zeros(3)).tolist() == [False, True, True]
    assert rule.exercise(0, pay, np.zeros(3)).tolist() == [False, False, True]


def test_single_date_rule_is_empty_and_prices_european():
    spec = bermudan(dates=(3.0,))
    rule, est = two_pass(spec, 20_000)
    assert rule.continuation == (None,)
    euro = hw_swaption(HW, spec.exercise_swap(3.0), 3.0)
    assert within(est, euro)


@pytest.mark.parametrize("payer", [False, True])
def test_deterministic_limit_exercises_optimally(payer):
    p = HwParams(0.05, PiecewiseVol.flat(1e-9), UP)
    swap = SwapSpec.from_schedule(1.0, 6.0, 1.0, 0.03 if payer else 0.04, PAYER if payer else RECEIVER, 1e4)
    spec = BermudanSpec(swap, [1.0, 2.0, 3.0, 4.0, 5.0])
    pricer = HwBondPricer(p)
    intrinsic = [UP.discount(t) * spec.payoff(pricer, t, np.array([hw_b(p, t)]))[0] for t in spec.exercise_dates]
    rule = bermudan_first_pass(p, pricer, spec, 200, 2, 2, 400, stream=FIRST)
    est, chosen = bermudan_price(p, pricer, spec, rule, 200, 2, 400, return_paths=True)
    assert max(intrinsic) > 0
    assert set(chosen.tolist()) == {int(np.argmax(intrinsic))}
    assert est.value == pytest.approx(max(intrinsic), rel=2e-5)


def test_price_grows_with_exercise_rights():
    prices = [two_pass(bermudan(dates=(1.0, 2.0, 3.0, 4.0, 5.0)[:k]), 8000)[1] for k in (1, 3, 5)]
    for a, b in zip(prices, prices[1:]):
        assert b.value >= a.value - 3 * math.hypot(a.stderr, b.stderr)
    europeans = [hw_swaption(HW, bermudan().exercise_swap(t), t) for t in (1.0, 2.0, 3.0, 4.0, 5.0)]
    assert prices[-1].value >= max(europeans) - 3 * prices[-1].stderr


def test_regression_degree_barely_matters():
    spec = bermudan()
    _, p2 = two_pass(spec, 8000, degree=2)
    _, p3 = two_pass(spec, 8000, degree=3)
    assert within(p2, p3)


def test_zero_strike_receiver_is_worthless():
    spec = bermudan(swap=receiver(strike=0.0))
    _, est = two_pass(spec, 2000)
    europeans = [hw_swaption(HW, spec.exercise_swap(t), t) for t in spec.exercise_dates]
    assert 0.0 <= est.value <= max(europeans) + 3 * est.stderr


def test_bermudan_refuses_training_seed():
    table = build_zcb_table(HW, [1.0], [2.0], 200, 1, SPY, seed=2)
    with pytest.raises(SeedCollision):
        bermudan_first_pass(HW, table, bermudan(), 200, 2)


# --- collocation and future values ---------------------------------------------------------


def test_collocation_nodes_are_gauss_hermite_for_hull_white():
    t = 7.0
    x, _ = hermegauss(5)
    expected = hw_b(HW, t) + math.sqrt(hw_variance(HW, 0.0, t)) * x
    np.testing.assert_allclose(collocation_nodes(HW, t, 5), expected, rtol=1e-10)
    assert collocation_nodes(HW, 0.0, 5).tolist() == [FLAT.inst_forward(0.0)]


def test_collocation_nodes_for_mixture_are_ordered_and_real():
    m = RhwModel.from_normal(0.181711, 0.064055, 5, PiecewiseVol.flat(0.01), FLAT)
    for t in (1.0, 10.0, 25.0):
        nodes = collocation_nodes(m, t, 5)
        assert nodes.size == 5 and np.all(np.diff(nodes) > 0)


@pytest.fixture(scope="module")
def bermudan_run():
    spec = bermudan()
    n = 3000
    rule, price = two_pass(spec, n)
    dates = np.round(np.arange(0, 6.01, 0.5), 10)
    paths = simulate(HW, np.union1d(dates, spec.exercise_dates), n, 2, SPY)
    ex = exercise_times(rule, spec, PRICER, paths)
    values = bermudan_future_values(HW, PRICER, rule, spec, dates, paths, ex, 5, None, 2, SPY)
    return spec, rule, price, dates, paths, ex, values


def test_future_value_at_origin_is_price(bermudan_run):
    spec, rule, price, dates, paths, ex, values = bermudan_run
    assert np.ptp(values[:, 0]) == 0.0
    assert abs(values[0, 0] - price.value) < 3 * price.stderr * math.sqrt(2)


def test_exposure_vanishes_after_exercise_and_final_date(bermudan_run):
    spec, rule, price, dates, paths, ex, values = bermudan_run
    after = dates[None, :] >= ex[:, None] - 1e-9
    assert np.all(values[after] == 0.0)
    assert np.all(values[:, dates >= 5.0] == 0.0)
    assert np.all(values >= 0.0)


def test_exposure_drops_at_exercise_dates(bermudan_run):
    spec, rule, price, dates, paths, ex, values = bermudan_run
    mean = (paths.discount()[:, np.searchsorted(paths.times, dates - 1e-9)] * values).mean(axis=0)
    for t in (2.0, 3.0, 4.0):
        i = int(np.flatnonzero(dates == t)[0])
        assert mean[i] < mean[i - 1]


def test_collocation_order_stable(bermudan_run):
    spec, rule, price, dates, paths, ex, values = bermudan_run
    seven = bermudan_future_values(HW, PRICER, rule, spec, dates[:1], paths, ex, 7, None, 2, SPY)
    assert abs(seven[0, 0] - values[0, 0]) < 3 * price.stderr * math.sqrt(2)


def test_mixture_bermudan_single_date_matches_semi_analytic():
    m = RhwModel.from_normal(0.12, 0.05, 3, PiecewiseVol.flat(0.01), FLAT)
    spec = bermudan(dates=(3.0,))
    table = build_zcb_table(m, [3.0], spec.underlying.payment_dates, 10_000, 3, SPY, seed=1)
    _, est = two_pass(spec, 10_000, model=m, pricer=table)
    assert within(est, rhw_swaption(m, spec.exercise_swap(3.0), 3.0))
