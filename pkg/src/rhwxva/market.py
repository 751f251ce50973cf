"""Swaption volatility surfaces quoted in shifted-Black implied volatility.

Strikes are quoted as ratios to the ATM forward swap rate. A quote with
ratio below one is priced as a receiver swaption and above one as a payer,
so that every quote refers to an out-of-the-money (or ATM) instrument.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, MissingEntry
from .hw import PAYER, RECEIVER, SwapSpec
from .mathkit import CALL, implied_vol_shifted_black, shifted_black_price

_KEY_DIGITS = 9


def _key(*values):
    return tuple(round(float(v), _KEY_DIGITS) for v in values)


@dataclass(frozen=True)
class SwaptionQuote:
    expiry: float
    tenor: float
    strike_ratio: float
    implied_vol: float
    shift: float = 0.0

    def label(self) -> str:
        return f"(expiry={self.expiry:g}, tenor={self.tenor:g}, strike_ratio={self.strike_ratio:g})"

    @property
    def is_atm(self) -> bool:
        return abs(self.strike_ratio - 1.0) < 1e-12


def forward_swap_rate(curve, spec: SwapSpec):
    """Time-0 forward swap rate and annuity of ``spec`` from the market curve."""
    annuity = float(np.sum(spec.accruals * curve.discount(spec.payment_dates)))
    rate = (float(curve.discount(spec.start)) - float(curve.discount(spec.maturity))) / annuity
    return rate, annuity


@dataclass
class VolSurface:
    """Collection of swaption quotes with an annual-type fixed-leg frequency."""

    quotes: list
    frequency: float = 1.0
    _index: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.quotes = list(self.quotes)
        for q in self.quotes:
            self._index[_key(q.expiry, q.tenor, q.strike_ratio)] = q

    def get(self, expiry, tenor, strike_ratio=1.0) -> SwaptionQuote:
        try:
            return self._index[_key(expiry, tenor, strike_ratio)]
        except KeyError:
            raise MissingEntry(
                f"no quote for expiry={expiry:g}, tenor={tenor:g}, strike_ratio={strike_ratio:g}"
            ) from None

    def atm_quotes(self):
        return [q for q in self.quotes if q.is_atm]

    def expiries(self):
        return sorted({q.expiry for q in self.quotes})

    def default_coterminal(self) -> float:
        ends = [round(q.expiry + q.tenor, _KEY_DIGITS) for q in self.atm_quotes()]
        if not ends:
            raise MissingEntry("surface has no ATM quotes")
        values, counts = np.unique(ends, return_counts=True)
        return float(values[np.argmax(counts)])

    def coterminal_atm(self, T_cot, expiries=None):
        """ATM quotes with ``expiry + tenor = T_cot`` sorted by expiry."""
        if expiries is not None:
            return [self.get(e, T_cot - e, 1.0) for e in sorted(expiries)]
        out = [q for q in self.atm_quotes() if abs(q.expiry + q.tenor - T_cot) < 1e-9]
        if not out:
            raise MissingEntry(f"no co-terminal ATM quotes for T_cot={T_cot:g}")
        return sorted(out, key=lambda q: q.expiry)

    def coterminal_quotes(self, T_cot, strike_ratios=None):
        """All quotes of the co-terminal strip, optionally restricted to strike ratios."""
        out = [q for q in self.quotes if abs(q.expiry + q.tenor - T_cot) < 1e-9]
        if strike_ratios is not None:
            wanted = {round(s, _KEY_DIGITS) for s in strike_ratios}
            out = [q for q in out if round(q.strike_ratio, _KEY_DIGITS) in wanted]
        return sorted(out, key=lambda q: (q.expiry, q.strike_ratio))

    # pricing helpers

    def underlying(self, curve, quote: SwaptionQuote) -> SwapSpec:
        """Unit-notional underlying swap, OTM side chosen by the strike ratio."""
        spec = SwapSpec.from_schedule(quote.expiry, quote.expiry + quote.tenor, self.frequency)
        atm, _ = forward_swap_rate(curve, spec)
        swap_type = RECEIVER if quote.strike_ratio < 1.0 else PAYER
        return spec.with_strike(quote.strike_ratio * atm).with_type(swap_type)

    def market_price(self, curve, quote: SwaptionQuote, vol=None) -> float:
        spec = self.underlying(curve, quote)
        rate, annuity = forward_swap_rate(curve, spec)
        sigma = quote.implied_vol if vol is None else vol
        # payer = call on the swap rate
        opt = -spec.swap_type * CALL
        return annuity * float(
            shifted_black_price(rate, spec.strike, quote.shift, sigma, quote.expiry, opt)
        )

    def implied_vol(self, curve, quote: SwaptionQuote, price: float) -> float:
        spec = self.underlying(curve, quote)
        rate, annuity = forward_swap_rate(curve, spec)
        opt = -spec.swap_type * CALL
        return implied_vol_shifted_black(
            price / annuity, rate, spec.strike, quote.shift, quote.expiry, opt
        )

    # io

    @classmethod
    def from_csv(cls, path, frequency=1.0) -> "VolSurface":
        """Read ``expiry,tenor,strike_ratio,implied_vol,shift`` rows."""
        expected = ["expiry", "tenor", "strike_ratio", "implied_vol", "shift"]
        quotes = []
        with open(path, newline="") as fh:
            lines = [(i, line) for i, line in enumerate(fh, start=1) if not line.lstrip().startswith("#")]
        if not lines:
            raise DomainError(f"{path}: empty surface file")
        header = [h.strip() for h in lines[0][1].strip().split(",")]
        if header != expected:
            raise DomainError(f"{path}:{lines[0][0]}: expected header {','.join(expected)}")
        for lineno, line in lines[1:]:
            if not line.strip():
                continue
            row = line.strip().split(",")
            try:
                vals = [float(v) for v in row]
                if len(vals) != 5:
                    raise ValueError
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: malformed row '{line.strip()}'") from exc
            quotes.append(SwaptionQuote(*vals))
        return cls(quotes, frequency)

    def to_csv(self, path, comment=None):
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["expiry", "tenor", "strike_ratio", "implied_vol", "shift"])
            for q in self.quotes:
                w.writerow([repr(q.expiry), repr(q.tenor), repr(q.strike_ratio),
                            repr(q.implied_vol), repr(q.shift)])


def synthesize_surface(price_fn, curve, pairs, strike_ratios=(1.0,), shift=0.0, frequency=1.0):
    """Build a surface whose quotes reproduce ``price_fn(spec, expiry)`` exactly.

    Parameters
    ----------
    price_fn : callable
        Unit-notional model swaption pricer.
    pairs : iterable of (expiry, tenor)
    strike_ratios : iterable of float
    """
    template = VolSurface([], frequency)
    quotes = []
    for expiry, tenor in pairs:
        for ratio in strike_ratios:
            probe = SwaptionQuote(float(expiry), float(tenor), float(ratio), 0.2, shift)
            spec = template.underlying(curve, probe)
            price = price_fn(spec, float(expiry))
            vol = template.implied_vol(curve, probe, price)
            quotes.append(SwaptionQuote(float(expiry), float(tenor), float(ratio), float(vol), shift))
    return VolSurface(quotes, frequency)
