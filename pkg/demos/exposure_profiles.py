"""Exposure profiles and xVA of a swap and a Bermudan under HW and rHW.

Both models are fitted to the same smile (see calibrate_smile.py). The
mixture keeps the ATM prices but spreads the tails, which shows in PFE/PFL.
The whole script takes about half a minute.

    python3 demos/exposure_profiles.py
"""

from pathlib import Path

import numpy as np

from rhwxva import (BermudanSpec, HwParams, RunConfig, VolSurface, YieldCurve, rhw_calibrate,
                    run_bermudan_exposure, run_swap_exposure, xva_summary)
from rhwxva.cli import load_instrument
from rhwxva.hw import hw_calibrate_vol

DATA = Path(__file__).parent / "data"

curve = YieldCurve.from_csv(DATA / "curve.csv")
surface = VolSurface.from_csv(DATA / "surface.csv")
rhw = rhw_calibrate(curve, surface, 5, 10.0)
hw = HwParams(0.18, hw_calibrate_vol(curve, surface, 0.18, 10.0), curve)


def show(name, res_hw, res_rhw, cfg):
    print(f"\n{name}")
    print("   t     EPE hw   EPE rhw   PFE99 hw  PFE99 rhw   PFL1 hw  PFL1 rhw")
    a, b = res_hw.profile, res_rhw.profile
    for j in range(0, a.dates.size, 20):
        print(f"{a.dates[j]:4.1f} {a.epe[j]:10.1f}{b.epe[j]:10.1f}{a.pfe[99.0][j]:11.1f}"
              f"{b.pfe[99.0][j]:11.1f}{a.pfl[1.0][j]:10.1f}{b.pfl[1.0][j]:10.1f}")
    for label, res in (("HW ", res_hw), ("rHW", res_rhw)):
        x = xva_summary(res.profile, cfg)
        extra = f", price {res.price.value:.2f} +- {res.price.stderr:.2f}" if res.price else ""
        print(f"{label} CVA {x['CVA']:8.2f}  DVA {x['DVA']:8.2f}  BCVA {x['BCVA']:8.2f}"
              f"  ({res.timings['total']:.1f}s{extra})")


swap = load_instrument(DATA / "swap.json", curve)
cfg_hw = RunConfig(model="hw", paths_val=10_000)
cfg = RunConfig(paths_val=10_000)
show("10y ATM receiver swap", run_swap_exposure(hw, swap, cfg_hw), run_swap_exposure(rhw, swap, cfg), cfg)

berm = load_instrument(DATA / "bermudan.json", curve)
assert isinstance(berm, BermudanSpec)
cfg_hw = RunConfig(model="hw", paths_val=5_000, steps_per_year=100)
cfg = RunConfig(paths_val=5_000, steps_per_year=100)
res_hw = run_bermudan_exposure(hw, berm, cfg_hw)
res_rhw = run_bermudan_exposure(rhw, berm, cfg)
show("receiver Bermudan, exercise yearly 1y-5y into the 10y swap", res_hw, res_rhw, cfg)
exercised = np.isfinite(res_rhw.exercised_at).mean()
print(f"rHW paths exercised: {exercised:.0%}")
