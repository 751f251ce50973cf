"""Write a synthetic curve, swaption surface and instruments to demos/data.

The surface is generated by a known randomized Hull-White model, so the
calibration demo can check that it recovers the generating parameters.

    python3 demos/make_data.py
"""

import json
from pathlib import Path

import numpy as np

from rhwxva import PiecewiseVol, RhwModel, YieldCurve, rhw_swaption
from rhwxva.market import synthesize_surface

OUT = Path(__file__).parent / "data"
PAIRS = [(1.0, 9.0), (3.0, 7.0), (5.0, 5.0)]
STRIKES = (0.5, 0.75, 1.0, 1.25, 1.5)


def main():
    OUT.mkdir(exist_ok=True)
    times = np.array([0.5, 1, 2, 3, 5, 7, 10, 15, 20, 30])
    zeros = 0.025 + 0.012 * (1 - np.exp(-times / 4.0))
    curve = YieldCurve(times, zeros)
    with open(OUT / "curve.csv", "w") as fh:
        fh.write("# upward sloping synthetic curve\ntime,zero_rate\n")
        for t, z in zip(times, zeros):
            fh.write(f"{float(t)!r},{float(z)!r}\n")

    true = RhwModel.from_normal(0.181711, 0.064055, 5,
                                PiecewiseVol([1.0, 3.0, 5.0], [0.008, 0.010, 0.012]), curve)
    surface = synthesize_surface(lambda spec, T: rhw_swaption(true, spec, T), curve, PAIRS,
                                 STRIKES, shift=0.01)
    surface.to_csv(OUT / "surface.csv", comment="generated by rHW a=0.181711 b=0.064055 N=5")

    swap = {"type": "swap", "swap_type": "receiver", "start": 0.0, "maturity": 10.0,
            "frequency": 1.0, "strike": "1.0*ATM", "notional": 10000.0}
    berm = dict(swap, type="bermudan", exercise_dates=[1.0, 2.0, 3.0, 4.0, 5.0])
    for name, obj in (("swap.json", swap), ("bermudan.json", berm)):
        with open(OUT / name, "w") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")
    print(f"wrote inputs to {OUT}")


if __name__ == "__main__":
    main()
