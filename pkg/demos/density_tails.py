"""How randomizing the mean reversion fattens the tails of the short rate.

A five-node model is compared with each of its Hull-White nodes and with the
moment-matched normal. The mixture density is then checked against an Euler
sample.

    python3 demos/density_tails.py
"""

import numpy as np
from scipy import stats

from rhwxva import PiecewiseVol, RhwModel, YieldCurve, rand_cdf, rand_pdf, simulate
from rhwxva.rhw import node_pdfs, rand_moment

T = 25.0

model = RhwModel.from_normal(0.181711, 0.064055, 5, PiecewiseVol.flat(0.01), YieldCurve.flat(0.03))
print("nodes  theta    weight")
for th, w in zip(model.thetas, model.weights):
    print(f"       {th:+.4f}  {w:.4f}")

mean = rand_moment(model, 1, T)
sd = np.sqrt(rand_moment(model, 2, T) - mean**2)
print(f"\nr({T:g}): mean {mean:.4f}, sd {sd:.4f}")

# tail probabilities against a normal with the same mean and variance
print("\n  k   P(r > mean + k sd)   normal")
for k in (2, 3, 4, 5):
    x = mean + k * sd
    print(f"  {k}   {1 - rand_cdf(model, T, x):.3e}            {stats.norm.sf(k):.3e}")

ys = mean + sd * np.array([-3.0, 0.0, 3.0, 6.0])
dens = node_pdfs(model, T, ys)
print("\ndensity at mean + k sd: mixture, then per node")
for k, y, col in zip((-3, 0, 3, 6), ys, dens.T):
    print(f"  k={k:+d}  {rand_pdf(model, T, y):9.3e}  " + " ".join(f"{v:9.2e}" for v in col))

x = simulate(model, [T], 10_000, seed=3, steps_per_year=200).rate(T)
ks = stats.kstest(x, lambda y: rand_cdf(model, T, y))
print(f"\nEuler sample (1e4 paths, 200 steps/yr): KS statistic {ks.statistic:.4f}, p = {ks.pvalue:.3f}")
print(f"sample 99th percentile {np.percentile(x, 99):.4f}")
