"""How measurement geometry shapes dictionary coherence.

Builds each position setup at a common 0.4-wavelength spacing (random
setups get a matching budget of 144 pairs), then reports the largest
off-reference entry in the first coherence column. Lower is better: the
estimator has an easier time telling neighbouring atoms apart.
"""

import numpy as np

from macsest import AngleGrid, MeasurementOperator
from macsest.measure import (
    gen_cross,
    gen_edge,
    gen_random,
    gen_random_walk,
    gen_upa,
    ideal_sinc_coherence,
    mutual_coherence_column,
)

REGION = 2.0
grid = AngleGrid(24)
rng = np.random.default_rng(0)

plans = {
    "upa": gen_upa(REGION, 0.4),
    "edge": gen_edge(REGION, 0.4),
    "cross": gen_cross(REGION, 0.4),
    "random": gen_random(REGION, 144, rng),
    "walk": gen_random_walk(REGION, 144, 0.5, rng),
}

print(f"{'setup':8s} {'M':>5s} {'max |C[n,1]|, n != 1':>22s}")
for name, plan in plans.items():
    col = np.abs(mutual_coherence_column(MeasurementOperator(plan, grid), 1))
    print(f"{name:8s} {plan.M:5d} {np.delete(col, 0).max():22.4f}")

# A continuous aperture of side R would give a sinc-shaped profile.
print("\nideal continuous-aperture coherence at p grid steps:")
for p in range(1, 7):
    print(f"  p={p}: {ideal_sinc_coherence(REGION, grid, p):+.4f}")
