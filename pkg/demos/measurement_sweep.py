"""Small Monte Carlo sweep over the number of measurements.

Runs at a reduced grid so it finishes in seconds. Every trial is seeded
from (master seed, value index, trial index), so rerunning prints the
same numbers.
"""

from macsest.harness import ExperimentConfig, aggregate, sweep_records

cfg = ExperimentConfig.desk(trials=20, master_seed=1)
results = sweep_records(cfg, "M", [36, 64, 144, 256])

print(f"{'M':>4s} {'mean NMSE':>10s} {'std err':>9s} {'OMP atoms':>10s}")
for row in aggregate("M", results):
    iters = [r.omp_iterations for v, r in results if v == row["value"]]
    print(f"{row['value']:4d} {row['nmse_mean']:10.4f} {row['nmse_se']:9.4f} {sum(iters) / len(iters):10.1f}")
