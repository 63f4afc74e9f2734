"""EKF, SCKF, LM and SCKF+LM on the same samples, over a few seeds.

Run: python demos/03_compare_methods.py
"""
from planecal.kinematics import nominal_table
from planecal.pipeline import METHODS, PipelineConfig, compare
from planecal.simulate import benchmark_scenario, generate

samples, _ = generate(benchmark_scenario(seed=42))
result = compare(samples, nominal_table(), METHODS, PipelineConfig(seed=42))
print(result.table())

# EKF and SCKF coincide: the plane-residual measurement is linear in the
# parameter error, so cubature and linearization give the same moments.
# LM-based methods are ahead of the filters; the two LM variants sit within a
# fraction of the 0.01 mm noise level of each other.
print("\nvalidation RMSE (mm) by seed")
print("seed  " + "".join(f"{m:>10}" for m in METHODS))
for seed in range(42, 47):
    s, _ = generate(benchmark_scenario(seed=seed))
    r = compare(s, nominal_table(), METHODS, PipelineConfig(seed=seed))
    print(f"{seed:<6}" + "".join(f"{row['rmse']:10.5f}" for row in r.rows[1:]))
