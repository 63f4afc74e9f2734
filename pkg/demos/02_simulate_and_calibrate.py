"""Simulate a dial-indicator session and calibrate with SCKF followed by LM.

Run: python demos/02_simulate_and_calibrate.py
"""
import numpy as np

from planecal.kinematics import nominal_table
from planecal.pipeline import PipelineConfig, calibrate
from planecal.simulate import benchmark_scenario, generate, score_against_truth

# A "true" robot with up to 0.05 deg / 1 mm of D-H error probes three
# gauge-block placements; each dial reading carries 0.01 mm of noise.
scenario = benchmark_scenario(seed=42)
samples, truth = generate(scenario)
dials = np.array([s.dial_mm for s in samples])
print(f"{len(samples)} samples over {len(scenario.planes)} planes, "
      f"dial readings {dials.min():.3f} .. {dials.max():.3f} mm")

report = calibrate(samples, nominal_table(), "sckf_lm", PipelineConfig(seed=42))
for split in ("train", "validation"):
    b, a = report.metrics[f"{split}_before"], report.metrics[f"{split}_after"]
    print(f"{split:>10}: RMSE {b.rmse:.4f} -> {a.rmse:.4f} mm, MAX {b.max:.4f} -> {a.max:.4f} mm")
print(f"validation RMSE reduction {100 * report.reduction:.1f}%")
print(f"filter steps {report.iterations['sckf']}, LM iterations {report.iterations['lm']}, "
      f"LM moved {report.traces['lm_identifiable_rank']} well-determined directions")

val = [samples[i] for i in report.split["validation"]]
train = [samples[i] for i in report.split["train"]]
score = score_against_truth(report.identified, scenario, val, train)
# Most of the injected error lies along directions that are observable only in
# principle: their singular values sit far below the 0.01 mm noise, so the
# fit leaves them alone and fixes what the plane residual can actually see.
print(f"\nobservable rank {score['rank']} of 24")
print(f"parameter error inside the observable subspace {score['observable_error']:.4f}, "
      f"full error {score['full_error']:.4f} (mixed rad / mm)")
