"""Forward kinematics and the identification Jacobian of the nominal arm.

Run: python demos/01_forward_kinematics.py
"""
import numpy as np

from planecal.error_model import PARAM_NAMES, ParamDelta, apply_delta, position_jacobian
from planecal.kinematics import forward_kinematics, nominal_table, tool_position

np.set_printoptions(precision=4, suppress=True)

table = nominal_table()
print("Nominal D-H table [alpha deg, a mm, d mm, theta deg]:")
print(table.to_degrees())

# Home pose: the flange sits in front of and above the base, probe pointing down.
T = forward_kinematics(table, np.zeros(6))
print("\nFlange pose at q = 0:")
print(T)

# Folding a dial reading into d6 slides the tool point along the probe axis.
dial = 0.35
moved = tool_position(table.with_d6(table.d[5] + dial), np.zeros(6))
print(f"\nd6 + {dial} mm moves the tool by {moved - T[:3, 3]} (probe axis {T[:3, 2]})")

# The position Jacobian maps small D-H errors to tool displacement.
q = np.radians([10, -20, 15, 5, 30, -45])
J = position_jacobian(table, q)
col_norms = np.linalg.norm(J, axis=0)
print("\nLargest sensitivities at a sample pose (mm per rad or mm per mm):")
for k in np.argsort(col_norms)[::-1][:6]:
    print(f"  {PARAM_NAMES[k]:>7}: {col_norms[k]:10.3f}")

dx = ParamDelta.from_blocks(delta_theta=np.radians(0.01), delta_a=0.1)
exact = tool_position(apply_delta(table, dx), q) - tool_position(table, q)
print(f"\nexact shift {exact}, first-order J.dx {J @ dx.vector}")
print(f"second-order remainder {np.linalg.norm(exact - J @ dx.vector):.2e} mm")
