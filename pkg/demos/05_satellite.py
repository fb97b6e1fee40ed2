"""Key rate over a pass for a toy elevation profile, and the duty-cycle geometry.

Run: python3 demos/05_satellite.py
"""
import numpy as np

from cvqkd_filter import satellite

for eps in (0, 20, 40):
    print(f"duty cycle above {eps:2d} deg: {satellite.duty_cycle(eps):5.1f} %")

profile = satellite.synthetic_profile(np.arange(0, 91, 10.0))
rows = satellite.sweep_keyrates(profile)
print("elev   K_fixed     K_opt      g")
for r in rows:
    print(f"{r.elevation_deg:4.0f}  {r.k_fixed:+.2e}  {r.k_optimized:+.2e}  {r.g_x:.3f}")
for col in ("k_fixed", "k_optimized"):
    eps = satellite.threshold_crossing(rows, 1e-4, col)
    print(f"{col}: secure above {eps:.1f} deg, duty cycle {satellite.duty_cycle(eps):.1f} %")
