"""Synthetic calibration run, channel estimation and bootstrap error bars.

Run: python3 demos/04_data_pipeline.py
"""
from cvqkd_filter import data
from cvqkd_filter.params import ChannelParams, ModulationParams
from cvqkd_filter.scenarios import LAB_6KM

# back-to-back run with electronic gains and uncalibrated detector units
mod = ModulationParams(12.74, 13.52)
b2b = data.simulate_channel(mod, ChannelParams(1.0, xi_x=0.28, xi_p=0.40), "homodyne", 400_000, seed=1,
                            gain=(8.33, 19.59), v_sn=4.0, v_dn=0.04)
cal = data.calibration_report(data.calibrate_shot_noise(b2b, 4.0, 0.04))
print("gain", [round(g, 2) for g in cal.g_e], "trusted noise", [round(x, 3) for x in cal.xi],
      "vmod", [round(v, 2) for v in cal.vmod])

s = LAB_6KM
batch = data.simulate_channel(s.mod, s.ch, s.detection, 200_000, seed=2)
m, ch = data.estimate_channel(batch, xi=cal.xi)
print(f"estimated T={ch.T:.4f} (true {s.ch.T}), W=({ch.W_x:.3f}, {ch.W_p:.3f})")
mean, std, _ = data.bootstrap_keyrate(batch, beta=0.92, resamples=20, seed=3, xi=cal.xi)
print(f"bootstrap key rate {mean:.4f} +- {std:.4f}")
