"""Plain GG02 key rates for the four fibre regimes, then Alice's filter at 29 and 39 km.

Run: python3 demos/01_gaussian_regimes.py
"""
from cvqkd_filter import keyrate_after_alice, keyrate_gg02
from cvqkd_filter.scenarios import LAB_6KM, LAB_15KM, LAB_29KM, LAB_29KM_TABLE, LAB_39KM

print("GG02 rate at the experimental modulation (bits/use)")
for s in (LAB_6KM, LAB_15KM, LAB_29KM_TABLE, LAB_39KM):
    k = keyrate_gg02(s.mod, s.ch, s.detection).key_rate
    print(f"  {s.name:16s} T={s.ch.T:.3f}  K={k:+.4f}  (reference {s.reference['key_rate']:+.4f})")

# The modulation at 29 and 39 km is too strong; Alice's filter shrinks it
print("\nWith Alice's Gaussian filter")
for s in (LAB_29KM, LAB_39KM):
    g = s.settings.gains
    r = keyrate_after_alice(s.mod, s.ch, s.detection, *g)
    print(f"  {s.name:16s} g={g}  P_A=({r.p_alice[0]:.3f}, {r.p_alice[1]:.3f})  K={r.key_rate:+.4f}")
