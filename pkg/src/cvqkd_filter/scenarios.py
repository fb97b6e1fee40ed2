"""Named parameter sets for the experimental regimes used in tests and demos.

Distances assume 0.2 dB/km fibre loss. Loss figures in dB are converted with
``T = 10^(-dB/10)``; channel excess noise is referred to the channel input.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .params import ChannelParams, Detection, FilterSettings, ModulationParams


@dataclass(frozen=True)
class Scenario:
    name: str
    mod: ModulationParams
    ch: ChannelParams
    detection: Detection
    settings: FilterSettings = field(default_factory=FilterSettings)
    reference: dict = field(default_factory=dict)  # reference values, for comparison only


XI_TRUSTED = (0.28, 0.40)
BETA_LAB = 0.92


def _lab(T, vmod, W, settings=None, **reference):
    ch = ChannelParams(T, W[0], W[1], XI_TRUSTED[0], XI_TRUSTED[1])
    return ModulationParams(vmod[0], vmod[1], BETA_LAB), ch, settings or FilterSettings(), reference


def _make(name, detection, parts):
    mod, ch, settings, ref = parts
    return Scenario(name, mod, ch, Detection(detection), settings, ref)


def db_to_transmittance(loss_db: float) -> float:
    return 10.0 ** (-loss_db / 10.0)


# Four fibre regimes, homodyne, beta = 0.92
LAB_6KM = _make("lab_6km", "homodyne", _lab(0.757, (12.62, 13.52), (1.02, 1.04), key_rate=0.4839))
LAB_15KM = _make("lab_15km", "homodyne", _lab(0.499, (12.65, 13.63), (1.02, 1.03), key_rate=0.1433))
LAB_29KM_TABLE = _make("lab_29km_table", "homodyne", _lab(0.261, (12.74, 13.52), (1.02, 1.01), key_rate=-0.0093))
LAB_39KM = _make(
    "lab_39km", "homodyne",
    _lab(0.166, (12.58, 13.40), (1.00, 1.00), FilterSettings(0.178, 0.213),
         key_rate=0.0099, key_rate_alice=0.0169, p_alice=(0.0, 0.596)),
)
# Same regime as lab_29km_table but with T = 0.26
LAB_29KM = _make(
    "lab_29km", "homodyne",
    _lab(0.26, (12.74, 13.52), (1.02, 1.01), FilterSettings(0.213, 0.259, 0.0, 8.95),
         key_rate_alice=0.0025, key_rate_bob=0.0038, gg02_optimal=0.0036,
         vmod_optimal=(6.14, 5.97), p_alice=(0.681, 0.596)),
)


def _table(name, detection, vmod, loss_db, xi_ch, xi_d, eta, beta, xi_t=(0.0, 0.0)):
    vmod = vmod if isinstance(vmod, tuple) else (vmod, vmod)
    xi_ch = xi_ch if isinstance(xi_ch, tuple) else (xi_ch, xi_ch)
    ch = ChannelParams.from_excess_noise(
        db_to_transmittance(loss_db), xi_ch[0], xi_ch[1], xi_x=xi_t[0], xi_p=xi_t[1], eta=eta, xi_d=xi_d,
    )
    return Scenario(name, ModulationParams(vmod[0], vmod[1], beta), ch, Detection(detection))


HOM_10DB = _table("hom_10db", "homodyne", 15.0, 10.0, 0.07, 0.05, 0.60141, 0.967)
HET_15DB = _table("het_15db", "heterodyne", 8.41, 15.52, 0.212e-3, 0.06272, 0.68, 0.925)
HET_8DB = _table(
    "het_8db", "heterodyne", (4.06, 4.21), 7.92, (0.0437, 0.0654), (0.4401, 0.4459), 0.206, 0.925,
    xi_t=(0.0867, 0.0933),
)
HOM_23DB = _table("hom_23db", "homodyne", 14.23, 23.46, 0.0219, 0.2717, 0.6134, 0.96)
HET_19DB = _table("het_19db", "heterodyne", 10.0, 18.96, 0.0692, 0.18, 0.42, 0.967)

SCENARIOS = {
    s.name: s
    for s in (LAB_6KM, LAB_15KM, LAB_29KM_TABLE, LAB_29KM, LAB_39KM, HOM_10DB, HET_15DB, HET_8DB, HOM_23DB, HET_19DB)
}
