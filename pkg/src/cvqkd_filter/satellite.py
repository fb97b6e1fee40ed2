"""Key rate against elevation for a satellite pass, and duty-cycle geometry.

Channel transmittance and excess noise per elevation are ingested from a
profile; no atmospheric model is evaluated here. Elevations may run past
zenith (0-180 degrees) so a full pass can be described.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NeverSecure
from .keyrate import keyrate_gg02
from .optimize import SearchSpec, optimize_alice_gains
from .params import ChannelParams, Detection, ModulationParams

R_EARTH_KM = 6371.0
L_ZENITH_KM = 500.0
DUTY_DENOMINATOR_DEG = 22.0
DEFAULT_EXCESS_NOISE = 0.0186


@dataclass(frozen=True)
class LinkConstants:
    """Receiver and modulation settings applied to every elevation."""

    vmod: float = 8.0
    beta: float = 0.9
    eta: float = 0.9
    xi_d: float = 0.0135
    detection: Detection = Detection.HOMODYNE
    r_earth_km: float = R_EARTH_KM
    l_zenith_km: float = L_ZENITH_KM


@dataclass
class ElevationProfile:
    elevation_deg: np.ndarray
    transmittance: np.ndarray
    excess_noise_snu: np.ndarray
    constants: LinkConstants = field(default_factory=LinkConstants)

    def __post_init__(self):
        self.elevation_deg = np.asarray(self.elevation_deg, dtype=float)
        self.transmittance = np.asarray(self.transmittance, dtype=float)
        self.excess_noise_snu = np.broadcast_to(
            np.asarray(self.excess_noise_snu, dtype=float), self.elevation_deg.shape
        ).copy()
        if self.elevation_deg.size == 0:
            raise ValueError("empty elevation profile")
        if np.any((self.elevation_deg < 0) | (self.elevation_deg > 180)):
            raise ValueError("elevation must lie in [0, 180] degrees")
        if np.any((self.transmittance < 0) | (self.transmittance > 1)):
            raise ValueError("transmittance must lie in [0, 1]")
        if np.any(self.excess_noise_snu < 0):
            raise ValueError("excess noise must be non-negative")

    @classmethod
    def read_csv(cls, path, constants: LinkConstants | None = None) -> "ElevationProfile":
        """Columns ``elevation_deg,transmittance[,excess_noise_snu]``."""
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no rows")
        if not {"elevation_deg", "transmittance"} <= set(rows[0]):
            raise ValueError(f"{path}: need columns elevation_deg, transmittance")
        el = [float(r["elevation_deg"]) for r in rows]
        t = [float(r["transmittance"]) for r in rows]
        xi = [float(r.get("excess_noise_snu") or DEFAULT_EXCESS_NOISE) for r in rows]
        return cls(np.array(el), np.array(t), np.array(xi), constants or LinkConstants())

    def channel(self, i: int) -> ChannelParams:
        c = self.constants
        return ChannelParams.from_excess_noise(
            float(self.transmittance[i]), float(self.excess_noise_snu[i]), eta=c.eta, xi_d=c.xi_d,
        )


@dataclass
class SweepRow:
    elevation_deg: float
    transmittance: float
    k_fixed: float
    k_optimized: float
    g_x: float
    g_p: float

    def as_tuple(self):
        return (self.elevation_deg, self.transmittance, self.k_fixed, self.k_optimized, self.g_x, self.g_p)


SWEEP_COLUMNS = ("elevation_deg", "transmittance", "k_fixed", "k_optimized", "g_x", "g_p")


def sweep_keyrates(profile: ElevationProfile, optimize_gains: bool = True, spec: SearchSpec | None = None,
                   threads: int = 1) -> list[SweepRow]:
    """Fixed-modulation GG02 rate and the rate with optimised Alice gains per elevation."""
    c = profile.constants
    mod = ModulationParams(c.vmod, c.vmod, c.beta)
    spec = spec or SearchSpec(bounds=((0.0, 1.0), (0.0, 1.0)), resolution=11, refinements=3)

    def one(i):
        ch = profile.channel(i)
        k0 = keyrate_gg02(mod, ch, c.detection).key_rate
        if optimize_gains:
            res = optimize_alice_gains(mod, ch, c.detection, c.beta, spec)
            k1, g = res.key_rate, res.params
        else:
            k1, g = k0, (0.0, 0.0)
        return SweepRow(float(profile.elevation_deg[i]), float(profile.transmittance[i]), k0, k1, g[0], g[1])

    idx = range(profile.elevation_deg.size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, idx))
    return [one(i) for i in idx]


def theta_skr(epsilon_deg: float, r_earth_km: float = R_EARTH_KM, l_zenith_km: float = L_ZENITH_KM) -> float:
    """Earth-centred angle between zenith pass and the satellite at elevation ``epsilon``."""
    if not 0.0 <= epsilon_deg <= 90.0:
        raise ValueError("elevation must lie in [0, 90] degrees")
    e = math.radians(epsilon_deg)
    s = math.cos(e) * r_earth_km / (r_earth_km + l_zenith_km)
    return max((90.0 - epsilon_deg) - math.degrees(math.asin(s)), 0.0)


def duty_cycle(epsilon_threshold_deg: float, r_earth_km: float = R_EARTH_KM, l_zenith_km: float = L_ZENITH_KM,
               denominator_deg: float = DUTY_DENOMINATOR_DEG) -> float:
    """Percentage of the pass with key delivery above the threshold elevation, capped at 100."""
    return min(100.0 * theta_skr(epsilon_threshold_deg, r_earth_km, l_zenith_km) / denominator_deg, 100.0)


def duty_cycle_report(epsilon_threshold_deg: float, r_earth_km: float = R_EARTH_KM,
                      l_zenith_km: float = L_ZENITH_KM) -> dict:
    """Duty cycle with the fixed 22 degree denominator and with the geometric horizon angle."""
    horizon = theta_skr(0.0, r_earth_km, l_zenith_km)
    th = theta_skr(epsilon_threshold_deg, r_earth_km, l_zenith_km)
    return {
        "epsilon_threshold_deg": epsilon_threshold_deg,
        "theta_skr_deg": th,
        "duty_cycle_percent": duty_cycle(epsilon_threshold_deg, r_earth_km, l_zenith_km),
        "geometric_denominator_deg": horizon,
        "duty_cycle_geometric_percent": min(100.0 * th / horizon, 100.0),
    }


def threshold_crossing(rows, skr_threshold: float = 1e-4, column: str = "k_optimized") -> float:
    """Lowest elevation (0-90) at which the key rate reaches the threshold.

    Interpolates linearly between neighbouring rows. Rows past zenith are
    ignored; use a mirrored profile for the descending half.
    """
    pts = sorted((r.elevation_deg, getattr(r, column)) for r in rows if r.elevation_deg <= 90.0)
    for i, (e, k) in enumerate(pts):
        if k >= skr_threshold:
            if i == 0:
                return float(e)
            e0, k0 = pts[i - 1]
            return float(e0 + (skr_threshold - k0) * (e - e0) / (k - k0))
    raise NeverSecure(f"no elevation reaches key rate {skr_threshold:g}")


def slant_range_km(epsilon_deg, r_earth_km: float = R_EARTH_KM, l_zenith_km: float = L_ZENITH_KM):
    e = np.radians(np.minimum(epsilon_deg, 180.0 - np.asarray(epsilon_deg)))
    r = r_earth_km
    return np.sqrt((r + l_zenith_km) ** 2 - (r * np.cos(e)) ** 2) - r * np.sin(e)


def synthetic_profile(elevations, t_zenith: float = 0.1, optical_depth: float = 0.1,
                      excess_noise_snu: float = DEFAULT_EXCESS_NOISE,
                      constants: LinkConstants | None = None) -> ElevationProfile:
    """Toy profile: inverse-square range loss times a plane-parallel atmosphere.

    Meant for tests and demos only; it is not a calibrated link budget.
    """
    el = np.asarray(elevations, dtype=float)
    c = constants or LinkConstants()
    d = slant_range_km(el, c.r_earth_km, c.l_zenith_km)
    s = np.maximum(np.sin(np.radians(np.minimum(el, 180.0 - el))), 0.05)
    t = t_zenith * (c.l_zenith_km / d) ** 2 * np.exp(-optical_depth * (1.0 / s - 1.0))
    return ElevationProfile(el, np.clip(t, 0.0, 1.0), excess_noise_snu, c)


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([repr(float(v)) for v in r.as_tuple()])
