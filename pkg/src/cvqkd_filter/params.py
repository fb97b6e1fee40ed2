"""Value types describing the channel, Alice's modulation and the filters.

All variances are in shot-noise units (vacuum quadrature variance = 1).
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, replace


class Detection(str, enum.Enum):
    HOMODYNE = "homodyne"
    HETERODYNE = "heterodyne"


class Quadrature(str, enum.Enum):
    X = "x"
    P = "p"

    @property
    def index(self) -> int:
        return 0 if self is Quadrature.X else 1


def _as_detection(detection) -> Detection:
    return detection if isinstance(detection, Detection) else Detection(detection)


def _as_quadrature(quad) -> Quadrature:
    return quad if isinstance(quad, Quadrature) else Quadrature(quad)


@dataclass(frozen=True)
class ChannelParams:
    """Thermal-loss channel plus trusted preparation and detector noise.

    Attributes
    ----------
    T : float
        Channel transmittance.
    W_x, W_p : float
        Variance of Eve's injected thermal mode per quadrature.
    xi_x, xi_p : float
        Trusted preparation noise per quadrature.
    eta : float
        Detection efficiency (trusted).
    xi_d : float or tuple
        Detector electronic noise (trusted). A pair gives per-quadrature values.
    """

    T: float
    W_x: float = 1.0
    W_p: float = 1.0
    xi_x: float = 0.0
    xi_p: float = 0.0
    eta: float = 1.0
    xi_d: float | tuple[float, float] = 0.0

    def __post_init__(self):
        if isinstance(self.xi_d, list):
            object.__setattr__(self, "xi_d", tuple(self.xi_d))
        if not 0.0 <= self.T <= 1.0:
            raise ValueError(f"transmittance must lie in [0, 1], got {self.T}")
        if self.W_x < 1.0 or self.W_p < 1.0:
            raise ValueError("Eve's thermal variance must be >= 1 SNU")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"detection efficiency must lie in (0, 1], got {self.eta}")
        if min(self.xi_x, self.xi_p, *self.xi_d_pair) < 0.0:
            raise ValueError("noise variances must be non-negative")

    @property
    def W(self) -> tuple[float, float]:
        return (self.W_x, self.W_p)

    @property
    def xi(self) -> tuple[float, float]:
        return (self.xi_x, self.xi_p)

    @property
    def xi_d_pair(self) -> tuple[float, float]:
        if isinstance(self.xi_d, tuple):
            return (float(self.xi_d[0]), float(self.xi_d[1]))
        return (float(self.xi_d), float(self.xi_d))

    @classmethod
    def from_excess_noise(cls, T, xi_ch_x, xi_ch_p=None, **kwargs) -> "ChannelParams":
        """Build a channel from excess noise referred to the channel input.

        ``W = 1 + T * xi_ch / (1 - T)``, so that Bob sees ``T * xi_ch`` extra
        noise on top of the lossy vacuum.
        """
        if xi_ch_p is None:
            xi_ch_p = xi_ch_x
        if T >= 1.0:
            return cls(T=T, W_x=1.0, W_p=1.0, **kwargs)
        return cls(
            T=T,
            W_x=1.0 + T * xi_ch_x / (1.0 - T),
            W_p=1.0 + T * xi_ch_p / (1.0 - T),
            **kwargs,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["xi_d"], tuple):
            d["xi_d"] = list(d["xi_d"])
        return d


@dataclass(frozen=True)
class ModulationParams:
    """Gaussian modulation variances and reconciliation efficiency."""

    vmod_x: float
    vmod_p: float
    beta: float = 0.92

    def __post_init__(self):
        if self.vmod_x < 0.0 or self.vmod_p < 0.0:
            raise ValueError("modulation variance must be non-negative")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"reconciliation efficiency must lie in [0, 1), got {self.beta}")

    @property
    def vmod(self) -> tuple[float, float]:
        return (self.vmod_x, self.vmod_p)

    @property
    def V(self) -> tuple[float, float]:
        """EB-scheme variance ``V = vmod + 1`` per quadrature."""
        return (self.vmod_x + 1.0, self.vmod_p + 1.0)

    def with_vmod(self, vmod_x, vmod_p) -> "ModulationParams":
        return replace(self, vmod_x=float(vmod_x), vmod_p=float(vmod_p))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FilterSettings:
    """Alice's Gaussian filter gains and Bob's notch cut-offs."""

    g_x: float = 0.0
    g_p: float = 0.0
    c_x: float = 0.0
    c_p: float = 0.0
    c_rad: float = 0.0

    def __post_init__(self):
        for name in ("g_x", "g_p", "c_x", "c_p", "c_rad"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite non-negative number, got {v}")

    @property
    def gains(self) -> tuple[float, float]:
        return (self.g_x, self.g_p)

    @property
    def cutoffs(self) -> tuple[float, float]:
        return (self.c_x, self.c_p)

    def to_dict(self) -> dict:
        return asdict(self)
