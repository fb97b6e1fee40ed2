"""Quadrature sample batches: calibration, estimation, synthesis and bootstrap.

Samples are stored column-wise. Alice's symbols ``x_a, p_a`` are always
present; Bob's outcomes are NaN where a quadrature was not measured
(homodyne measures one quadrature per symbol, heterodyne both).
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from . import filters, gaussian
from .errors import CalibrationError, InsufficientSamples
from .params import ChannelParams, Detection, FilterSettings, ModulationParams, Quadrature, _as_detection

MIN_GAIN_SAMPLES = 1000
MIN_FIT_SAMPLES = 10_000
BOTH = "both"


@dataclass(frozen=True)
class SampleBatch:
    """Alice's symbols and Bob's outcomes.

    Attributes
    ----------
    x_a, p_a : ndarray
        Alice's symbols.
    quad : ndarray of str
        ``"x"`` or ``"p"`` per record for homodyne, ``"both"`` for heterodyne.
    outcome_x, outcome_p : ndarray
        Bob's outcomes, NaN where not measured.
    v_sn, v_dn : float
        Shot-noise and dark-noise variances the data are expressed against;
        ``(1, 0)`` once calibrated.
    """

    x_a: np.ndarray
    p_a: np.ndarray
    quad: np.ndarray
    outcome_x: np.ndarray
    outcome_p: np.ndarray
    detection: Detection = Detection.HOMODYNE
    v_sn: float = 1.0
    v_dn: float = 0.0
    t_nominal: float | None = None
    seed: int | None = None
    source: str = ""
    dark_subtracted: bool = True

    def __post_init__(self):
        n = len(self.x_a)
        if n == 0:
            raise InsufficientSamples("empty sample batch")
        for name in ("p_a", "quad", "outcome_x", "outcome_p"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has length {len(getattr(self, name))}, expected {n}")
        object.__setattr__(self, "detection", _as_detection(self.detection))

    @property
    def n(self) -> int:
        return len(self.x_a)

    def take(self, idx) -> "SampleBatch":
        return replace(
            self, x_a=self.x_a[idx], p_a=self.p_a[idx], quad=self.quad[idx],
            outcome_x=self.outcome_x[idx], outcome_p=self.outcome_p[idx],
        )

    def pairs(self, quad) -> tuple[np.ndarray, np.ndarray]:
        """Alice's symbols and Bob's outcomes for records where ``quad`` was measured."""
        q = Quadrature(quad)
        a, b = (self.x_a, self.outcome_x) if q is Quadrature.X else (self.p_a, self.outcome_p)
        m = ~np.isnan(b)
        return a[m], b[m]

    def metadata(self) -> dict:
        return {
            "v_sn": self.v_sn, "v_dn": self.v_dn, "t_nominal": self.t_nominal,
            "detection": self.detection.value, "seed": self.seed,
        }


@dataclass
class BivariateFit:
    sigma_a: float
    sigma_b: float
    rho: float
    n: int
    ci95: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"sigma_a": self.sigma_a, "sigma_b": self.sigma_b, "rho": self.rho, "n": self.n, "ci95": self.ci95}


@dataclass
class CalibrationReport:
    g_e: tuple
    xi: tuple
    vmod: tuple
    fit: dict = field(default_factory=dict)  # quadrature -> BivariateFit dict
    clamped: tuple = ()

    def to_dict(self) -> dict:
        return {"g_e": list(self.g_e), "xi_snu": list(self.xi), "vmod_snu": list(self.vmod),
                "fit": self.fit, "clamped": list(self.clamped)}


# --------------------------------------------------------------------------
# Calibration and estimation
# --------------------------------------------------------------------------

def calibrate_shot_noise(batch: SampleBatch, v_sn: float, v_dn: float = 0.0,
                         subtract_dark: bool = True) -> SampleBatch:
    """Express all quadratures in shot-noise units.

    Divides by ``sqrt(v_sn - v_dn)``, or by ``sqrt(v_sn)`` when
    ``subtract_dark`` is false (appropriate when dark noise is far below
    shot noise).
    """
    if not (v_sn > v_dn >= 0.0):
        raise CalibrationError(f"need v_sn > v_dn >= 0, got v_sn={v_sn}, v_dn={v_dn}")
    s = 1.0 / math.sqrt(v_sn - v_dn if subtract_dark else v_sn)
    return replace(
        batch, x_a=batch.x_a * s, p_a=batch.p_a * s, outcome_x=batch.outcome_x * s,
        outcome_p=batch.outcome_p * s, v_sn=1.0, v_dn=0.0, dark_subtracted=subtract_dark,
    )


def _moments(a, b):
    a = a - a.mean()
    b = b - b.mean()
    return float(np.mean(a * a)), float(np.mean(b * b)), float(np.mean(a * b))


def estimate_gain(batch: SampleBatch, min_samples: int = MIN_GAIN_SAMPLES) -> tuple[float, float]:
    """Electronic gain ``C_ab / V_a`` per quadrature from a back-to-back run."""
    out = []
    for q in Quadrature:
        a, b = batch.pairs(q)
        if a.size < min_samples:
            raise InsufficientSamples(f"{a.size} samples on {q.value}, need {min_samples}")
        va, _, cab = _moments(a, b)
        if va <= 0.0:
            raise CalibrationError(f"Alice's {q.value} variance is zero; gain undefined")
        out.append(cab / va)
    return tuple(out)


def _hetero_factor(batch):
    # heterodyne splits the signal, halving its power in each outcome
    return 2.0 if batch.detection is Detection.HETERODYNE else 1.0


def estimate_trusted_noise(batch: SampleBatch, g_e, min_samples: int = MIN_GAIN_SAMPLES):
    """Trusted noise ``V_b - V_mod - 1`` per quadrature from a back-to-back run.

    Returns ``(xi, vmod, clamped)``. Small negative estimates (sampling noise)
    are clamped to zero with a warning.
    """
    k = _hetero_factor(batch)
    xi, vmod, clamped = [], [], []
    for q, g in zip(Quadrature, g_e):
        a, b = batch.pairs(q)
        if a.size < min_samples:
            raise InsufficientSamples(f"{a.size} samples on {q.value}, need {min_samples}")
        va, vb, _ = _moments(a, b)
        vm = k * g * g * va
        v_state = k * vb - (k - 1.0)
        x = v_state - vm - 1.0
        if x < 0.0:
            warnings.warn(f"negative trusted-noise estimate {x:.3g} on {q.value} clamped to 0", stacklevel=2)
            clamped.append(q.value)
            x = 0.0
        xi.append(x)
        vmod.append(vm)
    return tuple(xi), tuple(vmod), tuple(clamped)


def fit_bivariate(batch: SampleBatch, quad, min_samples: int = MIN_FIT_SAMPLES, level: float = 0.95) -> BivariateFit:
    """Maximum-likelihood bivariate Gaussian moments with confidence intervals.

    Standard deviations use the chi-square interval, the correlation the
    Fisher z-transform.
    """
    a, b = batch.pairs(quad)
    n = a.size
    if n < min_samples:
        raise InsufficientSamples(f"{n} samples, need {min_samples}")
    va, vb, cab = _moments(a, b)
    sa, sb = math.sqrt(va), math.sqrt(vb)
    rho = cab / (sa * sb) if sa > 0 and sb > 0 else 0.0
    rho = float(np.clip(rho, -1.0 + 1e-15, 1.0 - 1e-15))
    alpha = 1.0 - level
    lo_c, hi_c = stats.chi2.ppf([1 - alpha / 2, alpha / 2], n - 1)

    def sd_ci(s):
        return [s * math.sqrt(n / lo_c), s * math.sqrt(n / hi_c)]

    z = math.atanh(rho)
    dz = stats.norm.ppf(1 - alpha / 2) / math.sqrt(n - 3)
    ci = {"sigma_a": sd_ci(sa), "sigma_b": sd_ci(sb), "rho": [math.tanh(z - dz), math.tanh(z + dz)]}
    return BivariateFit(sa, sb, rho, n, ci)


def calibration_report(batch: SampleBatch, min_samples: int = MIN_GAIN_SAMPLES) -> CalibrationReport:
    """Gain, trusted noise, modulation variance and fits of a calibration run."""
    g = estimate_gain(batch, min_samples)
    xi, vmod, clamped = estimate_trusted_noise(batch, g, min_samples)
    fits = {}
    for q in Quadrature:
        try:
            fits[q.value] = fit_bivariate(batch, q, min_samples=min_samples).to_dict()
        except InsufficientSamples:
            pass
    return CalibrationReport(g, xi, vmod, fits, clamped)


def estimate_channel(batch: SampleBatch, xi=(0.0, 0.0), eta: float = 1.0, xi_d=0.0, beta: float = 0.92,
                     g_e=(1.0, 1.0)):
    """Invert the linear channel model for ``(T, W)`` given trusted noise.

    Alice's symbols are rescaled by ``g_e``. ``T`` is averaged over the
    two quadratures; ``W`` is clamped at 1.
    """
    k = _hetero_factor(batch)
    ch0 = ChannelParams(0.5, xi_x=xi[0], xi_p=xi[1], eta=eta, xi_d=xi_d)
    xd = ch0.xi_d_pair
    vm, ts, vbs = [], [], []
    for q, g in zip(Quadrature, g_e):
        a, b = batch.pairs(q)
        va, vb, cab = _moments(g * a, b)
        if va <= 0.0:
            raise CalibrationError(f"Alice's {q.value} variance is zero")
        vm.append(va)
        ts.append((cab / va) ** 2 * k / eta)
        vbs.append(vb)
    T = float(np.clip(np.mean(ts), 0.0, 1.0))
    W = []
    for i in range(2):
        V = vm[i] + 1.0
        # recorded variance -> state variance seen by an ideal detector
        v_state = k * (vbs[i] - xd[i]) - (k - 1.0) if k > 1 else vbs[i] - xd[i]
        inner = (v_state - 1.0 + eta) / eta
        w = (inner - T * (V + xi[i])) / (1.0 - T) if T < 1.0 else 1.0
        W.append(max(float(w), 1.0))
    mod = ModulationParams(vm[0], vm[1], beta)
    ch = ChannelParams(T, W[0], W[1], xi[0], xi[1], eta, xi_d)
    return mod, ch


# --------------------------------------------------------------------------
# Synthesis
# --------------------------------------------------------------------------

def simulate_channel(mod: ModulationParams, ch: ChannelParams, detection, n_samples: int, seed=None,
                     gain=(1.0, 1.0), v_sn: float = 1.0, v_dn: float = 0.0) -> SampleBatch:
    """Draw Alice's symbols and Bob's outcomes from the linear Gaussian model.

    Alice's recorded symbols are the prepared ones divided by ``gain``, so
    :func:`estimate_gain` recovers it. With ``v_sn != 1`` every column is
    multiplied by ``sqrt(v_sn - v_dn)`` to emulate uncalibrated data.
    """
    detection = _as_detection(detection)
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    n = int(n_samples)
    sym = rng.standard_normal((2, n)) * np.sqrt(np.asarray(mod.vmod, dtype=float))[:, None]
    noise = rng.standard_normal((2, n))
    out = np.empty((2, n))
    if detection is Detection.HOMODYNE:
        k = 1.0
        var_b = [gaussian.bob_variance_homodyne(mod, ch, q) for q in Quadrature]
    else:
        k = 0.5
        var_b = [gaussian.bob_variance_heterodyne(mod, ch, q) for q in Quadrature]
    amp = math.sqrt(k * ch.eta * ch.T)
    for i in range(2):
        sd = math.sqrt(max(var_b[i] - amp * amp * mod.vmod[i], 0.0))
        out[i] = amp * sym[i] + sd * noise[i]
    if detection is Detection.HOMODYNE:
        pick = rng.random(n) < 0.5
        quad = np.where(pick, "x", "p")
        out[0, ~pick] = np.nan
        out[1, pick] = np.nan
    else:
        quad = np.full(n, BOTH)
    s = math.sqrt(v_sn - v_dn) if v_sn != 1.0 or v_dn != 0.0 else 1.0
    return SampleBatch(
        s * sym[0] / gain[0], s * sym[1] / gain[1], quad, s * out[0], s * out[1], detection,
        v_sn, v_dn, ch.T, None if seed is None else int(seed), "simulated",
    )


# --------------------------------------------------------------------------
# Empirical filtering and bootstrap
# --------------------------------------------------------------------------

def apply_alice_filter(batch: SampleBatch, g_x: float, g_p: float, seed=None):
    """Rejection-sample Alice's Gaussian filter; returns ``(batch, RejectionResult)``."""
    res = filters.alice_rejection_filter(batch.x_a, batch.p_a, g_x, g_p, seed)
    return batch.take(res.keep), res


def apply_bob_filter(batch: SampleBatch, c_x: float = 0.0, c_p: float = 0.0, c_rad: float = 0.0) -> SampleBatch:
    """Keep records outside Bob's notch (measured quadrature only for homodyne)."""
    if batch.detection is Detection.HOMODYNE:
        ox = np.nan_to_num(batch.outcome_x, nan=np.inf)
        op = np.nan_to_num(batch.outcome_p, nan=np.inf)
        keep = (np.abs(ox) >= c_x) & (np.abs(op) >= c_p)
    else:
        keep = batch.outcome_x ** 2 + batch.outcome_p ** 2 >= c_rad * c_rad
    return batch.take(keep)


def bootstrap_keyrate(batch: SampleBatch, settings: FilterSettings | None = None, beta: float = 0.92,
                      resamples: int = 100, seed=None, *, xi=(0.0, 0.0), eta: float = 1.0, xi_d=0.0,
                      g_e=(1.0, 1.0), threads: int = 1, evaluate=None):
    """Bootstrap mean and standard deviation of the key rate.

    Each resample is drawn with replacement, the channel is re-estimated
    with :func:`estimate_channel` and the key rate is evaluated with
    ``evaluate(mod, ch, detection, settings, beta)`` (default: the full
    pipeline). Resample seeds are spawned from ``seed``, so the result does
    not depend on ``threads``.

    Returns
    -------
    mean, std : float
    rates : ndarray
    """
    from .keyrate import keyrate_after_bob

    if resamples < 2:
        raise ValueError("need at least two resamples")
    settings = settings or FilterSettings()
    evaluate = evaluate or (lambda m, c, d, s, b: keyrate_after_bob(m, c, d, s, b).key_rate)
    seeds = np.random.SeedSequence(seed).spawn(resamples)

    def one(ss):
        idx = np.random.default_rng(ss).integers(0, batch.n, batch.n)
        mod, ch = estimate_channel(batch.take(idx), xi, eta, xi_d, beta, g_e)
        return float(evaluate(mod, ch, batch.detection, settings, beta))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rates = np.array(list(pool.map(one, seeds)))
    else:
        rates = np.array([one(s) for s in seeds])
    return float(rates.mean()), float(rates.std(ddof=1)), rates


# --------------------------------------------------------------------------
# CSV / JSON I/O
# --------------------------------------------------------------------------

COLUMNS = ("x_a", "p_a", "quad", "outcome_x", "outcome_p")


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def batch_to_csv(batch: SampleBatch) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in zip(batch.x_a.tolist(), batch.p_a.tolist(), batch.quad.tolist(),
                   batch.outcome_x.tolist(), batch.outcome_p.tolist()):
        w.writerow([_fmt(row[0]), _fmt(row[1]), row[2], _fmt(row[3]), _fmt(row[4])])
    return buf.getvalue()


def write_batch(path, batch: SampleBatch) -> None:
    """Write the batch as CSV plus a metadata sidecar JSON next to it."""
    path = Path(path)
    path.write_text(batch_to_csv(batch))
    with open(sidecar_path(path), "w") as fh:
        json.dump(batch.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_batch(path, sidecar=None) -> SampleBatch:
    """Read a CSV written by :func:`write_batch` (sidecar optional)."""
    path = Path(path)
    meta = {}
    side = Path(sidecar) if sidecar else sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(h.strip() for h in header) != COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(COLUMNS)}")
        rows = list(r)
    if not rows:
        raise InsufficientSamples(f"{path}: no records")
    cols = list(zip(*rows))

    def num(c):
        return np.array([float(v) if v != "" else np.nan for v in c])

    det = meta.get("detection") or (Detection.HETERODYNE.value if cols[2][0] == BOTH else Detection.HOMODYNE.value)
    return SampleBatch(
        num(cols[0]), num(cols[1]), np.array(cols[2]), num(cols[3]), num(cols[4]), det,
        float(meta.get("v_sn", 1.0)), float(meta.get("v_dn", 0.0)), meta.get("t_nominal"), meta.get("seed"),
        str(path.name),
    )
