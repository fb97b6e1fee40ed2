"""Key rates before and after post-selection.

Homodyne rates average the two randomly switched quadratures,
``K = beta * 0.5 sum_q P_q I_q - 0.5 sum_q P_q I_Eq`` with ``P_q`` the
product of Alice's and Bob's success probabilities on that quadrature.
Heterodyne rates use the joint information of both quadratures,
``K = P_B P_Ax P_Ap (beta I_AB - I_E)``.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from . import filters, fock, gaussian
from .errors import GridTooCoarse, TruncationError
from .mutual_info import GridSpec, mi_after_bob_heterodyne, mi_after_bob_homodyne
from .params import (
    ChannelParams,
    Detection,
    FilterSettings,
    ModulationParams,
    Quadrature,
    _as_detection,
    _as_quadrature,
)

CONVERGENCE_TOL = 1e-3
FOCK_GAUSS_TOL = 0.01
WEIGHT_FLOOR = 1e-12
MAX_REFINEMENTS = 4


@dataclass
class KeyRateReport:
    """Everything that went into one key-rate evaluation.

    ``i_ab`` and ``i_e`` are already weighted by the success probabilities,
    so ``key_rate = beta * i_ab - i_e`` for homodyne detection and
    ``key_rate = p_bob * p_ax * p_ap * (beta * i_ab - i_e)`` for heterodyne.
    """

    detection: str
    beta: float
    i_ab: float
    i_e: float
    p_alice: tuple
    p_bob: tuple | float
    key_rate: float
    method: str = "gaussian"
    truncation: dict | None = None
    convergence: dict | None = None
    per_quadrature: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)

    @property
    def secure(self) -> bool:
        return self.key_rate > 0.0

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        kwargs.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kwargs)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if hasattr(obj, "value"):
        return obj.value
    return obj


def _inputs(mod, ch, detection, settings=None):
    d = {"modulation": mod.to_dict(), "channel": ch.to_dict(), "detection": detection.value}
    if settings is not None:
        d["filters"] = settings.to_dict()
    return d


def _effective(mod: ModulationParams, g_x: float, g_p: float) -> ModulationParams:
    return mod.with_vmod(
        filters.alice_effective_vmod(mod.vmod_x, g_x), filters.alice_effective_vmod(mod.vmod_p, g_p)
    )


def _alice_probs(mod, g_x, g_p):
    return (
        float(filters.alice_success_prob(mod.vmod_x, g_x)),
        float(filters.alice_success_prob(mod.vmod_p, g_p)),
    )


def keyrate_after_alice(
    mod: ModulationParams,
    ch: ChannelParams,
    detection,
    g_x: float = 0.0,
    g_p: float = 0.0,
    beta: float | None = None,
) -> KeyRateReport:
    """Gaussian key rate with Alice's filter; ``g = 0`` is the plain GG02 rate."""
    detection = _as_detection(detection)
    beta = mod.beta if beta is None else beta
    eff = _effective(mod, g_x, g_p)
    pa = _alice_probs(mod, g_x, g_p)
    per = {}
    for q in Quadrature:
        per[q.value] = {
            "i_ab": gaussian.gaussian_mutual_info(eff, ch, detection, q),
            "i_e": gaussian.holevo_gaussian(eff, ch, detection, q) if detection is Detection.HOMODYNE else None,
            "vmod_eff": eff.vmod[q.index],
        }
    settings = FilterSettings(g_x=g_x, g_p=g_p)
    if detection is Detection.HOMODYNE:
        i_ab = 0.5 * (pa[0] * per["x"]["i_ab"] + pa[1] * per["p"]["i_ab"])
        i_e = 0.5 * (pa[0] * per["x"]["i_e"] + pa[1] * per["p"]["i_e"])
        k = beta * i_ab - i_e
        p_bob = (1.0, 1.0)
    else:
        i_ab = per["x"]["i_ab"] + per["p"]["i_ab"]
        i_e = gaussian.holevo_gaussian(eff, ch, detection)
        k = pa[0] * pa[1] * (beta * i_ab - i_e)
        p_bob = 1.0
    return KeyRateReport(
        detection.value, beta, i_ab, i_e, pa, p_bob, k, "gaussian",
        per_quadrature=per, inputs=_inputs(mod, ch, detection, settings),
    )


def keyrate_gg02(mod: ModulationParams, ch: ChannelParams, detection, beta: float | None = None) -> KeyRateReport:
    """GG02 key rate without post-selection."""
    return keyrate_after_alice(mod, ch, detection, 0.0, 0.0, beta)


def keyrate_gg02_optimal(ch: ChannelParams, detection, beta: float = 0.92, spec=None):
    """GG02 rate at the optimal modulation variances.

    Returns
    -------
    (vmod_x, vmod_p), KeyRateReport

    Raises
    ------
    NoPositiveRate
        When the best rate is not positive; the exception carries the result.
    """
    from .optimize import optimize_vmod_gg02

    return optimize_vmod_gg02(ch, detection, beta, spec)


# --------------------------------------------------------------------------
# Eve's information from Fock-space states
# --------------------------------------------------------------------------

@dataclass
class FockEveInfo:
    """Holevo information from truncated density matrices plus diagnostics."""

    i_e: float
    s_avg: float
    s_cond: float
    dims: tuple
    delta_s: float
    weight_deficit: float
    trace_deficit: float
    gaussian_bound: float
    holevo_gaussian: float
    n_points: int

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _bin_mass(centres, half, sd):
    lo = (centres - half) / (np.sqrt(2.0) * sd)
    hi = (centres + half) / (np.sqrt(2.0) * sd)
    # erfc differences stay accurate deep in the tails
    return np.where(
        centres >= 0,
        0.5 * (special.erfc(lo) - special.erfc(hi)),
        0.5 * (special.erfc(-hi) - special.erfc(-lo)),
    )


def bob_weights_homodyne(v_b: float, c: float, grid: GridSpec):
    """Grid points and normalised bin masses of Bob's filtered homodyne outcome.

    Returns
    -------
    xs, weights, deficit
        ``deficit`` is the filtered mass not covered by the grid.
    """
    sd = np.sqrt(v_b)
    xs = grid.bob_points(sd, c)
    raw = _bin_mass(xs, 0.5 * grid.delta, sd)
    p_b = float(special.erfc(c / np.sqrt(2.0 * v_b)))
    total = raw.sum()
    return xs, raw / total, max(1.0 - total / p_b, 0.0)


def bob_weights_heterodyne(v_mx: float, v_mp: float, c_rad: float, grid: GridSpec):
    """2-D grid and normalised weights for Bob's filtered heterodyne outcomes."""
    sx, sp = np.sqrt(v_mx), np.sqrt(v_mp)
    axis = grid.bob_points_2d(max(sx, sp), c_rad)
    wx = _bin_mass(axis, 0.5 * grid.delta, sx)
    wp = _bin_mass(axis, 0.5 * grid.delta, sp)
    mask = axis[:, None] ** 2 + axis[None, :] ** 2 >= c_rad * c_rad
    raw = np.outer(wx, wp) * mask
    p_b = filters.bob_success_prob_heterodyne(2 * v_mx - 1, 2 * v_mp - 1, c_rad)
    total = raw.sum()
    return axis, raw / total, max(1.0 - total / p_b, 0.0)


def _mode_blocks(cm):
    return cm[:2, :2], cm[2:, 2:]


class FockEveEvaluator:
    """Fock-space Holevo information for a fixed channel, reusable across cut-offs.

    Eve's conditional covariance matrix does not depend on Bob's cut-off, so
    the state at the origin and its entropy are cached per truncation; only
    the weights and displacements change between calls.
    """

    def __init__(self, mod_eff: ModulationParams, ch: ChannelParams, detection, quad=None,
                 grid: GridSpec | None = None, truncation="auto"):
        self.mod = mod_eff
        self.ch = ch
        self.detection = _as_detection(detection)
        if self.detection is Detection.HOMODYNE and quad is None:
            raise ValueError("homodyne Fock evaluation needs the measured quadrature")
        self.quad = None if quad is None else _as_quadrature(quad)
        self.grid = grid or (GridSpec.homodyne() if self.detection is Detection.HOMODYNE else GridSpec.heterodyne())
        self.truncation = truncation
        self.sigma_cond = gaussian.eve_conditional_cm(mod_eff, ch, self.detection, self.quad)
        self.decomp = gaussian.decompose(self.sigma_cond)
        self.var, self.cross = gaussian._outcome_covariance(mod_eff, ch, self.detection)
        self.holevo_gaussian = gaussian.holevo_gaussian(mod_eff, ch, self.detection, self.quad)
        self._s_cond_gauss = gaussian.gaussian_entropy(self.sigma_cond)
        self._origin: dict = {}

    def origin(self, dims):
        """Conditional state at the origin and its entropy, cached by truncation."""
        dims = tuple(dims)
        if dims not in self._origin:
            rho0 = fock.conditional_state_at_origin(self.decomp, dims)
            self._origin[dims] = (rho0, fock.von_neumann_entropy(rho0))
        return self._origin[dims]

    def _ensemble(self, c):
        if self.detection is Detection.HOMODYNE:
            k = self.quad.index
            xs, w, wdef = bob_weights_homodyne(self.var[k], c, self.grid)
            coef = self.cross[:, k] / self.var[k]
            direction = (0.5 * (coef[0] + 1j * coef[1]), 0.5 * (coef[2] + 1j * coef[3]))
            mus = np.outer(xs, coef)
            sig = w > WEIGHT_FLOOR
            amax = [abs(d) * np.abs(xs[sig]).max() for d in direction]

            def average(rho0):
                return fock.average_along_line(rho0, direction, xs, w)

            return w, wdef, mus, amax, average, int(sig.sum())
        axis, w, wdef = bob_weights_heterodyne(self.var[0], self.var[1], c, self.grid)
        coef = self.cross / self.var
        dir_x = (0.5 * (coef[0, 0] + 1j * coef[1, 0]), 0.5 * (coef[2, 0] + 1j * coef[3, 0]))
        dir_p = (0.5 * (coef[0, 1] + 1j * coef[1, 1]), 0.5 * (coef[2, 1] + 1j * coef[3, 1]))
        X, P = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([X.ravel(), P.ravel()])
        mus = pts @ coef.T
        sig = w.ravel() > WEIGHT_FLOOR
        amax = [np.abs(pts[sig, 0] * dir_x[m] + pts[sig, 1] * dir_p[m]).max() for m in range(2)]

        def average(rho0):
            return fock.average_on_plane(rho0, dir_x, dir_p, axis, axis, w)

        return w.ravel(), wdef, mus, amax, average, int(sig.sum())

    def __call__(self, c: float, check: bool = True) -> FockEveInfo:
        w, wdef, mus, amax, average, n_points = self._ensemble(c)

        # Gaussian-extremality bound on the same filtered ensemble
        mean = w @ mus
        cm_avg = self.sigma_cond + (mus * w[:, None]).T @ mus - np.outer(mean, mean)
        g_bound = gaussian.gaussian_entropy(cm_avg) - self._s_cond_gauss

        if self.truncation == "auto":
            blocks = _mode_blocks(self.sigma_cond)
            dims = tuple(fock.required_cutoff(b, a) for b, a in zip(blocks, amax))
        elif isinstance(self.truncation, (int, np.integer)):
            dims = (int(self.truncation), int(self.truncation))
        else:
            dims = tuple(int(n) for n in self.truncation)

        def run(d):
            rho0, s_c = self.origin(d)
            avg = average(rho0)
            s_a = fock.von_neumann_entropy(avg)
            return s_a - s_c, s_a, s_c, max(rho0.deficit, avg.deficit)

        prev = run(dims)
        for _ in range(MAX_REFINEMENTS):
            bigger = (dims[0] + 10, dims[1] + 10)
            cur = run(bigger)
            delta = abs(cur[0] - prev[0])
            dims, prev = bigger, cur
            if delta < CONVERGENCE_TOL:
                break
        else:
            raise TruncationError(f"Fock entropy not converged (|dS| = {delta:.2e} at N = {dims})")

        i_e, s_a, s_c, tdef = prev
        i_e = max(i_e, 0.0)
        if check and c == 0.0 and abs(i_e - self.holevo_gaussian) > FOCK_GAUSS_TOL:
            raise GridTooCoarse(
                f"c=0 Fock value {i_e:.4f} differs from Gaussian {self.holevo_gaussian:.4f}"
            )
        return FockEveInfo(
            i_e=float(i_e), s_avg=float(s_a), s_cond=float(s_c), dims=dims, delta_s=float(delta),
            weight_deficit=float(wdef), trace_deficit=float(tdef), gaussian_bound=float(g_bound),
            holevo_gaussian=float(self.holevo_gaussian), n_points=n_points,
        )


def eve_info_fock(
    mod_eff: ModulationParams,
    ch: ChannelParams,
    detection,
    c: float,
    grid: GridSpec | None = None,
    quad=None,
    truncation="auto",
    check: bool = True,
) -> FockEveInfo:
    """Eve's Holevo information on the filtered ensemble, from Fock-space entropies.

    ``S(sum_i w_i D_i rho0 D_i^dag) - S(rho0)`` where ``rho0`` is Eve's
    conditional state at outcome zero and the displacements follow Bob's
    surviving outcomes. The value is reported at the larger of two
    truncations ``N`` and ``N + 10`` once they agree to 1e-3 bits.

    Parameters
    ----------
    mod_eff : ModulationParams
        Modulation after Alice's filter.
    c : float
        Bob's cut-off (homodyne on ``quad``) or radial cut-off (heterodyne).
    truncation : "auto" or int or (int, int)
        Per-mode Fock cut-off; ``"auto"`` sizes it from the state's photon
        statistics and the largest displacement.
    """
    return FockEveEvaluator(mod_eff, ch, detection, quad, grid, truncation)(c, check)


# --------------------------------------------------------------------------
# Full pipeline
# --------------------------------------------------------------------------

def keyrate_after_bob(
    mod: ModulationParams,
    ch: ChannelParams,
    detection,
    settings: FilterSettings,
    beta: float | None = None,
    grid: GridSpec | None = None,
    truncation="auto",
    threads: int = 1,
) -> KeyRateReport:
    """Key rate with both filters.

    A quadrature (or the heterodyne plane) with zero cut-off is evaluated
    with the exact Gaussian formulas; a non-zero cut-off uses the
    discretised mutual information and the Fock-space bound on Eve.
    """
    detection = _as_detection(detection)
    beta = mod.beta if beta is None else beta
    eff = _effective(mod, settings.g_x, settings.g_p)
    pa = _alice_probs(mod, settings.g_x, settings.g_p)
    inputs = _inputs(mod, ch, detection, settings)

    if detection is Detection.HOMODYNE:
        grid = grid or GridSpec.homodyne()

        def one(q):
            c = settings.cutoffs[q.index]
            v_b = gaussian.bob_variance_homodyne(eff, ch, q)
            p_b = float(filters.bob_success_prob_homodyne(v_b, c))
            if c == 0.0:
                return {
                    "i_ab": gaussian.gaussian_mutual_info(eff, ch, detection, q),
                    "i_e": gaussian.holevo_gaussian(eff, ch, detection, q),
                    "p_bob": p_b, "method": "gaussian",
                }
            info = eve_info_fock(eff, ch, detection, c, grid, q, truncation)
            return {
                "i_ab": mi_after_bob_homodyne(eff, ch, c, grid, q),
                "i_e": info.i_e, "p_bob": p_b, "method": "fock", "fock": info.to_dict(),
            }

        with ThreadPoolExecutor(max_workers=max(1, min(threads, 2))) as pool:
            res = list(pool.map(one, list(Quadrature)))
        per = {q.value: r for q, r in zip(Quadrature, res)}
        wts = [pa[i] * res[i]["p_bob"] for i in range(2)]
        i_ab = 0.5 * (wts[0] * res[0]["i_ab"] + wts[1] * res[1]["i_ab"])
        i_e = 0.5 * (wts[0] * res[0]["i_e"] + wts[1] * res[1]["i_e"])
        k = beta * i_ab - i_e
        p_bob = (res[0]["p_bob"], res[1]["p_bob"])
        fock_parts = [r["fock"] for r in res if "fock" in r]
    else:
        grid = grid or GridSpec.heterodyne()
        c = settings.c_rad
        vbx = gaussian.bob_state_variance_heterodyne(eff, ch, Quadrature.X)
        vbp = gaussian.bob_state_variance_heterodyne(eff, ch, Quadrature.P)
        p_bob = filters.bob_success_prob_heterodyne(vbx, vbp, c)
        if c == 0.0:
            i_ab = gaussian.gaussian_mutual_info(eff, ch, detection)
            i_e = gaussian.holevo_gaussian(eff, ch, detection)
            fock_parts = []
        else:
            info = eve_info_fock(eff, ch, detection, c, grid, None, truncation)
            i_ab = mi_after_bob_heterodyne(eff, ch, c, grid)
            i_e = info.i_e
            fock_parts = [info.to_dict()]
        per = {}
        k = p_bob * pa[0] * pa[1] * (beta * i_ab - i_e)

    method = "fock" if fock_parts else "gaussian"
    return KeyRateReport(
        detection.value, beta, float(i_ab), float(i_e), pa, p_bob, float(k), method,
        truncation={"dims": [f["dims"] for f in fock_parts]} if fock_parts else None,
        convergence={"delta_s": [f["delta_s"] for f in fock_parts]} if fock_parts else None,
        per_quadrature=per if detection is Detection.HOMODYNE else {"fock": fock_parts},
        inputs=inputs,
    )
