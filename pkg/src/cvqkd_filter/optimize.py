"""Derivative-free search over filter gains, cut-offs and modulation variance.

Every search is a coarse grid followed by coordinate refinement with
bounded scalar line searches. Grid evaluations may run on a thread pool;
results are collected in grid order and ties go to the smaller parameters,
so the argmax does not depend on the number of threads.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import filters, gaussian
from .errors import NoPositiveRate
from .keyrate import FockEveEvaluator, KeyRateReport, keyrate_after_alice, keyrate_after_bob, keyrate_gg02
from .mutual_info import GridSpec, mi_after_bob_heterodyne, mi_after_bob_homodyne
from .params import ChannelParams, Detection, FilterSettings, ModulationParams, Quadrature, _as_detection


@dataclass(frozen=True)
class SearchSpec:
    """Box, coarse resolution and refinement schedule of a search.

    Attributes
    ----------
    bounds : tuple of (lo, hi)
        One pair per axis.
    resolution : int
        Coarse grid points per axis (>= 2). An axis with ``lo == hi`` holds
        a single point.
    refinements : int
        Coordinate-descent sweeps after the grid.
    threads : int
        Worker threads for grid evaluation.
    """

    bounds: tuple = ((0.0, 0.436), (0.0, 0.436))
    resolution: int = 12
    refinements: int = 3
    threads: int = 1

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
                raise ValueError(f"invalid bounds ({lo}, {hi})")
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")

    def axis(self, i: int) -> np.ndarray:
        lo, hi = self.bounds[i]
        if hi == lo:
            return np.array([lo])
        return np.linspace(lo, hi, self.resolution)


@dataclass
class SearchResult:
    params: tuple
    key_rate: float
    report: KeyRateReport | None
    contour: list = field(default_factory=list)  # rows (param1, param2, key_rate)

    @property
    def positive(self) -> bool:
        return self.key_rate > 0.0


def _map(fn, items, threads):
    items = list(items)
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _better(a_val, a_par, b_val, b_par) -> bool:
    """Is ``a`` preferred to ``b``? Higher value, then smaller parameters."""
    if a_val > b_val + 1e-15:
        return True
    if abs(a_val - b_val) <= 1e-15:
        return tuple(a_par) < tuple(b_par)
    return False


def _grid_argmax(points, values):
    best = 0
    for i in range(1, len(points)):
        if _better(values[i], points[i], values[best], points[best]):
            best = i
    return best


def _coordinate_descent(f, x0, f0, bounds, step, sweeps, xatol=1e-4):
    x = list(x0)
    fx = f0
    for _ in range(sweeps):
        improved = False
        for i, (lo, hi) in enumerate(bounds):
            a, b = max(lo, x[i] - step[i]), min(hi, x[i] + step[i])
            if b - a <= xatol:
                continue

            def g(t, i=i):
                y = list(x)
                y[i] = t
                return -f(tuple(y))

            res = minimize_scalar(g, bounds=(a, b), method="bounded", options={"xatol": xatol})
            cand = list(x)
            cand[i] = float(res.x)
            if _better(-res.fun, cand, fx, x):
                x, fx = cand, -res.fun
                improved = True
        step = [s * 0.5 for s in step]
        if not improved and max(step) < xatol:
            break
    return tuple(x), fx


def _search_2d(f, spec: SearchSpec):
    ax0, ax1 = spec.axis(0), spec.axis(1)
    pts = [(float(a), float(b)) for a in ax0 for b in ax1]
    vals = _map(f, pts, spec.threads)
    contour = [(p[0], p[1], float(v)) for p, v in zip(pts, vals)]
    i = _grid_argmax(pts, vals)
    step = [
        (ax0[1] - ax0[0]) if len(ax0) > 1 else 0.0,
        (ax1[1] - ax1[0]) if len(ax1) > 1 else 0.0,
    ]
    best, val = _coordinate_descent(f, pts[i], vals[i], spec.bounds, step, spec.refinements)
    return best, val, contour


def optimize_alice_gains(mod: ModulationParams, ch: ChannelParams, detection, beta: float | None = None,
                         spec: SearchSpec | None = None) -> SearchResult:
    """Gains ``(g_x, g_p)`` maximising the rate after Alice's filter.

    The returned result is flagged non-positive (``result.positive``) rather
    than raising, so callers can still inspect the argmax.
    """
    spec = spec or SearchSpec()

    def f(g):
        return keyrate_after_alice(mod, ch, detection, g[0], g[1], beta).key_rate

    best, val, contour = _search_2d(f, spec)
    rep = keyrate_after_alice(mod, ch, detection, best[0], best[1], beta)
    return SearchResult(best, rep.key_rate, rep, contour)


def optimize_vmod_gg02(ch: ChannelParams, detection, beta: float = 0.92, spec: SearchSpec | None = None,
                       return_contour: bool = False):
    """Modulation variances maximising the plain GG02 rate.

    Returns
    -------
    (vmod_x, vmod_p), KeyRateReport[, contour]

    Raises
    ------
    NoPositiveRate
        If the best rate is not positive; ``exc.result`` holds the optimum.
    """
    spec = spec or SearchSpec(bounds=((0.5, 20.0), (0.5, 20.0)), resolution=20, refinements=4)

    def f(v):
        return keyrate_gg02(ModulationParams(v[0], v[1], beta), ch, detection).key_rate

    best, val, contour = _search_2d(f, spec)
    rep = keyrate_gg02(ModulationParams(best[0], best[1], beta), ch, detection)
    out = (best, rep, contour) if return_contour else (best, rep)
    if rep.key_rate <= 0.0:
        raise NoPositiveRate(f"best GG02 rate {rep.key_rate:.3g} at vmod {best}", result=out)
    return out


def _bob_term_homodyne(eff, ch, q, beta, weight, evaluator, grid):
    """``0.5 P_A P_B(c) (beta I(c) - I_E(c))`` for one quadrature as a function of ``c``."""
    v_b = gaussian.bob_variance_homodyne(eff, ch, q)
    exact_i = gaussian.gaussian_mutual_info(eff, ch, Detection.HOMODYNE, q)
    exact_e = gaussian.holevo_gaussian(eff, ch, Detection.HOMODYNE, q)

    def term(c):
        if c == 0.0:
            return 0.5 * weight * (beta * exact_i - exact_e)
        p_b = float(filters.bob_success_prob_homodyne(v_b, c))
        i_ab = mi_after_bob_homodyne(eff, ch, c, grid, q, check=False)
        i_e = evaluator(c).i_e
        return 0.5 * weight * p_b * (beta * i_ab - i_e)

    return term


def _search_1d(f, lo, hi, resolution, refinements, threads):
    xs = [float(x) for x in (np.linspace(lo, hi, resolution) if hi > lo else [lo])]
    vals = _map(f, xs, threads)
    i = _grid_argmax([(x,) for x in xs], vals)
    step = [(xs[1] - xs[0]) if len(xs) > 1 else 0.0]
    best, val = _coordinate_descent(lambda t: f(t[0]), (xs[i],), vals[i], [(lo, hi)], step,
                                    refinements, xatol=1e-2)
    return best[0], val, list(zip(xs, vals))


def optimize_bob_cutoffs(mod: ModulationParams, ch: ChannelParams, detection, gains=(0.0, 0.0),
                         beta: float | None = None, spec: SearchSpec | None = None,
                         grid: GridSpec | None = None, truncation="auto") -> SearchResult:
    """Cut-offs maximising the rate after both filters at fixed Alice gains.

    For homodyne detection the rate is a sum of independent per-quadrature
    terms, so ``c_x`` and ``c_p`` are optimised separately and the contour is
    the outer sum of the two 1-D profiles. Heterodyne searches the radial
    cut-off only (``param2`` is 0 in the contour). Eve's state at the origin
    is cached across cut-offs.
    """
    detection = _as_detection(detection)
    beta = mod.beta if beta is None else beta
    spec = spec or SearchSpec(bounds=((0.0, 8.95), (0.0, 8.95)), resolution=10, refinements=2)
    g_x, g_p = gains
    eff = mod.with_vmod(filters.alice_effective_vmod(mod.vmod_x, g_x), filters.alice_effective_vmod(mod.vmod_p, g_p))
    pa = (float(filters.alice_success_prob(mod.vmod_x, g_x)), float(filters.alice_success_prob(mod.vmod_p, g_p)))

    if detection is Detection.HOMODYNE:
        grid = grid or GridSpec.homodyne()
        best, profiles = [], []
        for q in Quadrature:
            ev = FockEveEvaluator(eff, ch, detection, q, grid, truncation)
            term = _bob_term_homodyne(eff, ch, q, beta, pa[q.index], ev, grid)
            lo, hi = spec.bounds[q.index]
            c, _, prof = _search_1d(term, lo, hi, spec.resolution, spec.refinements, spec.threads)
            best.append(c)
            profiles.append(prof)
        contour = [(cx, cp, vx + vp) for cx, vx in profiles[0] for cp, vp in profiles[1]]
        settings = FilterSettings(g_x, g_p, best[0], best[1])
    else:
        grid = grid or GridSpec.heterodyne()
        ev = FockEveEvaluator(eff, ch, detection, None, grid, truncation)
        vbx = gaussian.bob_state_variance_heterodyne(eff, ch, Quadrature.X)
        vbp = gaussian.bob_state_variance_heterodyne(eff, ch, Quadrature.P)
        i0 = gaussian.gaussian_mutual_info(eff, ch, detection)
        e0 = gaussian.holevo_gaussian(eff, ch, detection)

        def f(c):
            if c == 0.0:
                return pa[0] * pa[1] * (beta * i0 - e0)
            p_b = filters.bob_success_prob_heterodyne(vbx, vbp, c)
            i_ab = mi_after_bob_heterodyne(eff, ch, c, grid, check=False)
            return p_b * pa[0] * pa[1] * (beta * i_ab - ev(c).i_e)

        lo, hi = spec.bounds[0]
        c, _, prof = _search_1d(f, lo, hi, spec.resolution, spec.refinements, spec.threads)
        contour = [(x, 0.0, v) for x, v in prof]
        settings = FilterSettings(g_x, g_p, c_rad=c)
        best = [c, 0.0]
    rep = keyrate_after_bob(mod, ch, detection, settings, beta, grid, truncation)
    return SearchResult(tuple(best), rep.key_rate, rep, contour)


def write_contour_csv(path, rows) -> None:
    """Write ``(param1, param2, key_rate)`` rows with a header."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param1", "param2", "key_rate"])
        for a, b, k in rows:
            w.writerow([repr(float(a)), repr(float(b)), repr(float(k))])
