"""Alice's Gaussian filter and Bob's notch filter.

Alice keeps a symbol ``x_a`` with probability ``exp(-g^2 x_a^2)``. Bob keeps
an outcome only when it lies outside ``(-c, c)`` (homodyne) or outside the
disc of radius ``c`` (heterodyne).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special


def alice_filter(x, g):
    """Acceptance function ``F_A(x) = exp(-g^2 x^2)``."""
    return np.exp(-(g * g) * np.square(x))


def alice_success_prob(vmod, g):
    """Probability that a Gaussian symbol of variance ``vmod`` survives gain ``g``."""
    return 1.0 / np.sqrt(2.0 * g * g * vmod + 1.0)


def alice_effective_vmod(vmod, g):
    """Variance of the surviving symbols, ``vmod / (2 g^2 vmod + 1)``."""
    return vmod / (2.0 * g * g * vmod + 1.0)


@dataclass
class RejectionResult:
    """Outcome of empirical rejection filtering.

    Attributes
    ----------
    keep : ndarray of bool
        Per-symbol decision.
    rate_x, rate_p : float
        Per-quadrature empirical acceptance rates (each draw on its own).
    rate : float
        Joint keep rate.
    """

    keep: np.ndarray
    rate_x: float
    rate_p: float
    rate: float


def alice_rejection_filter(
    x_a,
    p_a,
    g_x: float,
    g_p: float,
    seed=None,
    acceptance: Callable | None = None,
) -> RejectionResult:
    """Keep each symbol when independent uniforms fall below the filter values.

    One uniform is drawn per symbol and quadrature; a symbol survives only if
    both quadratures accept it.

    Parameters
    ----------
    acceptance : callable, optional
        ``acceptance(x, g) -> values in [0, 1]`` replacing the Gaussian filter,
        e.g. for an inverted profile at short distance.
    """
    x_a = np.asarray(x_a, dtype=float)
    p_a = np.asarray(p_a, dtype=float)
    f = acceptance or alice_filter
    rng = np.random.default_rng(seed)
    u = rng.random((2, x_a.size))
    kx = u[0] <= f(x_a, g_x)
    kp = u[1] <= f(p_a, g_p)
    keep = kx & kp
    n = max(x_a.size, 1)
    return RejectionResult(keep, kx.sum() / n, kp.sum() / n, keep.sum() / n)


def bob_filter_homodyne(x_b, c):
    """Notch acceptance: 1 outside ``(-c, c)``, 0 inside."""
    return (np.abs(x_b) >= c).astype(float)


def bob_success_prob_homodyne(v_b, c):
    """``erfc(c / sqrt(2 v_b))``, the Gaussian mass outside the notch."""
    return special.erfc(np.asarray(c) / np.sqrt(2.0 * np.asarray(v_b)))


def bob_output_pdf_homodyne(v_b: float, c: float) -> Callable:
    """Density of Bob's surviving outcomes, renormalised by the success probability."""
    p = float(bob_success_prob_homodyne(v_b, c))
    norm = 1.0 / np.sqrt(2.0 * np.pi * v_b)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) >= c, norm * np.exp(-x * x / (2.0 * v_b)) / p, 0.0)

    return pdf


def bob_output_variance_homodyne(v_b: float, c: float) -> float:
    """Second moment of the notch-filtered Gaussian."""
    s = np.sqrt(v_b)
    z = c / s
    tail = special.erfc(z / np.sqrt(2.0))
    return float(v_b * (1.0 + 2.0 * z * np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi) / tail))


def bob_success_prob_heterodyne(v_bx: float, v_bp: float, c_rad: float) -> float:
    """Mass of the heterodyne outcome density outside the disc of radius ``c_rad``.

    ``v_bx, v_bp`` are state variances; each recorded quadrature has variance
    ``(v_b + 1)/2``. The symmetric case is ``exp(-c^2 / (v_b + 1))``; the
    asymmetric case integrates the radial CDF over the angle.
    """
    if c_rad == 0.0:
        return 1.0
    sx = (v_bx + 1.0) / 2.0
    sp = (v_bp + 1.0) / 2.0
    if np.isclose(sx, sp, rtol=0.0, atol=1e-15):
        return float(np.exp(-c_rad * c_rad / (v_bx + 1.0)))

    def integrand(phi):
        q = np.cos(phi) ** 2 / sx + np.sin(phi) ** 2 / sp
        return np.exp(-0.5 * c_rad * c_rad * q) / q

    val, _ = integrate.quad(integrand, 0.0, 2.0 * np.pi, epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(val / (2.0 * np.pi * np.sqrt(sx * sp)))


def eb_equivalent_gain(g, V):
    """EB-side gain ``g' = g sqrt(2 (V - 1) / (V + 1))`` matching the PM filter."""
    return g * np.sqrt(2.0 * (V - 1.0) / (V + 1.0))


def eb_success_prob(g_eb, V):
    """Success probability of the filter applied to Alice's EB heterodyne outcome."""
    return 1.0 / (g_eb * g_eb * (V + 1.0) + 1.0) ** 0.5


def eb_effective_variance(g_eb, V):
    """EB variance after filtering; equals ``vmod_eff + 1`` for the matched gain."""
    a = g_eb * g_eb * (V + 1.0)
    return (V + a) / (a + 1.0)


def eb_success_prob_joint(g_eb_x, g_eb_p, V_x, V_p):
    """Joint EB success probability for independent per-quadrature filters."""
    return eb_success_prob(g_eb_x, V_x) * eb_success_prob(g_eb_p, V_p)
