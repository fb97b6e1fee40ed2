"""Covariance-matrix algebra for the two-mode Gaussian security analysis.

Quadratures are ordered ``(x1, p1, x2, p2)`` throughout and the vacuum has
unit variance. The prepare-and-measure (PM) variables are mapped to the
entanglement-based (EB) picture in which Alice holds one arm of a TMSV state
of variance ``V = vmod + 1``.

Eve runs an entangling cloner: she injects mode ``E1`` of a TMSV pair into
the channel beamsplitter and keeps ``E2``. Asymmetric thermal noise
``W_x != W_p`` is produced by two TMSV sources combined on a 50/50
beamsplitter, parametrised by the squeezings ``r1, r2`` of
:func:`eve_squeezing`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import AsymmetryError, DecompositionError, NonPhysicalState
from .params import (
    ChannelParams,
    Detection,
    ModulationParams,
    Quadrature,
    _as_detection,
    _as_quadrature,
)

LAMBDA_CLAMP = 1e-9
LAMBDA_TOL = 1e-6
BONA_FIDE_TOL = 1e-9


def symplectic_form(n: int = 2) -> np.ndarray:
    """Standard symplectic form for ``n`` modes in ``(x1, p1, ...)`` ordering."""
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


OMEGA = symplectic_form(2)


# --------------------------------------------------------------------------
# Bob's variances and the EB covariance matrix
# --------------------------------------------------------------------------

def _channel_output(V, xi, W, ch: ChannelParams) -> float:
    return ch.T * (V + xi) + (1.0 - ch.T) * W


def bob_variance_homodyne(mod: ModulationParams, ch: ChannelParams, quad) -> float:
    """Variance of Bob's homodyne outcome on one quadrature.

    ``T (V + xi) + (1 - T) W`` for a perfect detector. A trusted detector with
    efficiency ``eta`` and electronic noise ``xi_d`` maps this to
    ``eta * (...) + 1 - eta + xi_d``.
    """
    k = _as_quadrature(quad).index
    out = _channel_output(mod.V[k], ch.xi[k], ch.W[k], ch)
    return ch.eta * out + 1.0 - ch.eta + ch.xi_d_pair[k]


def bob_variance_heterodyne(mod: ModulationParams, ch: ChannelParams, quad) -> float:
    """Measured variance of one heterodyne output quadrature."""
    k = _as_quadrature(quad).index
    out = _channel_output(mod.V[k], ch.xi[k], ch.W[k], ch)
    return (ch.eta * out + (1.0 - ch.eta) + 1.0) / 2.0 + ch.xi_d_pair[k]


def bob_state_variance_heterodyne(mod: ModulationParams, ch: ChannelParams, quad) -> float:
    """Variance of the state entering Bob's heterodyne detector, ``2 V^m - 1``."""
    return 2.0 * bob_variance_heterodyne(mod, ch, quad) - 1.0


def bob_state_variance(mod, ch, detection, quad) -> float:
    if _as_detection(detection) is Detection.HOMODYNE:
        return bob_variance_homodyne(mod, ch, quad)
    return bob_state_variance_heterodyne(mod, ch, quad)


def ab_correlation(mod: ModulationParams, ch: ChannelParams, quad) -> float:
    """EB correlation ``C = sqrt(eta T (V^2 - 1))`` (no sign)."""
    V = mod.V[_as_quadrature(quad).index]
    return float(np.sqrt(ch.eta * ch.T * (V * V - 1.0)))


def eb_covariance(mod: ModulationParams, ch: ChannelParams, detection) -> np.ndarray:
    """4x4 covariance matrix of Alice's EB mode and Bob's received mode."""
    Vx, Vp = mod.V
    Cx = ab_correlation(mod, ch, Quadrature.X)
    Cp = ab_correlation(mod, ch, Quadrature.P)
    bx = bob_state_variance(mod, ch, detection, Quadrature.X)
    bp = bob_state_variance(mod, ch, detection, Quadrature.P)
    return np.array(
        [
            [Vx, 0.0, Cx, 0.0],
            [0.0, Vp, 0.0, -Cp],
            [Cx, 0.0, bx, 0.0],
            [0.0, -Cp, 0.0, bp],
        ]
    )


# --------------------------------------------------------------------------
# Eve's states
# --------------------------------------------------------------------------

def eve_squeezing(ch: ChannelParams) -> tuple[float, float]:
    """Squeezing parameters ``(r1, r2)`` of Eve's two TMSV sources."""
    Wx, Wp = ch.W
    arg = Wx * Wx - Wx / Wp
    if arg < 0.0:
        raise AsymmetryError(
            f"W_x^2 - W_x/W_p = {arg:.3g} < 0: no real squeezing reproduces W=({Wx}, {Wp})"
        )
    r1 = 0.5 * np.log(Wx + np.sqrt(arg))
    r2 = 0.5 * np.log(Wx / Wp) - r1
    return float(r1), float(r2)


def eve_tmsv_correlations(ch: ChannelParams) -> tuple[float, float]:
    """Correlations ``(C_Ex, C_Ep)`` between Eve's injected and kept modes."""
    r1, r2 = eve_squeezing(ch)
    cx = 0.5 * (-np.exp(2 * r1) + np.exp(2 * r2))
    cp = 0.5 * (-np.exp(-2 * r1) + np.exp(-2 * r2))
    return float(cx), float(cp)


def eve_average_cm(
    mod: ModulationParams, ch: ChannelParams, *, beamsplitter_scaling: bool = True
) -> np.ndarray:
    """Covariance matrix of Eve's modes ``(E1, E2)`` after the channel.

    ``E1`` leaves the channel beamsplitter with variance
    ``T W + (1 - T)(V + xi)``; ``E2`` keeps variance ``W``.

    With ``beamsplitter_scaling`` (the default) the E1-E2 correlation is the
    TMSV correlation attenuated by ``sqrt(T)``, which is what the beamsplitter
    does to it. ``beamsplitter_scaling=False`` keeps the bare TMSV correlation.
    """
    Vx, Vp = mod.V
    xix, xip = ch.xi
    Wx, Wp = ch.W
    T = ch.T
    cx, cp = eve_tmsv_correlations(ch)
    if beamsplitter_scaling:
        cx, cp = np.sqrt(T) * cx, np.sqrt(T) * cp
    e1x = T * Wx + (1.0 - T) * (Vx + xix)
    e1p = T * Wp + (1.0 - T) * (Vp + xip)
    return np.array(
        [
            [e1x, 0.0, cx, 0.0],
            [0.0, e1p, 0.0, cp],
            [cx, 0.0, Wx, 0.0],
            [0.0, cp, 0.0, Wp],
        ]
    )


def eve_bob_correlations(mod: ModulationParams, ch: ChannelParams) -> np.ndarray:
    """4x2 block of correlations between Eve's modes and Bob's state.

    Rows are ``(E1x, E1p, E2x, E2p)``, columns Bob's ``(x, p)``. The detector
    efficiency enters as ``sqrt(eta)``.
    """
    Vx, Vp = mod.V
    xix, xip = ch.xi
    Wx, Wp = ch.W
    T, eta = ch.T, ch.eta
    cx, cp = eve_tmsv_correlations(ch)
    a = np.sqrt(eta * T * (1.0 - T))
    b = np.sqrt(eta * (1.0 - T))
    return np.array(
        [
            [a * (Wx - (Vx + xix)), 0.0],
            [0.0, a * (Wp - (Vp + xip))],
            [b * cx, 0.0],
            [0.0, b * cp],
        ]
    )


def _outcome_covariance(mod, ch, detection):
    """Covariance of Bob's recorded outcomes and their cross-covariance with Eve."""
    sc = eve_bob_correlations(mod, ch)
    if _as_detection(detection) is Detection.HOMODYNE:
        var = np.array([bob_variance_homodyne(mod, ch, q) for q in Quadrature])
        return var, sc
    var = np.array([bob_variance_heterodyne(mod, ch, q) for q in Quadrature])
    return var, sc / np.sqrt(2.0)


def eve_conditional_cm(mod, ch, detection, quad=None, **kwargs) -> np.ndarray:
    """Eve's covariance matrix conditioned on Bob's measurement.

    Homodyne conditioning needs the measured quadrature ``quad``; heterodyne
    conditions on both outcomes. The result does not depend on the outcome
    values.
    """
    sigma = eve_average_cm(mod, ch, **kwargs)
    var, cross = _outcome_covariance(mod, ch, detection)
    if _as_detection(detection) is Detection.HOMODYNE:
        if quad is None:
            raise ValueError("homodyne conditioning needs the measured quadrature")
        k = _as_quadrature(quad).index
        col = cross[:, k]
        return sigma - np.outer(col, col) / var[k]
    return sigma - cross @ np.diag(1.0 / var) @ cross.T


def eve_conditional_means(mod, ch, detection, outcomes, quad=None) -> np.ndarray:
    """Means of Eve's four quadratures given Bob's outcomes.

    Parameters
    ----------
    outcomes : array_like
        Homodyne: shape ``(n,)`` values of the measured quadrature ``quad``.
        Heterodyne: shape ``(n, 2)`` pairs ``(x_b, p_b)``.

    Returns
    -------
    ndarray, shape (n, 4)
    """
    var, cross = _outcome_covariance(mod, ch, detection)
    outcomes = np.asarray(outcomes, dtype=float)
    if _as_detection(detection) is Detection.HOMODYNE:
        k = _as_quadrature(quad).index
        return np.outer(outcomes.reshape(-1), cross[:, k] / var[k])
    return outcomes.reshape(-1, 2) @ (cross / var).T


def means_to_amplitudes(mu) -> np.ndarray:
    """Complex amplitudes ``alpha_k = (<x_k> + i <p_k>) / 2`` for each mode."""
    mu = np.atleast_2d(mu)
    return 0.5 * (mu[:, 0::2] + 1j * mu[:, 1::2])


# --------------------------------------------------------------------------
# Spectra and entropies
# --------------------------------------------------------------------------

def min_bona_fide_eigenvalue(cm) -> float:
    """Smallest eigenvalue of ``cm + i Omega``."""
    cm = np.asarray(cm, dtype=float)
    n = cm.shape[0] // 2
    return float(np.linalg.eigvalsh(cm + 1j * symplectic_form(n))[0])


def is_bona_fide(cm, tol: float = BONA_FIDE_TOL) -> bool:
    cm = np.asarray(cm, dtype=float)
    return bool(np.allclose(cm, cm.T, atol=1e-12)) and min_bona_fide_eigenvalue(cm) >= -tol


def symplectic_eigenvalues(cm) -> np.ndarray:
    """Symplectic eigenvalues of a covariance matrix, ascending, clamped at 1."""
    cm = np.asarray(cm, dtype=float)
    n = cm.shape[0] // 2
    w, v = np.linalg.eigh(0.5 * (cm + cm.T))
    if w[0] <= 0.0:
        raise NonPhysicalState(f"covariance matrix is not positive definite (min eig {w[0]:.3g})")
    root = (v * np.sqrt(w)) @ v.T
    herm = 1j * root @ symplectic_form(n) @ root
    ev = np.linalg.eigvalsh(0.5 * (herm + herm.conj().T))
    lam = np.sort(ev[n:])
    if lam[0] < 1.0 - LAMBDA_TOL:
        raise NonPhysicalState(f"symplectic eigenvalue {lam[0]:.9f} < 1")
    return np.maximum(lam, 1.0)


def g_entropy(lam) -> np.ndarray:
    """Entropy in bits of a thermal mode with symplectic eigenvalue ``lam``."""
    lam = np.maximum(np.asarray(lam, dtype=float), 1.0)
    a = (lam + 1.0) / 2.0
    b = (lam - 1.0) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        tb = np.where(b > 0.0, b * np.log2(np.where(b > 0.0, b, 1.0)), 0.0)
    return a * np.log2(a) - tb


def gaussian_entropy(cm) -> float:
    """Von Neumann entropy (bits) of the Gaussian state with covariance ``cm``."""
    return float(np.sum(g_entropy(symplectic_eigenvalues(cm))))


def holevo_gaussian(mod, ch, detection, quad=None, **kwargs) -> float:
    """Eve's Holevo information ``S(E) - S(E|B)`` for Gaussian states."""
    s_avg = gaussian_entropy(eve_average_cm(mod, ch, **kwargs))
    s_cond = gaussian_entropy(eve_conditional_cm(mod, ch, detection, quad, **kwargs))
    return max(s_avg - s_cond, 0.0)


def gaussian_mutual_info(mod, ch, detection, quad=None) -> float:
    """Alice-Bob mutual information in bits from the EB covariance matrix.

    Homodyne with ``quad`` gives the per-quadrature value; with ``quad=None``
    the average over the randomly switched quadratures. Heterodyne with
    ``quad`` gives one quadrature's share; with ``quad=None`` the total
    information carried by both simultaneously measured quadratures.
    """
    detection = _as_detection(detection)
    if quad is None:
        ix = gaussian_mutual_info(mod, ch, detection, Quadrature.X)
        ip = gaussian_mutual_info(mod, ch, detection, Quadrature.P)
        return 0.5 * (ix + ip) if detection is Detection.HOMODYNE else ix + ip
    q = _as_quadrature(quad)
    V = mod.V[q.index]
    C = ab_correlation(mod, ch, q)
    va = (V + 1.0) / 2.0
    if detection is Detection.HOMODYNE:
        va_b = va - C * C / (2.0 * bob_variance_homodyne(mod, ch, q))
    else:
        va_b = va - C * C / (4.0 * bob_variance_heterodyne(mod, ch, q))
    return float(0.5 * np.log2(va / va_b))


# --------------------------------------------------------------------------
# Symplectic primitives
# --------------------------------------------------------------------------

def rotation(theta1: float, theta2: float) -> np.ndarray:
    """Phase rotations on both modes; amplitude ``a_k -> exp(-i theta_k) a_k``."""
    blocks = []
    for t in (theta1, theta2):
        c, s = np.cos(t), np.sin(t)
        blocks.append(np.array([[c, s], [-s, c]]))
    return scipy.linalg.block_diag(*blocks)


def beamsplitter(tau: float) -> np.ndarray:
    """Beamsplitter of transmissivity ``tau``: ``a -> t a + r b``, ``b -> -r a + t b``."""
    t = np.sqrt(tau)
    r = np.sqrt(1.0 - tau)
    eye = np.eye(2)
    return np.block([[t * eye, r * eye], [-r * eye, t * eye]])


def squeezer(r1: float, r2: float) -> np.ndarray:
    """Single-mode squeezers ``diag(e^-r1, e^r1, e^-r2, e^r2)``."""
    return np.diag([np.exp(-r1), np.exp(r1), np.exp(-r2), np.exp(r2)])


def passive(theta1, theta2, tau, theta3, theta4) -> np.ndarray:
    """``R(theta1, theta2) B(tau) R(theta3, theta4)``."""
    return rotation(theta1, theta2) @ beamsplitter(tau) @ rotation(theta3, theta4)


def symplectic_inverse(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    om = symplectic_form(s.shape[0] // 2)
    return om.T @ s.T @ om


def passive_to_unitary(o) -> np.ndarray:
    """2x2 unitary acting on the mode amplitudes for a passive symplectic ``o``."""
    o = np.asarray(o)
    return o[0::2, 0::2] + 1j * o[1::2, 0::2]


@dataclass(frozen=True)
class PassiveParams:
    """``R(theta1, theta2) B(tau) R(theta3, theta4)``."""

    theta1: float
    theta2: float
    tau: float
    theta3: float
    theta4: float

    def matrix(self) -> np.ndarray:
        return passive(self.theta1, self.theta2, self.tau, self.theta3, self.theta4)

    def as_tuple(self) -> tuple:
        return (self.theta1, self.theta2, self.tau, self.theta3, self.theta4)


def passive_params(o) -> PassiveParams:
    """Factor a 4x4 passive symplectic into rotations and one beamsplitter."""
    u = passive_to_unitary(o)
    c = min(abs(u[0, 0]), 1.0)
    tau = c * c
    if abs(u[0, 1]) < 1e-13:
        phi1, phi2, phi4 = np.angle(u[0, 0]), np.angle(u[1, 1]), 0.0
    elif c < 1e-13:
        phi1 = 0.0
        phi4 = np.angle(u[0, 1])
        phi2 = np.angle(-u[1, 0])
    else:
        phi1 = np.angle(u[0, 0])
        phi4 = np.angle(u[0, 1]) - phi1
        phi2 = np.angle(-u[1, 0])
    return PassiveParams(float(-phi1), float(-phi2), float(tau), 0.0, float(-phi4))


# --------------------------------------------------------------------------
# Williamson and Bloch-Messiah
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Williamson:
    s: np.ndarray
    omega: np.ndarray

    @property
    def lambdas(self) -> np.ndarray:
        return np.diag(self.omega)[0::2].copy()


def williamson(cm) -> Williamson:
    """Symplectic ``s`` and ``omega = diag(l1, l1, l2, l2)`` with ``s cm s^T = omega``.

    Uses the real Schur form of the antisymmetric matrix
    ``cm^-1/2 Omega cm^-1/2``, whose 2x2 blocks carry ``1/lambda``.
    """
    cm = np.asarray(cm, dtype=float)
    cm = 0.5 * (cm + cm.T)
    n = cm.shape[0] // 2
    w, v = np.linalg.eigh(cm)
    if w[0] <= 0.0:
        raise NonPhysicalState("covariance matrix is not positive definite")
    inv_root = (v / np.sqrt(w)) @ v.T
    anti = inv_root @ symplectic_form(n) @ inv_root
    anti = 0.5 * (anti - anti.T)
    t, o = scipy.linalg.schur(anti, output="real")
    o = o.copy()
    inv_lam = np.empty(n)
    for k in range(n):
        i, j = 2 * k, 2 * k + 1
        if t[i, j] < 0.0:
            o[:, [i, j]] = o[:, [j, i]]
            inv_lam[k] = -t[i, j]
        else:
            inv_lam[k] = t[i, j]
    lam = 1.0 / inv_lam
    if lam.min() < 1.0 - LAMBDA_TOL:
        raise NonPhysicalState(f"symplectic eigenvalue {lam.min():.9f} < 1")
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    cols = np.concatenate([[2 * k, 2 * k + 1] for k in order])
    o = o[:, cols]
    d_half = np.repeat(np.sqrt(lam), 2)
    s = (d_half[:, None] * o.T) @ inv_root
    # clamp the removable rounding below 1 so nbar = (lambda - 1)/2 >= 0
    return Williamson(s=s, omega=np.diag(np.repeat(np.maximum(lam, 1.0), 2)))


def _xpxp_to_xxpp(n: int) -> np.ndarray:
    perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return np.eye(2 * n)[perm]


@dataclass(frozen=True)
class BlochMessiah:
    """``s = s_u s_i s_v`` with passive ``s_u, s_v`` and squeezer ``s_i``."""

    u: PassiveParams
    r: tuple[float, float]
    v: PassiveParams
    s_u: np.ndarray
    s_i: np.ndarray
    s_v: np.ndarray

    def rebuild(self) -> np.ndarray:
        return self.u.matrix() @ squeezer(*self.r) @ self.v.matrix()


BM_TOL = 1e-8


def bloch_messiah(s) -> BlochMessiah:
    """Factor a 4x4 symplectic into passive, squeezing and passive parts.

    Polar decomposition ``s = O P`` followed by a symplectic eigenbasis of
    the positive part ``P = O2 D O2^T``. Squeezings are non-negative and the
    eigenvalue-1 subspace is split by symplectic Gram-Schmidt.
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[0] // 2
    if n != 2:
        raise ValueError("only two-mode symplectics are supported")
    if not np.allclose(s @ OMEGA @ s.T, OMEGA, atol=1e-8 * max(1.0, np.abs(s).max() ** 2)):
        raise DecompositionError("input matrix is not symplectic")
    orth, pos = scipy.linalg.polar(s)
    perm = _xpxp_to_xxpp(n)
    p = perm @ pos @ perm.T
    p = 0.5 * (p + p.T)
    j = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    evals, evecs = np.linalg.eigh(p)
    qs: list[np.ndarray] = []
    for idx in range(2 * n):
        vec = evecs[:, idx].copy()
        for q in qs:
            for b in (q, j.T @ q):
                vec -= (b @ vec) * b
        norm = np.linalg.norm(vec)
        if norm > 1e-3:
            qs.append(vec / norm)
        if len(qs) == n:
            break
    if len(qs) != n:
        raise DecompositionError("could not build a symplectic eigenbasis")
    qmat = np.column_stack(qs)
    o2 = np.hstack([qmat, j.T @ qmat])
    r = np.array([-np.log(q @ p @ q) for q in qs])
    r = np.maximum(r, 0.0)
    o2 = perm.T @ o2 @ perm
    s_i = squeezer(*r)
    s_u = orth @ o2
    s_v = o2.T
    u_par = passive_params(s_u)
    v_par = passive_params(s_v)
    out = BlochMessiah(u_par, (float(r[0]), float(r[1])), v_par, s_u, s_i, s_v)
    scale = max(1.0, np.abs(s).max())
    if np.abs(out.rebuild() - s).max() > BM_TOL * scale:
        raise DecompositionError(
            f"Bloch-Messiah reconstruction residual {np.abs(out.rebuild() - s).max():.3g}"
        )
    return out


@dataclass(frozen=True)
class SymplecticDecomposition:
    """Williamson normal form of a 2-mode covariance matrix plus Bloch-Messiah of ``s``."""

    s: np.ndarray
    omega: np.ndarray
    passive_params_u: PassiveParams
    squeeze_params: tuple[float, float]
    passive_params_v: PassiveParams

    @property
    def lambdas(self) -> np.ndarray:
        return np.diag(self.omega)[0::2].copy()

    @property
    def nbar(self) -> np.ndarray:
        return (self.lambdas - 1.0) / 2.0

    def covariance(self) -> np.ndarray:
        """Covariance matrix ``s^-1 omega s^-T`` described by this decomposition."""
        si = symplectic_inverse(self.s)
        return si @ self.omega @ si.T


def decompose(cm) -> SymplecticDecomposition:
    w = williamson(cm)
    bm = bloch_messiah(w.s)
    return SymplecticDecomposition(w.s, w.omega, bm.u, bm.r, bm.v)
