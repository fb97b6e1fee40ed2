import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_cm
from cvqkd_filter import fock as F
from cvqkd_filter import gaussian as G
from cvqkd_filter.errors import TruncationError, WeightError


def _vacuum(dims=(20, 20)):
    return F.product_state(F.thermal_state(0.0, dims[0]), F.thermal_state(0.0, dims[1]))


def test_thermal_state_statistics():
    st_ = F.thermal_state(0.5, 60)
    n = np.arange(60)
    p = np.real(np.diag(st_.rho))
    assert np.isclose(p @ n, 0.5, atol=1e-9)
    assert np.isclose(F.von_neumann_entropy(st_), G.g_entropy(2.0), atol=1e-9)
    with pytest.raises(TruncationError):
        F.thermal_state(5.0, 10)


def test_displacement_is_unitary_and_coherent():
    N, alpha = 60, 1.3 - 0.7j
    d = F.displacement_matrix(alpha, N)
    low = d[:, :20]
    assert np.allclose(low.conj().T @ low, np.eye(20), atol=1e-10)
    # D(alpha)|0> is a coherent state with Poisson statistics
    p = np.abs(d[:, 0]) ** 2
    assert np.isclose(p @ np.arange(N), abs(alpha) ** 2, atol=1e-10)


def test_displacement_moves_means():
    s = F.displace(_vacuum(), 0.5 + 0.25j, -0.3j)
    mu, cm = F.moments(s)
    # x = 2 Re(alpha), p = 2 Im(alpha)
    assert np.allclose(mu, [1.0, 0.5, 0.0, -0.6], atol=1e-9)
    assert np.allclose(cm, np.eye(4), atol=1e-8)


@pytest.mark.parametrize("sym", [
    G.squeezer(0.3, -0.2), G.beamsplitter(0.3), G.rotation(0.4, -1.0), G.passive(0.2, 0.5, 0.7, -0.3, 1.1),
])
def test_gate_plans_act_like_symplectics(sym):
    vac = _vacuum((30, 30))
    thermal = F.product_state(F.thermal_state(0.2, 30), F.thermal_state(0.1, 30))
    cm0 = np.diag([1.4, 1.4, 1.2, 1.2])
    out = F.apply_plan(thermal, F.GaussianUnitaryPlan.from_symplectic(sym))
    _, cm = F.moments(out)
    assert np.allclose(cm, sym @ cm0 @ sym.T, atol=1e-5)
    del vac


def test_build_unitary_detects_small_truncation():
    plan = F.GaussianUnitaryPlan().squeeze(0, 1.5)
    with pytest.raises(TruncationError):
        F.build_unitary(plan, (12, 12), guard=2)
    u = F.build_unitary(F.GaussianUnitaryPlan().rotation(0, 0.3).beamsplitter(0.4), (8, 8))
    # photon number is conserved, so states with n1 + n2 < 8 stay inside the box
    n1, n2 = np.divmod(np.arange(64), 8)
    inside = (n1 + n2) < 8
    sub = u[:, inside]
    assert np.allclose(sub.conj().T @ sub, np.eye(inside.sum()), atol=1e-12)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_conditional_state_reproduces_covariance_and_entropy(seed):
    cm = random_cm(np.random.default_rng(seed), scale=0.25, max_extra=1.0)
    d = G.decompose(cm)
    blocks = [cm[:2, :2], cm[2:, 2:]]
    # second moments weight the tail by n, so they converge slower than the entropy
    dims = tuple(F.required_cutoff(b, 0.0) + 30 for b in blocks)
    rho = F.conditional_state_at_origin(d, dims)
    _, cm_f = F.moments(rho)
    assert np.abs(cm_f - cm).max() < 1e-2
    assert abs(F.von_neumann_entropy(rho) - G.gaussian_entropy(cm)) < 1e-3


def test_line_average_matches_explicit_mixture():
    rho0 = F.product_state(F.thermal_state(0.1, 24), F.thermal_state(0.05, 24))
    xs = np.linspace(-1, 1, 7)
    w = np.exp(-xs ** 2)
    w /= w.sum()
    d = (0.3 + 0.1j, -0.2j)
    fast = F.average_along_line(rho0, d, xs, w)
    slow = F.weighted_average_state(rho0, [(x * d[0], x * d[1], wi) for x, wi in zip(xs, w)])
    # compare away from the truncation edge
    t1 = fast.tensor()[:14, :14, :14, :14]
    t2 = slow.tensor()[:14, :14, :14, :14]
    assert np.abs(t1 - t2).max() < 1e-6


def test_plane_average_matches_explicit_mixture():
    rho0 = F.product_state(F.thermal_state(0.1, 22), F.thermal_state(0.05, 22))
    xs = np.linspace(-0.8, 0.8, 5)
    w = np.exp(-np.add.outer(xs ** 2, xs ** 2))
    w /= w.sum()
    dx, dp = (0.3, 0.1j), (0.2j, -0.1)
    fast = F.average_on_plane(rho0, dx, dp, xs, xs, w)
    items = [(x * dx[0] + p * dp[0], x * dx[1] + p * dp[1], w[i, j])
             for i, x in enumerate(xs) for j, p in enumerate(xs)]
    slow = F.weighted_average_state(rho0, items)
    assert np.abs(fast.tensor()[:12, :12, :12, :12] - slow.tensor()[:12, :12, :12, :12]).max() < 1e-6


def test_weights_validated():
    rho0 = _vacuum((6, 6))
    with pytest.raises(WeightError):
        F.average_along_line(rho0, (0.1, 0.1), [0.0, 1.0], [0.7, 0.7])
    with pytest.raises(WeightError):
        F.weighted_average_state(rho0, [(0, 0, -0.5), (0, 0, 1.5)])


def test_entropy_of_pure_and_mixed():
    assert abs(F.von_neumann_entropy(_vacuum((5, 5)))) < 1e-12
    mixed = np.eye(4) / 4
    assert np.isclose(F.von_neumann_entropy(mixed), 2.0)


def test_required_cutoff_grows_with_displacement():
    cm = np.diag([1.5, 1.5])
    assert F.required_cutoff(cm, 3.0) > F.required_cutoff(cm, 0.0)
