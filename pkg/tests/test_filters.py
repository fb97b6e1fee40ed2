import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from cvqkd_filter import filters as FL


def test_alice_filter_closed_forms_against_quadrature():
    for vmod in (0.5, 4.0, 12.7):
        for g in (0.0, 0.1, 0.3):
            pdf = lambda x: np.exp(-x * x / (2 * vmod)) / np.sqrt(2 * np.pi * vmod)
            p, _ = integrate.quad(lambda x: pdf(x) * FL.alice_filter(x, g), -np.inf, np.inf)
            m2, _ = integrate.quad(lambda x: x * x * pdf(x) * FL.alice_filter(x, g), -np.inf, np.inf)
            assert np.isclose(FL.alice_success_prob(vmod, g), p, rtol=1e-10)
            assert np.isclose(FL.alice_effective_vmod(vmod, g), m2 / p, rtol=1e-10)


def test_zero_gain_is_identity():
    assert FL.alice_success_prob(7.0, 0.0) == 1.0
    assert FL.alice_effective_vmod(7.0, 0.0) == 7.0


def test_rejection_filter_monte_carlo_within_three_se():
    rng = np.random.default_rng(3)
    n, vx, vp, gx, gp = 10**6, 12.7, 13.5, 0.213, 0.259
    x = rng.normal(0, np.sqrt(vx), n)
    p = rng.normal(0, np.sqrt(vp), n)
    r = FL.alice_rejection_filter(x, p, gx, gp, seed=4)
    for rate, v, g in ((r.rate_x, vx, gx), (r.rate_p, vp, gp)):
        px = FL.alice_success_prob(v, g)
        assert abs(rate - px) < 3 * np.sqrt(px * (1 - px) / n)
    kept = x[r.keep]
    ve = FL.alice_effective_vmod(vx, gx)
    assert abs(kept.var() - ve) < 3 * ve * np.sqrt(2.0 / kept.size)


def test_rejection_filter_is_seeded():
    x = np.linspace(-5, 5, 1000)
    a = FL.alice_rejection_filter(x, x, 0.2, 0.3, seed=9)
    b = FL.alice_rejection_filter(x, x, 0.2, 0.3, seed=9)
    assert np.array_equal(a.keep, b.keep)


def test_custom_acceptance_profile():
    x = np.linspace(-3, 3, 101)
    r = FL.alice_rejection_filter(x, x, 1.0, 1.0, seed=0, acceptance=lambda v, g: np.ones_like(v))
    assert r.rate == 1.0


def test_bob_homodyne_success_and_variance():
    v_b, c = 2.3, 1.1
    pdf = FL.bob_output_pdf_homodyne(v_b, c)
    mass, _ = integrate.quad(pdf, c, np.inf)
    assert np.isclose(2 * mass, 1.0, atol=1e-10)
    m2, _ = integrate.quad(lambda x: x * x * pdf(x), c, np.inf)
    assert np.isclose(2 * m2, FL.bob_output_variance_homodyne(v_b, c), rtol=1e-9)
    assert pdf(0.5 * c) == 0.0
    assert FL.bob_success_prob_homodyne(v_b, 0.0) == 1.0
    assert np.array_equal(FL.bob_filter_homodyne(np.array([-2.0, 0.0, 1.1]), c), [1.0, 0.0, 1.0])


def test_bob_homodyne_monte_carlo():
    rng = np.random.default_rng(5)
    n, v_b, c = 10**6, 1.7, 0.8
    x = rng.normal(0, np.sqrt(v_b), n)
    keep = np.abs(x) >= c
    p = float(FL.bob_success_prob_homodyne(v_b, c))
    assert abs(keep.mean() - p) < 3 * np.sqrt(p * (1 - p) / n)
    m2 = FL.bob_output_variance_homodyne(v_b, c)
    s = x[keep] ** 2
    assert abs(s.mean() - m2) < 3 * s.std() / np.sqrt(s.size)


@pytest.mark.parametrize("vx,vp", [(2.0, 2.0), (2.0, 3.5), (5.1, 1.2)])
def test_bob_heterodyne_success_probability(vx, vp):
    c = 1.3
    sx, sp = (vx + 1) / 2, (vp + 1) / 2
    inside, _ = integrate.dblquad(
        lambda p, x: np.exp(-x * x / (2 * sx) - p * p / (2 * sp)) / (2 * np.pi * np.sqrt(sx * sp)),
        -c, c, lambda x: -np.sqrt(max(c * c - x * x, 0.0)), lambda x: np.sqrt(max(c * c - x * x, 0.0)),
        epsabs=1e-12,
    )
    assert np.isclose(FL.bob_success_prob_heterodyne(vx, vp, c), 1 - inside, atol=1e-9)
    assert FL.bob_success_prob_heterodyne(vx, vp, 0.0) == 1.0


def test_pm_eb_identities_on_grid():
    gs = np.linspace(0.0, 0.5, 20)
    vmods = np.linspace(0.1, 20.0, 20)
    G, VM = np.meshgrid(gs, vmods)
    V = VM + 1.0
    geb = FL.eb_equivalent_gain(G, V)
    assert np.abs(FL.eb_success_prob(geb, V) - FL.alice_success_prob(VM, G)).max() < 1e-12
    assert np.abs(FL.eb_effective_variance(geb, V) - (FL.alice_effective_vmod(VM, G) + 1.0)).max() < 1e-12
    joint = FL.eb_success_prob_joint(geb, geb[::-1], V, V[::-1])
    assert np.abs(joint - FL.alice_success_prob(VM, G) * FL.alice_success_prob(VM[::-1], G[::-1])).max() < 1e-12


@settings(max_examples=50, deadline=None)
@given(vmod=st.floats(0.01, 50), g=st.floats(0, 2))
def test_filter_shrinks_variance_and_probability(vmod, g):
    p = FL.alice_success_prob(vmod, g)
    assert 0 < p <= 1
    assert FL.alice_effective_vmod(vmod, g) <= vmod
