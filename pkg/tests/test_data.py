import math
import warnings

import numpy as np
import pytest

from cvqkd_filter import data as D
from cvqkd_filter import filters as FL
from cvqkd_filter import gaussian as G
from cvqkd_filter.errors import CalibrationError, InsufficientSamples
from cvqkd_filter.keyrate import keyrate_gg02
from cvqkd_filter.params import ChannelParams, ModulationParams, Quadrature
from cvqkd_filter.scenarios import LAB_29KM

MOD = ModulationParams(4.0, 5.0, 0.92)
CH = ChannelParams(0.4, 1.05, 1.08, 0.1, 0.2, eta=0.7, xi_d=0.05)


def _var_se(v, n):
    return v * math.sqrt(2.0 / n)


@pytest.mark.parametrize("det", ["homodyne", "heterodyne"])
def test_simulated_moments_match_model(det):
    n = 200_000
    b = D.simulate_channel(MOD, CH, det, n, seed=1)
    for q in Quadrature:
        a, o = b.pairs(q)
        var_b = (G.bob_variance_homodyne if det == "homodyne" else G.bob_variance_heterodyne)(MOD, CH, q)
        assert abs(o.var() - var_b) < 4 * _var_se(var_b, a.size)
        assert abs(a.var() - MOD.vmod[q.index]) < 4 * _var_se(MOD.vmod[q.index], a.size)
    if det == "homodyne":
        assert set(np.unique(b.quad)) == {"x", "p"}
        assert np.all(np.isnan(b.outcome_x) != np.isnan(b.outcome_p))
    else:
        assert np.all(b.quad == D.BOTH)


@pytest.mark.parametrize("det", ["homodyne", "heterodyne"])
def test_estimate_channel_recovers_parameters(det):
    b = D.simulate_channel(MOD, CH, det, 400_000, seed=2)
    mod, ch = D.estimate_channel(b, (CH.xi_x, CH.xi_p), CH.eta, CH.xi_d, 0.92)
    assert abs(ch.T - CH.T) < 0.01
    assert abs(mod.vmod_x - MOD.vmod_x) < 0.05
    assert abs(ch.W_x - CH.W_x) < 0.1


def test_shot_noise_calibration_round_trip():
    raw = D.simulate_channel(MOD, CH, "homodyne", 5000, seed=3, v_sn=4.0, v_dn=0.04)
    snu = D.simulate_channel(MOD, CH, "homodyne", 5000, seed=3)
    cal = D.calibrate_shot_noise(raw, 4.0, 0.04)
    assert np.allclose(cal.x_a, snu.x_a, atol=1e-12)
    assert np.allclose(cal.outcome_x, snu.outcome_x, atol=1e-12, equal_nan=True)
    assert cal.v_sn == 1.0 and cal.v_dn == 0.0
    no_dark = D.calibrate_shot_noise(raw, 4.0, 0.04, subtract_dark=False)
    assert np.allclose(no_dark.x_a * 2.0, snu.x_a * math.sqrt(3.96), atol=1e-12)
    with pytest.raises(CalibrationError):
        D.calibrate_shot_noise(raw, 0.01, 0.04)


def test_gain_and_trusted_noise_back_to_back():
    ch = ChannelParams(1.0, 1.0, 1.0, 0.28, 0.40)
    mod = ModulationParams(12.0, 13.0, 0.92)
    n = 400_000
    b = D.simulate_channel(mod, ch, "homodyne", n, seed=11, gain=(8.33, 19.59))
    g = D.estimate_gain(b)
    assert np.allclose(g, (8.33, 19.59), rtol=5e-3)
    xi, vm, clamped = D.estimate_trusted_noise(b, g)
    for i, ref in enumerate((0.28, 0.40)):
        s = 1.0 + ref
        se = math.sqrt((2 * s * s + 4 * mod.vmod[i] * s) / (n / 2))
        assert abs(xi[i] - ref) < 4 * se
        assert abs(vm[i] - mod.vmod[i]) < 4 * _var_se(mod.vmod[i], n / 2)
    assert clamped == ()
    rep = D.calibration_report(b)
    assert set(rep.to_dict()) == {"g_e", "xi_snu", "vmod_snu", "fit", "clamped"}


def test_negative_trusted_noise_is_clamped_with_warning():
    a = np.random.default_rng(0).normal(size=4000)
    quad = np.where(np.arange(4000) % 2 == 0, "x", "p")
    ox = np.where(quad == "x", 0.99 * a, np.nan)
    op = np.where(quad == "p", 0.99 * a, np.nan)
    b = D.SampleBatch(a, a, quad, ox, op)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        xi, _, clamped = D.estimate_trusted_noise(b, (1.0, 1.0))
    assert xi == (0.0, 0.0) and clamped == ("x", "p")
    assert any("clamped" in str(x.message) for x in w)


def test_insufficient_and_degenerate_samples():
    b = D.simulate_channel(MOD, CH, "homodyne", 100, seed=4)
    with pytest.raises(InsufficientSamples):
        D.estimate_gain(b)
    with pytest.raises(InsufficientSamples):
        D.fit_bivariate(b, "x")
    z = np.zeros(3000)
    quad = np.where(np.arange(3000) % 2 == 0, "x", "p")
    flat = D.SampleBatch(z, z, quad, np.where(quad == "x", 1.0, np.nan), np.where(quad == "p", 1.0, np.nan))
    with pytest.raises(CalibrationError):
        D.estimate_gain(flat)
    with pytest.raises(InsufficientSamples):
        D.SampleBatch(np.array([]), np.array([]), np.array([]), np.array([]), np.array([]))
    with pytest.raises(ValueError):
        D.SampleBatch(np.ones(2), np.ones(3), np.array(["x", "p"]), np.ones(2), np.ones(2))


def test_bivariate_fit_interval_covers_truth():
    b = D.simulate_channel(MOD, CH, "homodyne", 200_000, seed=5)
    f = D.fit_bivariate(b, "x")
    sa_ref = math.sqrt(MOD.vmod_x)
    sb_ref = math.sqrt(G.bob_variance_homodyne(MOD, CH, "x"))
    rho_ref = math.sqrt(CH.eta * CH.T) * MOD.vmod_x / (sa_ref * sb_ref)
    assert f.ci95["sigma_a"][0] < sa_ref < f.ci95["sigma_a"][1]
    assert f.ci95["sigma_b"][0] < sb_ref < f.ci95["sigma_b"][1]
    assert f.ci95["rho"][0] < rho_ref < f.ci95["rho"][1]


def test_empirical_filters_follow_closed_forms():
    n = 400_000
    b = D.simulate_channel(MOD, CH, "homodyne", n, seed=6)
    kept, res = D.apply_alice_filter(b, 0.2, 0.3, seed=7)
    p = FL.alice_success_prob(MOD.vmod_x, 0.2) * FL.alice_success_prob(MOD.vmod_p, 0.3)
    assert abs(res.rate - p) < 4 * math.sqrt(p * (1 - p) / n)
    assert kept.n == int(res.keep.sum())
    c = 1.0
    bob = D.apply_bob_filter(b, c, 0.0)
    nx = int((b.quad == "x").sum())
    px = float(FL.bob_success_prob_homodyne(G.bob_variance_homodyne(MOD, CH, "x"), c))
    got = (bob.quad == "x").sum() / nx
    assert abs(got - px) < 4 * math.sqrt(px * (1 - px) / nx)
    assert (bob.quad == "p").sum() == (b.quad == "p").sum()


def test_heterodyne_radial_filter():
    b = D.simulate_channel(MOD, CH, "heterodyne", 200_000, seed=8)
    kept = D.apply_bob_filter(b, c_rad=1.5)
    # recorded variance per quadrature is (v_b + 1)/2; the closed form takes state variances
    vbx = 2 * G.bob_variance_heterodyne(MOD, CH, "x") - 1
    vbp = 2 * G.bob_variance_heterodyne(MOD, CH, "p") - 1
    p = FL.bob_success_prob_heterodyne(vbx, vbp, 1.5)
    assert abs(kept.n / b.n - p) < 4 * math.sqrt(p * (1 - p) / b.n)


def test_csv_round_trip(tmp_path):
    for det in ("homodyne", "heterodyne"):
        b = D.simulate_channel(MOD, CH, det, 500, seed=9, v_sn=2.0)
        p = tmp_path / f"{det}.csv"
        D.write_batch(p, b)
        assert D.sidecar_path(p).exists()
        r = D.read_batch(p)
        for col in ("x_a", "p_a", "outcome_x", "outcome_p"):
            assert np.array_equal(getattr(r, col), getattr(b, col), equal_nan=True)
        assert np.array_equal(r.quad, b.quad)
        assert r.metadata() == b.metadata()


def test_read_batch_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        D.read_batch(p)
    p.write_text(",".join(D.COLUMNS) + "\n")
    with pytest.raises(InsufficientSamples):
        D.read_batch(p)


def test_simulation_is_seeded():
    a = D.simulate_channel(MOD, CH, "homodyne", 1000, seed=10)
    b = D.simulate_channel(MOD, CH, "homodyne", 1000, seed=10)
    assert D.batch_to_csv(a) == D.batch_to_csv(b)


def test_bootstrap_independent_of_threads():
    sc = LAB_29KM
    b = D.simulate_channel(sc.mod, sc.ch, "homodyne", 20_000, seed=12)
    ev = lambda m, c, d, s, beta: keyrate_gg02(m, c, d, beta).key_rate
    kw = dict(resamples=8, seed=13, xi=(sc.ch.xi_x, sc.ch.xi_p), evaluate=ev)
    m1, s1, r1 = D.bootstrap_keyrate(b, beta=0.92, threads=1, **kw)
    m3, s3, r3 = D.bootstrap_keyrate(b, beta=0.92, threads=3, **kw)
    assert np.array_equal(r1, r3) and m1 == m3 and s1 == s3
    assert s1 > 0
    with pytest.raises(ValueError):
        D.bootstrap_keyrate(b, resamples=1, evaluate=ev)
