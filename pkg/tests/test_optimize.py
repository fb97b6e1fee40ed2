import csv

import numpy as np
import pytest

from cvqkd_filter.errors import NoPositiveRate
from cvqkd_filter.keyrate import keyrate_after_alice, keyrate_gg02
from cvqkd_filter.optimize import (
    SearchSpec,
    optimize_alice_gains,
    optimize_bob_cutoffs,
    optimize_vmod_gg02,
    write_contour_csv,
)
from cvqkd_filter.params import ChannelParams, ModulationParams
from cvqkd_filter.scenarios import LAB_29KM, LAB_39KM, LAB_6KM

SMALL_MOD = ModulationParams(1.5, 1.5, 0.95)
SMALL_CH = ChannelParams.from_excess_noise(0.5, 0.05, eta=0.8, xi_d=0.02)


def test_spec_validation_and_single_point_axis():
    with pytest.raises(ValueError):
        SearchSpec(resolution=1)
    with pytest.raises(ValueError):
        SearchSpec(bounds=((1.0, 0.0), (0.0, 1.0)))
    s = SearchSpec(bounds=((0.2, 0.2), (0.0, 1.0)), resolution=5)
    assert s.axis(0).tolist() == [0.2]
    assert len(s.axis(1)) == 5


def test_single_point_spec_returns_that_point():
    sc = LAB_29KM
    spec = SearchSpec(bounds=((0.1, 0.1), (0.2, 0.2)))
    res = optimize_alice_gains(sc.mod, sc.ch, sc.detection, spec=spec)
    assert res.params == (0.1, 0.2)
    assert res.key_rate == keyrate_after_alice(sc.mod, sc.ch, sc.detection, 0.1, 0.2).key_rate


@pytest.mark.parametrize("sc", [LAB_29KM, LAB_39KM], ids=lambda s: s.name)
def test_gain_optimum_beats_grid_and_gg02(sc):
    res = optimize_alice_gains(sc.mod, sc.ch, sc.detection)
    assert res.key_rate >= keyrate_gg02(sc.mod, sc.ch, sc.detection).key_rate
    assert res.key_rate >= max(k for _, _, k in res.contour) - 1e-15
    # stationary: small moves do not improve
    for d in ((1e-3, 0), (-1e-3, 0), (0, 1e-3), (0, -1e-3)):
        g = (res.params[0] + d[0], res.params[1] + d[1])
        assert keyrate_after_alice(sc.mod, sc.ch, sc.detection, *g).key_rate <= res.key_rate + 1e-9


def test_short_distance_prefers_no_filter():
    sc = LAB_6KM
    res = optimize_alice_gains(sc.mod, sc.ch, sc.detection)
    assert res.params == (0.0, 0.0)


def test_wider_bounds_never_worse():
    sc = LAB_39KM
    narrow = optimize_alice_gains(sc.mod, sc.ch, sc.detection, spec=SearchSpec(((0.0, 0.1), (0.0, 0.1))))
    wide = optimize_alice_gains(sc.mod, sc.ch, sc.detection, spec=SearchSpec(((0.0, 0.436), (0.0, 0.436))))
    assert wide.key_rate >= narrow.key_rate


def test_threads_do_not_change_result():
    sc = LAB_29KM
    a = optimize_alice_gains(sc.mod, sc.ch, sc.detection, spec=SearchSpec(threads=1))
    b = optimize_alice_gains(sc.mod, sc.ch, sc.detection, spec=SearchSpec(threads=4))
    assert a.params == b.params and a.key_rate == b.key_rate and a.contour == b.contour


def test_vmod_optimum_is_stationary():
    ch = LAB_29KM.ch
    (vx, vp), rep = optimize_vmod_gg02(ch, "homodyne", 0.92)
    for d in ((0.05, 0), (-0.05, 0), (0, 0.05), (0, -0.05)):
        k = keyrate_gg02(ModulationParams(vx + d[0], vp + d[1], 0.92), ch, "homodyne").key_rate
        assert k <= rep.key_rate + 1e-12


def test_vmod_raises_when_never_positive():
    ch = ChannelParams.from_excess_noise(0.01, 0.2, eta=0.6, xi_d=0.1)
    with pytest.raises(NoPositiveRate) as e:
        optimize_vmod_gg02(ch, "homodyne", 0.9, SearchSpec(((0.5, 10), (0.5, 10)), resolution=4, refinements=1))
    assert e.value.result[1].key_rate <= 0


def test_bob_cutoffs_not_worse_than_zero_cutoff():
    spec = SearchSpec(((0.0, 2.0), (0.0, 2.0)), resolution=3, refinements=1)
    res = optimize_bob_cutoffs(SMALL_MOD, SMALL_CH, "homodyne", (0.0, 0.0), spec=spec)
    base = keyrate_gg02(SMALL_MOD, SMALL_CH, "homodyne").key_rate
    assert res.key_rate >= base - 1e-3
    assert len(res.contour) == 9


def test_contour_csv(tmp_path):
    p = tmp_path / "c.csv"
    write_contour_csv(p, [(0.0, 0.1, 0.5), (np.float64(0.2), 0.3, -1e-3)])
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["param1", "param2", "key_rate"]
    assert rows[2] == ["0.2", "0.3", "-0.001"]
