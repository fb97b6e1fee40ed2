import math

import pytest

from cvqkd_filter.params import ChannelParams, Detection, FilterSettings, ModulationParams, Quadrature


def test_channel_validation():
    with pytest.raises(ValueError):
        ChannelParams(1.2)
    with pytest.raises(ValueError):
        ChannelParams(0.5, W_x=0.9)
    with pytest.raises(ValueError):
        ChannelParams(0.5, eta=0.0)
    with pytest.raises(ValueError):
        ChannelParams(0.5, xi_x=-0.1)


def test_excess_noise_conversion():
    # Bob sees T * xi_ch on top of the lossy vacuum: (1 - T) (W - 1) = T xi_ch
    ch = ChannelParams.from_excess_noise(0.25, 0.04)
    assert math.isclose((1 - ch.T) * (ch.W_x - 1), ch.T * 0.04)
    assert ChannelParams.from_excess_noise(1.0, 0.1).W == (1.0, 1.0)


def test_xi_d_pair_and_dict():
    ch = ChannelParams(0.5, xi_d=[0.1, 0.2])
    assert ch.xi_d_pair == (0.1, 0.2)
    assert ch.to_dict()["xi_d"] == [0.1, 0.2]
    assert ChannelParams(0.5, xi_d=0.3).xi_d_pair == (0.3, 0.3)


def test_modulation():
    m = ModulationParams(2.0, 3.0)
    assert m.V == (3.0, 4.0)
    assert m.with_vmod(1, 1).beta == m.beta
    with pytest.raises(ValueError):
        ModulationParams(1.0, 1.0, beta=1.0)
    with pytest.raises(ValueError):
        ModulationParams(-1.0, 1.0)


def test_filter_settings():
    f = FilterSettings(0.1, 0.2, 0.0, 8.95)
    assert f.gains == (0.1, 0.2) and f.cutoffs == (0.0, 8.95)
    for bad in (-0.1, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            FilterSettings(g_x=bad)


def test_enums():
    assert Quadrature("p").index == 1
    assert Detection("heterodyne") is Detection.HETERODYNE
