import numpy as np
import pytest
from scipy import integrate

from cvqkd_filter import gaussian as G
from cvqkd_filter import mutual_info as MI
from cvqkd_filter.errors import DegenerateCorrelation, GridTooCoarse, MemoryBudgetExceeded
from cvqkd_filter.params import Detection, Quadrature
from cvqkd_filter.scenarios import HET_8DB, HET_15DB, LAB_15KM, LAB_29KM, LAB_39KM, LAB_6KM, HET_19DB, HOM_10DB, HOM_23DB

HOMODYNE_SETS = [LAB_6KM, LAB_15KM, LAB_29KM, LAB_39KM, HOM_10DB, HOM_23DB]
HETERODYNE_SETS = [HET_8DB, HET_15DB, HET_19DB]


def _continuous_mi_after_notch(sa, sb, rho, c):
    """I(A;B | |B| >= c) for a bivariate normal, by 1-D quadrature.

    Given B the conditional variance of A does not depend on b, so only the
    entropy of A's marginal on the kept region needs integrating.
    """
    var_cond = sa * sa * (1 - rho * rho)
    pb = lambda b: np.exp(-b * b / (2 * sb * sb)) / np.sqrt(2 * np.pi * sb * sb)
    keep, _ = integrate.quad(pb, c, np.inf)
    keep *= 2
    mean_slope = rho * sa / sb

    def pa(a):
        f = lambda b: pb(b) * np.exp(-(a - mean_slope * b) ** 2 / (2 * var_cond)) / np.sqrt(2 * np.pi * var_cond)
        lo, _ = integrate.quad(f, -np.inf, -c)
        hi, _ = integrate.quad(f, c, np.inf)
        return (lo + hi) / keep

    lim = 10 * sa
    h_a, _ = integrate.quad(lambda a: -pa(a) * np.log2(max(pa(a), 1e-300)), -lim, lim, limit=200)
    return h_a - 0.5 * np.log2(2 * np.pi * np.e * var_cond)


def test_bivariate_pdf_normalised_and_degenerate():
    m, _ = integrate.dblquad(lambda y, x: MI.bivariate_pdf(x, y, 1.3, 0.7, 0.6), -12, 12, -8, 8)
    assert np.isclose(m, 1.0, atol=1e-8)
    with pytest.raises(DegenerateCorrelation):
        MI.bivariate_pdf(0.0, 0.0, 1.0, 1.0, 1.0)


@pytest.mark.parametrize("sc", HOMODYNE_SETS + HETERODYNE_SETS, ids=lambda s: s.name)
def test_classical_moments_reproduce_gaussian_mi(sc):
    for q in Quadrature:
        _, _, rho = MI.classical_moments(sc.mod, sc.ch, sc.detection, q)
        assert np.isclose(-0.5 * np.log2(1 - rho * rho), G.gaussian_mutual_info(sc.mod, sc.ch, sc.detection, q),
                          atol=1e-12)


@pytest.mark.parametrize("sc", HOMODYNE_SETS, ids=lambda s: s.name)
def test_homodyne_discretisation_matches_exact(sc):
    for q in Quadrature:
        exact = G.gaussian_mutual_info(sc.mod, sc.ch, Detection.HOMODYNE, q)
        approx = MI.mi_after_bob_homodyne(sc.mod, sc.ch, 0.0, MI.GridSpec.homodyne(0.1), q, check=False)
        assert abs(exact - approx) < MI.HOMODYNE_TOL


@pytest.mark.parametrize("sc", HETERODYNE_SETS, ids=lambda s: s.name)
def test_heterodyne_discretisation_matches_exact(sc):
    exact = G.gaussian_mutual_info(sc.mod, sc.ch, Detection.HETERODYNE)
    approx = MI.mi_after_bob_heterodyne(sc.mod, sc.ch, 0.0, MI.GridSpec.heterodyne(0.25), check=False)
    assert abs(exact - approx) < MI.HETERODYNE_TOL


@pytest.mark.parametrize("c", [0.5, 1.5, 3.0])
def test_homodyne_notch_against_continuous_oracle(c):
    sc = LAB_29KM
    sa, sb, rho = MI.classical_moments(sc.mod, sc.ch, Detection.HOMODYNE, Quadrature.X)
    ref = _continuous_mi_after_notch(sa, sb, rho, c)
    got = MI.mi_after_bob_homodyne(sc.mod, sc.ch, c, MI.GridSpec.homodyne(0.1), Quadrature.X)
    assert abs(got - ref) < MI.HOMODYNE_TOL


def test_bob_bins_align_with_notch():
    pts = MI.GridSpec(0.1).bob_points(1.0, 0.73)
    assert np.isclose(np.abs(pts).min(), 0.73 + 0.05)
    assert np.allclose(np.diff(pts[pts > 0]), 0.1)


def test_heterodyne_dense_equals_factorised():
    sc = HET_8DB
    grid = MI.GridSpec(0.5, 8.0, 6.0)
    a = MI.mi_after_bob_heterodyne(sc.mod, sc.ch, 1.0, grid, check=False)
    b = MI.mi_after_bob_heterodyne(sc.mod, sc.ch, 1.0, grid, check=False, dense=True)
    assert abs(a - b) < 1e-10


def test_dense_budget_guard():
    sc = HET_8DB
    with pytest.raises(MemoryBudgetExceeded):
        MI.mi_after_bob_heterodyne(sc.mod, sc.ch, 1.0, check=False, dense=True, budget=1024)


def test_coarse_grid_rejected():
    with pytest.raises(GridTooCoarse):
        MI.mi_after_bob_homodyne(LAB_6KM.mod, LAB_6KM.ch, 1.0, MI.GridSpec(4.0))


def test_mi_from_table_independent_is_zero():
    t = np.outer([0.2, 0.3, 0.5], [0.6, 0.4])
    assert abs(MI.mi_from_table(t)) < 1e-12
    assert np.isclose(MI.mi_from_table(np.eye(4)), 2.0)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        MI.GridSpec(0.0)
