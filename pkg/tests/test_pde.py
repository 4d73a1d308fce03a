import numpy as np
import pytest

from interlace_lab import pde
from interlace_lab.core import HPParams

P = HPParams(0.3, 0.2)
T = 0.25


@pytest.fixture(scope="module")
def grids():
    cfg = pde.GridConfig(h=0.02)
    return pde.solve_density(2, P, False, T, cfg), pde.solve_density(2, P, True, T, cfg)


def test_grid_config_validation():
    with pytest.raises(ValueError):
        pde.GridConfig(h=0)
    with pytest.raises(ValueError):
        pde.GridConfig(A=1.0, h=2.0)
    assert pde.GridConfig(A=8, h=0.01).cells == 1600


def test_generator_coefficients():
    assert pde.generator_coefficients(2, P, False) == pytest.approx((2 - 4 - 0.6, 0.4))
    assert pde.generator_coefficients(2, P, True) == pytest.approx((4.6, -0.4))


def test_density_is_probability(grids):
    g, d = grids
    for grid in grids:
        assert grid.values.min() >= -1e-10 * grid.values.max()  # spectral roundoff only
        for x0 in (-2.0, 0.0, 1.3):
            assert grid.integrate_row(x0, np.ones_like) == pytest.approx(1.0, abs=1e-8)
    assert g.mass_defect < pde.MASS_DEFECT_TOL


def test_cdf_is_monotone(grids):
    g, _ = grids
    a = np.linspace(-5, 5, 41)
    c = g.cdf(0.2, a)
    assert np.all(np.diff(c) >= -1e-12)
    assert c[0] < 0.05 and c[-1] > 0.95


def test_detailed_balance(grids):
    for grid in grids:
        assert pde.detailed_balance_gap(grid) < 1e-8


def test_km_determinant(grids):
    g, _ = grids
    assert pde.km_determinant(g, [-1, 1], [-0.5, 0.7]) > 0
    with pytest.raises(ValueError):
        pde.km_determinant(g, [1, -1], [-0.5, 0.7])
    with pytest.raises(ValueError):
        pde.km_determinant(g, [1], [-0.5, 0.7])


def test_point_outside_grid(grids):
    with pytest.raises(pde.GridError):
        grids[0].density(1e6, 0.0)


def test_mass_defect_raises():
    with pytest.raises(pde.GridError):
        pde.solve_density(2, P, False, 2.0, pde.GridConfig(A=2, h=0.02))
    g = pde.solve_density(2, P, False, 2.0, pde.GridConfig(A=2, h=0.02), check_mass=False)
    assert g.mass_defect > pde.MASS_DEFECT_TOL


def test_solve_density_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        pde.solve_density(2, P, False, 0.0)


def test_siegmund(grids):
    g, d = grids
    res = pde.check_siegmund_pde(2, P, T, primal=g, dual=d)
    assert res.gap < 1e-3
    assert res.details["integrated_gap"] < 1e-3
    assert res.details["lattice_points"] == 100


def test_siegmund_wrapper():
    assert pde.check_siegmund(0.5, -0.5, T, mode="pde", p=P, config=pde.GridConfig(h=0.04)) < 1e-3
    with pytest.raises(ValueError):
        pde.check_siegmund(0.5, -0.5, T, mode="x")


def test_intermediate_intertwining(grids):
    g, d = grids
    assert pde.check_intermediate_intertwining(T, P, primal=g, dual=d).gap < 5e-3


def test_block_kernel(grids):
    g, d = grids
    res = pde.check_block_kernel(T, P, primal=g, dual=d)
    assert res.gap < 1e-2
    assert len(res.details["identity1"]) == 3


def test_block_kernel_eval_finite(grids):
    g, d = grids
    assert np.isfinite(pde.block_kernel_eval((-1.0, 1.0), 0.2, (-0.8, 1.2), 0.3, g, d))


def test_h_transform():
    cfg = pde.GridConfig(h=0.02)
    good = pde.check_h_transform(T, 1, P, cfg)
    bad = pde.check_h_transform(T, 1, P, cfg, constant=good.details["c"] + 1.0)
    assert good.gap < 5e-3
    assert bad.gap > 0.1


def test_refinement_helpers():
    assert pde.is_monotone_decreasing([3, 2, 1])
    assert not pde.is_monotone_decreasing([3, 3, 1])
    out = pde.refinement_study(lambda config: pde.CheckResult(config.h ** 2), hs=(0.04, 0.02))
    assert [h for h, _ in out] == [0.04, 0.02]
    assert out[1][1] == pytest.approx(0.0004)
