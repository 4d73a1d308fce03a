import numpy as np
import pytest

from interlace_lab import sde
from interlace_lab.core import HPParams, OmegaPoint
from interlace_lab.sde import SDESystemSpec


def test_spec_validation():
    with pytest.raises(ValueError):
        SDESystemSpec("nope")
    with pytest.raises(ValueError):
        SDESystemSpec("ou", c=0.0)
    with pytest.raises(ValueError):
        SDESystemSpec("hp", dt_base=0.0)
    with pytest.raises(ValueError):
        SDESystemSpec("circle", circle_mode="x")


def test_simulate_records_times_and_order():
    rng = np.random.default_rng(0)
    spec = SDESystemSpec("hp", HPParams(0.3, 0.2, 3), dt_base=1e-3)
    rec = sde.simulate(spec, [-1.0, 0.5, 2.0], 0.1, rng, record_times=(0.05,))
    np.testing.assert_allclose(rec.times, [0.0, 0.05, 0.1])
    assert rec.states.shape == (3, 1, 3)
    assert np.all(np.diff(rec.states, axis=-1) > 0)
    assert rec.dt_effective <= 1e-3


def test_simulate_rejects_ties_and_bad_T():
    rng = np.random.default_rng(0)
    spec = SDESystemSpec("dbm", HPParams(N=2))
    with pytest.raises(ValueError):
        sde.simulate(spec, [0.0, 0.0], 0.1, rng)
    with pytest.raises(ValueError):
        sde.simulate(spec, [0.0, 1.0], 0.0, rng)


def test_dbm_centre_of_mass_is_brownian():
    # interaction cancels in the sum, so sum x_i(t) - sum x_i(0) ~ N(0, N t)
    rng = np.random.default_rng(1)
    N, T, P = 3, 0.2, 4000
    rec = sde.simulate(SDESystemSpec("dbm", HPParams(N=N), dt_base=2e-3), np.tile([-1.0, 0.0, 1.0], (P, 1)), T, rng)
    s = rec.final.sum(axis=1)
    assert abs(s.mean()) < 4 * np.sqrt(N * T / P)
    assert s.var() == pytest.approx(N * T, rel=0.08)


def test_ou_mean_decay():
    rng = np.random.default_rng(2)
    c, T, P = 1.0, 0.3, 4000
    x0 = np.tile([1.0, 2.0, 3.0], (P, 1))
    rec = sde.simulate(SDESystemSpec("ou", HPParams(N=3), c=c, dt_base=2e-3), x0, T, rng)
    m = rec.final.sum(axis=1).mean()
    sd = np.sqrt(3 * (1 - np.exp(-2 * c * T)) / (2 * c) / P)
    assert abs(m - 6 * np.exp(-c * T)) < 4 * sd


def test_hp_1d_mean_matches_linear_ode():
    # dX = (b1 X + b0) dt + noise, so E X(t) solves the linear ODE
    rng = np.random.default_rng(3)
    p = HPParams(0.5, 0.2, 1)
    spec = SDESystemSpec("hp-1d", p, level=2, dt_base=1e-3)
    b1, b0 = 2 - 4 - 1.0, 0.4
    T, P = 0.2, 20000
    rec = sde.simulate(spec, np.full((P, 1), 0.5), T, rng)
    exact = (0.5 + b0 / b1) * np.exp(b1 * T) - b0 / b1
    x = rec.final[:, 0]
    assert abs(x.mean() - exact) < 4 * x.std() / np.sqrt(P)


def test_circle_stays_inside():
    rng = np.random.default_rng(4)
    spec = SDESystemSpec("circle", HPParams(0, 0, 3), dt_base=1e-3)
    rec = sde.simulate(spec, np.tile([-1.0, 0.0, 1.0], (200, 1)), 0.2, rng)
    assert np.all(np.abs(rec.final) < np.pi)
    with pytest.raises(ValueError):
        sde.simulate(spec, [-4.0, 0.0, 1.0], 0.1, rng)


def test_circle_pushforward_returns_angles():
    rng = np.random.default_rng(5)
    spec = SDESystemSpec("circle", HPParams(0, 0, 2), circle_mode="pushforward")
    rec = sde.simulate(spec, [-0.5, 0.5], 0.05, rng)
    assert np.all(np.abs(rec.states) < np.pi)
    np.testing.assert_allclose(rec.states[0, 0], [-0.5, 0.5])


def test_step_halving_exhausted():
    rng = np.random.default_rng(0)
    spec = SDESystemSpec("hp", HPParams(N=2), dt_base=1.0, max_halvings=0, bound_mult=1e-6)
    with pytest.raises(sde.StepHalvingExhausted):
        sde.simulate(spec, [0.0, 1.0], 1.0, rng)


def test_diffraction_separates_ties():
    rng = np.random.default_rng(6)
    spec = SDESystemSpec("hp", HPParams(N=3))
    x = sde.diffraction_step(spec, np.tile([0.0, 0.0, 0.0], (50, 1)), 1e-8, rng)
    assert np.all(np.diff(x, axis=1) > 0)
    assert np.max(np.abs(x)) < 1e-2


def test_degenerate_start():
    rng = np.random.default_rng(7)
    spec = SDESystemSpec("hp", HPParams(N=3), dt_base=1e-3)
    rec = sde.hp_start_degenerate(spec, np.zeros((20, 3)), 0.05, rng, record_times=(0.02,))
    assert rec.times[0] == 0.0 and rec.times[-1] == pytest.approx(0.05)
    assert 0.02 in np.round(rec.times, 12)
    np.testing.assert_allclose(rec.states[0], 0.0)
    assert np.all(np.diff(rec.final, axis=1) > 0)
    with pytest.raises(ValueError):
        sde.hp_start_degenerate(spec, np.zeros(3), 0.05, rng, dt_init=1.0)


def test_boundary_flows():
    om = OmegaPoint((1.0,), (), 0.5, 2.0)
    d = sde.dbm_boundary_flow(om, 0.25)
    assert d.delta == pytest.approx(2.25) and d.alpha_plus == (1.0,)
    o = sde.ou_boundary_flow(om, 1.0, 0.5)
    e = np.exp(-0.5)
    assert o.alpha_plus[0] == pytest.approx(e)
    assert o.gamma1 == pytest.approx(0.5 * e)
    assert o.delta == pytest.approx((1 - e * e) + 2 * e * e)
    assert sde.ou_boundary_flow(om, 60.0, 0.5).delta == pytest.approx(1.0)
    with pytest.raises(ValueError):
        sde.dbm_boundary_flow(om, -1)


@pytest.mark.parametrize("dual", [False, True])
def test_generator_on_polynomials(dual):
    p = HPParams(0.4, -0.3)
    x = np.linspace(-2, 2, 9)
    n = 3
    b = (2 * n + 0.8) * x + 0.6 if dual else (2 - 2 * n - 0.8) * x - 0.6
    got = sde.generator_apply_1d(n, p, dual, lambda z: z, x)
    np.testing.assert_allclose(got, b, atol=1e-4)  # central-difference roundoff ~ eps/h^2
    got2 = sde.generator_apply_1d(n, p, dual, lambda z: z * z, x, fprime=lambda z: 2 * z, fsecond=lambda z: 2 + 0 * z)
    np.testing.assert_allclose(got2, 2 * (x * x + 1) + 2 * x * b, atol=1e-12)


def test_inverse_dual_speed_derivatives():
    p = HPParams(0.7, 0.4)
    f, fp, fpp = sde.inverse_dual_speed(2, p)
    x = np.linspace(-3, 3, 13)
    h = 1e-5
    np.testing.assert_allclose(fp(x), (f(x + h) - f(x - h)) / (2 * h), rtol=1e-6)
    np.testing.assert_allclose(fpp(x), (fp(x + h) - fp(x - h)) / (2 * h), rtol=1e-6)


@pytest.mark.parametrize("N", [1, 2, 3, 5, 8])
@pytest.mark.parametrize("s", [HPParams(0, 0), HPParams(0.7, -1.1), HPParams(-0.3, 0.5)])
def test_eigenfunction_residual(N, s):
    rng = np.random.default_rng(N)
    for _ in range(10):
        x = np.sort(rng.standard_normal(N) * 2)
        if N > 1 and np.min(np.diff(x)) < 0.05:
            continue
        assert sde.eigenfunction_check(N, s, x) < 1e-9
