import math

import numpy as np
import pytest

from interlace_lab import core
from interlace_lab.core import GTPattern, HPParams, OmegaPoint, WeylPoint


class TestTypes:
    def test_weyl_point_ordering(self):
        assert WeylPoint([0, 0, 1]).N == 3
        assert not WeylPoint([0, 0, 1]).is_strict()
        assert WeylPoint([0, 1]).is_strict()
        with pytest.raises(ValueError):
            WeylPoint([1, 0])
        with pytest.raises(ValueError):
            WeylPoint([])

    def test_hp_params(self):
        with pytest.raises(ValueError):
            HPParams(0, 0, 0)
        with pytest.raises(ValueError):
            HPParams(-0.5, 0, 2).require_finite_measure()
        HPParams(-0.4, 0, 2).require_finite_measure()
        assert HPParams(1, 2, 3).at_level(5) == HPParams(1, 2, 5)

    def test_omega_point_invariants(self):
        om = OmegaPoint.from_gamma2((2.0, 1.0), (0.5,), 0.3, 1.5)
        assert om.gamma2 == pytest.approx(1.5)
        with pytest.raises(ValueError):
            OmegaPoint((1.0, 2.0))
        with pytest.raises(ValueError):
            OmegaPoint((-1.0,))
        with pytest.raises(ValueError):
            OmegaPoint((2.0,), (), 0.0, 1.0)  # alpha^2 > delta

    def test_gt_pattern(self):
        g = GTPattern([[0.5], [0.0, 1.0]])
        assert g.depth == 2 and g.is_interlacing()
        assert not GTPattern([[1.5], [0.0, 1.0]]).is_interlacing()
        with pytest.raises(ValueError):
            GTPattern([[0.5, 1.0]])

    def test_interlaces(self):
        assert core.interlaces([0.5], [0, 1])
        assert not core.interlaces([1.5], [0, 1])
        with pytest.raises(ValueError):
            core.interlaces([0.5], [0, 1, 2])


class TestCayley:
    @pytest.mark.parametrize("x,theta", [(0.0, 0.0), (1.0, math.pi / 2), (2.5, 2 * math.atan(2.5))])
    def test_examples(self, x, theta):
        assert core.cayley_to_angle(x) == pytest.approx(theta, abs=1e-15)
        assert core.angle_to_cayley(theta) == pytest.approx(x, abs=1e-12)

    def test_value_2_5(self):
        assert core.cayley_to_angle(2.5) == pytest.approx(2.38058, abs=1e-5)


class TestVandermonde:
    @pytest.mark.parametrize("x,val", [([5.0], 1.0), ([0, 1], 1.0), ([0, 1, 3], 6.0)])
    def test_examples(self, x, val):
        assert core.vandermonde(x) == val

    def test_batch_and_log(self):
        x = np.array([[0, 1, 3], [0, 2, 3]], dtype=float)
        np.testing.assert_allclose(core.vandermonde(x), [6.0, 6.0])
        np.testing.assert_allclose(core.log_abs_vandermonde(x), np.log([6.0, 6.0]))

    @pytest.mark.parametrize("N", range(2, 7))
    def test_gradient_matches_finite_differences(self, N):
        rng = np.random.default_rng(N)
        x = np.sort(rng.uniform(-2, 2, N))
        d, g, hd = core.vandermonde_derivatives(x)
        eps = 1e-6
        for i in range(N):
            e = np.zeros(N)
            e[i] = eps
            fd = (core.vandermonde(x + e) - core.vandermonde(x - e)) / (2 * eps)
            assert abs(fd - g[i]) <= 1e-6 * max(abs(g[i]), abs(d))
            e[i] = 1e-4
            fd2 = (core.vandermonde(x + e) - 2 * d + core.vandermonde(x - e)) / 1e-8
            assert abs(fd2 - hd[i]) <= 1e-4 * max(abs(hd[i]), abs(d), 1.0)


class TestConstants:
    @pytest.mark.parametrize("N,s,val", [(1, 0.7, 0.0), (2, 0.0, -2.0), (3, 1.0, -16.0)])
    def test_km_eigenvalue(self, N, s, val):
        assert core.km_eigenvalue(N, s) == pytest.approx(val)

    @pytest.mark.parametrize("N,s,val", [(2, 0.0, -4.0), (1, -1.0, 0.0)])
    def test_dual_constant(self, N, s, val):
        assert core.dual_constant(N, s) == pytest.approx(val)

    def test_recursion_example(self):
        assert core.km_eigenvalue(3, 0) == core.km_eigenvalue(2, 0) + 2 * core.dual_constant(2, 0) == -10

    @pytest.mark.parametrize("s", [-0.4, 0.0, 1.0, 2.7])
    def test_recursion_all_levels(self, s):
        for N in range(1, 51):
            lhs = core.km_eigenvalue(N + 1, s)
            rhs = core.km_eigenvalue(N, s) + N * core.dual_constant(N, s)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


class TestEmbedding:
    def test_zero(self):
        om = core.embed([0.0, 0.0, 0.0])
        assert om.gamma1 == 0 and om.delta == 0 and sum(om.alpha_plus) == 0 and sum(om.alpha_minus) == 0

    def test_example(self):
        om = core.embed([-3.0, 1.0])
        assert om.alpha_plus == (0.5, 0.0)
        assert om.alpha_minus == (1.5, 0.0)
        assert om.gamma1 == pytest.approx(-1.0)
        assert om.delta == pytest.approx(2.5)

    def test_gamma1_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = np.sort(rng.standard_normal(rng.integers(1, 8)) * 3)
            om = core.embed(x)
            assert om.gamma1 == pytest.approx(sum(om.alpha_plus) - sum(om.alpha_minus), abs=1e-12)
            assert om.gamma1 == pytest.approx(x.mean(), abs=1e-12)

    def test_batch_agrees(self):
        x = np.sort(np.random.default_rng(1).standard_normal((5, 4)), axis=1)
        e = core.embed_batch(x)
        for k in range(5):
            om = core.embed(x[k])
            assert e["gamma1"][k] == pytest.approx(om.gamma1)
            assert e["delta"][k] == pytest.approx(om.delta)
            assert e["alpha_plus1"][k] == pytest.approx(om.alpha_plus[0])
            assert e["alpha_minus1"][k] == pytest.approx(om.alpha_minus[0])


class TestCharfunc:
    def test_zero_omega(self):
        np.testing.assert_allclose(core.charfunc(OmegaPoint(), np.linspace(-3, 3, 7)), 1.0)

    def test_gamma1_only(self):
        x = np.linspace(-3, 3, 7)
        f = core.charfunc(OmegaPoint((), (), 1.0, 0.0), x)
        np.testing.assert_allclose(f, np.exp(1j * x))
        np.testing.assert_allclose(np.abs(f), 1.0)

    def test_single_alpha(self):
        f = core.charfunc(OmegaPoint((2.0,), (), 0.0, 4.0), 1.0)
        assert f == pytest.approx(np.exp(-2j) / (1 - 2j))
        assert abs(f) == pytest.approx(1 / math.sqrt(5))

    def test_bounded(self):
        om = OmegaPoint.from_gamma2((1.0, 0.3), (0.7,), 0.2, 0.5)
        x = np.linspace(-20, 20, 401)
        assert np.all(np.abs(core.charfunc(om, x)) <= 1 + 1e-12)
        assert core.charfunc(om, 0.0) == pytest.approx(1.0)


class TestDensities:
    def test_hp_log_density_examples(self):
        assert core.hp_log_density_unnorm([0.0], HPParams(0, 0, 1)) == pytest.approx(0.0)
        assert core.hp_log_density_unnorm([0.0, 1.0], HPParams(0, 0, 2)) == pytest.approx(-2 * math.log(2))

    def test_reflection_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = np.sort(rng.standard_normal(4))
            p = HPParams(0.3, 0.7, 4)
            q = HPParams(0.3, -0.7, 4)
            assert core.hp_log_density_unnorm(x, p) == pytest.approx(core.hp_log_density_unnorm(-x[::-1], q))
            p0 = HPParams(0.3, 0.0, 4)
            assert core.hp_log_density_unnorm(x, p0) == pytest.approx(core.hp_log_density_unnorm(-x[::-1], p0))

    def test_speed_examples(self):
        p = HPParams()
        assert core.speed_density(0.0, 3, HPParams(0.4, 1.2)) == pytest.approx(1.0)
        assert core.speed_density(0.0, 3, HPParams(0.4, 1.2), dual=True) == pytest.approx(1.0)
        assert core.speed_density(1.0, 2, p, dual=True) == pytest.approx(2.0)
        assert core.speed_density(1.0, 1, p) == pytest.approx(0.5)

    def test_log_speed_consistent(self):
        x = np.linspace(-5, 5, 11)
        p = HPParams(0.3, -0.8)
        for dual in (False, True):
            np.testing.assert_allclose(np.exp(core.log_speed_density(x, 2, p, dual)),
                                       core.speed_density(x, 2, p, dual), rtol=1e-12)
