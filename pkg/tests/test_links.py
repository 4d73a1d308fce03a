import numpy as np
import pytest
from scipy import stats

from interlace_lab import links
from interlace_lab.core import HPParams, interlaces


def test_link_density_example():
    assert links.link_density([0, 1], [0.5]) == pytest.approx(1.0)
    assert links.link_density([0, 1], [1.5]) == 0.0
    assert links.link_density([0, 1, 3], [0.5, 2]) == pytest.approx(2 * 1.5 / 6)
    with pytest.raises(ValueError):
        links.link_density([0, 0, 1], [0, 0.5])


def test_link_density_integrates_to_one():
    from scipy import integrate

    x = [-1.0, 0.5, 2.0]
    val, _ = integrate.dblquad(lambda b, a: links.link_density(x, [a, b]), -1, 0.5, 0.5, 2.0)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_link_sample_interlaces_and_is_uniform_for_two_points():
    rng = np.random.default_rng(0)
    y = links.link_sample([0.0, 1.0], rng, size=20000)
    assert y.shape == (20000, 1)
    assert stats.kstest(y[:, 0], "uniform").statistic < 0.015


def test_link_sample_batch_interlacing():
    rng = np.random.default_rng(1)
    x = np.sort(rng.standard_normal((500, 4)), axis=1)
    y = links.link_sample(x, rng)
    assert all(interlaces(y[k], x[k]) for k in range(500))


def test_link_sample_with_ties():
    rng = np.random.default_rng(2)
    y = links.link_sample([1.0, 1.0, 2.0], rng, size=100)
    np.testing.assert_allclose(y[:, 0], 1.0)


def test_gt_uniform_sample():
    rng = np.random.default_rng(3)
    g = links.gt_uniform_sample([0.0, 1.0, 3.0], rng)
    assert g.depth == 3 and g.is_interlacing()
    lv = links.gt_uniform_sample([0.0, 1.0, 3.0], rng, size=10)
    assert [a.shape for a in lv] == [(10, 1), (10, 2), (10, 3)]


def test_h_identity_gap():
    for s in (HPParams(0, 0), HPParams(0.6, -0.4)):
        assert links.h_identity_gap([-1.0, 0.5], s) < 1e-8
        assert links.h_identity_gap([-1.0, 0.5, 2.0], s) < 1e-7


def test_boundary_link_sample_shape():
    from interlace_lab.core import OmegaPoint

    rng = np.random.default_rng(4)
    y = links.boundary_link_sample(OmegaPoint((), (), 0.0, 1.0), 3, rng, size=5)
    assert y.shape == (5, 3)
    assert np.all(np.diff(y, axis=1) >= 0)


def test_hp_sample_cue_cayley_n1_is_cauchy():
    rng = np.random.default_rng(5)
    x = links.hp_sample(HPParams(0, 0, 1), "cue-cayley", rng, size=20000)
    assert stats.kstest(x[:, 0], "cauchy").statistic < 0.015


def test_hp_sample_mh_matches_exact():
    rng = np.random.default_rng(6)
    p = HPParams(0, 0, 2)
    a = links.hp_sample(p, "cue-cayley", rng, size=4000)
    b = links.hp_sample(p, "mh", rng, size=4000, mh_config=links.MHConfig(burn_in=500, chains=400))
    for k in range(2):
        assert stats.ks_2samp(np.arctan(a[:, k]), np.arctan(b[:, k])).statistic < 0.06


def test_hp_sample_mh_n1_density():
    # N=1, s real: density proportional to (1+x^2)^{-1-s}; for s=1/2 atan(x) has density cos(theta)/2
    rng = np.random.default_rng(7)
    x = links.hp_sample(HPParams(0.5, 0, 1), "mh", rng, size=4000,
                        mh_config=links.MHConfig(burn_in=500, chains=400))
    th = np.arctan(x[:, 0])
    cdf = lambda t: (np.sin(t) + 1) / 2
    assert stats.kstest(th, cdf).statistic < 0.05


def test_hp_sample_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        links.hp_sample(HPParams(1, 0, 2), "cue-cayley", rng)
    with pytest.raises(ValueError):
        links.hp_sample(HPParams(0, 0, 2), "nope", rng)
    with pytest.raises(ValueError):
        links.hp_sample(HPParams(-0.6, 0, 2), "mh", rng)
