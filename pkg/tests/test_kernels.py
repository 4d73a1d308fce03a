"""Compiled and pure kernels must agree on identical inputs."""

import numpy as np
import pytest

from interlace_lab import kernels

py = kernels.get_backend("python")
try:
    cy = kernels.get_backend("cython")
except ImportError:  # pragma: no cover
    cy = None

needs_cy = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def test_backend_selection():
    assert kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@needs_cy
@pytest.mark.parametrize("kind,prm", [
    (kernels.KIND_HP, [-4.6, 0.4]),
    (kernels.KIND_DBM, [0.0, 0.0]),
    (kernels.KIND_OU, [1.5, 0.0]),
    (kernels.KIND_CIRCLE, [-13.2, 0.8]),
    (kernels.KIND_LINEAR1D, [-2.0, 0.3]),
])
def test_euler_try_parity(kind, prm):
    rng = np.random.default_rng(kind)
    N = 1 if kind == kernels.KIND_LINEAR1D else 3
    x = np.ascontiguousarray(np.sort(rng.uniform(-1.2, 1.2, (200, N)), axis=1))
    dw = np.ascontiguousarray(0.05 * rng.standard_normal(x.shape))
    prm = np.array(prm)
    a = py.euler_try(x, dw, 1e-2, kind, prm, 4.0, 0.0, 0.1)
    b = cy.euler_try(x, dw, 1e-2, kind, prm, 4.0, 0.0, 0.1)
    np.testing.assert_allclose(np.asarray(a[0]), np.asarray(b[0]), rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(np.asarray(a[1], dtype=bool), np.asarray(b[1], dtype=bool))
    np.testing.assert_allclose(np.asarray(a[2]), np.asarray(b[2]), rtol=1e-12)
    if N > 1:
        assert not np.asarray(a[1], dtype=bool).all()  # some rejections were exercised


def _pattern(rng, P, depth):
    from interlace_lab import links, multilevel

    bottom = np.sort(rng.standard_normal((P, depth)), axis=1)
    return multilevel.flatten_levels(links.gt_uniform_sample(bottom, rng))


@needs_cy
@pytest.mark.parametrize("mirror", [0, 1])
def test_reflected_step_parity(mirror):
    rng = np.random.default_rng(10 + mirror)
    depth = 3
    x = _pattern(rng, 300, depth)
    dw = np.ascontiguousarray(0.3 * rng.standard_normal(x.shape))
    lin = np.array([0.0, -2.0, -4.0])
    const = np.array([0.1, -0.2, 0.3])  # distinct per level on purpose
    a = py.reflected_step(x, dw, 1e-2, depth, lin, const, 1e-12, mirror)
    b = cy.reflected_step(x, dw, 1e-2, depth, lin, const, 1e-12, mirror)
    np.testing.assert_allclose(np.asarray(a[0]), np.asarray(b[0]), rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(np.asarray(a[1], dtype=bool), np.asarray(b[1], dtype=bool))


def test_reflected_step_mirror_vs_project():
    x = np.array([[0.0, -1.0, 1.0]])
    dw = np.array([[0.0, 0.0, 0.0]])
    lin = np.zeros(2)
    const = np.array([0.0, 150.0])  # pushes level 2 past its barrier
    new_p, _ = py.reflected_step(x, dw, 1e-2, 2, lin, const, 1e-12, 0)
    new_m, _ = py.reflected_step(x, dw, 1e-2, 2, lin, const, 1e-12, 1)
    # level 2 left particle sits in (-inf, 0]: it would move to 0.5
    assert new_p[0, 1] == 0.0
    assert new_m[0, 1] == pytest.approx(-0.5)


@needs_cy
@pytest.mark.parametrize("depth", [1, 3])
def test_pushblock_parity(depth):
    rng = np.random.default_rng(depth)
    levels = {1: [[40]], 3: [[40], [39, 41], [38, 40, 42]]}[depth]
    start = np.concatenate([np.asarray(l) for l in levels]).astype(np.int64)
    exps = rng.standard_exponential(500)
    unifs = rng.uniform(size=500)
    prm = np.array([0.5, 0.5, 0.5, 0.5])
    sa, sb = start.copy(), start.copy()
    ra = py.pushblock_run(sa, depth, prm, 0.0, 1e-3, exps, unifs)
    rb = cy.pushblock_run(sb, depth, prm, 0.0, 1e-3, exps, unifs)
    np.testing.assert_array_equal(sa, sb)
    assert ra[1] == rb[1] and ra[2] == rb[2]
    assert ra[0] == pytest.approx(rb[0], rel=1e-12)


def test_pure_env_switch():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-c", "from interlace_lab import kernels; print(kernels.BACKEND)"],
                         env={**__import__("os").environ, "INTERLACE_LAB_PURE": "1"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
