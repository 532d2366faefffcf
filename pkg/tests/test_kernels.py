import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import integrate

from dampwave.kernels import _pure

from conftest import BACKENDS


def _padded_random(n, seed):
    rng = np.random.default_rng(seed)
    a = np.zeros((2, n + 2, n + 2))
    a[:, 1:-1, 1:-1] = rng.standard_normal((2, n, n))
    return a


@pytest.mark.skipif("ext" not in BACKENDS, reason="compiled kernels not built")
class TestBackendsAgree:
    def test_leapfrog_step(self):
        n = 40
        up, uc = _padded_random(n, 1), _padded_random(n, 2)
        V = np.zeros((n + 2, n + 2))
        V[1:-1, 1:-1] = np.random.default_rng(3).uniform(0, 3, (n, n))
        dt = 0.02
        inv = 1.0 / (1.0 + 0.5 * dt * V)
        outs = {}
        for name, mod in BACKENDS.items():
            un = np.zeros_like(up)
            v = _padded_random(n, 4)
            mom = mod.leapfrog_step(up, uc, un, V, inv, v, 0.36, 0.64, 0.1, dt, 3, 35, 5, 40)
            outs[name] = (un, v, np.array(mom))
        np.testing.assert_allclose(outs["ext"][0], outs["pure"][0], rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(outs["ext"][1], outs["pure"][1], rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(outs["ext"][2], outs["pure"][2], rtol=1e-11)

    def test_elastic_apply(self):
        n = 30
        u = _padded_random(n, 5)
        res = {}
        for name, mod in BACKENDS.items():
            out = np.zeros_like(u)
            mod.elastic_apply(u, out, 0.25, 0.75, 0.2, 1, n + 1, 1, n + 1)
            res[name] = out
        np.testing.assert_allclose(res["ext"], res["pure"], rtol=1e-12, atol=1e-10)

    def test_potential_direct(self):
        rng = np.random.default_rng(6)
        dx = 0.1
        sx = (np.arange(-5, 5) + 0.5) * dx
        SX, SY = np.meshgrid(sx, sx, indexing="ij")
        sx, sy = SX.ravel().copy(), SY.ravel().copy()
        rho = np.ascontiguousarray(rng.standard_normal((2, sx.size)))
        ex = np.concatenate([sx[:20], rng.uniform(-1, 1, 50)])
        ey = np.concatenate([sy[:20], rng.uniform(-1, 1, 50)])
        h0, g0 = BACKENDS["ext"].potential_direct(sx, sy, rho, ex, ey, dx, 2 * dx)
        h1, g1 = BACKENDS["pure"].potential_direct(sx, sy, rho, ex, ey, dx, 2 * dx)
        np.testing.assert_allclose(np.asarray(h0), h1, rtol=1e-11, atol=1e-13)
        np.testing.assert_allclose(np.asarray(g0), g1, rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("offset", [(0.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.7, 1.3), (-1.9, 0.4),
                                    (2.5, -1.5)])
def test_cell_integrals_match_quadrature(offset):
    dx = 0.2
    X, Y = offset[0] * dx, offset[1] * dx
    k, gx, gy = _pure.cell_integrals(np.array([X]), np.array([Y]), dx)
    lo, hi = -dx / 2, dx / 2
    opts = {"epsabs": 1e-13, "epsrel": 1e-11}

    def q(f):
        # split at the singular point so the adaptive rule sees smooth pieces
        xs = sorted({lo, hi, min(max(X, lo), hi)})
        ys = sorted({lo, hi, min(max(Y, lo), hi)})
        total = 0.0
        for xa, xb in zip(xs[:-1], xs[1:]):
            for ya, yb in zip(ys[:-1], ys[1:]):
                if xb > xa and yb > ya:
                    total += integrate.dblquad(lambda s, r: f(X - r, Y - s), xa, xb, ya, yb, **opts)[0]
        return total

    assert k[0] == pytest.approx(q(lambda a, b: 0.5 * math.log(a * a + b * b)), abs=1e-10)
    if offset != (0.0, 0.0):
        assert gx[0] == pytest.approx(q(lambda a, b: a / (a * a + b * b)), abs=1e-8)
        assert gy[0] == pytest.approx(q(lambda a, b: b / (a * a + b * b)), abs=1e-8)
    else:
        assert abs(gx[0]) < 1e-14 and abs(gy[0]) < 1e-14


def test_cell_integral_far_limit_is_midpoint():
    dx = 0.1
    X, Y = 3.0, -2.0
    k, gx, gy = _pure.cell_integrals(np.array([X]), np.array([Y]), dx)
    r2 = X * X + Y * Y
    assert k[0] == pytest.approx(dx * dx * 0.5 * math.log(r2), rel=1e-5)
    assert gx[0] == pytest.approx(dx * dx * X / r2, rel=1e-4)
    assert gy[0] == pytest.approx(dx * dx * Y / r2, rel=1e-4)


def test_backend_env_selection():
    code = "import dampwave.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, DAMPWAVE_BACKEND="pure")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "pure"
