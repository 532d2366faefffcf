import math

import numpy as np
import pytest

from dampwave.model import Grid2D, LameParams, VectorField2
from dampwave.operators import (
    StencilSet, apply_elastic, centered_elastic_form, divergence, elastic_form,
    gradient_energy_density, laplacian,
)

from conftest import random_field, small_grid

LAME = LameParams(0.6, 1.0)
INNER = (slice(2, -2), slice(2, -2))


def field_from(fn, grid):
    X, Y = grid.mesh
    u1, u2 = fn(X, Y)
    return VectorField2(np.stack([np.broadcast_to(u1, X.shape), np.broadcast_to(u2, X.shape)]).astype(float), grid)


def plane_wave(grid, k, d):
    X, Y = grid.mesh
    phase = np.sin(k[0] * X + k[1] * Y)
    return VectorField2(np.stack([d[0] * phase, d[1] * phase]), grid)


def test_stencils_reject_other_spacing():
    g = small_grid(32, 0.1)
    with pytest.raises(ValueError):
        apply_elastic(random_field(g), LAME, StencilSet(0.2))
    with pytest.raises(ValueError):
        divergence(random_field(g), StencilSet(0.05))


def test_constant_field_annihilated():
    g = small_grid()
    out = apply_elastic(field_from(lambda X, Y: (1.0, 1.0), g), LAME, StencilSet.for_grid(g))
    assert np.abs(out.data[(slice(None),) + INNER]).max() < 1e-10


def test_quadratic_exact():
    g = small_grid()
    st = StencilSet.for_grid(g)
    out = apply_elastic(field_from(lambda X, Y: (X ** 2, 0.0 * X), g), LAME, st)
    np.testing.assert_allclose(out.data[0][INNER], 2 * LAME.b ** 2, rtol=1e-10)
    assert np.abs(out.data[1][INNER]).max() < 1e-10


def test_bilinear_mixed_exact():
    # u = (0, x1 x2): out1 = (b^2-a^2) d12 u2 = (b^2-a^2), out2 = 0
    g = small_grid()
    out = apply_elastic(field_from(lambda X, Y: (0.0 * X, X * Y), g), LAME, StencilSet.for_grid(g))
    np.testing.assert_allclose(out.data[0][INNER], LAME.coupling, rtol=1e-10)
    assert np.abs(out.data[1][INNER]).max() < 1e-10


def _eigen_error(dx, k_dir, polarization):
    n = int(round(8.0 / dx))
    g = Grid2D(R=n * dx / 2, dx=dx, n=n)
    kk = 2 * math.pi * np.asarray(k_dir) / np.linalg.norm(k_dir)
    d = kk / np.linalg.norm(kk) if polarization == "p" else np.array([-kk[1], kk[0]]) / np.linalg.norm(kk)
    u = plane_wave(g, kk, d)
    speed = LAME.b if polarization == "p" else LAME.a
    exact = -(speed ** 2) * (kk @ kk) * u.data
    out = apply_elastic(u, LAME, StencilSet.for_grid(g)).data
    sl = (slice(None), slice(4, -4), slice(4, -4))
    return np.abs(out[sl] - exact[sl]).max() / np.abs(exact[sl]).max()


@pytest.mark.parametrize("k_dir", [(1.0, 0.0), (1.0, 1.0), (2.0, 1.0)])
@pytest.mark.parametrize("pol", ["p", "s"])
def test_plane_wave_second_order(k_dir, pol):
    e1 = _eigen_error(0.1, k_dir, pol)
    e2 = _eigen_error(0.05, k_dir, pol)
    assert 3.5 <= e1 / e2 <= 4.5


def test_linearity():
    g = small_grid()
    st = StencilSet.for_grid(g)
    u, w = random_field(g, 1), random_field(g, 2)
    lhs = apply_elastic(2.0 * u + (-3.0) * w, LAME, st).data
    rhs = 2.0 * apply_elastic(u, LAME, st).data - 3.0 * apply_elastic(w, LAME, st).data
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * np.abs(rhs).max())


def test_symmetric_negative_semidefinite():
    g = small_grid()
    st = StencilSet.for_grid(g)
    u, w = random_field(g, 3), random_field(g, 4)
    Lu, Lw = apply_elastic(u, LAME, st).data, apply_elastic(w, LAME, st).data
    assert np.sum(Lu * w.data) == pytest.approx(np.sum(u.data * Lw), rel=1e-12)
    assert elastic_form(u, LAME, st) > 0


class TestDivergence:
    def test_linear(self):
        g = small_grid()
        st = StencilSet.for_grid(g)
        div = divergence(field_from(lambda X, Y: (X, Y), g), st)
        np.testing.assert_allclose(div[INNER], 2.0, rtol=1e-12)

    def test_rotation(self):
        g = small_grid()
        div = divergence(field_from(lambda X, Y: (Y, -X), g), StencilSet.for_grid(g))
        assert np.abs(div[INNER]).max() < 1e-12

    def test_shear_wave_converges(self):
        errs = []
        for dx in (0.1, 0.05):
            n = int(round(8.0 / dx))
            g = Grid2D(n * dx / 2, dx, n)
            k = np.array([2.0, 1.0])
            u = plane_wave(g, k, np.array([-1.0, 2.0]) / math.sqrt(5))
            errs.append(np.abs(divergence(u, StencilSet.for_grid(g))[4:-4, 4:-4]).max())
        assert 3.5 <= errs[0] / errs[1] <= 4.5


class TestGradientDensity:
    def test_constant(self):
        g = small_grid()
        assert np.abs(gradient_energy_density(field_from(lambda X, Y: (3.0, -1.0), g),
                                              StencilSet.for_grid(g))[INNER]).max() == 0.0

    def test_linear(self):
        g = small_grid()
        dens = gradient_energy_density(field_from(lambda X, Y: (X, 0.0 * X), g), StencilSet.for_grid(g))
        np.testing.assert_allclose(dens[INNER], 1.0, rtol=1e-12)

    def test_bump_integral_second_order(self):
        # int |grad (1-|x|^2)^4|^2 over the unit disk = 8 pi / 7
        exact = 8 * math.pi / 7
        errs = []
        for dx in (0.1, 0.05):
            n = int(round(3.0 / dx))
            g = Grid2D(n * dx / 2, dx, n)
            phi = np.clip(1 - g.radius ** 2, 0, None) ** 4
            u = VectorField2(np.stack([phi, 0 * phi]), g)
            val = gradient_energy_density(u, StencilSet.for_grid(g)).sum() * dx * dx
            errs.append(abs(val - exact))
        assert 3.5 <= errs[0] / errs[1] <= 4.5


class TestLaplacian:
    def test_quadratic(self):
        g = small_grid()
        X, Y = g.mesh
        np.testing.assert_allclose(laplacian(X ** 2 + Y ** 2, StencilSet.for_grid(g))[INNER], 4.0,
                                   rtol=1e-10)

    def test_constant(self):
        g = small_grid()
        assert np.abs(laplacian(np.full((32, 32), 7.0), StencilSet.for_grid(g))[INNER]).max() < 1e-9

    def test_sine_second_order(self):
        errs = []
        for dx in (0.1, 0.05):
            n = int(round(6.0 / dx))
            g = Grid2D(n * dx / 2, dx, n)
            X, _ = g.mesh
            f = np.sin(1.5 * X)
            lap = laplacian(f, StencilSet.for_grid(g))
            errs.append(np.abs(lap + 2.25 * f)[2:-2, 2:-2].max())
        assert 3.5 <= errs[0] / errs[1] <= 4.5

    def test_stacked(self):
        g = small_grid()
        u = random_field(g)
        st = StencilSet.for_grid(g)
        lap = laplacian(u.data, st)
        np.testing.assert_allclose(lap[1], laplacian(u.data[1], st))


def test_energy_forms_agree_to_second_order():
    vals = []
    for dx in (0.1, 0.05, 0.025):
        n = int(round(3.0 / dx))
        g = Grid2D(n * dx / 2, dx, n)
        phi = np.clip(1 - g.radius ** 2, 0, None) ** 4
        u = VectorField2(np.stack([phi, 0.5 * phi]), g)
        st = StencilSet.for_grid(g)
        vals.append(elastic_form(u, LAME, st) - centered_elastic_form(u, LAME, st))
    assert abs(vals[1]) < abs(vals[0]) and abs(vals[2]) < abs(vals[1])
    assert 3.0 <= vals[1] / vals[2] <= 5.0
