import numpy as np
from hypothesis import given, settings, strategies as st

from dampwave.model import LameParams, VectorField2
from dampwave.multiplier import WeightPair, eval_weights
from dampwave.operators import StencilSet, apply_elastic, elastic_form
from dampwave.ratefit import bounded_ratio

from conftest import small_grid

GRID = small_grid(16, 0.1)
STENCILS = StencilSet.for_grid(GRID)

speeds = st.tuples(st.floats(0.05, 0.95), st.floats(0.2, 5.0)).map(
    lambda p: LameParams(p[0] * p[1], p[1]))
seeds = st.integers(0, 2 ** 31 - 1)


def field(seed):
    rng = np.random.default_rng(seed)
    return VectorField2(rng.standard_normal((2, GRID.n, GRID.n)), GRID)


@settings(max_examples=40, deadline=None)
@given(speeds, seeds, seeds, st.floats(-3, 3), st.floats(-3, 3))
def test_operator_linear(lame, s1, s2, alpha, beta):
    u, w = field(s1), field(s2)
    lhs = apply_elastic(u * alpha + w * beta, lame, STENCILS).data
    rhs = alpha * apply_elastic(u, lame, STENCILS).data + beta * apply_elastic(w, lame, STENCILS).data
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))


@settings(max_examples=40, deadline=None)
@given(speeds, seeds, seeds)
def test_operator_symmetric_and_dissipative(lame, s1, s2):
    u, w = field(s1), field(s2)
    Lu = apply_elastic(u, lame, STENCILS).data
    Lw = apply_elastic(w, lame, STENCILS).data
    a, b = np.sum(Lu * w.data), np.sum(u.data * Lw)
    assert abs(a - b) <= 1e-10 * (abs(a) + abs(b) + 1)
    assert elastic_form(u, lame, STENCILS) >= 0


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1e3), st.floats(1.05, 2.0), st.floats(0.01, 0.99))
def test_intermediate_weight_relations(t, ratio, frac):
    delta = frac * (ratio - 1.0)
    pair = WeightPair.intermediate(ratio, 1.0, delta)
    w = eval_weights(pair, t)
    p = ratio - delta
    s = 1.0 + t
    assert np.isclose(w.f_t, p * w.f / s, rtol=1e-12)
    assert np.isclose(w.g_t, (p - 1) * w.g / s, rtol=1e-12, atol=1e-300)
    # g = (p/2) (1+t)^(p-1), so 2g - f_t vanishes for this family too
    assert abs(2 * w.g - w.f_t) <= 1e-12 * abs(w.f_t)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(1e-6, 1e6))
def test_bounded_ratio_scale_invariant(power, scale):
    t = np.linspace(10.0, 80.0, 200)
    env = np.log(t)
    a = bounded_ratio(t, t ** power, env, (20.0, 80.0))
    b = bounded_ratio(t, scale * t ** power, env, (20.0, 80.0))
    assert a.verdict == b.verdict
    assert np.isclose(a.growth, b.growth, rtol=1e-10)
