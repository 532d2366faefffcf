"""Weighted-energy machinery for the multiplier ``f(t) u_t + g(t) u``.

Provides the two weight families, the weighted energy ``e(t)`` and flux
``F(t)`` with ``de/dt + F = 0``, the sign/growth conditions the decay proof
needs on the expanding disk ``|x| <= L + bt``, and the constants those
conditions produce.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .diagnostics import Moments, moments_from_fields
from .model import Case, Grid2D, LameParams, SimConfig, VectorField2
from .operators import StencilSet

# slack for conditions that hold with equality in exact arithmetic
CONDITION_RTOL = 1e-12


@dataclass(frozen=True)
class Weights:
    f: float | np.ndarray
    f_t: float | np.ndarray
    g: float | np.ndarray
    g_t: float | np.ndarray
    g_tt: float | np.ndarray


@dataclass(frozen=True)
class WeightPair:
    """Time weights ``f, g``.

    ``kind="strong"``: ``f = (1+t)^2``, ``g = 1+t``.
    ``kind="intermediate"``: ``f = (1+t)^p``, ``g = (V0 - b delta)/(2b) (1+t)^(p-1)``
    with ``p = V0/b - delta``.
    ``kind="constant"``: ``f`` and ``g`` frozen at ``f_const, g_const`` (testing aid).
    """

    kind: str
    V0: float = 0.0
    b: float = 1.0
    delta: float = 0.0
    t0: float = 0.0
    f_const: float = 1.0
    g_const: float = 0.0

    def __post_init__(self):
        if self.kind not in ("strong", "intermediate", "constant"):
            raise ValueError(f"unknown weight family {self.kind!r}")
        if self.kind == "intermediate":
            if not (self.b > 0 and 0.0 < self.delta < self.V0 / self.b - 1.0):
                raise ValueError(
                    f"intermediate weights need 0 < delta < V0/b - 1 "
                    f"(V0={self.V0}, b={self.b}, delta={self.delta})")

    @classmethod
    def strong(cls, t0: float = 0.0) -> WeightPair:
        return cls("strong", t0=t0)

    @classmethod
    def intermediate(cls, V0: float, b: float, delta: float, t0: float = 0.0) -> WeightPair:
        return cls("intermediate", V0=V0, b=b, delta=delta, t0=t0)

    @classmethod
    def constant(cls, f: float = 1.0, g: float = 0.0) -> WeightPair:
        return cls("constant", f_const=f, g_const=g)

    @classmethod
    def for_config(cls, config: SimConfig) -> WeightPair:
        """The family matching the config's case; runs without a rate claim use ``strong``."""
        if config.case is Case.INTERMEDIATE:
            return cls.intermediate(config.damping.V0, config.lame.b, config.delta, config.t0)
        return cls.strong(config.t0)

    @property
    def exponent(self) -> float:
        """Growth exponent of ``f``."""
        if self.kind == "strong":
            return 2.0
        if self.kind == "intermediate":
            return self.V0 / self.b - self.delta
        return 0.0


def eval_weights(pair: WeightPair, t) -> Weights:
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("weights are defined for t >= 0")
    s = 1.0 + t_arr
    if pair.kind == "strong":
        w = Weights(s * s, 2.0 * s, s, np.ones_like(s), np.zeros_like(s))
    elif pair.kind == "intermediate":
        p = pair.exponent
        c = (pair.V0 - pair.b * pair.delta) / (2.0 * pair.b)
        w = Weights(s ** p, p * s ** (p - 1.0), c * s ** (p - 1.0),
                    c * (p - 1.0) * s ** (p - 2.0), c * (p - 1.0) * (p - 2.0) * s ** (p - 3.0))
    else:
        one = np.ones_like(s)
        w = Weights(pair.f_const * one, 0.0 * one, pair.g_const * one, 0.0 * one, 0.0 * one)
    if np.ndim(t) == 0:
        return Weights(*(float(x) for x in (w.f, w.f_t, w.g, w.g_t, w.g_tt)))
    return w


def e_functional(m: Moments, pair: WeightPair) -> float:
    """Weighted energy ``e(t)`` from the lattice moments at time ``m.t``."""
    w = eval_weights(pair, m.t)
    return (0.5 * w.f * (m.kinetic + m.elastic) + w.g * m.cross
            + 0.5 * (w.g * m.l2_v - w.g_t * m.l2))


def F_functional(m: Moments, pair: WeightPair) -> float:
    """Flux ``F(t)`` with ``de/dt + F = 0``."""
    w = eval_weights(pair, m.t)
    return (0.5 * (2.0 * w.f * m.kinetic_v - (w.f_t + 2.0 * w.g) * m.kinetic)
            + 0.5 * (2.0 * w.g - w.f_t) * m.elastic
            + 0.5 * (w.g_tt * m.l2 - w.g_t * m.l2_v))


def e_from_fields(u: VectorField2, u_t: VectorField2, V: np.ndarray, pair: WeightPair,
                  t: float, lame: LameParams, stencils: StencilSet) -> float:
    return e_functional(moments_from_fields(u, u_t, V, lame, stencils, t), pair)


def F_from_fields(u: VectorField2, u_t: VectorField2, V: np.ndarray, pair: WeightPair,
                  t: float, lame: LameParams, stencils: StencilSet) -> float:
    return F_functional(moments_from_fields(u, u_t, V, lame, stencils, t), pair)


def identity_residual(t, e, F) -> tuple[float, float]:
    """Check ``de/dt + F = 0`` on a uniformly sampled series.

    Returns ``(normalized, raw)`` where ``raw = max |de/dt + F|`` over interior
    samples (centred differences) and ``normalized = raw / (max|F| + max|e|/T)``.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    F = np.asarray(F, dtype=float)
    if t.size < 3:
        raise ValueError("identity residual needs at least 3 samples")
    dedt = (e[2:] - e[:-2]) / (t[2:] - t[:-2])
    raw = float(np.max(np.abs(dedt + F[1:-1])))
    span = t[-1] - t[0]
    scale = float(np.max(np.abs(F)) + np.max(np.abs(e)) / span)
    return (raw / scale if scale > 0 else raw), raw


# -- conditions ---------------------------------------------------------------


@dataclass
class MultiplierConstants:
    C1: float
    C2: float
    C3: float
    C_t0: float | None
    C_star: float
    t0: float | None


@dataclass
class ConditionReport:
    pair: dict
    t_samples: list[float]
    damping_sign_min: list[float]   # min over the disk of 2 f V - f_t - 2 g
    gradient_sign: list[float]      # 2 g - f_t
    g_tt_growth: list[float]        # (1+t) * (-g_tt)
    g_t_values: list[float]         # g_t
    g_t_minus_Vg_max: list[float]   # max over the disk of g_t - V g
    absorption_min: list[float]     # min over the disk of V(x) (1+t) / V0
    holds_damping_sign: list[bool]
    holds_gradient_sign: list[bool]
    holds_absorption: list[bool]
    constants: MultiplierConstants
    verdicts: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return asdict(self)


def c_star(L: float, b: float) -> float:
    return 1.0 / max(1.0 + L, b)


def sample_times(t_start: float, T: float, count: int = 64) -> np.ndarray:
    """Geometric candidate grid on ``[t_start, T]`` (includes both ends)."""
    lo = max(t_start, 1e-2 * T if T > 0 else 1e-2)
    times = np.geomspace(lo, T, count) if T > lo else np.array([T])
    return np.unique(np.concatenate(([t_start], times, [T])))


def _disk_extremes(V: np.ndarray, grid: Grid2D, radii: np.ndarray):
    # running min/max of V over nodes sorted by distance from the origin
    r = grid.radius.ravel()
    order = np.argsort(r, kind="stable")
    r_sorted = r[order]
    v_sorted = V.ravel()[order]
    vmin = np.minimum.accumulate(v_sorted)
    vmax = np.maximum.accumulate(v_sorted)
    k = np.searchsorted(r_sorted, radii, side="right") - 1
    if np.any(k < 0):
        raise ValueError("disk radius below the innermost node")
    return vmin[k], vmax[k]


def check_conditions(pair: WeightPair, V: np.ndarray, grid: Grid2D, t_samples,
                     L: float, b: float, V0: float | None = None) -> ConditionReport:
    """Evaluate the weight conditions on the nodes of ``|x| <= L + b t`` for each sample time.

    Two are sign conditions, ``2 f V - f_t - 2 g >= 0`` nodewise and
    ``2 g - f_t >= 0``.  The rest define the smallest constants
    ``C1 = sup (1+t)(-g_tt)^+``, ``C2 = sup g_t``, ``C3 = sup (g_t - V g)^+``
    over samples from the located ``t0`` on.  ``t0`` is the first sample from
    which both sign conditions hold at every later sample.  The absorption
    bound ``V(x) >= C* V0 / (1+t)`` on the same disks is checked alongside.
    """
    t = np.asarray(t_samples, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("need a nonempty 1-D array of sample times")
    radii = L + b * t
    if radii.max() > grid.R * math.sqrt(2.0) + grid.dx:
        raise ValueError("sample times reach beyond the grid")
    vmin, vmax = _disk_extremes(V, grid, radii)
    w = eval_weights(pair, t)
    damping_sign = 2.0 * w.f * vmin - w.f_t - 2.0 * w.g
    gradient_sign = 2.0 * w.g - w.f_t
    scale = np.abs(w.f_t) + 2.0 * np.abs(w.g)
    holds_damping_sign = damping_sign >= -CONDITION_RTOL * scale
    holds_gradient_sign = gradient_sign >= -CONDITION_RTOL * scale
    g_tt_growth = (1.0 + t) * (-w.g_tt)
    v_pick = np.where(w.g >= 0, vmin, vmax)
    g_t_minus_Vg = w.g_t - v_pick * w.g
    cstar = c_star(L, b)
    if V0 is None:
        V0 = pair.V0
    if V0 and V0 > 0:
        absorption = vmin * (1.0 + t) / V0
        holds_abs = absorption >= cstar * (1.0 - CONDITION_RTOL)
    else:
        absorption = np.full_like(t, np.nan)
        holds_abs = np.ones_like(t, dtype=bool)

    good = holds_damping_sign & holds_gradient_sign
    # suffix-and: from index k on, everything holds
    tail_ok = np.flip(np.logical_and.accumulate(np.flip(good)))
    located = int(np.argmax(tail_ok)) if tail_ok.any() else None
    if located is not None:
        sel = slice(located, None)
        C1 = float(np.max(np.maximum(g_tt_growth[sel], 0.0)))
        C2 = float(np.max(w.g_t[sel]))
        C3 = float(np.max(np.maximum(g_t_minus_Vg[sel], 0.0)))
        t0 = float(t[located])
    else:
        C1 = C2 = C3 = math.nan
        t0 = None
    constants = MultiplierConstants(C1=C1, C2=C2, C3=C3, C_t0=None, C_star=cstar, t0=t0)
    report = ConditionReport(
        pair=asdict(pair),
        t_samples=t.tolist(),
        damping_sign_min=damping_sign.tolist(),
        gradient_sign=gradient_sign.tolist(),
        g_tt_growth=g_tt_growth.tolist(),
        g_t_values=np.asarray(w.g_t, dtype=float).tolist(),
        g_t_minus_Vg_max=g_t_minus_Vg.tolist(),
        absorption_min=absorption.tolist(),
        holds_damping_sign=holds_damping_sign.tolist(),
        holds_gradient_sign=holds_gradient_sign.tolist(),
        holds_absorption=holds_abs.tolist(),
        constants=constants,
    )
    finite = located is not None and all(math.isfinite(c) for c in (C1, C2, C3))
    report.verdicts = {
        "t0_located": located is not None,
        "sign_conditions_after_t0": bool(located is not None and good[located:].all()),
        "constants_finite": bool(finite),
        "absorption_bound": bool(holds_abs[located:].all()) if located is not None else False,
    }
    return report


def constant_C_t0(pair: WeightPair, u: VectorField2, u_t: VectorField2, V: np.ndarray,
                  t0: float, lame: LameParams, stencils: StencilSet) -> float:
    """``f(t0) E_u(t0) + g(t0) int |u.u_t| + 1/2 int |g_t(t0) - V g(t0)| |u|^2``."""
    w = eval_weights(pair, t0)
    m = moments_from_fields(u, u_t, V, lame, stencils, t0)
    cell = stencils.dx ** 2
    dot = np.abs((u.data * u_t.data).sum(axis=0))
    usq = (u.data ** 2).sum(axis=0)
    return (w.f * m.energy + w.g * float(dot.sum()) * cell
            + 0.5 * float((np.abs(w.g_t - V * w.g) * usq).sum()) * cell)


def absorption_integrals(t, l2, l2_v, V0: float, t0: float):
    """Running ``int_{t0}^t int V|u|^2`` and ``int_{t0}^t V0/(1+s) int |u|^2`` (trapezoid)."""
    t = np.asarray(t, dtype=float)
    keep = t >= t0
    ts = t[keep]
    lhs = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(ts) * (l2_v[keep][1:] + l2_v[keep][:-1]))))
    weight = V0 / (1.0 + ts) * np.asarray(l2)[keep]
    rhs = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(ts) * (weight[1:] + weight[:-1]))))
    return ts, lhs, rhs
