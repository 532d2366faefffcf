"""Damped leapfrog time stepping and the run driver.

The update

    (1 + dt/2 V) u^{n+1} = 2 u^n - u^{n-1} + dt^2 L_h u^n + dt/2 V u^{n-1}

is explicit nodewise because ``V`` is diagonal.  Each sweep also returns the
lattice moments of the *previous-to-new* centred level ``n`` (velocity
``(u^{n+1} - u^{n-1}) / 2dt``), so diagnostics at level ``n`` become
available one step after ``u^n`` itself.  ``SimState`` exposes that
diagnostic level through ``u``, ``u_t``, ``v`` and ``t``.

Only a box covering the current support is swept.  The box starts at the
bounding box of the initial fields and grows one cell per step (the stencil
reach).  Leapfrog spreads exponentially small values one cell per step, far
ahead of the physical front, so every ``PRUNE_EVERY`` steps the box is cut
back to the nodes whose magnitude exceeds ``PRUNE_RTOL`` times the current
peak and everything outside is zeroed.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .diagnostics import (
    DiagnosticsRecord, Moments, moments_from_fields, support_radius, v_energy_check,
)
from .model import (
    Grid2D, InitialData, LameParams, SimConfig, VectorField2, build_grid, sample_damping,
    sample_initial_data,
)
from .multiplier import F_functional, WeightPair, e_functional
from .operators import StencilSet, apply_elastic, pad


PRUNE_EVERY = 8
PRUNE_RTOL = 1e-30


class SimulationError(RuntimeError):
    """The time stepper produced non-finite values."""

    def __init__(self, step_index: int, t: float):
        super().__init__(f"non-finite solution at step {step_index} (t={t:.6g}); "
                         f"the time step is likely unstable")
        self.step_index = step_index
        self.t = t


def choose_dt(grid: Grid2D, lame: LameParams, cfl_safety: float) -> float:
    """``cfl_safety * dx / (b sqrt 2)``."""
    if not (0.0 < cfl_safety < 1.0):
        raise ValueError(f"cfl_safety must lie in (0, 1), got {cfl_safety}")
    return cfl_safety * grid.dx / (lame.b * math.sqrt(2.0))


def _bbox(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return int(rows[0]), int(rows[-1]) + 1, int(cols[0]), int(cols[-1]) + 1


@dataclass
class SimState:
    """Three padded time levels plus the running integrals.

    Buffers are ``(2, n+2, n+2)`` with a zero halo.  ``curr`` holds level
    ``level`` and ``prev`` level ``level - 1`` (the ghost level right after
    :func:`initialize`).  Diagnostics (``moments``, ``v``, ``dissipation``,
    ``weighted_l2``) refer to ``diag_level = max(level - 1, 0)``.
    """

    grid: Grid2D
    lame: LameParams
    dt: float
    V: np.ndarray           # padded damping
    inv_den: np.ndarray     # padded 1 / (1 + dt/2 V)
    prev: np.ndarray
    curr: np.ndarray
    scratch: np.ndarray
    v_pad: np.ndarray
    u1: np.ndarray          # exact initial velocity (unpadded), used at level 0
    box: list[int]
    level: int = 0
    moments: Moments | None = None
    dissipation: float = 0.0
    weighted_l2: float = 0.0
    prune_rtol: float = PRUNE_RTOL
    _v_dummy: np.ndarray | None = field(default=None, repr=False)

    @property
    def step_index(self) -> int:
        return self.level

    @property
    def diag_level(self) -> int:
        return max(self.level - 1, 0)

    @property
    def t(self) -> float:
        return self.diag_level * self.dt

    def _interior(self, a: np.ndarray) -> VectorField2:
        return VectorField2(a[:, 1:-1, 1:-1].copy(), self.grid)

    @property
    def u(self) -> VectorField2:
        return self._interior(self.curr if self.level == 0 else self.prev)

    @property
    def u_t(self) -> VectorField2:
        if self.level <= 1:
            return VectorField2(self.u1.copy(), self.grid)
        return self._interior((self.curr - self.scratch) / (2.0 * self.dt))

    @property
    def v(self) -> VectorField2:
        return self._interior(self.v_pad)

    @property
    def u_prev(self) -> VectorField2:
        return self._interior(self.prev)

    @property
    def u_curr(self) -> VectorField2:
        return self._interior(self.curr)


def initialize(init: InitialData, V: np.ndarray, dt: float, lame: LameParams,
               stencils: StencilSet) -> SimState:
    """Level 0 is ``u0``; the ghost level is ``u0 - dt u1 + dt^2/2 (L_h u0 - V u1)``."""
    grid = init.u0.grid
    stencils.check(grid)
    Lu0 = apply_elastic(init.u0, lame, stencils).data
    ghost = init.u0.data - dt * init.u1.data + 0.5 * dt * dt * (Lu0 - V * init.u1.data)
    Vp = pad(V)
    support = (np.abs(ghost).sum(axis=0) > 0) | (np.abs(init.u0.data).sum(axis=0) > 0)
    box = _bbox(support)
    n = grid.n
    if box is None:
        box = (n // 2, n // 2 + 1, n // 2, n // 2 + 1)
    # shift to padded indices
    box = [box[0] + 1, box[1] + 1, box[2] + 1, box[3] + 1]
    state = SimState(
        grid=grid, lame=lame, dt=dt, V=Vp, inv_den=1.0 / (1.0 + 0.5 * dt * Vp),
        prev=pad(ghost), curr=pad(init.u0.data), scratch=np.zeros((2, n + 2, n + 2)),
        v_pad=np.zeros((2, n + 2, n + 2)), u1=init.u1.data.copy(), box=box,
    )
    state._v_dummy = np.zeros_like(state.v_pad)
    state.moments = moments_from_fields(init.u0, init.u1, V, lame, stencils, 0.0)
    return state


def _prune(state: SimState) -> None:
    i0, i1, j0, j1 = state.box
    bufs = (state.prev, state.curr, state.scratch)
    mag = np.zeros((i1 - i0, j1 - j0))
    for buf in bufs:
        np.maximum(mag, np.abs(buf[:, i0:i1, j0:j1]).max(axis=0), out=mag)
    peak = mag.max()
    if peak == 0.0:
        return
    keep = _bbox(mag > state.prune_rtol * peak)
    k0, k1, l0, l1 = keep[0] + i0, keep[1] + i0, keep[2] + j0, keep[3] + j0
    if (k0, k1, l0, l1) == (i0, i1, j0, j1):
        return
    for buf in bufs:
        kept = buf[:, k0:k1, l0:l1].copy()
        buf[:, i0:i1, j0:j1] = 0.0
        buf[:, k0:k1, l0:l1] = kept
    state.box[:] = [k0, k1, l0, l1]


def step(state: SimState) -> SimState:
    """Advance one level in place and return the state.

    Raises :class:`SimulationError` if the sweep produces non-finite values.
    """
    n = state.grid.n
    b = state.box
    b[0], b[2] = max(b[0] - 1, 1), max(b[2] - 1, 1)
    b[1], b[3] = min(b[1] + 1, n + 1), min(b[3] + 1, n + 1)
    first = state.level == 0
    v_target = state._v_dummy if first else state.v_pad
    out = kernels.leapfrog_step(
        state.prev, state.curr, state.scratch, state.V, state.inv_den, v_target,
        state.lame.a ** 2, state.lame.coupling, state.grid.dx, state.dt,
        b[0], b[1], b[2], b[3],
    )
    m = Moments(state.level * state.dt, *out)
    if not m.is_finite():
        raise SimulationError(state.level, state.level * state.dt)
    state.prev, state.curr, state.scratch = state.curr, state.scratch, state.prev
    state.level += 1
    if state.prune_rtol > 0 and state.level % PRUNE_EVERY == 0:
        _prune(state)
    if not first:
        hdt = 0.5 * state.dt
        old = state.moments
        state.dissipation += hdt * (old.kinetic_v + m.kinetic_v)
        state.weighted_l2 += hdt * (old.l2_v + m.l2_v)
        state.moments = m
    return state


# -- run driver ---------------------------------------------------------------


@dataclass
class Snapshot:
    t: float
    u: VectorField2
    u_t: VectorField2
    v: VectorField2
    dissipation: float
    weighted_l2: float


@dataclass
class RunResult:
    config: SimConfig
    grid: Grid2D
    dt: float
    nsteps: int
    V: np.ndarray
    init: InitialData
    stencils: StencilSet
    pair: WeightPair
    records: list[DiagnosticsRecord]
    series: dict[str, np.ndarray]
    snapshots: dict[float, Snapshot]
    wall_time: float

    @property
    def E0(self) -> float:
        return float(self.series["E_u"][0])


_SERIES_KEYS = ("t", "E_u", "l2_sq", "dissipation", "weighted_l2", "e_t", "F_t",
                "kinetic", "kinetic_v", "elastic", "l2_v", "cross")


def run(config: SimConfig, snapshot_times=(), stride: int | None = None) -> RunResult:
    """Integrate ``config`` from 0 to ``T``.

    A record is emitted every ``output_stride`` levels and at the final level.
    Dense per-level series of the scalar functionals are kept in
    ``RunResult.series``.  Field snapshots are taken at the levels nearest to
    each entry of ``snapshot_times``.
    """
    started = time.perf_counter()
    stride = config.output_stride if stride is None else stride
    lame = config.lame
    horizon = config.T if config.T > 0 else 1.0 / (config.resolution * lame.b)
    grid = build_grid(config, horizon=horizon)
    stencils = StencilSet.for_grid(grid)
    V = sample_damping(config.damping, grid)
    init = sample_initial_data(config.init, grid)
    pair = WeightPair.for_config(config)
    dt = choose_dt(grid, lame, config.cfl_safety)
    nsteps = math.ceil(config.T / dt - 1e-9) if config.T > 0 else 0
    if nsteps:
        dt = config.T / nsteps

    wanted: dict[int, float] = {}
    for ts in snapshot_times:
        if ts < 0 or ts > config.T + 1e-12:
            raise ValueError(f"snapshot time {ts} outside [0, {config.T}]")
        wanted[int(round(ts / dt)) if nsteps else 0] = ts

    state = initialize(init, V, dt, lame, stencils)
    series = {k: np.zeros(nsteps + 1) for k in _SERIES_KEYS}
    records: list[DiagnosticsRecord] = []
    snapshots: dict[float, Snapshot] = {}
    E0 = state.moments.energy

    def observe(level: int) -> None:
        m = state.moments
        E = m.energy
        e = e_functional(m, pair)
        F = F_functional(m, pair)
        for key, val in (("t", m.t), ("E_u", E), ("l2_sq", m.l2),
                         ("dissipation", state.dissipation), ("weighted_l2", state.weighted_l2),
                         ("e_t", e), ("F_t", F), ("kinetic", m.kinetic), ("kinetic_v", m.kinetic_v),
                         ("elastic", m.elastic), ("l2_v", m.l2_v), ("cross", m.cross)):
            series[key][level] = val
        if level in wanted:
            snapshots[wanted[level]] = Snapshot(m.t, state.u, state.u_t, state.v,
                                                state.dissipation, state.weighted_l2)
        if level % stride == 0 or level == nsteps:
            gap = abs(E + state.dissipation - E0)
            lhs, _, v_res = v_energy_check(state, init, V, lame, stencils)
            records.append(DiagnosticsRecord(
                t=m.t, E_u=E, l2_sq=m.l2, dissipation=state.dissipation,
                energy_identity_residual=gap / E0 if E0 > 0 else gap,
                support_radius=support_radius(state.u),
                v_identity_residual=v_res, e_t=e, F_t=F, v_energy_lhs=lhs,
                weighted_l2=state.weighted_l2,
            ))

    observe(0)
    for k in range(nsteps + 1):
        step(state)
        if k >= 1:
            observe(k)

    # centred de/dt + F at interior levels of each record
    t_s, e_s, F_s = series["t"], series["e_t"], series["F_t"]
    scale = (np.max(np.abs(F_s)) + np.max(np.abs(e_s)) / config.T) if nsteps else 0.0
    for rec in records:
        k = int(round(rec.t / dt)) if nsteps else 0
        if 0 < k < nsteps:
            raw = abs((e_s[k + 1] - e_s[k - 1]) / (t_s[k + 1] - t_s[k - 1]) + F_s[k])
            rec.multiplier_residual = raw / scale if scale > 0 else raw

    return RunResult(config=config, grid=grid, dt=dt, nsteps=nsteps, V=V, init=init,
                     stencils=stencils, pair=pair, records=records, series=series,
                     snapshots=snapshots, wall_time=time.perf_counter() - started)


def identity_gap_series(result: RunResult) -> np.ndarray:
    """Per-level ``|E + D - E0|`` relative to ``E0`` (absolute if ``E0 = 0``)."""
    s = result.series
    gap = np.abs(s["E_u"] + s["dissipation"] - s["E_u"][0])
    return gap / s["E_u"][0] if s["E_u"][0] > 0 else gap


__all__ = ["SimState", "SimulationError", "Snapshot", "RunResult", "choose_dt", "initialize",
           "step", "run", "identity_gap_series"]
