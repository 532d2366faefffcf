"""Scalar functionals of the discrete solution.

Quadratures are plain lattice sums times the cell area.  The elastic part
of every energy is the quadratic form of the discrete operator (see
:func:`dampwave.operators.elastic_form`), which is what the leapfrog scheme
balances against the damping work.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .model import InitialData, LameParams, VectorField2
from .operators import StencilSet, elastic_form

# fixed leading columns of series.csv; extra columns follow in this order
CSV_COLUMNS = (
    "t", "E_u", "l2_sq", "dissipation", "energy_identity_residual", "support_radius",
    "v_identity_residual", "e_t", "F_t",
)
CSV_EXTRA_COLUMNS = ("v_energy_lhs", "multiplier_residual", "weighted_l2")


@dataclass(frozen=True)
class Moments:
    """Lattice integrals at one time level, all multiplied by the cell area.

    ``kinetic``  int |u_t|^2,   ``kinetic_v``  int V |u_t|^2,
    ``elastic``  int a^2|grad u|^2 + (b^2-a^2)(div u)^2,
    ``l2``       int |u|^2,     ``l2_v``       int V |u|^2,
    ``cross``    int u . u_t.
    """

    t: float
    kinetic: float
    kinetic_v: float
    elastic: float
    l2: float
    l2_v: float
    cross: float

    @property
    def energy(self) -> float:
        return 0.5 * (self.kinetic + self.elastic)

    def is_finite(self) -> bool:
        return all(math.isfinite(getattr(self, f.name)) for f in fields(self))


def moments_from_fields(u: VectorField2, u_t: VectorField2, V: np.ndarray,
                        lame: LameParams, stencils: StencilSet, t: float) -> Moments:
    cell = stencils.dx ** 2
    usq = (u.data ** 2).sum(axis=0)
    wsq = (u_t.data ** 2).sum(axis=0)
    return Moments(
        t=t,
        kinetic=float(wsq.sum()) * cell,
        kinetic_v=float((V * wsq).sum()) * cell,
        elastic=elastic_form(u, lame, stencils),
        l2=float(usq.sum()) * cell,
        l2_v=float((V * usq).sum()) * cell,
        cross=float((u.data * u_t.data).sum()) * cell,
    )


@dataclass
class DiagnosticsRecord:
    t: float
    E_u: float
    l2_sq: float
    dissipation: float
    energy_identity_residual: float
    support_radius: float
    v_identity_residual: float
    e_t: float
    F_t: float
    v_energy_lhs: float = math.nan
    multiplier_residual: float = math.nan
    weighted_l2: float = 0.0

    def row(self) -> list[float]:
        d = asdict(self)
        return [d[c] for c in CSV_COLUMNS + CSV_EXTRA_COLUMNS]


def energy_from_fields(u: VectorField2, u_t: VectorField2, lame: LameParams,
                       stencils: StencilSet) -> float:
    kinetic = float((u_t.data ** 2).sum()) * stencils.dx ** 2
    return 0.5 * (kinetic + elastic_form(u, lame, stencils))


def total_energy(state, lame: LameParams, stencils: StencilSet) -> float:
    """E_u at the state's diagnostic level (centred velocity; exact data at t=0)."""
    return energy_from_fields(state.u, state.u_t, lame, stencils)


def energy_identity_residual(E: np.ndarray, dissipation: np.ndarray) -> tuple[float, bool]:
    """``max_t |E(t) + D(t) - E(0)| / E(0)``.

    Returns ``(value, flagged)``; when ``E(0) == 0`` the absolute residual is
    returned and ``flagged`` is True.
    """
    E = np.asarray(E, dtype=float)
    dissipation = np.asarray(dissipation, dtype=float)
    if E.size == 0:
        raise ValueError("empty series")
    gap = np.abs(E + dissipation - E[0])
    if E[0] == 0.0:
        return float(gap.max()), True
    return float(gap.max() / E[0]), False


def l2_norm_sq(u: VectorField2) -> float:
    return float((u.data ** 2).sum()) * u.grid.cell_area


def support_radius(u: VectorField2, threshold: float = 1e-12) -> float:
    """Largest ``|x|`` over nodes where ``|u| > threshold * max|u|``; 0 for a zero field."""
    mag2 = (u.data ** 2).sum(axis=0)
    peak = mag2.max()
    if peak == 0.0:
        return 0.0
    return float(u.grid.radius[mag2 > threshold ** 2 * peak].max())


def v_energy_check(state, init: InitialData, V: np.ndarray, lame: LameParams,
                   stencils: StencilSet) -> tuple[float, float, float]:
    """Both sides of the energy identity of the time-integrated solution ``v``.

    lhs = 1/2 |v_t|^2 + 1/2 W(v) + int_0^t int V |v_s|^2,  with ``v_t = u``;
    rhs = 1/2 |u0|^2 + int (u1 + V u0) . v.
    Residual is relative to the larger side (absolute if both vanish).
    """
    v = state.v
    cell = stencils.dx ** 2
    lhs = 0.5 * l2_norm_sq(state.u) + 0.5 * elastic_form(v, lame, stencils) + state.weighted_l2
    rho = init.u1.data + V * init.u0.data
    rhs = 0.5 * l2_norm_sq(init.u0) + float((rho * v.data).sum()) * cell
    return lhs, rhs, identity_gap(lhs, rhs)


def identity_gap(lhs: float, rhs: float) -> float:
    scale = max(abs(lhs), abs(rhs))
    gap = abs(lhs - rhs)
    return gap / scale if scale > 0 else gap


def observed_order(coarse: float, fine: float, ratio: float = 2.0) -> float:
    """Convergence order from errors on a refinement pair."""
    return math.log(coarse / fine) / math.log(ratio)
