"""Logarithmic (Newton) potential of the source ``rho = u1 + V u0`` and the
estimates built on its gradient.

``h(x) = -(1/2pi) int log|x - y| rho(y) dy`` is summed directly over source
cells.  Cells at distance ``>= 2 dx`` use the midpoint rule; nearer cells use
the exact integral of the kernel over the square, so evaluation at a source
node is finite.  Off-lattice integrals of ``|grad h|^2`` use polar
Gauss-Legendre quadrature (log-spaced in the radius for the far rings).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .model import Grid2D, InitialData, VectorField2
from .operators import StencilSet, laplacian

NEAR_CELLS = 2.0
QUAD_SLACK = 0.05


@dataclass(frozen=True, eq=False)
class SourceDensity:
    rho: VectorField2
    L: float

    def __post_init__(self):
        outside = self.rho.grid.radius > self.L
        if np.any(self.rho.data[:, outside]):
            raise ValueError(f"source is nonzero outside |x| <= {self.L}")

    @classmethod
    def from_initial(cls, init: InitialData, V: np.ndarray) -> SourceDensity:
        return cls(VectorField2(init.u1.data + V * init.u0.data, init.u0.grid), init.L)

    @property
    def grid(self) -> Grid2D:
        return self.rho.grid

    @property
    def l1_norm(self) -> float:
        return float(self.rho.magnitude().sum()) * self.grid.cell_area

    @property
    def linf_norm(self) -> float:
        return float(self.rho.magnitude().max())

    @property
    def is_zero(self) -> bool:
        return not np.any(self.rho.data)

    def nodes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coordinates and values of the nonzero source nodes."""
        mask = np.any(self.rho.data != 0.0, axis=0)
        X, Y = self.grid.mesh
        return (np.ascontiguousarray(X[mask]), np.ascontiguousarray(Y[mask]),
                np.ascontiguousarray(self.rho.data[:, mask]))


@dataclass(eq=False)
class PotentialField:
    """``h`` and ``grad h`` at a set of evaluation points.

    ``grad[k, d]`` is the derivative of component ``k`` along axis ``d``.
    When evaluated on a lattice, ``grid`` is set and the point arrays are the
    raveled lattice.
    """

    x: np.ndarray
    y: np.ndarray
    h: np.ndarray       # (2, P)
    grad: np.ndarray    # (2, 2, P)
    grid: Grid2D | None = None

    def grad_magnitude(self) -> np.ndarray:
        """``|grad h| = (sum_{k,d} (d_d h^k)^2)^{1/2}`` per point."""
        return np.sqrt((self.grad ** 2).sum(axis=(0, 1)))

    def h_field(self) -> VectorField2:
        if self.grid is None:
            raise ValueError("potential was not evaluated on a lattice")
        n = self.grid.n
        return VectorField2(self.h.reshape(2, n, n), self.grid)


def newton_potential_at(src: SourceDensity, x, y) -> PotentialField:
    x = np.ascontiguousarray(np.ravel(x), dtype=float)
    y = np.ascontiguousarray(np.ravel(y), dtype=float)
    if src.is_zero:
        return PotentialField(x, y, np.zeros((2, x.size)), np.zeros((2, 2, x.size)))
    sx, sy, vals = src.nodes()
    dx = src.grid.dx
    h, g = kernels.potential_direct(sx, sy, vals, x, y, dx, NEAR_CELLS * dx)
    h, g = np.asarray(h), np.asarray(g)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(g))):
        raise FloatingPointError("non-finite potential values")
    return PotentialField(x, y, h, g)


def newton_potential(src: SourceDensity, grid: Grid2D | None = None) -> PotentialField:
    """Potential on the nodes of ``grid`` (default: the source lattice)."""
    grid = src.grid if grid is None else grid
    X, Y = grid.mesh
    field_ = newton_potential_at(src, X, Y)
    field_.grid = grid
    return field_


def poisson_residual(field_: PotentialField, src: SourceDensity) -> tuple[float, bool]:
    """``||-Lap_h h - rho|| / ||rho||`` in discrete L2 over ``|x| <= L``.

    The lattice must be the source lattice.  Returns ``(value, flagged)``; a
    zero source yields the absolute residual with ``flagged = True``.
    """
    if field_.grid is None or field_.grid != src.grid:
        raise ValueError("Poisson residual needs h on the source lattice")
    if src.L + 2 * src.grid.dx > src.grid.R:
        raise ValueError("source lattice needs a halo of at least two cells past L")
    h = field_.h_field().data
    lap = laplacian(h, StencilSet.for_grid(src.grid))
    inside = src.grid.radius <= src.L
    diff = (-lap - src.rho.data)[:, inside]
    num = math.sqrt(float((diff ** 2).sum()))
    den = math.sqrt(float((src.rho.data[:, inside] ** 2).sum()))
    if den == 0.0:
        return num, True
    return num / den, False


# -- quadrature helpers -------------------------------------------------------


def _gauss(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w


def _angles(m: int) -> np.ndarray:
    return (np.arange(m) + 0.5) * (2.0 * math.pi / m)


def _ring_energy(src: SourceDensity, r_nodes: np.ndarray, r_weights: np.ndarray,
                 n_theta: int) -> tuple[np.ndarray, np.ndarray]:
    """Angular integrals ``r int |grad h|^2 dtheta`` at each radius, times the radial weights."""
    th = _angles(n_theta)
    R, TH = np.meshgrid(r_nodes, th, indexing="ij")
    pf = newton_potential_at(src, R * np.cos(TH), R * np.sin(TH))
    g2 = (pf.grad_magnitude() ** 2).reshape(R.shape)
    per_r = g2.sum(axis=1) * (2.0 * math.pi / n_theta) * r_nodes
    return per_r * r_weights, pf.grad_magnitude().reshape(R.shape)


def disk_energy(src: SourceDensity, radius: float, n_r: int = 48, n_theta: int = 96) -> float:
    """``int_{|x| <= radius} |grad h|^2`` with Gauss-Legendre panels split at ``L``."""
    if src.is_zero:
        return 0.0
    edges = [0.0, min(src.L, radius)] + ([radius] if radius > src.L else [])
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        r, w = _gauss(a, b, n_r)
        total += float(_ring_energy(src, r, w, n_theta)[0].sum())
    return total


def ring_energies(src: SourceDensity, r_inner: float, r_outer, per_unit_log: int = 16,
                  n_theta: int = 64) -> np.ndarray:
    """``int_{r_inner <= |x| <= r}|grad h|^2`` for each ``r`` in ``r_outer`` (sorted ascending).

    Radii are integrated in ``s = log r`` so the ``1/r`` far field costs a
    fixed number of nodes per e-fold.
    """
    r_outer = np.asarray(r_outer, dtype=float)
    if np.any(np.diff(r_outer) < 0) or np.any(r_outer < r_inner):
        raise ValueError("outer radii must be ascending and >= the inner radius")
    if src.is_zero:
        return np.zeros_like(r_outer)
    out = np.zeros_like(r_outer)
    acc, s_prev = 0.0, math.log(r_inner)
    for i, r in enumerate(r_outer):
        s = math.log(r)
        if s > s_prev:
            n = max(4, int(math.ceil((s - s_prev) * per_unit_log)))
            sn, sw = _gauss(s_prev, s, n)
            rn = np.exp(sn)
            acc += float(_ring_energy(src, rn, sw * rn, n_theta)[0].sum())
        out[i] = acc
        s_prev = max(s, s_prev)
    return out


# -- bound suite --------------------------------------------------------------


@dataclass
class FarFieldResult:
    sup: float
    bound: float
    verdict: bool


def far_field_bound(src: SourceDensity, r_max: float, n_r: int = 24, n_theta: int = 64,
                    tol: float = QUAD_SLACK) -> FarFieldResult:
    """``sup_{2L <= |x| <= r_max} |x| |grad h(x)|`` against ``(1/pi) ||rho||_1``."""
    bound = src.l1_norm / math.pi
    if src.is_zero:
        return FarFieldResult(0.0, bound, True)
    r = np.geomspace(2.0 * src.L, max(r_max, 2.0 * src.L), n_r)
    th = _angles(n_theta)
    R, TH = np.meshgrid(r, th, indexing="ij")
    pf = newton_potential_at(src, R * np.cos(TH), R * np.sin(TH))
    sup = float((R.ravel() * pf.grad_magnitude()).max())
    return FarFieldResult(sup, bound, sup <= bound * (1.0 + tol))


@dataclass
class GrowthResult:
    I_h: float
    I_h_bound: float             # 64 pi L^4 ||rho||_inf^2
    grad_sup: float              # max |grad h| on |x| <= 2L
    grad_sup_bound: float        # 4 L ||rho||_inf
    t_samples: list[float]
    ring: list[float]            # int_{2L <= |x| <= 2L + bt} |grad h|^2
    total: list[float]           # I_h + ring
    envelope: list[float]        # I_h + (2/pi) ||rho||_1^2 log(2L + bt)
    verdicts: dict[str, bool] = field(default_factory=dict)


def ih_and_growth(src: SourceDensity, b: float, t_samples, tol: float = QUAD_SLACK) -> GrowthResult:
    L = src.L
    t = np.sort(np.asarray(t_samples, dtype=float))
    rho_inf, rho_1 = src.linf_norm, src.l1_norm
    I_h = disk_energy(src, 2.0 * L)
    ring = ring_energies(src, 2.0 * L, 2.0 * L + b * t)
    env = I_h + 2.0 * math.pi * (1.0 / math.pi) ** 2 * rho_1 ** 2 * np.log(2.0 * L + b * t)
    total = I_h + ring
    # pointwise scan on a lattice over the disk |x| <= 2L
    if src.is_zero:
        grad_sup = 0.0
    else:
        dx = src.grid.dx
        c = (np.arange(-math.ceil(2 * L / dx), math.ceil(2 * L / dx)) + 0.5) * dx
        X, Y = np.meshgrid(c, c, indexing="ij")
        inside = X * X + Y * Y <= (2 * L) ** 2
        grad_sup = float(newton_potential_at(src, X[inside], Y[inside]).grad_magnitude().max())
    res = GrowthResult(
        I_h=I_h, I_h_bound=64.0 * math.pi * L ** 4 * rho_inf ** 2,
        grad_sup=grad_sup, grad_sup_bound=4.0 * L * rho_inf,
        t_samples=t.tolist(), ring=ring.tolist(), total=total.tolist(), envelope=env.tolist(),
    )
    res.verdicts = {
        "log_envelope": bool(np.all(total <= env * (1.0 + tol) + 1e-300)),
        "pointwise_gradient": grad_sup <= res.grad_sup_bound * (1.0 + tol),
        "I_h_bound": I_h <= res.I_h_bound * (1.0 + tol),
    }
    return res


def potential_grid(L: float, dx: float, halo_cells: int = 4) -> Grid2D:
    """Smallest lattice with spacing ``dx`` covering ``|x| <= L`` plus a halo.

    Node positions coincide with every other lattice of the same spacing.
    """
    cells = math.ceil(L / dx - 1e-9) + halo_cells
    n = max(2 * cells, 16)
    return Grid2D(R=n * dx / 2.0, dx=dx, n=n)


def bound_suite(src: SourceDensity, b: float, t_samples, r_max: float | None = None,
                refine: SourceDensity | None = None) -> dict:
    """All potential checks for one source, as a JSON-ready dict.

    ``refine`` is the same source sampled at half the spacing; when given,
    the Poisson residual's observed order is reported too.
    """
    t_samples = list(t_samples)
    r_max = r_max if r_max is not None else 2.0 * src.L + b * max(t_samples, default=0.0)
    pf = newton_potential(src)
    pres, flagged = poisson_residual(pf, src)
    far = far_field_bound(src, r_max)
    growth = ih_and_growth(src, b, t_samples)
    report = {
        "source": {"L": src.L, "dx": src.grid.dx, "l1_norm": src.l1_norm,
                   "linf_norm": src.linf_norm},
        "poisson_residual": pres,
        "poisson_residual_absolute": flagged,
        "far_field": asdict(far),
        "growth": asdict(growth),
    }
    verdicts = {
        "far_field_bound": far.verdict,
        **growth.verdicts,
    }
    if refine is not None:
        fine, _ = poisson_residual(newton_potential(refine), refine)
        report["poisson_residual_refined"] = fine
        order = math.log(pres / fine, 2.0) if pres > 0 and fine > 0 else math.nan
        report["poisson_order"] = order
    report["verdicts"] = verdicts
    report["passed"] = all(verdicts.values())
    return report


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n")
