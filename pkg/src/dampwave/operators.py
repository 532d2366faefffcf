"""Second-order centred lattice operators.

Fields are treated as zero outside the grid (one-node zero halo), which is
exact for the simulator because the grid is sized past the propagation
front.  Mixed derivatives use the four-corner cross stencil, so the discrete
elastic operator is symmetric and negative semidefinite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import Grid2D, LameParams, VectorField2


@dataclass(frozen=True)
class StencilSet:
    dx: float

    @property
    def second(self) -> float:
        """Weight of the three-point second difference."""
        return 1.0 / (self.dx * self.dx)

    @property
    def mixed(self) -> float:
        """Weight of the four-corner mixed difference."""
        return 0.25 / (self.dx * self.dx)

    @property
    def first(self) -> float:
        """Weight of the centred first difference."""
        return 0.5 / self.dx

    @classmethod
    def for_grid(cls, grid: Grid2D) -> StencilSet:
        return cls(grid.dx)

    def check(self, grid: Grid2D) -> None:
        if grid.dx != self.dx:
            raise ValueError(f"stencils built for dx={self.dx}, field grid has dx={grid.dx}")


def pad(data: np.ndarray) -> np.ndarray:
    """Copy a ``(..., n, n)`` array into a zero-haloed ``(..., n+2, n+2)`` one."""
    out = np.zeros(data.shape[:-2] + (data.shape[-2] + 2, data.shape[-1] + 2))
    out[..., 1:-1, 1:-1] = data
    return out


def _d1(p: np.ndarray, axis: int, w: float) -> np.ndarray:
    # centred first difference of a padded array, evaluated on the interior
    if axis == 0:
        return (p[..., 2:, 1:-1] - p[..., :-2, 1:-1]) * w
    return (p[..., 1:-1, 2:] - p[..., 1:-1, :-2]) * w


def apply_elastic(u: VectorField2, lame: LameParams, stencils: StencilSet) -> VectorField2:
    """``a^2 Lap u + (b^2 - a^2) grad div u`` on every node."""
    stencils.check(u.grid)
    n = u.grid.n
    src = pad(u.data)
    out = np.zeros_like(src)
    kernels.elastic_apply(src, out, lame.a ** 2, lame.coupling, stencils.dx, 1, n + 1, 1, n + 1)
    return VectorField2(out[:, 1:-1, 1:-1].copy(), u.grid)


def divergence(u: VectorField2, stencils: StencilSet) -> np.ndarray:
    stencils.check(u.grid)
    p = pad(u.data)
    return _d1(p[0], 0, stencils.first) + _d1(p[1], 1, stencils.first)


def gradient_energy_density(u: VectorField2, stencils: StencilSet) -> np.ndarray:
    """Nodewise ``|grad u1|^2 + |grad u2|^2`` from centred differences."""
    stencils.check(u.grid)
    p = pad(u.data)
    total = np.zeros((u.grid.n, u.grid.n))
    for axis in (0, 1):
        total += (_d1(p, axis, stencils.first) ** 2).sum(axis=0)
    return total


def laplacian(f: np.ndarray, stencils: StencilSet) -> np.ndarray:
    """Five-point Laplacian of a scalar ``(n, n)`` or stacked ``(k, n, n)`` lattice."""
    p = pad(np.asarray(f, dtype=float))
    c = p[..., 1:-1, 1:-1]
    return (p[..., 2:, 1:-1] + p[..., :-2, 1:-1] + p[..., 1:-1, 2:] + p[..., 1:-1, :-2]
            - 4.0 * c) * stencils.second


def elastic_form(u: VectorField2, lame: LameParams, stencils: StencilSet) -> float:
    """Discrete ``int a^2|grad u|^2 + (b^2-a^2)(div u)^2 dx``.

    Evaluated as ``-<L_h u, u>``, the quadratic form of the discrete elastic
    operator, so energies built from it are the ones the time stepper
    actually balances.
    """
    Lu = apply_elastic(u, lame, stencils)
    return -float(np.sum(Lu.data * u.data)) * stencils.dx ** 2


def centered_elastic_form(u: VectorField2, lame: LameParams, stencils: StencilSet) -> float:
    """Same integral with centred first differences for both gradient and divergence."""
    density = (lame.a ** 2 * gradient_energy_density(u, stencils)
               + lame.coupling * divergence(u, stencils) ** 2)
    return float(density.sum()) * stencils.dx ** 2
