"""Late-time rates: power-law fits, bounded-ratio checks of O(.) envelopes,
the duality estimate for ``rho . v`` and the per-case verdicts.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import Case, SimConfig
from .operators import StencilSet, gradient_energy_density
from .potential import QUAD_SLACK, SourceDensity, disk_energy, ring_energies

DEFAULT_TOL = 1.5


def _window_mask(t: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    lo, hi = window
    if not hi >= 2.0 * lo:
        raise ValueError(f"window [{lo}, {hi}] spans less than one octave")
    mask = (t >= lo - 1e-9 * hi) & (t <= hi + 1e-9 * hi)
    if mask.sum() < 2:
        raise ValueError(f"fewer than two samples in window [{lo}, {hi}]")
    return mask


def fit_decay(t, E, window: tuple[float, float], log_correction: bool = False) -> float:
    """Least-squares decay exponent ``p`` of ``E ~ t^-p`` (``t^-p log t`` when corrected)."""
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    mask = _window_mask(t, window)
    tw, Ew = t[mask], E[mask]
    if np.any(Ew <= 0):
        raise ValueError("nonpositive values in the fit window; the run has decayed to roundoff")
    y = np.log(Ew)
    if log_correction:
        if np.any(tw <= 1.0):
            raise ValueError("log correction needs t > 1 throughout the window")
        y = y - np.log(np.log(tw))
    slope = np.polyfit(np.log(tw), y, 1)[0]
    return float(-slope)


@dataclass
class BoundedRatio:
    t: list[float]
    ratio: list[float]
    first_half_max: float
    end: float
    growth: float
    verdict: bool


def bounded_ratio(t, q, envelope, window: tuple[float, float],
                  tol: float = DEFAULT_TOL) -> BoundedRatio:
    """``r = q / envelope`` on the window; passes iff ``r(t_hi) <= tol * max r`` over the first half."""
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=float)
    env = np.asarray(envelope, dtype=float)
    mask = _window_mask(t, window)
    if np.any(env[mask] <= 0):
        raise ValueError("envelope must be positive on the window")
    tw = t[mask]
    r = q[mask] / env[mask]
    mid = 0.5 * (window[0] + window[1])
    head = r[tw <= mid]
    first = float(head.max()) if head.size else float(r[0])
    end = float(r[-1])
    growth = end / first if first > 0 else (0.0 if end == 0 else math.inf)
    return BoundedRatio(tw.tolist(), r.tolist(), first, end, growth, bool(end <= tol * first))


# -- duality estimate -----------------------------------------------------------


@dataclass
class DualityCheck:
    t: float
    eps: float
    lhs: float
    potential_term: float
    gradient_term: float
    rhs: float
    slack: float
    verdict: bool


def duality_check(t: float, v, src: SourceDensity, b: float, eps: float,
                  tol: float = QUAD_SLACK) -> DualityCheck:
    """``int |rho . v| <= (1/eps) int_{|x|<=2L+bt} |grad h|^2 + eps int |grad v|^2``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if v.grid != src.grid:
        raise ValueError("v and the source must share a lattice")
    cell = v.grid.cell_area
    lhs = float(np.abs((src.rho.data * v.data).sum(axis=0)).sum()) * cell
    L = src.L
    h_energy = disk_energy(src, 2.0 * L) + float(ring_energies(src, 2.0 * L, [2.0 * L + b * t])[0])
    grad_v = float(gradient_energy_density(v, StencilSet.for_grid(v.grid)).sum()) * cell
    pot, gv = h_energy / eps, eps * grad_v
    rhs = pot + gv
    return DualityCheck(t, eps, lhs, pot, gv, rhs, (rhs - lhs) / rhs if rhs > 0 else 0.0,
                        bool(lhs <= rhs * (1.0 + tol)))


# -- per-case verdicts ------------------------------------------------------------


@dataclass
class RateReport:
    case: str
    window: tuple[float, float]
    fitted_exponent: float | None
    envelope_exponent: float | None
    boundedness_ratios: dict[str, BoundedRatio]
    verdicts: dict[str, bool]
    constants_observed: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return asdict(self)

    def summary(self) -> str:
        lines = [f"case {self.case}  window [{self.window[0]:g}, {self.window[1]:g}]"]
        if self.fitted_exponent is not None:
            lines.append(f"  fitted exponent {self.fitted_exponent:.4f}"
                         + (f" (envelope {self.envelope_exponent:g})"
                            if self.envelope_exponent is not None else ""))
        for name, br in self.boundedness_ratios.items():
            status = "pass" if br.verdict else "FAIL"
            lines.append(f"  {name:<28s} growth {br.growth:8.4f}  {status}")
        return "\n".join(lines)


def rate_verdicts(series: dict, config: SimConfig, src: SourceDensity, l2_u0: float,
                  window: tuple[float, float] | None = None,
                  tol: float = DEFAULT_TOL) -> RateReport:
    """Bounded-ratio verdicts for the rate claims attached to ``config.case``.

    ``series`` needs ``t``, ``E_u``, ``l2_sq`` and ``weighted_l2``.
    """
    for key in ("t", "E_u", "l2_sq", "weighted_l2"):
        if key not in series:
            raise KeyError(f"series lacks {key!r}")
    t = np.asarray(series["t"], dtype=float)
    E = np.asarray(series["E_u"], dtype=float)
    l2 = np.asarray(series["l2_sq"], dtype=float)
    wl2 = np.asarray(series["weighted_l2"], dtype=float)
    T = float(t[-1])
    window = window or (T / 4.0, T)
    L, b = config.init.L, config.lame.b
    V0 = config.damping.V0
    A = l2_u0 + src.linf_norm ** 2
    B = src.l1_norm ** 2
    log_env = np.log(2.0 * L + b * t)
    ratios: dict[str, BoundedRatio] = {}
    exponent = None
    zero = not np.any(E)

    with np.errstate(divide="ignore", invalid="ignore"):
        if config.case is Case.STRONG:
            exponent = 2.0
        elif config.case is Case.INTERMEDIATE:
            exponent = V0 / b - config.delta
        if exponent is not None:
            env = t ** (-exponent) * np.log(t)
            ratios["energy_decay"] = bounded_ratio(t, E, env, window, tol)
            growth_env = A + B * log_env
            if A == 0.0 and B == 0.0:
                # zero data: the solution vanishes, any positive envelope gives ratio 0
                growth_env = np.ones_like(t)
            ratios["l2_growth"] = bounded_ratio(t, l2 + wl2, growth_env, window, tol)
        elif config.case is Case.UNDAMPED:
            ratios["l2_growth"] = bounded_ratio(t, l2, log_env, window, tol)

    fitted = None
    if not zero and config.case is not Case.UNDAMPED:
        try:
            fitted = fit_decay(t, E, window, log_correction=True)
        except ValueError:
            fitted = None
    verdicts = {name: br.verdict for name, br in ratios.items()}
    constants = {"A": A, "B": B, "E_u0": float(E[0]), "l2_u0": l2_u0,
                 "rho_l1": src.l1_norm, "rho_linf": src.linf_norm}
    for name, br in ratios.items():
        constants[f"{name}_max_ratio"] = float(max(br.ratio)) if br.ratio else 0.0
    return RateReport(config.case.value, (float(window[0]), float(window[1])), fitted, exponent,
                      ratios, verdicts, constants)
