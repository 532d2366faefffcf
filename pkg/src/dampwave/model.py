"""Domain types, run configuration, grid sizing and sampling of the damping
coefficient and initial data.

Everything here is immutable after construction.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

# float64 lattices a run keeps alive at once (three padded time levels, v,
# damping, its inverse denominator, scratch); used for the memory estimate
ARRAYS_PER_RUN = 13


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class GridTooLarge(ConfigError):
    """The requested grid exceeds the memory cap."""


class Case(str, enum.Enum):
    STRONG = "StrongDamping"
    INTERMEDIATE = "IntermediateDamping"
    UNDAMPED = "Undamped"
    WEAK = "WeakDamping"  # 0 < V0 <= b: runnable, no rate claim attached


@dataclass(frozen=True)
class LameParams:
    a: float  # S-wave speed
    b: float  # P-wave speed

    def __post_init__(self):
        if not (0.0 < self.a < self.b):
            raise ConfigError(f"need 0 < a < b, got a={self.a}, b={self.b}")

    @property
    def coupling(self) -> float:
        return self.b * self.b - self.a * self.a


@dataclass(frozen=True, eq=False)
class DampingProfile:
    kind: str  # "zero" | "critical" | "tabulated"
    V0: float = 0.0
    field: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "critical", "tabulated"):
            raise ConfigError(f"unknown damping kind {self.kind!r}")
        if self.kind != "zero" and not self.V0 > 0:
            raise ConfigError(f"{self.kind} damping needs V0 > 0")
        if self.kind == "tabulated" and self.field is None:
            raise ConfigError("tabulated damping needs a field")

    @classmethod
    def critical(cls, V0: float) -> DampingProfile:
        return cls("critical", float(V0))

    @classmethod
    def zero(cls) -> DampingProfile:
        return cls("zero", 0.0)


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell-centred lattice on ``[-R, R]^2`` with ``n`` nodes per axis."""

    R: float
    dx: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise ConfigError(f"grid needs at least 16 points per axis, got {self.n}")
        if not math.isclose(self.n * self.dx, 2.0 * self.R, rel_tol=1e-12):
            raise ConfigError("grid requires n * dx == 2R")

    @cached_property
    def coords(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.dx - self.R

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.coords, self.coords, indexing="ij")

    @cached_property
    def radius(self) -> np.ndarray:
        X, Y = self.mesh
        return np.sqrt(X * X + Y * Y)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    def zeros(self) -> np.ndarray:
        return np.zeros((2, self.n, self.n))


@dataclass(frozen=True)
class RegionOmega:
    """The disk ``|x| <= L + b t`` that contains the solution at time ``t``."""

    t: float
    L: float
    b: float

    @property
    def radius(self) -> float:
        return self.L + self.b * self.t

    def mask(self, grid: Grid2D) -> np.ndarray:
        return grid.radius <= self.radius

    def contains(self, other: RegionOmega) -> bool:
        return other.radius <= self.radius


@dataclass(frozen=True, eq=False)
class VectorField2:
    """Two-component field on a grid; ``data`` has shape ``(2, n, n)``."""

    data: np.ndarray
    grid: Grid2D

    def __post_init__(self):
        n = self.grid.n
        if self.data.shape != (2, n, n):
            raise ValueError(f"field shape {self.data.shape} does not match grid ({n}x{n})")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field contains non-finite entries")

    @property
    def comp1(self) -> np.ndarray:
        return self.data[0]

    @property
    def comp2(self) -> np.ndarray:
        return self.data[1]

    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.data[0] ** 2 + self.data[1] ** 2)

    def __add__(self, other: VectorField2) -> VectorField2:
        require_same_grid(self, other)
        return VectorField2(self.data + other.data, self.grid)

    def __mul__(self, alpha: float) -> VectorField2:
        return VectorField2(alpha * self.data, self.grid)

    __rmul__ = __mul__


def require_same_grid(*fields: VectorField2) -> Grid2D:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError(f"grid mismatch: {f.grid} vs {grid}")
    return grid


@dataclass(frozen=True)
class Bump:
    """Compactly supported bump ``amplitude * phi(|x - center| / radius)``.

    ``profile`` is ``"poly4"`` for ``(1 - s^2)^4`` (C^3) or ``"smooth"`` for
    ``exp(1 - 1/(1 - s^2))`` (C^infinity); both equal 1 at the centre.
    """

    center: tuple[float, float]
    radius: float
    amplitude: tuple[float, float]
    profile: str = "poly4"

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError("bump radius must be positive")
        if self.profile not in ("poly4", "smooth"):
            raise ConfigError(f"unknown bump profile {self.profile!r}")

    @property
    def reach(self) -> float:
        return math.hypot(*self.center) + self.radius

    def shape(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        s2 = ((X - self.center[0]) ** 2 + (Y - self.center[1]) ** 2) / self.radius ** 2
        out = np.zeros_like(s2)
        inside = s2 < 1.0
        if self.profile == "poly4":
            out[inside] = (1.0 - s2[inside]) ** 4
        else:
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
        return out


@dataclass(frozen=True)
class InitSpec:
    L: float
    u0: tuple[Bump, ...] = ()
    u1: tuple[Bump, ...] = ()

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigError("support radius L must be positive")


@dataclass(frozen=True, eq=False)
class InitialData:
    u0: VectorField2
    u1: VectorField2
    L: float


@dataclass(frozen=True)
class Suites:
    multiplier: bool = True
    potential: bool = True


@dataclass(frozen=True, eq=False)
class SimConfig:
    lame: LameParams
    damping: DampingProfile
    init: InitSpec
    T: float
    cfl_safety: float = 0.5
    t0: float = 0.0
    delta: float = 0.1
    case: Case = Case.STRONG
    output_stride: int = 10
    grid_margin: float = 1.0
    resolution: float = 10.0  # points per unit length
    memory_cap_mb: float = 4096.0
    suites: Suites = field(default_factory=Suites)
    source: dict | None = None  # the JSON document this config was read from

    def __post_init__(self):
        if self.T < 0:
            raise ConfigError("horizon T must be nonnegative")
        if not (0.0 < self.cfl_safety < 1.0):
            raise ConfigError("cfl_safety must lie in (0, 1)")
        if self.output_stride < 1:
            raise ConfigError("output_stride must be >= 1")
        if not self.resolution > 0:
            raise ConfigError("resolution must be positive")
        if self.t0 < 0:
            raise ConfigError("t0 must be nonnegative")
        V0, b = self.damping.V0, self.lame.b
        damped = self.damping.kind != "zero"
        if self.case is Case.STRONG:
            if not (damped and V0 > 2 * b):
                raise ConfigError("StrongDamping requires V0 > 2b")
        elif self.case is Case.INTERMEDIATE:
            if not (damped and b < V0 <= 2 * b):
                raise ConfigError("IntermediateDamping requires b < V0 <= 2b")
            if not (0.0 < self.delta < V0 / b - 1.0):
                raise ConfigError("IntermediateDamping requires 0 < delta < V0/b - 1")
        elif self.case is Case.UNDAMPED:
            if damped:
                raise ConfigError("Undamped case requires zero damping")
        elif self.case is Case.WEAK:
            if not (damped and V0 <= b):
                raise ConfigError("WeakDamping requires 0 < V0 <= b")

    def replace(self, **changes) -> SimConfig:
        changes.setdefault("source", None)
        return dataclasses.replace(self, **changes)

    # -- JSON ---------------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> SimConfig:
        _check_keys(doc, _TOP_KEYS, _TOP_REQUIRED, "config")
        lame = doc["lame"]
        _check_keys(lame, {"a", "b"}, {"a", "b"}, "lame")
        damping = _damping_from_dict(doc["damping"], base_dir)
        init = _init_from_dict(doc["init"])
        suites = doc.get("suites", {})
        _check_keys(suites, {"multiplier", "potential"}, set(), "suites")
        try:
            case = Case(doc.get("case", Case.STRONG.value))
        except ValueError:
            raise ConfigError(f"unknown case {doc.get('case')!r}") from None
        kwargs = {k: doc[k] for k in _SCALAR_KEYS if k in doc}
        if "output_stride" in kwargs:
            kwargs["output_stride"] = int(kwargs["output_stride"])
        return cls(
            lame=LameParams(float(lame["a"]), float(lame["b"])),
            damping=damping,
            init=init,
            case=case,
            suites=Suites(**{k: bool(v) for k, v in suites.items()}),
            source=doc,
            **kwargs,
        )

    @classmethod
    def from_json(cls, path: str | Path) -> SimConfig:
        path = Path(path)
        doc = json.loads(path.read_text())
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        return cls.from_dict(doc, base_dir=path.parent)

    def to_dict(self) -> dict:
        """JSON-ready echo of this configuration."""
        if self.source is not None:
            return json.loads(json.dumps(self.source))
        damping: dict[str, Any] = {"kind": self.damping.kind}
        if self.damping.kind != "zero":
            damping["V0"] = self.damping.V0
        if self.damping.kind == "tabulated":
            damping["field"] = np.asarray(self.damping.field).tolist()
        return {
            "lame": {"a": self.lame.a, "b": self.lame.b},
            "damping": damping,
            "init": {
                "L": self.init.L,
                "u0": [_bump_to_dict(bp) for bp in self.init.u0],
                "u1": [_bump_to_dict(bp) for bp in self.init.u1],
            },
            "T": self.T,
            "cfl_safety": self.cfl_safety,
            "t0": self.t0,
            "delta": self.delta,
            "case": self.case.value,
            "output_stride": self.output_stride,
            "grid_margin": self.grid_margin,
            "resolution": self.resolution,
            "memory_cap_mb": self.memory_cap_mb,
            "suites": dataclasses.asdict(self.suites),
        }


_SCALAR_KEYS = ("T", "cfl_safety", "t0", "delta", "output_stride", "grid_margin",
                "resolution", "memory_cap_mb")
_TOP_KEYS = {"lame", "damping", "init", "case", "suites", *_SCALAR_KEYS}
_TOP_REQUIRED = {"lame", "damping", "init", "T"}


def _check_keys(doc: Any, allowed: set, required: set, where: str) -> None:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"{where}: missing key(s) {sorted(missing)}")


def _damping_from_dict(doc: dict, base_dir: Path | None) -> DampingProfile:
    _check_keys(doc, {"kind", "V0", "field"}, {"kind"}, "damping")
    kind = doc["kind"]
    V0 = float(doc.get("V0", 0.0))
    values = None
    if kind == "tabulated":
        raw = doc.get("field")
        if isinstance(raw, str):
            path = Path(raw)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            values = np.load(path)
        elif raw is not None:
            values = np.asarray(raw, dtype=float)
    return DampingProfile(kind, V0, values)


def _bump_from_dict(doc: dict) -> Bump:
    _check_keys(doc, {"center", "radius", "amplitude", "profile"},
                {"center", "radius", "amplitude"}, "bump")
    return Bump(
        center=(float(doc["center"][0]), float(doc["center"][1])),
        radius=float(doc["radius"]),
        amplitude=(float(doc["amplitude"][0]), float(doc["amplitude"][1])),
        profile=doc.get("profile", "poly4"),
    )


def _bump_to_dict(bump: Bump) -> dict:
    return {"center": list(bump.center), "radius": bump.radius,
            "amplitude": list(bump.amplitude), "profile": bump.profile}


def _init_from_dict(doc: dict) -> InitSpec:
    _check_keys(doc, {"L", "u0", "u1"}, {"L"}, "init")
    return InitSpec(
        L=float(doc["L"]),
        u0=tuple(_bump_from_dict(d) for d in doc.get("u0", [])),
        u1=tuple(_bump_from_dict(d) for d in doc.get("u1", [])),
    )


# -- operations -------------------------------------------------------------


def build_grid(config: SimConfig, horizon: float | None = None) -> Grid2D:
    """Size the lattice so that the solution cannot reach the edge before T.

    The half-width is ``L + b T + margin`` (margin at least four cells),
    rounded up to a whole number of cells so every grid built at the same
    resolution shares node positions ``(k + 1/2) dx``.
    """
    T = config.T if horizon is None else horizon
    L = config.init.L
    if not T > 0:
        raise ConfigError(f"grid horizon must be positive, got T={T}")
    if not L > 0:
        raise ConfigError("support radius L must be positive")
    dx = 1.0 / config.resolution
    margin = max(config.grid_margin, 4.0 * dx)
    cells = math.ceil((L + config.lame.b * T + margin) / dx - 1e-9)
    n = max(2 * cells, 16)
    grid = Grid2D(R=n * dx / 2.0, dx=dx, n=n)
    need_mb = ARRAYS_PER_RUN * (n + 2) ** 2 * 8 / 2 ** 20
    if need_mb > config.memory_cap_mb:
        raise GridTooLarge(
            f"grid {n}x{n} needs about {need_mb:.0f} MB, memory cap is {config.memory_cap_mb:g} MB")
    return grid


def critical_damping(V0: float, r):
    """``V0 / sqrt(1 + r^2)``: smooth, at most ``V0``, at least ``V0 / (1 + r)``."""
    r = np.asarray(r, dtype=float)
    return V0 / np.sqrt(1.0 + r * r)


def sample_damping(profile: DampingProfile, grid: Grid2D) -> np.ndarray:
    """Damping coefficient at every node.

    Critical and tabulated profiles are checked against
    ``V0 / (1 + |x|) <= V(x)`` nodewise.
    """
    if profile.kind == "zero":
        return np.zeros((grid.n, grid.n))
    r = grid.radius
    if profile.kind == "critical":
        V = critical_damping(profile.V0, r)
    else:
        V = np.asarray(profile.field, dtype=float)
        if V.shape != (grid.n, grid.n):
            raise ConfigError(f"tabulated damping has shape {V.shape}, grid is {grid.n}x{grid.n}")
    lower = profile.V0 / (1.0 + r)
    bad = ~(V >= lower * (1.0 - 1e-12)) | ~np.isfinite(V)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        x, y = grid.coords[i], grid.coords[j]
        raise ConfigError(
            f"damping violates V0/(1+|x|) <= V(x) at node ({i}, {j}), x=({x:.6g}, {y:.6g}): "
            f"V={V[i, j]:.6g} < {lower[i, j]:.6g}")
    return V


def sample_initial_data(spec: InitSpec, grid: Grid2D) -> InitialData:
    """Superpose the bump families for displacement and velocity."""
    for bump in (*spec.u0, *spec.u1):
        if bump.reach > spec.L * (1.0 + 1e-12):
            raise ConfigError(
                f"bump at {bump.center} with radius {bump.radius} leaves the disk |x| <= {spec.L}")
    X, Y = grid.mesh
    fields = []
    for bumps in (spec.u0, spec.u1):
        data = grid.zeros()
        for bump in bumps:
            phi = bump.shape(X, Y)
            data[0] += bump.amplitude[0] * phi
            data[1] += bump.amplitude[1] * phi
        fields.append(VectorField2(data, grid))
    outside = grid.radius > spec.L
    if np.any(fields[0].data[:, outside]) or np.any(fields[1].data[:, outside]):
        raise ConfigError("sampled initial data is nonzero outside |x| <= L")
    return InitialData(fields[0], fields[1], spec.L)
