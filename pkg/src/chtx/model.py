"""Model definitions for the three whole-space chemotaxis systems.

All three share the cell equation

    u_t = Δu - χ ∇·(u ∇v) + u (a - b u)

and differ in the signal equation:

    consumption:           τ v_t = Δv - u v
    parabolic production:  τ v_t = Δv - λ v + μ u
    elliptic production:       0 = Δv - λ v + μ u

The whole space is truncated to a periodic box [-L, L)^n.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_POINT_CAP = 1 << 24
DEFAULT_TOL_POS = 1e-10


class Variant(str, enum.Enum):
    CONSUMPTION = "consumption"
    PARABOLIC = "parabolic_production"
    ELLIPTIC = "elliptic_production"

    @classmethod
    def parse(cls, name: "str | Variant") -> "Variant":
        if isinstance(name, Variant):
            return name
        key = name.strip().lower().replace("-", "_")
        aliases = {
            "consumption": cls.CONSUMPTION,
            "parabolic": cls.PARABOLIC,
            "parabolicproduction": cls.PARABOLIC,
            "parabolic_production": cls.PARABOLIC,
            "elliptic": cls.ELLIPTIC,
            "ellipticproduction": cls.ELLIPTIC,
            "elliptic_production": cls.ELLIPTIC,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown model variant {name!r}") from None


class GridMismatchError(ValueError):
    """Fields or operators defined on different grids were combined."""


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one chemotaxis system.

    ``lam``, ``mu`` are only meaningful for the production variants and
    ``tau`` only for the parabolic ones; passing them to a variant that does
    not read them is rejected so that sweeps cannot silently vary a dead
    parameter.
    """

    variant: Variant
    chi: float
    a: float
    b: float
    lam: Optional[float] = None
    mu: Optional[float] = None
    tau: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        v = self.variant
        if not math.isfinite(self.chi):
            raise ValueError("chi must be finite")
        if not self.a >= 0:
            raise ValueError(f"a must be >= 0, got {self.a}")
        if not self.b >= 0:
            raise ValueError(f"b must be >= 0, got {self.b}")
        if v is Variant.CONSUMPTION:
            if self.lam is not None or self.mu is not None:
                raise ValueError("consumption model does not use lam/mu")
        else:
            for name in ("lam", "mu"):
                val = getattr(self, name)
                if val is None or not val > 0:
                    raise ValueError(f"{v.value} requires {name} > 0, got {val}")
        if v is Variant.ELLIPTIC:
            if self.tau is not None:
                raise ValueError("elliptic production model has no tau")
        elif self.tau is None or not self.tau > 0:
            raise ValueError(f"{v.value} requires tau > 0, got {self.tau}")

    @property
    def carrying_capacity(self) -> float:
        return self.a / self.b if self.b > 0 else math.inf

    def to_dict(self) -> dict:
        d = {"variant": self.variant.value, "chi": self.chi, "a": self.a, "b": self.b}
        for name in ("lam", "mu", "tau"):
            val = getattr(self, name)
            if val is not None:
                d[name] = val
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic tensor grid on [-L, L)^dim with N points per axis."""

    dim: int
    half_width: float
    points_per_dim: int
    point_cap: int = field(default=DEFAULT_POINT_CAP, compare=False, repr=False)

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        N = self.points_per_dim
        if N < 8 or not _is_pow2(N):
            raise ValueError(f"points_per_dim must be a power of two >= 8, got {N}")
        if N**self.dim > self.point_cap:
            raise ValueError(
                f"grid has {N**self.dim} points, above the cap of {self.point_cap}"
            )

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_dim

    @property
    def shape(self) -> tuple:
        return (self.points_per_dim,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_dim**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def axis(self) -> np.ndarray:
        N = self.points_per_dim
        return -self.half_width + self.spacing * np.arange(N)

    def coords(self) -> list:
        """Coordinate arrays, one per dimension, broadcast to ``shape``."""
        ax = self.axis()
        return list(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "half_width": self.half_width,
            "points_per_dim": self.points_per_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(**d)


@dataclass
class Field:
    """Real samples of a scalar function on a grid (row-major, shape grid.shape)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            if values.size == self.grid.size:
                values = values.reshape(self.grid.shape)
            else:
                raise GridMismatchError(
                    f"values of shape {values.shape} do not fit grid {self.grid.shape}"
                )
        self.values = values

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def sup(self) -> float:
        return float(np.max(self.values))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


def check_same_grid(*fields: Field) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {f.grid} vs {grid}")
    return grid


@dataclass
class State:
    """Simulation time plus cell density ``u`` and signal ``v``."""

    t: float
    u: Field
    v: Field
    blown_up: bool = False

    def __post_init__(self):
        check_same_grid(self.u, self.v)
        if self.t < 0:
            raise ValueError("t must be >= 0")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def copy(self) -> "State":
        return State(self.t, self.u.copy(), self.v.copy(), self.blown_up)

    def positivity_ok(self, tol_pos: float = DEFAULT_TOL_POS) -> bool:
        return bool(self.u.values.min() >= -tol_pos and self.v.values.min() >= -tol_pos)


def rhs_u(
    state: State,
    model: ModelSpec,
    grad_v: Sequence[Field],
    lap_u: Field,
    div_u_grad_v: Field,
) -> Field:
    """Pointwise Δu - χ ∇·(u∇v) + u(a - bu) from precomputed spatial terms.

    NaNs in the inputs are passed through; the caller decides whether the
    state blew up.
    """
    if state.blown_up:
        raise ValueError("state is flagged as blown up")
    grid = check_same_grid(state.u, lap_u, div_u_grad_v, *grad_v)
    if len(grad_v) != grid.dim:
        raise GridMismatchError(f"expected {grid.dim} gradient components, got {len(grad_v)}")
    u = state.u.values
    out = lap_u.values - model.chi * div_u_grad_v.values + u * (model.a - model.b * u)
    return Field(grid, out)


def rhs_v(state: State, model: ModelSpec, lap_v: Field) -> Field:
    """Time derivative of the signal for the parabolic variants."""
    if model.variant is Variant.ELLIPTIC:
        raise ValueError("elliptic production model has no signal time derivative")
    grid = check_same_grid(state.u, state.v, lap_v)
    u, v = state.u.values, state.v.values
    if model.variant is Variant.CONSUMPTION:
        out = (lap_v.values - u * v) / model.tau
    else:
        out = (lap_v.values - model.lam * v + model.mu * u) / model.tau
    return Field(grid, out)
