"""Exponentially decaying product weight ψ and integrals against it.

    ψ(x) = Π_i 1 / (e^{κ₂(x_i - c_i)} + e^{-κ₂(x_i - c_i)})

with κ₂ = min{κ₁/√n, √(κ₁/(2n))}. This choice guarantees

    0 < ψ(x) <= e^{-κ₂|x-c|},   |∇ψ| <= κ₂√n ψ <= κ₁ψ,   |Δψ| <= 2κ₂²n ψ <= κ₁ψ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .model import DEFAULT_TOL_POS, Field, Grid, check_same_grid


class IntegrityError(ValueError):
    """A field violates a positivity or range invariant beyond the slack."""


def kappa2_for(kappa1: float, n: int) -> float:
    if not kappa1 > 0:
        raise ValueError(f"kappa1 must be positive, got {kappa1}")
    return min(kappa1 / math.sqrt(n), math.sqrt(kappa1 / (2.0 * n)))


@dataclass(frozen=True)
class WeightSpec:
    kappa1: float
    n: int
    center: tuple = field(default=())

    def __post_init__(self):
        if not self.kappa1 > 0:
            raise ValueError(f"kappa1 must be positive, got {self.kappa1}")
        c = tuple(float(x) for x in self.center) or (0.0,) * self.n
        if len(c) != self.n:
            raise ValueError("center must have n coordinates")
        object.__setattr__(self, "center", c)

    @property
    def kappa2(self) -> float:
        return kappa2_for(self.kappa1, self.n)


def _sech_half(z):
    # 1 / (e^z + e^-z) without overflow for large |z|
    az = np.abs(z)
    e = np.exp(-az)
    return e / (1.0 + e * e)


def psi_values(spec: WeightSpec, points: Sequence[np.ndarray]) -> np.ndarray:
    """ψ at arbitrary points, ``points[i]`` holding the i-th coordinates."""
    k2 = spec.kappa2
    out = 1.0
    for xi, ci in zip(points, spec.center):
        out = out * _sech_half(k2 * (np.asarray(xi, float) - ci))
    return np.asarray(out, dtype=float)


def psi_gradient(spec: WeightSpec, points: Sequence[np.ndarray]) -> list:
    """Closed form ∂_i ψ = -κ₂ tanh(κ₂(x_i - c_i)) ψ."""
    k2 = spec.kappa2
    psi = psi_values(spec, points)
    return [-k2 * np.tanh(k2 * (np.asarray(xi, float) - ci)) * psi
            for xi, ci in zip(points, spec.center)]


def psi_laplacian(spec: WeightSpec, points: Sequence[np.ndarray]) -> np.ndarray:
    """Closed form Δψ = Σ_i (2 κ₂² tanh² - κ₂²) ψ."""
    k2 = spec.kappa2
    psi = psi_values(spec, points)
    acc = 0.0
    for xi, ci in zip(points, spec.center):
        th = np.tanh(k2 * (np.asarray(xi, float) - ci))
        acc = acc + (2.0 * k2 * k2 * th * th - k2 * k2)
    return acc * psi


def make_psi(spec: WeightSpec, grid: Grid) -> Field:
    if grid.dim != spec.n:
        raise ValueError(f"weight is {spec.n}-dimensional but grid is {grid.dim}-dimensional")
    return Field(grid, psi_values(spec, grid.coords()))


def check_nonnegative(u: np.ndarray, tol_pos: float = DEFAULT_TOL_POS, what: str = "u"):
    lo, _ = kernels.min_max(np.ascontiguousarray(u))
    if lo < -tol_pos:
        raise IntegrityError(f"{what} has min {lo:.3e}, below the positivity slack -{tol_pos:g}")


def weighted_lp(u: Field, psi: Field, p: float, tol_pos: float = DEFAULT_TOL_POS) -> float:
    """Rectangle rule for ∫ u^p ψ over the periodic box."""
    if p < 1:
        raise ValueError("p must be >= 1")
    grid = check_same_grid(u, psi)
    check_nonnegative(u.values, tol_pos)
    return grid.cell_volume * kernels.weighted_power_sum(u.values, psi.values, p)
