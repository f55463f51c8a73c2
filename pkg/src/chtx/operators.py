"""Spectral operators on the periodic grid.

All operators are diagonal in Fourier space. On the periodic box the
discrete symbol exp(-|k|² t) is the exact periodization of the Gaussian
heat kernel, so no kernel quadrature is needed.

Array-level methods on :class:`SpectralPlan` are what the solver uses;
the module-level functions wrap them for :class:`~chtx.model.Field`.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .model import Field, Grid, GridMismatchError


class SpectralPlan:
    """Wavenumbers and transforms for one grid. Immutable and shareable."""

    def __init__(self, grid: Grid, workers: int | None = None):
        self.grid = grid
        self.workers = workers
        N, L, n = grid.points_per_dim, grid.half_width, grid.dim
        m_full = np.fft.fftfreq(N, d=1.0 / N)  # integers in [-N/2, N/2)
        m_half = np.fft.rfftfreq(N, d=1.0 / N)
        scale = math.pi / L
        ks = []
        kd = []
        for ax in range(n):
            m = m_half if ax == n - 1 else m_full
            k = scale * m
            # odd derivatives drop the unpaired Nyquist mode to stay real
            kder = np.where(np.abs(m) == N // 2, 0.0, k)
            shp = [1] * n
            shp[ax] = k.size
            ks.append(k.reshape(shp))
            kd.append(kder.reshape(shp))
        self.k = tuple(ks)
        self.ik = tuple(1j * k for k in kd)
        ksq = np.zeros(self.spectral_shape)
        for k in ks:
            ksq = ksq + k**2
        self.ksq = ksq
        for arr in (self.ksq,) + self.k + self.ik:
            arr.setflags(write=False)

    @property
    def spectral_shape(self) -> tuple:
        N = self.grid.points_per_dim
        return (N,) * (self.grid.dim - 1) + (N // 2 + 1,)

    # transforms ---------------------------------------------------------
    def forward(self, f: np.ndarray) -> np.ndarray:
        return sfft.rfftn(f, workers=self.workers)

    def backward(self, fh: np.ndarray) -> np.ndarray:
        return sfft.irfftn(fh, s=self.grid.shape, workers=self.workers)

    def apply_symbol(self, f: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        return self.backward(symbol * self.forward(f))

    # array operators ------------------------------------------------------
    def lap(self, f: np.ndarray) -> np.ndarray:
        return self.backward(-self.ksq * self.forward(f))

    def grad(self, f: np.ndarray) -> list:
        fh = self.forward(f)
        return [self.backward(ik * fh) for ik in self.ik]

    def div(self, F: Sequence[np.ndarray]) -> np.ndarray:
        acc = None
        for ik, comp in zip(self.ik, F):
            term = ik * self.forward(comp)
            acc = term if acc is None else acc + term
        return self.backward(acc)

    def heat_symbol(self, t: float, shift: float = 0.0, scale: float = 1.0) -> np.ndarray:
        return np.exp(-(self.ksq + shift) * (t / scale))

    def heat(self, f: np.ndarray, t: float, shift: float = 0.0, scale: float = 1.0) -> np.ndarray:
        if t < 0:
            raise ValueError(f"semigroup time must be >= 0, got {t}")
        if not scale > 0:
            raise ValueError("scale must be positive")
        if t == 0:
            return np.array(f, dtype=float, copy=True)
        return self.apply_symbol(f, self.heat_symbol(t, shift, scale))

    def resolve(self, u: np.ndarray, lam: float, mu: float) -> np.ndarray:
        if not lam > 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        return self.apply_symbol(u, mu / (lam + self.ksq))

    def sup_grad_norm(self, f: np.ndarray) -> float:
        g = self.grad(f)
        return float(np.sqrt(sum(c * c for c in g)).max())

    def _check(self, f: Field):
        if f.grid != self.grid:
            raise GridMismatchError(f"field on {f.grid} used with plan on {self.grid}")


def laplacian(f: Field, plan: SpectralPlan) -> Field:
    plan._check(f)
    return Field(f.grid, plan.lap(f.values))


def gradient(f: Field, plan: SpectralPlan) -> tuple:
    plan._check(f)
    return tuple(Field(f.grid, g) for g in plan.grad(f.values))


def divergence(F: Sequence[Field], plan: SpectralPlan) -> Field:
    if len(F) != plan.grid.dim:
        raise GridMismatchError(f"expected {plan.grid.dim} components, got {len(F)}")
    for c in F:
        plan._check(c)
    return Field(plan.grid, plan.div([c.values for c in F]))


def heat_semigroup(f: Field, t: float, shift: float = 1.0, scale: float = 1.0,
                   plan: SpectralPlan | None = None) -> Field:
    """exp((Δ - shift) t / scale) f. shift=1, scale=1 is T(t) = e^{-t} G(t)*."""
    plan = plan or SpectralPlan(f.grid)
    plan._check(f)
    return Field(f.grid, plan.heat(f.values, t, shift, scale))


def elliptic_resolve(u: Field, lam: float, mu: float, plan: SpectralPlan | None = None) -> Field:
    """v with (λ - Δ) v = μ u, i.e. 0 = Δv - λv + μu."""
    plan = plan or SpectralPlan(u.grid)
    plan._check(u)
    return Field(u.grid, plan.resolve(u.values, lam, mu))


def semigroup_gradient_bound_check(f: Sequence[Field], t: float,
                                   plan: SpectralPlan | None = None) -> tuple:
    """(‖T(t)∇·f‖∞, (n/√π) t^{-1/2} e^{-t} ‖f‖∞) with ‖f‖∞ the sup of |f(x)|."""
    if not t > 0:
        raise ValueError("t must be positive")
    plan = plan or SpectralPlan(f[0].grid)
    for c in f:
        plan._check(c)
    n = plan.grid.dim
    vals = [c.values for c in f]
    lhs = float(np.abs(plan.heat(plan.div(vals), t, 1.0, 1.0)).max())
    fnorm = float(np.sqrt(sum(c * c for c in vals)).max())
    rhs = n / math.sqrt(math.pi) * t**-0.5 * math.exp(-t) * fnorm
    return lhs, rhs
