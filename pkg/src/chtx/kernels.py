"""Pointwise kernels used in every solver step and diagnostic.

Each kernel has a numba ``@njit`` version and a pure-numpy version with the
same signature. The numba path is used when numba imports and the
environment variable ``CHTX_DISABLE_NUMBA`` is unset or ``0``; even then
the reductions in ``NUMPY_PREFERRED`` run on numpy, which is faster for
them. Both full tables stay reachable via ``get_kernels``. Inputs must
be C-contiguous float64 arrays; kernels operate on the flattened view.

Powers of u are taken of max(u, 0): callers check the positivity slack
before calling, and non-integer powers of roundoff-negative values would
otherwise be NaN.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _env_disabled() -> bool:
    return os.environ.get("CHTX_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


# ---------------------------------------------------------------- numpy path


def _np_logistic_update(u, a, b, dt):
    """u + dt * u (a - b u)."""
    return u + dt * u * (a - b * u)


def _np_consumption_update(v, u, tau, dt):
    return v - dt * u * v / tau


def _np_weighted_power_sum(u, w, p):
    return float(np.sum(np.maximum(u, 0.0) ** p * w))


def _np_lyapunov_sum(u, v, w, p, sigma):
    return float(np.sum(np.maximum(u, 0.0) ** p * np.exp(sigma * v * v) * w))


def _np_min_max(x):
    return float(np.min(x)), float(np.max(x))


def _np_flux(u, g):
    return u * g


# ---------------------------------------------------------------- numba path

if numba is not None:

    @numba.njit(cache=True)
    def _nb_logistic_update(u, a, b, dt):
        uf = u.ravel()
        out = np.empty_like(uf)
        for i in range(uf.size):
            x = uf[i]
            out[i] = x + dt * x * (a - b * x)
        return out.reshape(u.shape)

    @numba.njit(cache=True)
    def _nb_consumption_update(v, u, tau, dt):
        vf = v.ravel()
        uf = u.ravel()
        out = np.empty_like(vf)
        for i in range(vf.size):
            out[i] = vf[i] - dt * uf[i] * vf[i] / tau
        return out.reshape(v.shape)

    @numba.njit(cache=True)
    def _nb_weighted_power_sum(u, w, p):
        uf = u.ravel()
        wf = w.ravel()
        s = 0.0
        for i in range(uf.size):
            x = uf[i]
            if x > 0.0:
                s += x**p * wf[i]
        return s

    @numba.njit(cache=True)
    def _nb_lyapunov_sum(u, v, w, p, sigma):
        uf = u.ravel()
        vf = v.ravel()
        wf = w.ravel()
        s = 0.0
        for i in range(uf.size):
            x = uf[i]
            if x > 0.0:
                s += x**p * np.exp(sigma * vf[i] * vf[i]) * wf[i]
        return s

    @numba.njit(cache=True)
    def _nb_min_max(x):
        xf = x.ravel()
        lo = xf[0]
        hi = xf[0]
        for i in range(1, xf.size):
            y = xf[i]
            if y < lo:
                lo = y
            if y > hi:
                hi = y
            if y != y:  # NaN poisons both ends
                return y, y
        if lo != lo:
            return lo, lo
        return lo, hi

    @numba.njit(cache=True)
    def _nb_flux(u, g):
        uf = u.ravel()
        gf = g.ravel()
        out = np.empty_like(uf)
        for i in range(uf.size):
            out[i] = uf[i] * gf[i]
        return out.reshape(u.shape)


_NUMPY = {
    "logistic_update": _np_logistic_update,
    "consumption_update": _np_consumption_update,
    "weighted_power_sum": _np_weighted_power_sum,
    "lyapunov_sum": _np_lyapunov_sum,
    "min_max": _np_min_max,
    "flux": _np_flux,
}

if numba is not None:
    _NUMBA = {
        "logistic_update": _nb_logistic_update,
        "consumption_update": _nb_consumption_update,
        "weighted_power_sum": _nb_weighted_power_sum,
        "lyapunov_sum": _nb_lyapunov_sum,
        "min_max": _nb_min_max,
        "flux": _nb_flux,
    }
else:  # pragma: no cover
    _NUMBA = None


# Reductions stay on numpy even when numba is enabled: numpy's vectorised
# pow/exp/min beat the scalar loops (see benchmarks/bench_kernels.py).
NUMPY_PREFERRED = ("weighted_power_sum", "lyapunov_sum", "min_max")


def backend_name() -> str:
    return "numba" if (_NUMBA is not None and not _env_disabled()) else "numpy"


def get_kernels(backend: str | None = None) -> dict:
    """Kernel table for ``backend`` ("numba" / "numpy"); default follows the env flag."""
    name = backend or backend_name()
    if name == "numba":
        if _NUMBA is None:
            raise RuntimeError("numba is not available")
        return _NUMBA
    if name == "numpy":
        return _NUMPY
    raise ValueError(f"unknown kernel backend {name!r}")


def default_kernels() -> dict:
    """Per-kernel choice used by the solver: numba where it wins, else numpy."""
    if backend_name() == "numpy":
        return _NUMPY
    return {k: (_NUMPY[k] if k in NUMPY_PREFERRED else f) for k, f in _NUMBA.items()}


_active = default_kernels()
logistic_update = _active["logistic_update"]
consumption_update = _active["consumption_update"]
min_max = _active["min_max"]
flux = _active["flux"]


def weighted_power_sum(u, w, p) -> float:
    return float(_active["weighted_power_sum"](u, w, float(p)))


def lyapunov_sum(u, v, w, p, sigma) -> float:
    return float(_active["lyapunov_sum"](u, v, w, float(p), float(sigma)))
