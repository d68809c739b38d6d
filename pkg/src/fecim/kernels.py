"""Hot numeric kernels: transistor current evaluation and node bisection.

Two implementations of each kernel ship side by side: a numba-compiled one
and a pure-numpy one. The env flag ``FECIM_NO_NUMBA=1`` forces the numpy
path; the numpy path is also selected automatically when numba is not
importable. ``benchmarks/bench_kernels.py`` compares the two.

The transistor model is a single smooth expression covering subthreshold
and the near/above-threshold region (softplus-squared interpolation with
forward and reverse components, so a resistive triode region exists):

    lam  = 2 * xi * v_t
    I    = g * (softplus((v_gs - vth) / lam)**2
                - softplus((v_gs - vth - v_ds) / lam)**2)

with g = i_s * w_over_l. Deep in subthreshold this reduces to
``g * exp((v_gs - vth) / (xi*v_t)) * (1 - exp(-v_ds / (xi*v_t)))``,
one current decade per ``xi*v_t*ln(10)`` of gate swing.
"""

from __future__ import annotations

import math
import os

import numpy as np

_WANT_NUMBA = os.environ.get("FECIM_NO_NUMBA", "").strip().lower() not in (
    "1",
    "true",
    "yes",
)

if _WANT_NUMBA:
    try:
        from numba import njit as _njit
    except ImportError:
        _njit = None
else:
    _njit = None

USING_NUMBA = _njit is not None

# Fixed bisection depth: interval shrinks by 2**-60, far below the 1 uV
# tolerance, and a fixed count keeps both paths bit-deterministic.
BISECT_ITERS = 60


# ---------------------------------------------------------------------------
# pure-numpy kernels
# ---------------------------------------------------------------------------

def softplus_np(x):
    """Numerically stable ln(1 + exp(x)) for arrays or scalars."""
    x = np.asarray(x, dtype=np.float64)
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def device_current_np(v_gs, v_ds, vth, g, xi, v_t):
    """Drain current of one transistor; all arguments broadcast."""
    lam = 2.0 * xi * v_t
    x_s = (v_gs - vth) / lam
    x_d = (v_gs - vth - v_ds) / lam
    sp_s = softplus_np(x_s)
    sp_d = softplus_np(x_d)
    return g * (sp_s * sp_s - sp_d * sp_d)


def solve_vs_np(wl1, wl2, vth1, vth2, g1, g2, xi1, xi2, v_dl, v_t):
    """Bisect the series-divider node voltage for arrays of cell operating
    points.

    Solves I_top(wl1 - V_S, v_dl - V_S) = I_bot(wl2, V_S) on [0, v_dl].
    The mismatch is strictly decreasing in V_S, positive at 0 and negative
    at v_dl, so the bracket always holds.
    """
    wl1, wl2, vth1, vth2, g1, g2, xi1, xi2, v_dl, v_t = np.broadcast_arrays(
        *(np.asarray(a, dtype=np.float64)
          for a in (wl1, wl2, vth1, vth2, g1, g2, xi1, xi2, v_dl, v_t))
    )
    lo = np.zeros(wl1.shape, dtype=np.float64)
    hi = np.array(v_dl, dtype=np.float64, copy=True)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        i_top = device_current_np(wl1 - mid, v_dl - mid, vth1, g1, xi1, v_t)
        i_bot = device_current_np(wl2, mid, vth2, g2, xi2, v_t)
        going_up = i_top > i_bot
        lo = np.where(going_up, mid, lo)
        hi = np.where(going_up, hi, mid)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# numba kernels (same arithmetic, scalar inner loops)
# ---------------------------------------------------------------------------

if USING_NUMBA:
    from numba import prange as _prange

    @_njit(cache=True)
    def _softplus_scalar(x):
        return math.log1p(math.exp(-abs(x))) + max(x, 0.0)

    @_njit(cache=True)
    def _current_scalar(v_gs, v_ds, vth, g, xi, v_t):
        lam = 2.0 * xi * v_t
        sp_s = _softplus_scalar((v_gs - vth) / lam)
        sp_d = _softplus_scalar((v_gs - vth - v_ds) / lam)
        return g * (sp_s * sp_s - sp_d * sp_d)

    @_njit(cache=True, parallel=True)
    def _device_current_nb(v_gs, v_ds, vth, g, xi, v_t):
        out = np.empty(v_gs.shape[0], dtype=np.float64)
        for i in _prange(v_gs.shape[0]):
            out[i] = _current_scalar(
                v_gs[i], v_ds[i], vth[i], g[i], xi[i], v_t[i]
            )
        return out

    @_njit(cache=True, parallel=True)
    def _solve_vs_nb(wl1, wl2, vth1, vth2, g1, g2, xi1, xi2, v_dl, v_t, iters):
        # elements are independent; parallel scheduling cannot change the
        # per-element bisection arithmetic
        n = wl1.shape[0]
        out = np.empty(n, dtype=np.float64)
        for i in _prange(n):
            lo = 0.0
            hi = v_dl[i]
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                i_top = _current_scalar(
                    wl1[i] - mid, v_dl[i] - mid, vth1[i], g1[i], xi1[i], v_t[i]
                )
                i_bot = _current_scalar(
                    wl2[i], mid, vth2[i], g2[i], xi2[i], v_t[i]
                )
                if i_top > i_bot:
                    lo = mid
                else:
                    hi = mid
            out[i] = 0.5 * (lo + hi)
        return out

    def _flat_copies(arrays):
        args = np.broadcast_arrays(
            *(np.asarray(a, dtype=np.float64) for a in arrays)
        )
        # broadcast views are read-only; hand numba owned buffers
        return args[0].shape, [np.array(a.reshape(-1), dtype=np.float64)
                               for a in args]

    def device_current(v_gs, v_ds, vth, g, xi, v_t):
        shape, flat = _flat_copies((v_gs, v_ds, vth, g, xi, v_t))
        return _device_current_nb(*flat).reshape(shape)

    def solve_vs(wl1, wl2, vth1, vth2, g1, g2, xi1, xi2, v_dl, v_t):
        shape, flat = _flat_copies(
            (wl1, wl2, vth1, vth2, g1, g2, xi1, xi2, v_dl, v_t)
        )
        return _solve_vs_nb(*flat, BISECT_ITERS).reshape(shape)

else:

    def device_current(v_gs, v_ds, vth, g, xi, v_t):
        return device_current_np(v_gs, v_ds, vth, g, xi, v_t)

    def solve_vs(wl1, wl2, vth1, vth2, g1, g2, xi1, xi2, v_dl, v_t):
        return solve_vs_np(wl1, wl2, vth1, vth2, g1, g2, xi1, xi2, v_dl, v_t)
