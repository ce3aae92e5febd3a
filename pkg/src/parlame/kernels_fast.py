"""Numba-accelerated evaluation of the matrix-kernel derivative stacks.

Same mathematics as the vectorized numpy path in :mod:`parlame.kernels`,
with the per-point zeta quadrature and Gaussian factors fused into one
loop nest; a test pins the two paths together to near machine precision.
Import is optional: callers fall back to numpy when numba is missing.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:          # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f
        return deco

_SQRT_PI = np.sqrt(np.pi)


@njit(cache=True)
def _axis_fac(z, zeta, out):
    """1D heat kernel derivative factors of order 0..4 at one (z, zeta)."""
    root = np.sqrt(zeta)
    u = z / (2.0 * root)
    base = np.exp(-u * u) / (2.0 * root * _SQRT_PI)
    s = -1.0 / (2.0 * root)
    u2 = u * u
    out[0] = base
    out[1] = base * s * 2.0 * u
    out[2] = base * s * s * (4.0 * u2 - 2.0)
    out[3] = base * s * s * s * u * (8.0 * u2 - 12.0)
    out[4] = base * s * s * s * s * (16.0 * u2 * u2 - 48.0 * u2 + 12.0)


@njit(cache=True)
def stack_2d(dz, dt, slow, fast, glu, glw, space_order, want_dt):
    """Kernel stacks in two dimensions.

    Returns (phi (N,2,2), d1 (N,2,2,2), d2 (N,3,2,2), dphi (N,2,2));
    arrays beyond the requested order are size-zero placeholders.
    """
    n = dz.shape[0]
    nq = glu.shape[0]
    phi = np.zeros((n, 2, 2))
    d1 = np.zeros((n, 2, 2, 2)) if space_order >= 1 else np.zeros((0, 2, 2, 2))
    d2 = np.zeros((n, 3, 2, 2)) if space_order >= 2 else np.zeros((0, 3, 2, 2))
    dphi = np.zeros((n, 2, 2)) if want_dt else np.zeros((0, 2, 2))
    fx = np.empty(5)
    fy = np.empty(5)
    width_fac = fast - slow
    # integral accumulators for mixed orders up to 4: I[p, q] ~ d^p_x d^q_y
    I = np.empty((5, 5))
    for m in range(n):
        t = dt[m]
        if t <= 0.0:
            continue
        a = slow * t
        width = width_fac * t
        x, y = dz[m, 0], dz[m, 1]
        max_ord = 2 + space_order
        for p in range(5):
            for q in range(5):
                I[p, q] = 0.0
        if width > 0.0:
            for k in range(nq):
                zeta = a + width * glu[k]
                w = glw[k] * width
                _axis_fac(x, zeta, fx)
                _axis_fac(y, zeta, fy)
                for tot in range(2, max_ord + 1):
                    for p in range(tot + 1):
                        I[p, tot - p] += w * fx[p] * fy[tot - p]
        _axis_fac(x, a, fx)
        _axis_fac(y, a, fy)
        # phi_ij = g(a) delta_ij + I[e_i + e_j]
        phi[m, 0, 0] = fx[0] * fy[0] + I[2, 0]
        phi[m, 0, 1] = I[1, 1]
        phi[m, 1, 0] = I[1, 1]
        phi[m, 1, 1] = fx[0] * fy[0] + I[0, 2]
        if space_order >= 1:
            for kk in range(2):
                for i in range(2):
                    for j in range(2):
                        p = (1 if i == 0 else 0) + (1 if j == 0 else 0) \
                            + (1 if kk == 0 else 0)
                        d1[m, kk, i, j] = I[p, 3 - p]
                # diagonal slow-part derivative
                gk = fx[1] * fy[0] if kk == 0 else fx[0] * fy[1]
                d1[m, kk, 0, 0] += gk
                d1[m, kk, 1, 1] += gk
        if space_order >= 2:
            for aa in range(3):          # gamma = (2,0), (1,1), (0,2)
                gx = 2 - aa
                for i in range(2):
                    for j in range(2):
                        p = gx + (1 if i == 0 else 0) + (1 if j == 0 else 0)
                        d2[m, aa, i, j] = I[p, 4 - p]
                gslow = fx[2] * fy[0] if aa == 0 else (
                    fx[1] * fy[1] if aa == 1 else fx[0] * fy[2])
                d2[m, aa, 0, 0] += gslow
                d2[m, aa, 1, 1] += gslow
        if want_dt:
            b = fast * t
            _axis_fac(x, b, fx)
            _axis_fac(y, b, fy)
            # recompute slow factors (fx was overwritten)
            gxx_f = fx[2] * fy[0]
            gxy_f = fx[1] * fy[1]
            gyy_f = fx[0] * fy[2]
            _axis_fac(x, a, fx)
            _axis_fac(y, a, fy)
            gxx_s = fx[2] * fy[0]
            gxy_s = fx[1] * fy[1]
            gyy_s = fx[0] * fy[2]
            g = fx[0] * fy[0]
            r2 = x * x + y * y
            gt = (r2 / (4.0 * a * a) - 1.0 / a) * g
            dphi[m, 0, 0] = fast * gxx_f - slow * gxx_s + slow * gt
            dphi[m, 0, 1] = fast * gxy_f - slow * gxy_s
            dphi[m, 1, 0] = dphi[m, 0, 1]
            dphi[m, 1, 1] = fast * gyy_f - slow * gyy_s + slow * gt
    return phi, d1, d2, dphi


@njit(cache=True)
def stack_1d(dz, dt, slow, fast, glu, glw, space_order, want_dt):
    """Kernel stacks in one dimension; layout mirrors :func:`stack_2d`."""
    n = dz.shape[0]
    nq = glu.shape[0]
    phi = np.zeros((n, 1, 1))
    d1 = np.zeros((n, 1, 1, 1)) if space_order >= 1 else np.zeros((0, 1, 1, 1))
    d2 = np.zeros((n, 1, 1, 1)) if space_order >= 2 else np.zeros((0, 1, 1, 1))
    dphi = np.zeros((n, 1, 1)) if want_dt else np.zeros((0, 1, 1))
    fx = np.empty(5)
    width_fac = fast - slow
    for m in range(n):
        t = dt[m]
        if t <= 0.0:
            continue
        a = slow * t
        width = width_fac * t
        x = dz[m, 0]
        I2 = 0.0
        I3 = 0.0
        I4 = 0.0
        if width > 0.0:
            for k in range(nq):
                zeta = a + width * glu[k]
                w = glw[k] * width
                _axis_fac(x, zeta, fx)
                I2 += w * fx[2]
                I3 += w * fx[3]
                I4 += w * fx[4]
        _axis_fac(x, a, fx)
        phi[m, 0, 0] = fx[0] + I2
        if space_order >= 1:
            d1[m, 0, 0, 0] = fx[1] + I3
        if space_order >= 2:
            d2[m, 0, 0, 0] = fx[2] + I4
        if want_dt:
            g2s = fx[2]
            g = fx[0]
            gt = (x * x / (4.0 * a * a) - 0.5 / a) * g
            _axis_fac(x, fast * t, fx)
            dphi[m, 0, 0] = fast * fx[2] - slow * g2s + slow * gt
    return phi, d1, d2, dphi
