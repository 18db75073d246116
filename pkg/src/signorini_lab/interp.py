"""Compiled point-sampling kernels for even grid fields.

Fields are stored on the full box but every kernel reads only the closed
upper half ``x_n >= 0``; a query below the plane is reflected.  The kink of
an even field across the thin plane therefore never enters a stencil.  At
the plane the cubic stencil needs one node below it, which is replaced by
the quadratic extrapolation ``3 u0 - 3 u1 + u2`` of the upper-half data.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _lagrange4(t, w, dw):
    # nodes at 0, 1, 2, 3
    w[0] = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0
    w[1] = t * (t - 2.0) * (t - 3.0) / 2.0
    w[2] = -t * (t - 1.0) * (t - 3.0) / 2.0
    w[3] = t * (t - 1.0) * (t - 2.0) / 6.0
    dw[0] = -((t - 2.0) * (t - 3.0) + (t - 1.0) * (t - 3.0) + (t - 1.0) * (t - 2.0)) / 6.0
    dw[1] = ((t - 2.0) * (t - 3.0) + t * (t - 3.0) + t * (t - 2.0)) / 2.0
    dw[2] = -((t - 1.0) * (t - 3.0) + t * (t - 3.0) + t * (t - 1.0)) / 2.0
    dw[3] = ((t - 1.0) * (t - 2.0) + t * (t - 2.0) + t * (t - 1.0)) / 6.0


@njit(cache=True)
def _locate(x, lo, h, imin, imax):
    f = (x - lo) / h
    i = int(np.floor(f))
    if i < imin:
        i = imin
    if i > imax:
        i = imax
    return i, f - i


@njit(cache=True)
def _cubic_start(i, n):
    s = i - 1
    if s < 0:
        s = 0
    if s > n - 4:
        s = n - 4
    return s


@njit(cache=True)
def _col2(vals, i, j, mid):
    if j >= mid:
        return vals[i, j]
    return 3.0 * vals[i, mid] - 3.0 * vals[i, mid + 1] + vals[i, mid + 2]


@njit(cache=True)
def _col3(vals, i, k, j, mid):
    if j >= mid:
        return vals[i, k, j]
    return 3.0 * vals[i, k, mid] - 3.0 * vals[i, k, mid + 1] + vals[i, k, mid + 2]


@njit(cache=True)
def sample2(vals, lo, h, pts, order):
    n = vals.shape[0]
    mid = (n - 1) // 2
    m = pts.shape[0]
    out = np.empty(m)
    grad = np.empty((m, 2))
    wx = np.empty(4)
    dwx = np.empty(4)
    wy = np.empty(4)
    dwy = np.empty(4)
    for p in range(m):
        x = pts[p, 0]
        y = pts[p, 1]
        sy = 1.0
        if y < 0.0:
            y = -y
            sy = -1.0
        i, tx = _locate(x, lo, h, 0, n - 2)
        j, ty = _locate(y, lo, h, mid, n - 2)
        if order == 1:
            u00 = vals[i, j]
            u10 = vals[i + 1, j]
            u01 = vals[i, j + 1]
            u11 = vals[i + 1, j + 1]
            out[p] = (u00 * (1 - tx) * (1 - ty) + u10 * tx * (1 - ty)
                      + u01 * (1 - tx) * ty + u11 * tx * ty)
            grad[p, 0] = ((u10 - u00) * (1 - ty) + (u11 - u01) * ty) / h
            grad[p, 1] = sy * ((u01 - u00) * (1 - tx) + (u11 - u10) * tx) / h
            continue
        si = _cubic_start(i, n)
        sj = j - 1
        if sj > n - 4:
            sj = n - 4
        _lagrange4(tx + (i - si), wx, dwx)
        _lagrange4(ty + (j - sj), wy, dwy)
        v = 0.0
        gx = 0.0
        gy = 0.0
        for a in range(4):
            for b in range(4):
                u = _col2(vals, si + a, sj + b, mid)
                v += wx[a] * wy[b] * u
                gx += dwx[a] * wy[b] * u
                gy += wx[a] * dwy[b] * u
        out[p] = v
        grad[p, 0] = gx / h
        grad[p, 1] = sy * gy / h
    return out, grad


@njit(cache=True)
def sample3(vals, lo, h, pts, order):
    n = vals.shape[0]
    mid = (n - 1) // 2
    m = pts.shape[0]
    out = np.empty(m)
    grad = np.empty((m, 3))
    wx = np.empty(4)
    dwx = np.empty(4)
    wy = np.empty(4)
    dwy = np.empty(4)
    wz = np.empty(4)
    dwz = np.empty(4)
    for p in range(m):
        x = pts[p, 0]
        y = pts[p, 1]
        z = pts[p, 2]
        sz = 1.0
        if z < 0.0:
            z = -z
            sz = -1.0
        i, tx = _locate(x, lo, h, 0, n - 2)
        k, ty = _locate(y, lo, h, 0, n - 2)
        j, tz = _locate(z, lo, h, mid, n - 2)
        if order == 1:
            v = 0.0
            gx = 0.0
            gy = 0.0
            gz = 0.0
            for a in range(2):
                fa = tx if a == 1 else 1.0 - tx
                da = 1.0 if a == 1 else -1.0
                for b in range(2):
                    fb = ty if b == 1 else 1.0 - ty
                    db = 1.0 if b == 1 else -1.0
                    for c in range(2):
                        fc = tz if c == 1 else 1.0 - tz
                        dc = 1.0 if c == 1 else -1.0
                        u = vals[i + a, k + b, j + c]
                        v += fa * fb * fc * u
                        gx += da * fb * fc * u
                        gy += fa * db * fc * u
                        gz += fa * fb * dc * u
            out[p] = v
            grad[p, 0] = gx / h
            grad[p, 1] = gy / h
            grad[p, 2] = sz * gz / h
            continue
        si = _cubic_start(i, n)
        sk = _cubic_start(k, n)
        sj = j - 1
        if sj > n - 4:
            sj = n - 4
        _lagrange4(tx + (i - si), wx, dwx)
        _lagrange4(ty + (k - sk), wy, dwy)
        _lagrange4(tz + (j - sj), wz, dwz)
        v = 0.0
        gx = 0.0
        gy = 0.0
        gz = 0.0
        for a in range(4):
            for b in range(4):
                wab = wx[a] * wy[b]
                dab = dwx[a] * wy[b]
                adb = wx[a] * dwy[b]
                for c in range(4):
                    u = _col3(vals, si + a, sk + b, sj + c, mid)
                    v += wab * wz[c] * u
                    gx += dab * wz[c] * u
                    gy += adb * wz[c] * u
                    gz += wab * dwz[c] * u
        out[p] = v
        grad[p, 0] = gx / h
        grad[p, 1] = gy / h
        grad[p, 2] = sz * gz / h
    return out, grad


def sample_grid(values, lo, h, points, order=3):
    """Value and gradient of the interpolant of ``values`` at ``points``."""
    pts = np.ascontiguousarray(points, dtype=float)
    if values.ndim == 2:
        return sample2(values, lo, h, pts, order)
    return sample3(values, lo, h, pts, order)
