"""Numba loops for the Joseph projector and its exact transpose.

Both kernels walk the same (view, detector, step) sequence and use the same
linear interpolation weights, so ``backproject`` is the matrix transpose of
``project`` up to floating-point summation order.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def joseph_project(img, angles, u, x0, y0, ps):
    ny, nx = img.shape
    n_views = angles.shape[0]
    n_dct = u.shape[0]
    out = np.zeros((n_views, n_dct))
    for v in range(n_views):
        c = np.cos(angles[v])
        s = np.sin(angles[v])
        if abs(c) >= abs(s):
            w_step = ps / abs(c)
            for k in range(n_dct):
                acc = 0.0
                for iy in range(ny):
                    y = y0 + iy * ps
                    fx = ((u[k] - y * s) / c - x0) / ps
                    i0 = int(np.floor(fx))
                    t = fx - i0
                    if 0 <= i0 < nx:
                        acc += (1.0 - t) * img[iy, i0]
                    if 0 <= i0 + 1 < nx:
                        acc += t * img[iy, i0 + 1]
                out[v, k] = acc * w_step
        else:
            w_step = ps / abs(s)
            for k in range(n_dct):
                acc = 0.0
                for ix in range(nx):
                    x = x0 + ix * ps
                    fy = ((u[k] - x * c) / s - y0) / ps
                    i0 = int(np.floor(fy))
                    t = fy - i0
                    if 0 <= i0 < ny:
                        acc += (1.0 - t) * img[i0, ix]
                    if 0 <= i0 + 1 < ny:
                        acc += t * img[i0 + 1, ix]
                out[v, k] = acc * w_step
    return out


@njit(cache=True)
def joseph_backproject(sino, angles, u, x0, y0, ps, ny, nx):
    n_views = angles.shape[0]
    n_dct = u.shape[0]
    img = np.zeros((ny, nx))
    for v in range(n_views):
        c = np.cos(angles[v])
        s = np.sin(angles[v])
        if abs(c) >= abs(s):
            w_step = ps / abs(c)
            for k in range(n_dct):
                val = sino[v, k] * w_step
                if val == 0.0:
                    continue
                for iy in range(ny):
                    y = y0 + iy * ps
                    fx = ((u[k] - y * s) / c - x0) / ps
                    i0 = int(np.floor(fx))
                    t = fx - i0
                    if 0 <= i0 < nx:
                        img[iy, i0] += (1.0 - t) * val
                    if 0 <= i0 + 1 < nx:
                        img[iy, i0 + 1] += t * val
        else:
            w_step = ps / abs(s)
            for k in range(n_dct):
                val = sino[v, k] * w_step
                if val == 0.0:
                    continue
                for ix in range(nx):
                    x = x0 + ix * ps
                    fy = ((u[k] - x * c) / s - y0) / ps
                    i0 = int(np.floor(fy))
                    t = fy - i0
                    if 0 <= i0 < ny:
                        img[i0, ix] += (1.0 - t) * val
                    if 0 <= i0 + 1 < ny:
                        img[i0 + 1, ix] += t * val
    return img


@njit(cache=True)
def shift_rows(data, pos):
    """Sample each row ``v`` of ``data`` at fractional indices ``pos[v, :]``.

    Linear interpolation; neighbours outside ``[0, n)`` contribute zero.
    """
    n_views, n = data.shape
    m = pos.shape[1]
    out = np.zeros((n_views, m))
    for v in range(n_views):
        for j in range(m):
            f = pos[v, j]
            i0 = int(np.floor(f))
            t = f - i0
            acc = 0.0
            if 0 <= i0 < n:
                acc += (1.0 - t) * data[v, i0]
            if 0 <= i0 + 1 < n and t != 0.0:
                acc += t * data[v, i0 + 1]
            out[v, j] = acc
    return out

