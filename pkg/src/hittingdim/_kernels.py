"""Compiled float64 orbit loops.

The arithmetic here must match ``systems._step_float`` operation for
operation so that chunked orbits equal repeated single steps bit for bit.
No fastmath: reassociation would break that equality.
"""

import numpy as np
from numba import njit

DOUBLING, TENT, ROTATION, MP, CAT = 0, 1, 2, 3, 4


@njit(cache=True)
def step1(code, a, x):
    if code == DOUBLING:
        y = 2.0 * x
    elif code == TENT:
        if x <= 0.5:
            y = 2.0 * x
        else:
            y = 2.0 - 2.0 * x
    elif code == ROTATION:
        y = x + a
    else:
        y = x + x ** (1.0 + a)
    if y >= 1.0:
        y -= 1.0
    return y


@njit(cache=True)
def step_cat(x, y):
    u = 2.0 * x + y
    v = x + y
    u -= np.floor(u)
    v -= np.floor(v)
    return u, v


@njit(cache=True)
def orbit_1d(code, a, x, out):
    for i in range(out.shape[0]):
        x = step1(code, a, x)
        out[i] = x
    return x


@njit(cache=True)
def orbit_cat(x, y, out):
    for i in range(out.shape[0]):
        x, y = step_cat(x, y)
        out[i, 0] = x
        out[i, 1] = y
    return x, y


@njit(cache=True)
def push_1d(code, a, xs, n):
    for i in range(xs.shape[0]):
        x = xs[i]
        for _ in range(n):
            x = step1(code, a, x)
        xs[i] = x


@njit(cache=True)
def push_cat(pts, n):
    for i in range(pts.shape[0]):
        x = pts[i, 0]
        y = pts[i, 1]
        for _ in range(n):
            x, y = step_cat(x, y)
        pts[i, 0] = x
        pts[i, 1] = y


@njit(cache=True)
def orbit_sample_1d(code, a, x, burn_in, stride, out):
    for _ in range(burn_in):
        x = step1(code, a, x)
    for i in range(out.shape[0]):
        for _ in range(stride):
            x = step1(code, a, x)
        out[i] = x
    return x


@njit(cache=True)
def orbit_sample_cat(x, y, burn_in, stride, out):
    for _ in range(burn_in):
        x, y = step_cat(x, y)
    for i in range(out.shape[0]):
        for _ in range(stride):
            x, y = step_cat(x, y)
        out[i, 0] = x
        out[i, 1] = y
    return x, y
