"""Fused inf-convolution kernels: min over y of f(y) + d(x, y)^2 / (2t).

The quadratic shift is an O(n * m) scan; the numpy path materialises the
distance matrix in chunks, which is memory-traffic bound.  These kernels
fuse the scan and prune hard instead:

- candidates are sorted by field value, so once f(y) alone reaches the
  running minimum the remaining tail cannot compete and the scan stops;
- on charts whose distance needs a transcendental (sphere, disk, cone), a
  cheap lower bound (chord or radial separation) is tested first and the
  exact distance is only evaluated when the bound fails to prune.

Results are exact minima; only the evaluation order differs.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a soft dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def _reduce_box(X, Y, f, inv2t):
    n, m = X.shape[0], Y.shape[0]
    dim = X.shape[1]
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for j in range(m):
            fj = f[j]
            if fj >= best:
                break
            sq = 0.0
            for k in range(dim):
                d = X[i, k] - Y[j, k]
                sq += d * d
            v = fj + sq * inv2t
            if v < best:
                best = v
        out[i] = best
    return out


@njit(cache=True)
def _reduce_torus(X, Y, f, inv2t, side):
    n, m = X.shape[0], Y.shape[0]
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for j in range(m):
            fj = f[j]
            if fj >= best:
                break
            d0 = abs(X[i, 0] - Y[j, 0])
            if side - d0 < d0:
                d0 = side - d0
            d1 = abs(X[i, 1] - Y[j, 1])
            if side - d1 < d1:
                d1 = side - d1
            v = fj + (d0 * d0 + d1 * d1) * inv2t
            if v < best:
                best = v
        out[i] = best
    return out


@njit(cache=True)
def _reduce_sphere(EX, EY, f, inv2t, radius):
    n, m = EX.shape[0], EY.shape[0]
    out = np.empty(n)
    r2 = radius * radius
    for i in range(n):
        best = np.inf
        for j in range(m):
            fj = f[j]
            if fj >= best:
                break
            dot = EX[i, 0] * EY[j, 0] + EX[i, 1] * EY[j, 1] + EX[i, 2] * EY[j, 2]
            if dot > 1.0:
                dot = 1.0
            elif dot < -1.0:
                dot = -1.0
            # chord <= arc: prune before paying for arccos
            lb = fj + r2 * (2.0 - 2.0 * dot) * inv2t
            if lb >= best:
                continue
            ang = np.arccos(dot)
            v = fj + r2 * ang * ang * inv2t
            if v < best:
                best = v
        out[i] = best
    return out


@njit(cache=True)
def _reduce_cone(X, Y, f, inv2t, theta):
    n, m = X.shape[0], Y.shape[0]
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        r1 = X[i, 0]
        p1 = X[i, 1]
        for j in range(m):
            fj = f[j]
            if fj >= best:
                break
            r2 = Y[j, 0]
            dr = r1 - r2
            # radial separation is a lower bound on the distance
            lb = fj + dr * dr * inv2t
            if lb >= best:
                continue
            gap = abs(Y[j, 1] - p1)
            if theta - gap < gap:
                gap = theta - gap
            if gap > np.pi:
                d = r1 + r2
                sq = d * d
            else:
                sq = r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * np.cos(gap)
                if sq < 0.0:
                    sq = 0.0
            v = fj + sq * inv2t
            if v < best:
                best = v
        out[i] = best
    return out


@njit(cache=True)
def _reduce_hyperbolic(X, Y, f, inv2t, px, py, rad_x, rad_y):
    n, m = X.shape[0], Y.shape[0]
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for j in range(m):
            fj = f[j]
            if fj >= best:
                break
            dr = rad_x[i] - rad_y[j]
            lb = fj + dr * dr * inv2t
            if lb >= best:
                continue
            dx = X[i, 0] - Y[j, 0]
            dy = X[i, 1] - Y[j, 1]
            q = 1.0 + 2.0 * (dx * dx + dy * dy) / (px[i] * py[j])
            d = np.arccosh(q)
            v = fj + d * d * inv2t
            if v < best:
                best = v
        out[i] = best
    return out


def inf_convolve_min(space, X: np.ndarray, Y: np.ndarray, f: np.ndarray,
                     t: float) -> np.ndarray:
    """Exact min over candidates of f + d^2/(2t) at each evaluation point."""
    order = np.argsort(f, kind="stable")
    Ys = np.ascontiguousarray(Y[order])
    fs = np.ascontiguousarray(f[order])
    X = np.ascontiguousarray(X)
    inv2t = 1.0 / (2.0 * t)
    k = space.kind
    if k == "euclidean_box":
        return _reduce_box(X, Ys, fs, inv2t)
    if k == "flat_torus":
        return _reduce_torus(X, Ys, fs, inv2t, space.side)
    if k == "round_sphere":
        from .spaces import _sphere_embed
        EX = np.ascontiguousarray(_sphere_embed(space, X))
        EY = np.ascontiguousarray(_sphere_embed(space, Ys))
        return _reduce_sphere(EX, EY, fs, inv2t, space.radius)
    if k == "flat_cone":
        return _reduce_cone(X, np.mod(Ys, [np.inf, space.total_angle]), fs, inv2t,
                            space.total_angle)
    px = np.ascontiguousarray(1.0 - np.sum(X**2, axis=1))
    py = np.ascontiguousarray(1.0 - np.sum(Ys**2, axis=1))
    rad_x = 2.0 * np.arctanh(np.sqrt(np.maximum(1.0 - px, 0.0)))
    rad_y = 2.0 * np.arctanh(np.sqrt(np.maximum(1.0 - py, 0.0)))
    return _reduce_hyperbolic(X, Ys, fs, inv2t, px, py, rad_x, rad_y)
