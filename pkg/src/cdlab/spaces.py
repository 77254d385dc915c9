"""Model geodesic spaces with closed-form distance and geodesic oracles.

Five built-in geometries are supported, each described by a chart:

- ``euclidean_box``   -- [0, side]^dim, dim 1 or 2, Cartesian coordinates.
- ``flat_torus``      -- Cartesian coordinates mod ``side`` (2-D).
- ``round_sphere``    -- (latitude, longitude) in radians, radius ``radius``.
- ``flat_cone``       -- polar (r, phi), cone angle ``total_angle``, truncated
  at ``radial_cutoff``; the apex r=0 is a geodesic waypoint only.
- ``hyperbolic_disk`` -- Cartesian coordinates in the conformal unit-disk
  chart (curvature -1), sampled up to ``chart_radius``.

All oracles are pure functions vectorised over leading axes.  Non-unique
geodesics are resolved deterministically: ties prefer the candidate whose
initial chart direction is lexicographically smallest (negative angular /
southward displacement), and cone geodesics with angular gap beyond pi run
through the apex as two radial segments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ResolutionError

KINDS = ("euclidean_box", "flat_torus", "round_sphere", "flat_cone", "hyperbolic_disk")

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ModelSpace:
    """A geodesic model space given by closed-form oracles on a chart."""

    kind: str
    dim: int = 2
    side: float = 1.0
    radius: float = 1.0
    total_angle: float = _TWO_PI
    radial_cutoff: float = 1.0
    chart_radius: float = 0.8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown space kind {self.kind!r}")
        if self.kind == "euclidean_box" and self.dim not in (1, 2):
            raise DomainError("euclidean_box supports dim 1 or 2")
        if self.kind != "euclidean_box" and self.dim != 2:
            raise DomainError(f"{self.kind} is 2-dimensional only")
        if self.kind == "hyperbolic_disk" and not (0.0 < self.chart_radius < 1.0):
            raise DomainError("chart_radius must lie in (0, 1)")
        if self.kind == "flat_cone" and not (self.total_angle > 0 and self.radial_cutoff > 0):
            raise DomainError("flat_cone needs positive total_angle and radial_cutoff")


def euclidean_box(side: float, dim: int = 2) -> ModelSpace:
    return ModelSpace(kind="euclidean_box", dim=dim, side=float(side))


def flat_torus(side: float) -> ModelSpace:
    return ModelSpace(kind="flat_torus", side=float(side))


def round_sphere(radius: float) -> ModelSpace:
    return ModelSpace(kind="round_sphere", radius=float(radius))


def flat_cone(total_angle: float, radial_cutoff: float) -> ModelSpace:
    return ModelSpace(kind="flat_cone", total_angle=float(total_angle),
                      radial_cutoff=float(radial_cutoff))


def hyperbolic_disk(chart_radius: float = 0.8) -> ModelSpace:
    return ModelSpace(kind="hyperbolic_disk", chart_radius=float(chart_radius))


# ---------------------------------------------------------------------------
# chart domains
# ---------------------------------------------------------------------------


def validate_points(space: ModelSpace, pts: np.ndarray) -> np.ndarray:
    """Check chart-domain membership; returns the points as a float array."""
    p = np.asarray(pts, dtype=float)
    if p.shape[-1] != space.dim:
        raise DomainError(f"expected {space.dim}-dim chart coordinates, got shape {p.shape}")
    k = space.kind
    if k == "euclidean_box":
        if np.any(p < -1e-12) or np.any(p > space.side + 1e-12):
            raise DomainError("point outside box chart")
    elif k == "round_sphere":
        if np.any(np.abs(p[..., 0]) > np.pi / 2 + 1e-12):
            raise DomainError("latitude outside [-pi/2, pi/2]")
    elif k == "flat_cone":
        if np.any(p[..., 0] < -1e-12) or np.any(p[..., 0] > space.radial_cutoff + 1e-12):
            raise DomainError("cone radius outside [0, radial_cutoff]")
    elif k == "hyperbolic_disk":
        if np.any(np.sum(p**2, axis=-1) >= 1.0):
            raise DomainError("point outside the open unit disk chart")
    # flat_torus accepts any coordinates (taken mod side)
    return p


def _wrap_delta(raw: np.ndarray, period: float) -> np.ndarray:
    """Shortest signed displacement mod period; ties resolve negatively."""
    return raw - period * np.floor(raw / period + 0.5)


# ---------------------------------------------------------------------------
# distance oracles
# ---------------------------------------------------------------------------


def _sphere_embed(space: ModelSpace, p: np.ndarray) -> np.ndarray:
    lat, lon = p[..., 0], p[..., 1]
    cl = np.cos(lat)
    return np.stack([cl * np.cos(lon), cl * np.sin(lon), np.sin(lat)], axis=-1)


def _hyp_complex(p: np.ndarray) -> np.ndarray:
    return p[..., 0] + 1j * p[..., 1]


def _hyp_dist(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    num = 2.0 * np.abs(z - w) ** 2
    den = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)
    return np.arccosh(1.0 + num / den)


def distance(space: ModelSpace, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Geodesic distance between chart points (broadcasting over leading axes)."""
    x = validate_points(space, x)
    y = validate_points(space, y)
    k = space.kind
    if k == "euclidean_box":
        return np.sqrt(np.sum((x - y) ** 2, axis=-1))
    if k == "flat_torus":
        d = _wrap_delta(y - x, space.side)
        return np.sqrt(np.sum(d**2, axis=-1))
    if k == "round_sphere":
        u, v = _sphere_embed(space, x), _sphere_embed(space, y)
        cross = np.linalg.norm(np.cross(u, v), axis=-1)
        dot = np.sum(u * v, axis=-1)
        return space.radius * np.arctan2(cross, dot)
    if k == "flat_cone":
        r1, r2 = x[..., 0], y[..., 0]
        gap = np.abs(_wrap_delta(y[..., 1] - x[..., 1], space.total_angle))
        side_d = np.sqrt(np.maximum(r1**2 + r2**2 - 2 * r1 * r2 * np.cos(gap), 0.0))
        return np.where(gap <= np.pi, side_d, r1 + r2)
    # hyperbolic_disk
    return _hyp_dist(_hyp_complex(x), _hyp_complex(y))


# ---------------------------------------------------------------------------
# geodesic oracles
# ---------------------------------------------------------------------------


def geodesic_point(space: ModelSpace, x: np.ndarray, y: np.ndarray, t) -> np.ndarray:
    """Point at parameter t in [0, 1] of a minimizing geodesic from x to y.

    Endpoints are returned bit-exactly (t=0 gives x, t=1 gives y).  Ties
    between minimizers follow the documented deterministic rules.
    """
    x = validate_points(space, x)
    y = validate_points(space, y)
    t = np.asarray(t, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    tb = np.broadcast_to(t, x.shape[:-1])

    k = space.kind
    if k == "euclidean_box":
        out = x + tb[..., None] * (y - x)
    elif k == "flat_torus":
        d = _wrap_delta(y - x, space.side)
        out = np.mod(x + tb[..., None] * d, space.side)
    elif k == "round_sphere":
        out = _sphere_geodesic(space, x, y, tb)
    elif k == "flat_cone":
        out = _cone_geodesic(space, x, y, tb)
    else:
        out = _hyp_geodesic(x, y, tb)

    # exact endpoints (snap-stability downstream relies on this)
    end0 = tb == 0.0
    end1 = tb == 1.0
    if np.any(end0):
        out = np.where(end0[..., None], x, out)
    if np.any(end1):
        out = np.where(end1[..., None], y, out)
    return out


def _sphere_geodesic(space: ModelSpace, x, y, t):
    u = _sphere_embed(space, x)
    v = _sphere_embed(space, y)
    dot = np.clip(np.sum(u * v, axis=-1), -1.0, 1.0)
    omega = np.arccos(dot)
    w = v - dot[..., None] * u
    nw = np.linalg.norm(w, axis=-1)
    # antipodal tie-break: head due south along the stored chart longitude
    lat, lon = x[..., 0], x[..., 1]
    south = np.stack([np.sin(lat) * np.cos(lon), np.sin(lat) * np.sin(lon), -np.cos(lat)], axis=-1)
    use_south = nw[..., None] < 1e-12
    e = np.where(use_south, south, w / np.where(nw[..., None] < 1e-12, 1.0, nw[..., None]))
    ang = t * omega
    p = np.cos(ang)[..., None] * u + np.sin(ang)[..., None] * e
    latp = np.arcsin(np.clip(p[..., 2], -1.0, 1.0))
    lonp = np.arctan2(p[..., 1], p[..., 0])
    return np.stack([latp, lonp], axis=-1)


def _cone_geodesic(space: ModelSpace, x, y, t):
    theta = space.total_angle
    r1, p1 = x[..., 0], x[..., 1]
    r2, p2 = y[..., 0], y[..., 1]
    delta = _wrap_delta(p2 - p1, theta)
    gap = np.abs(delta)

    # developed side path (valid for gap <= pi)
    px = (1 - t) * r1 + t * r2 * np.cos(delta)
    py = t * r2 * np.sin(delta)
    r_side = np.hypot(px, py)
    phi_side = np.mod(p1 + np.arctan2(py, px), theta)
    phi_side = np.where(r_side < 1e-300, np.mod(p1, theta), phi_side)

    # apex path (gap > pi): radial in, radial out
    s = t * (r1 + r2)
    before = s <= r1
    r_apex = np.where(before, r1 - s, s - r1)
    phi_apex = np.where(before, np.mod(p1, theta), np.mod(p2, theta))

    through_apex = gap > np.pi
    r_t = np.where(through_apex, r_apex, r_side)
    phi_t = np.where(through_apex, phi_apex, phi_side)
    return np.stack([r_t, phi_t], axis=-1)


def _hyp_geodesic(x, y, t):
    z = _hyp_complex(x)
    w = _hyp_complex(y)
    u = (w - z) / (1.0 - np.conj(z) * w)
    au = np.abs(u)
    half_len = np.arctanh(np.minimum(au, 1.0 - 1e-16))
    unit = np.where(au > 0, u / np.where(au > 0, au, 1.0), 0.0)
    zt = unit * np.tanh(t * half_len)
    res = (zt + z) / (1.0 + np.conj(z) * zt)
    return np.stack([res.real, res.imag], axis=-1)


# ---------------------------------------------------------------------------
# pairwise distances (chunked; used by transport costs and inf-convolutions)
# ---------------------------------------------------------------------------


def pairwise_distance(space: ModelSpace, X: np.ndarray, Y: np.ndarray,
                      chunk: int = 2048) -> np.ndarray:
    """Full (m, n) distance matrix, computed in row chunks to bound memory."""
    X = validate_points(space, X)
    Y = validate_points(space, Y)
    m = X.shape[0]
    out = np.empty((m, Y.shape[0]))
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        out[lo:hi] = _pairwise_block(space, X[lo:hi], Y)
    return out


def pairwise_sqdist(space: ModelSpace, X: np.ndarray, Y: np.ndarray,
                    chunk: int = 2048) -> np.ndarray:
    """Squared distances, optimised for bulk value computations.

    Uses BLAS gram products where the chart allows it, trading the exact-zero
    diagonal of :func:`pairwise_distance` for throughput; absolute errors are
    at the 1e-16 level, which value-oriented consumers (transport costs,
    inf-convolutions) absorb.  Entries are clipped to be nonnegative.
    """
    X = validate_points(space, X)
    Y = validate_points(space, Y)
    m = X.shape[0]
    out = np.empty((m, Y.shape[0]))
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        out[lo:hi] = _sqdist_block(space, X[lo:hi], Y)
    return out


def _sqdist_block(space: ModelSpace, X, Y):
    k = space.kind
    if k == "euclidean_box":
        sq = np.sum(X**2, axis=1)[:, None] + np.sum(Y**2, axis=1)[None, :]
        sq -= 2.0 * (X @ Y.T)
        return np.maximum(sq, 0.0, out=sq)
    if k == "flat_torus":
        acc = None
        for ax in range(2):
            d = np.subtract.outer(X[:, ax], Y[:, ax])
            np.abs(d, out=d)
            np.minimum(d, space.side - d, out=d)
            np.multiply(d, d, out=d)
            acc = d if acc is None else np.add(acc, d, out=acc)
        return acc
    if k == "round_sphere":
        U = _sphere_embed(space, X)
        V = _sphere_embed(space, Y)
        dot = U @ V.T
        np.clip(dot, -1.0, 1.0, out=dot)
        ang = np.arccos(dot, out=dot)
        ang *= space.radius
        return np.multiply(ang, ang, out=ang)
    if k == "flat_cone":
        d = _pairwise_block(space, X, Y)
        return np.multiply(d, d, out=d)
    # hyperbolic: |z-w|^2 by gram product, then arccosh
    P = np.sum(X**2, axis=1)
    Q = np.sum(Y**2, axis=1)
    sq = P[:, None] + Q[None, :]
    sq -= 2.0 * (X @ Y.T)
    np.maximum(sq, 0.0, out=sq)
    sq *= 2.0
    sq /= (1.0 - P)[:, None] * (1.0 - Q)[None, :]
    sq += 1.0
    d = np.arccosh(sq, out=sq)
    return np.multiply(d, d, out=d)


def _pairwise_block(space: ModelSpace, X, Y):
    # broadcast difference forms keep d(x, x) exactly zero (no cancellation)
    k = space.kind
    if k == "euclidean_box":
        acc = np.zeros((X.shape[0], Y.shape[0]))
        for ax in range(X.shape[1]):
            d = Y[None, :, ax] - X[:, None, ax]
            acc += d * d
        return np.sqrt(acc)
    if k == "flat_torus":
        acc = np.zeros((X.shape[0], Y.shape[0]))
        for ax in range(2):
            d = _wrap_delta(Y[None, :, ax] - X[:, None, ax], space.side)
            acc += d * d
        return np.sqrt(acc)
    if k == "round_sphere":
        # haversine on latitude/longitude differences
        sl = np.sin((Y[None, :, 0] - X[:, None, 0]) / 2.0)
        sn = np.sin((Y[None, :, 1] - X[:, None, 1]) / 2.0)
        hav = sl * sl + np.cos(X[:, None, 0]) * np.cos(Y[None, :, 0]) * sn * sn
        return 2.0 * space.radius * np.arcsin(np.sqrt(np.clip(hav, 0.0, 1.0)))
    if k == "flat_cone":
        r1 = X[:, 0][:, None]
        r2 = Y[:, 0][None, :]
        gap = np.abs(_wrap_delta(Y[None, :, 1] - X[:, None, 1], space.total_angle))
        side_d = np.sqrt(np.maximum(r1**2 + r2**2 - 2 * r1 * r2 * np.cos(gap), 0.0))
        return np.where(gap <= np.pi, side_d, r1 + r2)
    # hyperbolic
    z = _hyp_complex(X)[:, None]
    w = _hyp_complex(Y)[None, :]
    return _hyp_dist(z, w)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampledSpace:
    """Finite node set with positive per-cell volumes on a chart grid.

    Nodes sit at cell centres of a uniform grid in chart coordinates
    (polar for cone and hyperbolic disk).  Immutable and shareable.
    """

    space: ModelSpace
    resolution: int
    nodes: np.ndarray
    cell_volume: np.ndarray
    _axes: tuple = field(repr=False, default=())

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def total_volume(self) -> float:
        return float(self.cell_volume.sum())

    def snap(self, pts: np.ndarray) -> np.ndarray:
        """Indices of nearest nodes (per-axis in the chart grid; ties down)."""
        return _snap(self, np.asarray(pts, dtype=float))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            coords = [f"coord{i}" for i in range(self.space.dim)]
            w.writerow(["node", *coords, "cell_volume"])
            for i in range(self.n_nodes):
                w.writerow([i, *[repr(c) for c in self.nodes[i]], repr(self.cell_volume[i])])


def analytic_volume(space: ModelSpace) -> float:
    """Closed-form volume of the sampled chart region."""
    k = space.kind
    if k == "euclidean_box":
        return space.side**space.dim
    if k == "flat_torus":
        return space.side**2
    if k == "round_sphere":
        return 4.0 * np.pi * space.radius**2
    if k == "flat_cone":
        return 0.5 * space.total_angle * space.radial_cutoff**2
    a = space.chart_radius
    return 4.0 * np.pi * a**2 / (1.0 - a**2)


def sample(space: ModelSpace, resolution: int) -> SampledSpace:
    """Uniform chart grid with cell volumes from the exact area element."""
    if resolution < 2:
        raise ResolutionError("resolution must be >= 2")
    res = int(resolution)
    k = space.kind

    if k == "euclidean_box" and space.dim == 1:
        h = space.side / res
        nodes = ((np.arange(res) + 0.5) * h)[:, None]
        vol = np.full(res, h)
        return SampledSpace(space, res, nodes, vol, _axes=(h,))

    if k in ("euclidean_box", "flat_torus"):
        h = space.side / res
        ax = (np.arange(res) + 0.5) * h
        gx, gy = np.meshgrid(ax, ax, indexing="ij")
        nodes = np.stack([gx.ravel(), gy.ravel()], axis=-1)
        vol = np.full(res * res, h * h)
        return SampledSpace(space, res, nodes, vol, _axes=(h, h))

    if k == "round_sphere":
        dlat = np.pi / res
        dlon = _TWO_PI / res
        lat = -np.pi / 2 + (np.arange(res) + 0.5) * dlat
        lon = -np.pi + (np.arange(res) + 0.5) * dlon
        glat, glon = np.meshgrid(lat, lon, indexing="ij")
        nodes = np.stack([glat.ravel(), glon.ravel()], axis=-1)
        top = np.sin(lat + dlat / 2)
        bot = np.sin(lat - dlat / 2)
        band = space.radius**2 * np.abs(top - bot) * dlon
        vol = np.repeat(band, res)
        return SampledSpace(space, res, nodes, vol, _axes=(dlat, dlon))

    if k == "flat_cone":
        dr = space.radial_cutoff / res
        dphi = space.total_angle / res
        r = (np.arange(res) + 0.5) * dr
        phi = (np.arange(res) + 0.5) * dphi
        gr, gphi = np.meshgrid(r, phi, indexing="ij")
        nodes = np.stack([gr.ravel(), gphi.ravel()], axis=-1)
        vol = np.repeat(r * dr * dphi, res)  # midpoint rule exact for density r
        return SampledSpace(space, res, nodes, vol, _axes=(dr, dphi))

    # hyperbolic_disk: polar grid, exact band integral of the area element
    dr = space.chart_radius / res
    dphi = _TWO_PI / res
    r = (np.arange(res) + 0.5) * dr
    phi = (np.arange(res) + 0.5) * dphi
    gr, gphi = np.meshgrid(r, phi, indexing="ij")
    nodes = np.stack([(gr * np.cos(gphi)).ravel(), (gr * np.sin(gphi)).ravel()], axis=-1)
    r_hi = r + dr / 2
    r_lo = r - dr / 2
    band = (2.0 / (1.0 - r_hi**2) - 2.0 / (1.0 - r_lo**2)) * dphi
    vol = np.repeat(band, res)
    return SampledSpace(space, res, nodes, vol, _axes=(dr, dphi))


def _axis_index(u: np.ndarray, n: int, periodic: bool) -> np.ndarray:
    """Nearest grid-cell index for centre coordinates u (ties resolve down)."""
    idx = np.ceil(u - 0.5).astype(np.int64)
    if periodic:
        return np.mod(idx, n)
    return np.clip(idx, 0, n - 1)


def _snap(sampled: SampledSpace, pts: np.ndarray) -> np.ndarray:
    space = sampled.space
    res = sampled.resolution
    k = space.kind

    if k == "euclidean_box" and space.dim == 1:
        h = sampled._axes[0]
        return _axis_index(pts[..., 0] / h - 0.5, res, False)

    if k in ("euclidean_box", "flat_torus"):
        h = sampled._axes[0]
        per = k == "flat_torus"
        q = np.mod(pts, space.side) if per else pts
        i = _axis_index(q[..., 0] / h - 0.5, res, per)
        j = _axis_index(q[..., 1] / h - 0.5, res, per)
        return i * res + j

    if k == "round_sphere":
        dlat, dlon = sampled._axes
        i = _axis_index((pts[..., 0] + np.pi / 2) / dlat - 0.5, res, False)
        j = _axis_index(np.mod(pts[..., 1] + np.pi, _TWO_PI) / dlon - 0.5, res, True)
        return i * res + j

    if k == "flat_cone":
        dr, dphi = sampled._axes
        i = _axis_index(pts[..., 0] / dr - 0.5, res, False)
        j = _axis_index(np.mod(pts[..., 1], space.total_angle) / dphi - 0.5, res, True)
        return i * res + j

    # hyperbolic polar
    dr, dphi = sampled._axes
    r = np.sqrt(np.sum(pts**2, axis=-1))
    phi = np.mod(np.arctan2(pts[..., 1], pts[..., 0]), _TWO_PI)
    i = _axis_index(r / dr - 0.5, res, False)
    j = _axis_index(phi / dphi - 0.5, res, True)
    return i * res + j


# ---------------------------------------------------------------------------
# chart metric helpers (used by gradient-flow finite differences)
# ---------------------------------------------------------------------------


def metric_scale(space: ModelSpace, pts: np.ndarray) -> np.ndarray:
    """Factors turning chart partials into orthonormal-frame components."""
    p = np.asarray(pts, dtype=float)
    k = space.kind
    if k in ("euclidean_box", "flat_torus"):
        return np.ones_like(p)
    if k == "round_sphere":
        lat = p[..., 0]
        return np.stack([np.full_like(lat, 1.0 / space.radius),
                         1.0 / (space.radius * np.cos(lat))], axis=-1)
    if k == "flat_cone":
        r = p[..., 0]
        return np.stack([np.ones_like(r), 1.0 / r], axis=-1)
    lam = 2.0 / (1.0 - np.sum(p**2, axis=-1))
    return np.stack([1.0 / lam, 1.0 / lam], axis=-1)


def exp_map(space: ModelSpace, x: np.ndarray, direction: np.ndarray,
            length) -> np.ndarray:
    """Geodesic step of given length from x along an orthonormal-frame direction.

    ``direction`` holds components in the orthonormal chart frame (same frame
    as gradients returned by the finite-difference machinery); it need not be
    normalised -- only its direction is used.
    """
    x = validate_points(space, x)
    v = np.asarray(direction, dtype=float)
    L = np.asarray(length, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    unit = np.where(norm > 0, v / np.where(norm > 0, norm, 1.0), 0.0)
    k = space.kind

    if k == "euclidean_box":
        return x + L[..., None] * unit
    if k == "flat_torus":
        return np.mod(x + L[..., None] * unit, space.side)
    if k == "round_sphere":
        R = space.radius
        u = _sphere_embed(space, x)
        lat, lon = x[..., 0], x[..., 1]
        e_lat = np.stack([-np.sin(lat) * np.cos(lon), -np.sin(lat) * np.sin(lon),
                          np.cos(lat)], axis=-1)
        e_lon = np.stack([-np.sin(lon), np.cos(lon), np.zeros_like(lon)], axis=-1)
        tang = unit[..., :1] * e_lat + unit[..., 1:] * e_lon
        ang = L / R
        p = np.cos(ang)[..., None] * u + np.sin(ang)[..., None] * tang
        return np.stack([np.arcsin(np.clip(p[..., 2], -1, 1)),
                         np.arctan2(p[..., 1], p[..., 0])], axis=-1)
    if k == "flat_cone":
        r, phi = x[..., 0], x[..., 1]
        px = r + L * unit[..., 0]
        py = L * unit[..., 1]
        r2 = np.hypot(px, py)
        dphi = np.arctan2(py, px)
        return np.stack([r2, np.mod(phi + dphi, space.total_angle)], axis=-1)
    # hyperbolic: translate to origin, step radially, translate back
    z = _hyp_complex(x)
    vc = unit[..., 0] + 1j * unit[..., 1]
    zt = np.tanh(L / 2.0) * vc
    res = (zt + z) / (1.0 + np.conj(z) * zt)
    return np.stack([res.real, res.imag], axis=-1)
