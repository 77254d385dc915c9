"""Inf-convolution shifts of node fields and their structural checks.

``hj_shift`` computes HJ_t f(x) = min over candidate nodes y of
f(y) + d(x, y)^2 / (2 t).  Candidates are the nodes where f is finite, so
+inf sentinels (used to restrict potentials to measure supports) drop out of
the minimisation automatically; a -inf anywhere makes the shift unbounded
below and raises.  Evaluation points default to the grid nodes but may be
arbitrary chart points, which lets checks probe shifted fields exactly on
geodesics instead of interpolating.

On the grid the semigroup defect max(HJ_t1(HJ_t0 f) - HJ_{t0+t1} f) is
nonnegative by construction: restricting the intermediate point of the
composed minimisation to sample nodes can only raise the infimum.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _fastmin
from .errors import IllPosedShiftError, ShiftUndefinedError
from .interpolation import DynamicalCoupling
from .spaces import SampledSpace, distance, geodesic_point, pairwise_sqdist
from .transport import DiscreteMeasure, PotentialPair

_CHUNK = 512


def hj_shift(sampled: SampledSpace, f: np.ndarray, t: float,
             eval_points: np.ndarray | None = None) -> np.ndarray:
    """Shift a node field by time t; evaluate at nodes or given chart points."""
    if t <= 0:
        raise ValueError("shift time must be positive")
    f = np.asarray(f, dtype=float)
    if np.any(np.isneginf(f)):
        raise IllPosedShiftError("field contains -inf; shift unbounded below")
    finite = np.isfinite(f)
    if not np.any(finite):
        raise ShiftUndefinedError("field has no finite value")
    cand_idx = np.nonzero(finite)[0]
    cand_pts = sampled.nodes[cand_idx]
    cand_f = f[cand_idx]
    pts = sampled.nodes if eval_points is None else np.asarray(eval_points, dtype=float)
    if _fastmin.HAVE_NUMBA:
        return _fastmin.inf_convolve_min(sampled.space, pts, cand_pts, cand_f, t)
    out = np.empty(pts.shape[0])
    inv = 1.0 / (2.0 * t)
    for lo in range(0, pts.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, pts.shape[0])
        sq = pairwise_sqdist(sampled.space, pts[lo:hi], cand_pts, chunk=_CHUNK)
        sq *= inv
        sq += cand_f[None, :]
        out[lo:hi] = np.min(sq, axis=1)
    return out


@dataclass
class ShiftFamily:
    """Base field with cached shifts; a 1/t-concave family for t > 0."""

    sampled: SampledSpace
    base: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def at(self, t: float) -> np.ndarray:
        key = float(t)
        if key not in self._cache:
            self._cache[key] = hj_shift(self.sampled, self.base, key)
        return self._cache[key]

    def lam(self, t: float) -> float:
        return 1.0 / t


def semigroup_defect(sampled: SampledSpace, f: np.ndarray, t0: float, t1: float) -> float:
    """max over nodes of HJ_t1(HJ_t0 f) - HJ_{t0+t1} f  (>= 0 on samples)."""
    if t0 <= 0 or t1 <= 0:
        raise ValueError("shift times must be positive")
    inner = hj_shift(sampled, f, t0)
    composed = hj_shift(sampled, inner, t1)
    direct = hj_shift(sampled, f, t0 + t1)
    return float(np.max(composed - direct))


@dataclass(frozen=True)
class ConcavityAlongGeodesics:
    """Worst second difference of f_t(geodesic(s)) - s^2/(2t)."""

    t: float
    n_geodesics: int
    max_second_difference: float
    worst_pair: tuple


def family_concavity_check(family: ShiftFamily, t: float, n_geodesics: int = 25,
                           n_points: int = 9, seed: int = 0) -> ConcavityAlongGeodesics:
    """Sample node-pair geodesics and check 1/t-concavity of the shifted field.

    The shifted field is evaluated exactly at geodesic points (a fresh
    pointwise minimisation, not an interpolation), so on nonnegatively curved
    charts the second differences are nonpositive up to oracle roundoff.
    """
    sampled = family.sampled
    rng = np.random.default_rng(seed)
    worst = -np.inf
    worst_pair = (0, 0)
    s_params = np.linspace(0.0, 1.0, n_points)
    for _ in range(n_geodesics):
        i, j = rng.integers(0, sampled.n_nodes, 2)
        if i == j:
            continue
        x, y = sampled.nodes[i], sampled.nodes[j]
        L = float(distance(sampled.space, x, y))
        if L < 1e-12:
            continue
        pts = geodesic_point(sampled.space, np.broadcast_to(x, (n_points, x.shape[-1])),
                             np.broadcast_to(y, (n_points, y.shape[-1])), s_params)
        vals = hj_shift(sampled, family.base, t, eval_points=pts)
        s = s_params * L
        g = vals - s * s / (2.0 * t)
        ds = s[1] - s[0]
        second = (g[:-2] - 2.0 * g[1:-1] + g[2:]) / (ds * ds)
        m = float(np.max(second))
        if m > worst:
            worst, worst_pair = m, (int(i), int(j))
    return ConcavityAlongGeodesics(t=t, n_geodesics=n_geodesics,
                                   max_second_difference=worst, worst_pair=worst_pair)


@dataclass(frozen=True)
class PotentialInterpolationReport:
    """Interpolation identities of shifted dual potentials at one time."""

    t: float
    min_sum_nodes: float          # min over nodes of psi_t + phi_t
    max_abs_sum_on_rays: float    # |psi_t + phi_t| at snapped ray nodes
    max_abs_sum_exact: float      # same at exact geodesic points
    max_ray_identity_error: float  # psi_t(gamma(t)) vs psi(x) + t d^2/2
    checked_rays: int


def potential_interpolation_check(mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                                  pair: PotentialPair, coupling: DynamicalCoupling,
                                  t: float, mass_floor: float = 1e-6
                                  ) -> PotentialInterpolationReport:
    """Shift the certified potentials and verify the interpolation identities.

    psi_t = HJ_t psi and phi_t = HJ_{1-t}(-phi); both infima run over the
    respective measure supports only (the sentinel values exclude the rest).
    """
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie in (0, 1)")
    sampled = coupling.sampled
    psi_t = hj_shift(sampled, pair.psi, t)
    phi_t = hj_shift(sampled, -pair.phi, 1.0 - t)
    min_sum_nodes = float(np.min(psi_t + phi_t))

    keep = coupling.mass >= mass_floor
    src = coupling.src[keep]
    tgt = coupling.tgt[keep]
    pos = geodesic_point(sampled.space, sampled.nodes[src], sampled.nodes[tgt], t)
    snap_idx = sampled.snap(pos)
    sum_on_rays = float(np.max(np.abs(psi_t[snap_idx] + phi_t[snap_idx]))) if keep.any() else 0.0

    psi_exact = hj_shift(sampled, pair.psi, t, eval_points=pos)
    phi_exact = hj_shift(sampled, -pair.phi, 1.0 - t, eval_points=pos)
    sum_exact = float(np.max(np.abs(psi_exact + phi_exact))) if keep.any() else 0.0

    d = distance(sampled.space, sampled.nodes[src], sampled.nodes[tgt])
    expected = pair.psi[src] + t * 0.5 * d * d
    ray_err = float(np.max(np.abs(psi_exact - expected))) if keep.any() else 0.0

    return PotentialInterpolationReport(
        t=t, min_sum_nodes=min_sum_nodes, max_abs_sum_on_rays=sum_on_rays,
        max_abs_sum_exact=sum_exact, max_ray_identity_error=ray_err,
        checked_rays=int(keep.sum()))


@dataclass(frozen=True)
class ReverseContractionReport:
    """Integrated anti-Lipschitz bound over sampled ray pairs."""

    t0: float
    t1: float
    factor: float          # (t0/t1) * ((1-t1)/(1-t0))^2
    min_margin: float      # min over pairs of l(t1) - factor * l(t0)
    checked_pairs: int


def reverse_contraction_check(coupling: DynamicalCoupling, t0: float, t1: float,
                              n_pairs: int = 100, seed: int = 0
                              ) -> ReverseContractionReport:
    """Check l(t1) >= l(t0) * (t0/t1) * ((1-t1)/(1-t0))^2 for ray pairs.

    The factor integrates the separation rate bound l'/l >= -(1/t + 2/(1-t))
    between t0 and t1 in closed form.
    """
    if not 0.0 < t0 < t1 < 1.0:
        raise ValueError("need 0 < t0 < t1 < 1")
    n = coupling.n_rays
    if n < 2:
        raise ValueError("need at least two rays")
    rng = np.random.default_rng(seed)
    ii = rng.integers(0, n, n_pairs)
    jj = rng.integers(0, n, n_pairs)
    distinct = ii != jj
    ii, jj = ii[distinct], jj[distinct]
    p0 = coupling.positions(t0)
    p1 = coupling.positions(t1)
    sp = coupling.sampled.space
    l0 = distance(sp, p0[ii], p0[jj])
    l1 = distance(sp, p1[ii], p1[jj])
    factor = (t0 / t1) * ((1.0 - t1) / (1.0 - t0)) ** 2
    margin = float(np.min(l1 - factor * l0)) if len(ii) else 0.0
    return ReverseContractionReport(t0=t0, t1=t1, factor=factor,
                                    min_margin=margin, checked_pairs=int(len(ii)))


def field_csv(sampled: SampledSpace, values: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "value"])
        for i, v in enumerate(values):
            w.writerow([i, repr(float(v))])
