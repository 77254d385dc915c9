"""Discrete optimal transport with quadratic cost and dual certification.

Measures live on the nodes of a :class:`~cdlab.spaces.SampledSpace`.  The
internal cost is ``d(x, y)^2 / 2`` so that dual potentials satisfy
``phi(y) - psi(x) <= d(x, y)^2 / 2``; the order-2 Wasserstein distance is
``sqrt(2 * cost)``.

The exact solver is a linear program handed to HiGHS (simplex for small
supports, interior point with crossover above that); both return vertex
solutions, so plans have at most ``|supp mu0| + |supp mu1| - 1`` couplings.
Optimality is certified independently by propagating dual potentials over
the plan graph and checking feasibility plus the duality gap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import CapacityError, CertificationError, ConvergenceError, SingularityError
from .spaces import SampledSpace, pairwise_sqdist

MASS_TOL = 1e-12
MARGINAL_TOL = 1e-10
FEAS_TOL = 1e-9
GAP_TOL = 1e-9

# HiGHS simplex wins below this support size, interior point above.
_SIMPLEX_MAX = 192


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure given by nonnegative node weights."""

    sampled: SampledSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.shape != (self.sampled.n_nodes,):
            raise ValueError("weights must have one entry per node")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"weights must sum to 1 (off by {w.sum() - 1.0:.2e})")
        if np.any((w > 0) & (self.sampled.cell_volume <= 0)):
            raise SingularityError("mass on a zero-volume cell")

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.weights > 0)[0]

    def density(self) -> np.ndarray:
        return self.weights / self.sampled.cell_volume


def uniform_measure(sampled: SampledSpace, node_idx: np.ndarray) -> DiscreteMeasure:
    """Uniform (volume-weighted) probability measure on the given cells."""
    idx = np.unique(np.asarray(node_idx, dtype=np.int64))
    w = np.zeros(sampled.n_nodes)
    vols = sampled.cell_volume[idx]
    w[idx] = vols / vols.sum()
    return DiscreteMeasure(sampled, w)


def point_mass(sampled: SampledSpace, node: int) -> DiscreteMeasure:
    w = np.zeros(sampled.n_nodes)
    w[node] = 1.0
    return DiscreteMeasure(sampled, w)


@dataclass(frozen=True)
class TransportPlan:
    """Sparse coupling between two measures on one sampled space."""

    sampled: SampledSpace
    src: np.ndarray   # node indices into the grid
    tgt: np.ndarray
    mass: np.ndarray
    cost: float       # sum of mass * d^2/2

    @property
    def n_couplings(self) -> int:
        return len(self.mass)

    def marginals(self):
        n = self.sampled.n_nodes
        mu0 = np.bincount(self.src, weights=self.mass, minlength=n)
        mu1 = np.bincount(self.tgt, weights=self.mass, minlength=n)
        return mu0, mu1

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["source_node", "target_node", "mass"])
            for s, t, m in zip(self.src, self.tgt, self.mass):
                w.writerow([int(s), int(t), repr(float(m))])


@dataclass(frozen=True)
class PotentialPair:
    """Dual potentials; psi is +inf off supp mu0, phi is -inf off supp mu1."""

    sampled: SampledSpace
    psi: np.ndarray
    phi: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "psi", "phi"])
            for i in range(self.sampled.n_nodes):
                w.writerow([i, repr(float(self.psi[i])), repr(float(self.phi[i]))])


def _check_pair(mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> None:
    if mu0.sampled is not mu1.sampled:
        raise ValueError("measures must live on the same sampled space")


def cost_matrix(sampled: SampledSpace, idx0: np.ndarray, idx1: np.ndarray) -> np.ndarray:
    C = 0.5 * pairwise_sqdist(sampled.space, sampled.nodes[idx0], sampled.nodes[idx1])
    # identical nodes cost exactly zero (gram forms leave ~1e-16 residue)
    same = np.asarray(idx0)[:, None] == np.asarray(idx1)[None, :]
    if same.any():
        C[same] = 0.0
    return C


def solve_exact(mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                support_cap: int = 4096) -> TransportPlan:
    """Optimal plan for cost d^2/2; support size <= |s0| + |s1| - 1."""
    _check_pair(mu0, mu1)
    s0, s1 = mu0.support, mu1.support
    if len(s0) > support_cap or len(s1) > support_cap:
        raise CapacityError(
            f"support sizes ({len(s0)}, {len(s1)}) exceed cap {support_cap}; "
            "use solve_entropic for larger instances")
    a = mu0.weights[s0]
    b = mu1.weights[s1]
    C = cost_matrix(mu0.sampled, s0, s1)

    # degenerate single-point supports bypass the LP
    if len(s0) == 1 or len(s1) == 1:
        src = np.repeat(s0, len(s1)) if len(s0) == 1 else s0
        tgt = s1 if len(s0) == 1 else np.repeat(s1, len(s0))
        mass = b if len(s0) == 1 else a
        cost = float(np.sum(mass * C.ravel()))
        return TransportPlan(mu0.sampled, src, tgt, mass, cost)

    P = _lp_transport(a, b, C)
    ii, jj = np.nonzero(P > 0)
    mass = P[ii, jj]
    plan = TransportPlan(mu0.sampled, s0[ii], s1[jj], mass,
                         float(np.sum(mass * C[ii, jj])))
    _validate_marginals(plan, mu0, mu1)
    return plan


def _lp_transport(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> np.ndarray:
    m, n = C.shape
    # rescale so the smallest positive mass is O(1); the solver's absolute
    # feasibility tolerance (~1e-7) would otherwise drop tiny marginals
    min_pos = min(a[a > 0].min(), b[b > 0].min())
    scale = float(np.clip(1.0 / min_pos, 1.0, 1e14))
    a = a * scale
    b = b * scale
    ii = np.repeat(np.arange(m), n)
    jj = np.arange(m * n)
    rows = sparse.coo_matrix((np.ones(m * n), (ii, jj)), shape=(m, m * n))
    ii2 = np.tile(np.arange(n), m)
    keep = ii2 < n - 1  # last column constraint is redundant
    cols = sparse.coo_matrix((np.ones(int(keep.sum())), (ii2[keep], jj[keep])),
                             shape=(n - 1, m * n))
    A = sparse.vstack([rows, cols]).tocsr()
    rhs = np.concatenate([a, b[:-1]])
    method = "highs" if max(m, n) <= _SIMPLEX_MAX else "highs-ipm"
    # default solver tolerances (1e-7) admit bases whose duals are off by
    # more than the 1e-9 certification budget; tighten them
    opts = {"primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10}
    if method == "highs-ipm":
        opts["ipm_optimality_tolerance"] = 1e-12
    res = linprog(C.ravel(), A_eq=A, b_eq=rhs, bounds=(0, None), method=method,
                  options=opts)
    if res.status == 2:
        # presolve mislabels instances with marginal entries near its
        # feasibility tolerance as infeasible; retry without it
        res = linprog(C.ravel(), A_eq=A, b_eq=rhs, bounds=(0, None),
                      method=method, options=dict(opts, presolve=False))
    if res.status != 0:
        raise ConvergenceError(f"LP solver failed: {res.message}")
    return res.x.reshape(m, n) / scale


def _validate_marginals(plan: TransportPlan, mu0: DiscreteMeasure,
                        mu1: DiscreteMeasure) -> None:
    m0, m1 = plan.marginals()
    e0 = np.max(np.abs(m0 - mu0.weights))
    e1 = np.max(np.abs(m1 - mu1.weights))
    if max(e0, e1) > MARGINAL_TOL:
        raise ConvergenceError(f"plan marginals off by {max(e0, e1):.2e}", max(e0, e1))


def solve_entropic(mu0: DiscreteMeasure, mu1: DiscreteMeasure, epsilon: float,
                   max_iter: int = 50_000, residual_target: float = 1e-9) -> TransportPlan:
    """Entropically regularised plan, rounded to exact marginals.

    Log-domain Sinkhorn iterations followed by the standard rounding that
    restores the marginals exactly, so the returned (feasible) plan costs at
    least the unregularised optimum.
    """
    _check_pair(mu0, mu1)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    s0, s1 = mu0.support, mu1.support
    a = mu0.weights[s0]
    b = mu1.weights[s1]
    C = cost_matrix(mu0.sampled, s0, s1)

    if len(s0) == 1 or len(s1) == 1:
        return solve_exact(mu0, mu1)

    log_a = np.log(a)
    log_b = np.log(b)
    K = -C / epsilon
    f = np.zeros(len(a))
    g = np.zeros(len(b))
    residual = np.inf
    for _ in range(max_iter):
        f = log_a - _logsumexp_rows(K + g[None, :])
        g = log_b - _logsumexp_rows((K + f[:, None]).T)
        logP = f[:, None] + K + g[None, :]
        rows = np.exp(_logsumexp_rows(logP))
        residual = float(np.max(np.abs(rows - a)))
        if residual <= residual_target:
            break
    else:
        raise ConvergenceError(
            f"Sinkhorn did not reach residual {residual_target:.1e} "
            f"in {max_iter} iterations", residual)

    P = np.exp(logP)
    P = _round_to_marginals(P, a, b)
    ii, jj = np.nonzero(P > 0)
    mass = P[ii, jj]
    plan = TransportPlan(mu0.sampled, s0[ii], s1[jj], mass,
                         float(np.sum(mass * C[ii, jj])))
    _validate_marginals(plan, mu0, mu1)
    return plan


def _logsumexp_rows(M: np.ndarray) -> np.ndarray:
    mx = M.max(axis=1)
    return mx + np.log(np.sum(np.exp(M - mx[:, None]), axis=1))


def _round_to_marginals(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Scale rows/columns down, then patch the residual with a rank-1 term."""
    r = P.sum(axis=1)
    P = P * np.minimum(a / np.where(r > 0, r, 1.0), 1.0)[:, None]
    c = P.sum(axis=0)
    P = P * np.minimum(b / np.where(c > 0, c, 1.0), 1.0)[None, :]
    da = a - P.sum(axis=1)
    db = b - P.sum(axis=0)
    s = da.sum()
    if s > 0:
        P = P + np.outer(da, db) / s
    return P


def dual_potentials(mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                    plan: TransportPlan) -> PotentialPair:
    """Kantorovich potentials certifying optimality of ``plan``.

    Values propagate along the plan graph (where equality must hold), the
    additive freedom between graph components is fixed by a shortest-path
    pass over the cross-component slack, and the result is certified by a
    feasibility sweep plus the duality-gap test.
    """
    _check_pair(mu0, mu1)
    s0, s1 = mu0.support, mu1.support
    pos0 = {int(n): i for i, n in enumerate(s0)}
    pos1 = {int(n): i for i, n in enumerate(s1)}
    C = cost_matrix(mu0.sampled, s0, s1)

    li = np.array([pos0[int(s)] for s in plan.src], dtype=np.int64)
    lj = np.array([pos1[int(t)] for t in plan.tgt], dtype=np.int64)

    psi_l, phi_l, comp0, comp1, n_comp = _propagate_on_graph(len(s0), len(s1), li, lj, C)
    if n_comp > 1:
        shifts = _component_shifts(C, psi_l, phi_l, comp0, comp1, n_comp)
        psi_l = psi_l + shifts[comp0]
        phi_l = phi_l + shifts[comp1]

    # normalisation: psi vanishes at the lowest-index support node of mu0
    delta = -psi_l[0]
    psi_l = psi_l + delta
    phi_l = phi_l + delta

    _certify(psi_l, phi_l, C, li, lj, plan, mu0, mu1, s0, s1)

    psi = np.full(mu0.sampled.n_nodes, np.inf)
    phi = np.full(mu0.sampled.n_nodes, -np.inf)
    psi[s0] = psi_l
    phi[s1] = phi_l
    return PotentialPair(mu0.sampled, psi, phi)


def _propagate_on_graph(n0, n1, li, lj, C):
    """BFS over the coupling graph: phi(y) - psi(x) = c(x, y) on every edge."""
    adj_src = [[] for _ in range(n0)]
    adj_tgt = [[] for _ in range(n1)]
    for e, (i, j) in enumerate(zip(li, lj)):
        adj_src[i].append(e)
        adj_tgt[j].append(e)
    psi = np.full(n0, np.nan)
    phi = np.full(n1, np.nan)
    comp0 = np.full(n0, -1, dtype=np.int64)
    comp1 = np.full(n1, -1, dtype=np.int64)
    n_comp = 0
    for start in range(n0):
        if comp0[start] >= 0:
            continue
        comp0[start] = n_comp
        psi[start] = 0.0
        stack = [("s", start)]
        while stack:
            side, v = stack.pop()
            if side == "s":
                for e in adj_src[v]:
                    j = lj[e]
                    if comp1[j] < 0:
                        comp1[j] = n_comp
                        phi[j] = psi[v] + C[v, j]
                        stack.append(("t", j))
            else:
                for e in adj_tgt[v]:
                    i = li[e]
                    if comp0[i] < 0:
                        comp0[i] = n_comp
                        psi[i] = phi[v] - C[i, v]
                        stack.append(("s", i))
        n_comp += 1
    # isolated target nodes (zero-weight couplings dropped) cannot occur:
    # every support node carries mass, hence at least one coupling
    if np.any(comp1 < 0):
        raise CertificationError("plan graph does not cover supp mu1")
    return psi, phi, comp0, comp1, n_comp


def _component_shifts(C, psi, phi, comp0, comp1, n_comp):
    """Shortest-path shifts making cross-component pairs dual-feasible."""
    slack = C - (phi[None, :] - psi[:, None])
    w = np.full((n_comp, n_comp), np.inf)
    flat = comp0[:, None] * n_comp + comp1[None, :]
    np.minimum.at(w.ravel(), flat.ravel(), slack.ravel())
    dist = np.full(n_comp, np.inf)
    dist[0] = 0.0
    # shortest paths settle after n_comp - 1 sweeps; any further improvement
    # beyond roundoff would signal a negative cycle (impossible for optimal
    # plans, so it indicates a non-optimal input)
    for _ in range(n_comp - 1):
        dist = np.minimum(dist, np.min(dist[:, None] + w, axis=0))
    extra = np.minimum(dist, np.min(dist[:, None] + w, axis=0))
    if np.any(dist - extra > 1e-9):
        raise CertificationError("negative slack cycle (plan not optimal?)")
    if not np.all(np.isfinite(dist)):
        raise CertificationError("disconnected component without cross slack")
    return dist


def _certify(psi, phi, C, li, lj, plan, mu0, mu1, s0, s1):
    feas = C - (phi[None, :] - psi[:, None])
    worst = float(feas.min())
    if worst < -FEAS_TOL:
        raise CertificationError(f"dual feasibility violated by {-worst:.2e}")
    edge_gap = float(np.max(np.abs(feas[li, lj]))) if len(li) else 0.0
    if edge_gap > FEAS_TOL:
        raise CertificationError(f"complementary slackness off by {edge_gap:.2e}")
    dual_value = float(np.sum(phi * mu1.weights[s1]) - np.sum(psi * mu0.weights[s0]))
    gap = abs(dual_value - plan.cost)
    if gap > GAP_TOL:
        raise CertificationError(f"duality gap {gap:.2e} exceeds {GAP_TOL:.1e} "
                                 "(plan not optimal?)")


def duality_gap(pair: PotentialPair, mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                plan: TransportPlan) -> float:
    s0, s1 = mu0.support, mu1.support
    dual_value = float(np.sum(pair.phi[s1] * mu1.weights[s1])
                       - np.sum(pair.psi[s0] * mu0.weights[s0]))
    return abs(dual_value - plan.cost)


def w2_distance(plan: TransportPlan) -> float:
    """Order-2 Wasserstein distance of an optimal plan."""
    return float(np.sqrt(max(2.0 * plan.cost, 0.0)))
