"""Exact/entropic solvers against enumeration oracles, plus dual certificates."""

from itertools import permutations

import numpy as np
import pytest

from cdlab import spaces, transport
from cdlab.errors import CapacityError, ConvergenceError
from cdlab.transport import (DiscreteMeasure, dual_potentials, point_mass,
                             solve_entropic, solve_exact, uniform_measure,
                             w2_distance)

BOX = spaces.euclidean_box(2.0)


def nw_vertex_cost(a, b, C, pr, pc):
    """Cost of the northwest-corner vertex for one (row, column) order."""
    ra = [a[i] for i in pr]
    rb = [b[j] for j in pc]
    i = j = 0
    cost = 0.0
    while i < len(pr) and j < len(pc):
        m = min(ra[i], rb[j])
        cost += m * C[pr[i], pc[j]]
        ra[i] -= m
        rb[j] -= m
        done_i = ra[i] <= 1e-15
        done_j = rb[j] <= 1e-15
        if done_i:
            i += 1
        if done_j:
            j += 1
    return cost


def brute_force_cost(a, b, C):
    """Optimal cost by enumerating every basic feasible plan."""
    m, n = C.shape
    best = np.inf
    for pr in permutations(range(m)):
        for pc in permutations(range(n)):
            best = min(best, nw_vertex_cost(a, b, C, pr, pc))
    return best


def random_instance(rng, res=12, max_pts=4):
    ss = spaces.sample(BOX, res)
    k0 = rng.integers(1, max_pts + 1)
    k1 = rng.integers(1, max_pts + 1)
    i0 = rng.choice(ss.n_nodes, size=k0, replace=False)
    i1 = rng.choice(ss.n_nodes, size=k1, replace=False)
    w0 = np.zeros(ss.n_nodes)
    w1 = np.zeros(ss.n_nodes)
    a = rng.dirichlet(np.ones(k0))
    b = rng.dirichlet(np.ones(k1))
    w0[i0] = a
    w1[i1] = b
    return ss, DiscreteMeasure(ss, w0), DiscreteMeasure(ss, w1)


# ---------------------------------------------------------------------------
# exact solver
# ---------------------------------------------------------------------------


def test_identity_plan_zero_cost():
    ss = spaces.sample(BOX, 8)
    mu = uniform_measure(ss, np.arange(10, 20))
    plan = solve_exact(mu, mu)
    assert plan.cost == pytest.approx(0.0, abs=1e-15)
    assert np.array_equal(np.sort(plan.src), np.sort(plan.tgt))
    assert w2_distance(plan) == pytest.approx(0.0, abs=1e-7)


def test_point_masses_single_coupling():
    ss = spaces.sample(BOX, 8)
    mu0 = point_mass(ss, 3)
    mu1 = point_mass(ss, 40)
    plan = solve_exact(mu0, mu1)
    d = float(spaces.distance(BOX, ss.nodes[3], ss.nodes[40]))
    assert plan.n_couplings == 1
    assert plan.cost == pytest.approx(0.5 * d * d, rel=1e-12)
    assert w2_distance(plan) == pytest.approx(d, rel=1e-9)


def test_2x2_vertical_matching():
    # sources (0,0),(1,0); targets (0,1),(1,1); enumerate both matchings
    ss = spaces.sample(spaces.euclidean_box(2.0), 4)
    # grid step 0.5; nodes at (i+0.5)/2: put masses on exact nodes
    def node_at(x, y):
        return int(ss.snap(np.array([[x, y]]))[0])
    s00, s10 = node_at(0.25, 0.25), node_at(1.25, 0.25)
    t01, t11 = node_at(0.25, 1.25), node_at(1.25, 1.25)
    w0 = np.zeros(ss.n_nodes)
    w1 = np.zeros(ss.n_nodes)
    w0[[s00, s10]] = 0.5
    w1[[t01, t11]] = 0.5
    mu0, mu1 = DiscreteMeasure(ss, w0), DiscreteMeasure(ss, w1)
    plan = solve_exact(mu0, mu1)
    vertical = 0.5 * (0.5 * 1.0**2) + 0.5 * (0.5 * 1.0**2)
    crossing = 0.5 * (0.5 * 2.0) + 0.5 * (0.5 * 2.0)
    assert plan.cost == pytest.approx(min(vertical, crossing), abs=1e-12)
    assert plan.cost == pytest.approx(0.5, abs=1e-12)
    assert w2_distance(plan) == pytest.approx(1.0, abs=1e-9)
    # matching is vertical: each source pairs with the target straight above
    pairs = dict(zip(plan.src, plan.tgt))
    assert pairs[s00] == t01 and pairs[s10] == t11


def test_exact_matches_brute_force():
    rng = np.random.default_rng(42)
    for _ in range(25):
        ss, mu0, mu1 = random_instance(rng)
        plan = solve_exact(mu0, mu1)
        s0, s1 = mu0.support, mu1.support
        C = transport.cost_matrix(ss, s0, s1)
        ref = brute_force_cost(mu0.weights[s0], mu1.weights[s1], C)
        assert plan.cost == pytest.approx(ref, abs=1e-12)


def test_marginals_and_support_bound():
    rng = np.random.default_rng(1)
    ss = spaces.sample(BOX, 16)
    i0 = rng.choice(ss.n_nodes, 30, replace=False)
    i1 = rng.choice(ss.n_nodes, 45, replace=False)
    mu0 = uniform_measure(ss, i0)
    mu1 = uniform_measure(ss, i1)
    plan = solve_exact(mu0, mu1)
    m0, m1 = plan.marginals()
    assert np.max(np.abs(m0 - mu0.weights)) <= 1e-10
    assert np.max(np.abs(m1 - mu1.weights)) <= 1e-10
    assert np.all(plan.mass >= 0)
    assert plan.n_couplings <= 30 + 45 - 1


def test_cyclical_monotonicity_spot_check():
    rng = np.random.default_rng(2)
    ss, mu0, mu1 = random_instance(rng, res=16, max_pts=4)
    plan = solve_exact(mu0, mu1)
    nodes = ss.nodes
    for _ in range(50):
        e1, e2 = rng.integers(0, plan.n_couplings, 2)
        x1, y1 = nodes[plan.src[e1]], nodes[plan.tgt[e1]]
        x2, y2 = nodes[plan.src[e2]], nodes[plan.tgt[e2]]
        d = lambda p, q: float(spaces.distance(BOX, p, q))
        lhs = 0.5 * d(x1, y1) ** 2 + 0.5 * d(x2, y2) ** 2
        rhs = 0.5 * d(x1, y2) ** 2 + 0.5 * d(x2, y1) ** 2
        assert lhs <= rhs + 1e-9


def test_w2_triangle_inequality():
    rng = np.random.default_rng(3)
    ss = spaces.sample(BOX, 10)
    for _ in range(6):
        measures = []
        for _ in range(3):
            idx = rng.choice(ss.n_nodes, rng.integers(3, 8), replace=False)
            measures.append(uniform_measure(ss, idx))
        a, b, c = measures
        dab = w2_distance(solve_exact(a, b))
        dbc = w2_distance(solve_exact(b, c))
        dac = w2_distance(solve_exact(a, c))
        assert dac <= dab + dbc + 1e-7


def test_capacity_error():
    ss = spaces.sample(BOX, 12)
    mu0 = uniform_measure(ss, np.arange(100))
    mu1 = uniform_measure(ss, np.arange(100, 144))
    with pytest.raises(CapacityError):
        solve_exact(mu0, mu1, support_cap=50)


def test_measure_validation():
    ss = spaces.sample(BOX, 4)
    w = np.zeros(ss.n_nodes)
    w[0] = 0.5
    with pytest.raises(ValueError):
        DiscreteMeasure(ss, w)  # does not sum to 1
    w = np.zeros(ss.n_nodes)
    w[0] = 1.5
    w[1] = -0.5
    with pytest.raises(ValueError):
        DiscreteMeasure(ss, w)


# ---------------------------------------------------------------------------
# dual certification
# ---------------------------------------------------------------------------


def test_dual_point_masses():
    ss = spaces.sample(BOX, 8)
    mu0 = point_mass(ss, 5)
    mu1 = point_mass(ss, 50)
    plan = solve_exact(mu0, mu1)
    pair = dual_potentials(mu0, mu1, plan)
    d = float(spaces.distance(BOX, ss.nodes[5], ss.nodes[50]))
    assert pair.psi[5] == pytest.approx(0.0, abs=1e-12)
    assert pair.phi[50] == pytest.approx(0.5 * d * d, rel=1e-12)
    assert np.isinf(pair.psi[0]) and np.isneginf(pair.phi[0])


def test_dual_identity():
    ss = spaces.sample(BOX, 8)
    mu = uniform_measure(ss, np.arange(12, 24))
    plan = solve_exact(mu, mu)
    pair = dual_potentials(mu, mu, plan)
    s = mu.support
    # certificate is valid and psi == 0, phi == 0 is among the feasible pairs
    gap = transport.duality_gap(pair, mu, mu, plan)
    assert gap <= 1e-9
    C = transport.cost_matrix(ss, s, s)
    assert np.all(0.0 - 0.0 <= C + 1e-9)


def test_dual_2x2_certificate():
    ss = spaces.sample(spaces.euclidean_box(2.0), 4)
    idx = ss.snap(np.array([[0.25, 0.25], [1.25, 0.25], [0.25, 1.25], [1.25, 1.25]]))
    w0 = np.zeros(ss.n_nodes)
    w1 = np.zeros(ss.n_nodes)
    w0[idx[:2]] = 0.5
    w1[idx[2:]] = 0.5
    mu0, mu1 = DiscreteMeasure(ss, w0), DiscreteMeasure(ss, w1)
    plan = solve_exact(mu0, mu1)
    pair = dual_potentials(mu0, mu1, plan)
    # equality on both couplings
    for s, t, _ in zip(plan.src, plan.tgt, plan.mass):
        d = float(spaces.distance(BOX, ss.nodes[s], ss.nodes[t]))
        assert pair.phi[t] - pair.psi[s] == pytest.approx(0.5 * d * d, abs=1e-9)
    assert transport.duality_gap(pair, mu0, mu1, plan) <= 1e-9
    # normalisation: psi vanishes at the lowest-index support node
    assert pair.psi[mu0.support[0]] == pytest.approx(0.0, abs=0.0)


def test_dual_random_instances_feasible():
    rng = np.random.default_rng(7)
    for _ in range(15):
        ss, mu0, mu1 = random_instance(rng, res=10)
        plan = solve_exact(mu0, mu1)
        pair = dual_potentials(mu0, mu1, plan)
        s0, s1 = mu0.support, mu1.support
        C = transport.cost_matrix(ss, s0, s1)
        slack = C - (pair.phi[s1][None, :] - pair.psi[s0][:, None])
        assert slack.min() >= -1e-9
        assert transport.duality_gap(pair, mu0, mu1, plan) <= 1e-9


# ---------------------------------------------------------------------------
# entropic solver
# ---------------------------------------------------------------------------


def test_entropic_identical_measures_bias_bound():
    ss = spaces.sample(BOX, 8)
    mu = uniform_measure(ss, np.arange(20, 36))
    for eps in (1e-1, 1e-2):
        plan = solve_entropic(mu, mu, eps)
        n = len(mu.support)
        assert plan.cost >= -1e-15
        assert plan.cost <= eps * np.log(n) + 1e-12


def test_entropic_point_masses_exact():
    ss = spaces.sample(BOX, 8)
    mu0 = point_mass(ss, 2)
    mu1 = point_mass(ss, 61)
    plan = solve_entropic(mu0, mu1, 1e-3)
    d = float(spaces.distance(BOX, ss.nodes[2], ss.nodes[61]))
    assert plan.cost == pytest.approx(0.5 * d * d, abs=1e-8)


def test_entropic_converges_to_exact():
    ss = spaces.sample(spaces.euclidean_box(2.0), 4)
    idx = ss.snap(np.array([[0.25, 0.25], [1.25, 0.25], [0.25, 1.25], [1.25, 1.25]]))
    w0 = np.zeros(ss.n_nodes)
    w1 = np.zeros(ss.n_nodes)
    w0[idx[:2]] = 0.5
    w1[idx[2:]] = 0.5
    mu0, mu1 = DiscreteMeasure(ss, w0), DiscreteMeasure(ss, w1)
    plan = solve_entropic(mu0, mu1, 1e-3)
    assert plan.cost >= 0.5 - 1e-12          # never below the exact optimum
    assert plan.cost == pytest.approx(0.5, abs=1e-2)
    m0, m1 = plan.marginals()
    assert np.max(np.abs(m0 - mu0.weights)) <= 1e-10


def test_entropic_bias_shrinks_with_epsilon():
    rng = np.random.default_rng(11)
    ss, mu0, mu1 = random_instance(rng, res=10, max_pts=4)
    exact = solve_exact(mu0, mu1).cost
    gaps = [solve_entropic(mu0, mu1, eps).cost - exact for eps in (1e-1, 1e-2, 1e-3)]
    assert all(g >= -1e-12 for g in gaps)
    assert gaps[2] <= gaps[0] + 1e-12


def test_entropic_nonconvergence_error():
    ss = spaces.sample(BOX, 8)
    mu0 = uniform_measure(ss, np.arange(0, 8))
    mu1 = uniform_measure(ss, np.arange(40, 48))
    with pytest.raises(ConvergenceError) as err:
        solve_entropic(mu0, mu1, 1e-2, max_iter=2, residual_target=1e-14)
    assert err.value.residual is not None
