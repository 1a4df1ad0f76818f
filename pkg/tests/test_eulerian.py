import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvlift import (
    ClassicalMap,
    EulerianCertificate,
    MeasureField,
    MomentumField,
    SubdomainMask,
    TargetGrid,
    build_interval,
    check_eulerian_certificate,
    conjugate,
    embed,
    eval_BW,
    eval_energy,
    full_mask,
    mollify_y,
    operator_norm_tv,
    p_power,
    quadratic,
    solve_eulerian,
    solve_eulerian_localized,
    zero_momentum,
)
from mvlift.analysis import build_sqrt_circle
from conftest import measure_from_rows, random_rows


def grid1(m=8, periodic=False, lo=0.0, hi=1.0):
    return TargetGrid(q=1, cells=(m,), mins=(lo,), maxs=(hi,), periodic=(periodic,))


def random_instance(seed, n=5, m=6, floor=0.15):
    rng = np.random.default_rng(seed)
    d = build_interval(n, 1.0)
    g = grid1(m)
    mu = measure_from_rows(g, random_rows(rng, n, m, floor=floor))
    return d, g, mu


# ---------------------------------------------------------------------------
# the perspective energy


def test_bw_zero_flux_is_zero():
    d, g, mu = random_instance(0)
    assert eval_BW(mu, zero_momentum(d, g), full_mask(d), quadratic(0.5)) == 0.0


def test_bw_uniform_unit_velocity():
    d = build_interval(3, 1.0)
    g = grid1(4)
    mu = measure_from_rows(g, np.full((3, 4), 0.25))
    edges = d.induced_edges(full_mask(d))
    # cells carry momentum = velocity * rho_bar with velocity 1 at interior faces
    comp = np.zeros((2, 5))
    comp[:, 1:-1] = 0.25
    J = MomentumField(domain=d, grid=g, edge_indices=edges, components=(comp,))
    # boundary cells see half the face average; correct by doubling end faces is
    # not admissible (zero-flux), so test on the interior-supported exact case
    val = eval_BW(mu, J, full_mask(d), quadratic(0.5))
    cells = J.cell_values()[0, :, 0]
    expect = sum(0.5 * c**2 / 0.25 for c in cells) * 2 * d.edge_weight[0]
    assert val == pytest.approx(expect, abs=1e-12)


def test_bw_singular_part_conventions():
    d = build_interval(3, 1.0)
    g = grid1(4)
    rho = np.zeros((3, 4))
    rho[:, 0] = 1.0
    mu = MeasureField(grid=g, rho=rho)
    edges = d.induced_edges(full_mask(d))
    comp = np.zeros((2, 5))
    comp[:, 2:4] = 0.2  # momentum across empty cells
    J = MomentumField(domain=d, grid=g, edge_indices=edges, components=(comp,))
    assert math.isinf(eval_BW(mu, J, full_mask(d), quadratic(0.5)))
    tv = eval_BW(mu, J, full_mask(d), operator_norm_tv(1.0))
    assert math.isfinite(tv) and tv > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_bw_jointly_convex_sampled(seed):
    rng = np.random.default_rng(seed)
    d = build_interval(3, 1.0)
    g = grid1(4)
    mask = full_mask(d)
    edges = d.induced_edges(mask)
    W = quadratic(0.5)

    def rand_pair():
        mu = measure_from_rows(g, random_rows(rng, 3, 4, floor=0.05))
        comp = rng.standard_normal((2, 5)) * 0.2
        comp[:, 0] = comp[:, -1] = 0.0
        return mu, MomentumField(domain=d, grid=g, edge_indices=edges, components=(comp,))

    mu1, J1 = rand_pair()
    mu2, J2 = rand_pair()
    mid_mu = MeasureField(grid=g, rho=0.5 * (mu1.rho + mu2.rho))
    mid_J = MomentumField(domain=d, grid=g, edge_indices=edges,
                          components=(0.5 * (J1.components[0] + J2.components[0]),))
    avg = 0.5 * (eval_BW(mu1, J1, mask, W) + eval_BW(mu2, J2, mask, W))
    if math.isfinite(avg):
        assert eval_BW(mid_mu, mid_J, mask, W) <= avg + 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_bw_dual_pair_inequality_sampled(seed):
    # linear functional from (a, b) with a + W*(b) <= 0 never exceeds the energy
    rng = np.random.default_rng(seed)
    d, g, mu = random_instance(seed, n=3, m=4)
    mask = full_mask(d)
    edges = d.induced_edges(mask)
    W = quadratic(0.5)
    comp = rng.standard_normal((2, 5)) * 0.3
    comp[:, 0] = comp[:, -1] = 0.0
    J = MomentumField(domain=d, grid=g, edge_indices=edges, components=(comp,))
    b = rng.standard_normal((2, 4))
    a = -np.array([[conjugate(W, bb) for bb in row] for row in b])
    flat = mu.flat()
    rho_bar = 0.5 * (flat[d.edge_tail[edges]] + flat[d.edge_head[edges]])
    cells = J.cell_values()[:, :, 0]
    lin = float((d.edge_weight[edges][:, None] * (a * rho_bar + b * cells)).sum())
    assert lin <= eval_BW(mu, J, mask, W) + 1e-8


def test_bw_coercivity_sampled():
    rng = np.random.default_rng(5)
    d = build_interval(4, 1.0)
    g = grid1(5)
    mask = full_mask(d)
    edges = d.induced_edges(mask)
    for W in (quadratic(0.5), p_power(3.0, 0.7), operator_norm_tv(1.0)):
        c1, c2 = W.linear_growth
        for _ in range(250):
            mu = measure_from_rows(g, random_rows(rng, 4, 5, floor=0.02))
            comp = rng.standard_normal((3, 6))
            comp[:, 0] = comp[:, -1] = 0.0
            J = MomentumField(domain=d, grid=g, edge_indices=edges, components=(comp,))
            val = eval_BW(mu, J, mask, W)
            w = d.edge_weight[edges]
            mass = float((w[:, None] * np.abs(J.cell_values()[:, :, 0])).sum())
            volume = float(w.sum())
            assert val >= c1 * mass - c2 * volume - 1e-8


# ---------------------------------------------------------------------------
# the flux solver


def test_solver_constant_rows_zero():
    d = build_interval(8, 1.0)
    g = grid1(8)
    mu = measure_from_rows(g, np.tile(random_rows(np.random.default_rng(0), 1, 8), (8, 1)))
    rep = solve_eulerian(mu, d, full_mask(d), quadratic(0.5))
    assert rep.value == 0.0 and rep.converged
    assert rep.residual <= 1e-12


def test_solver_mollified_geodesic_near_half():
    n = 64
    d = build_interval(n, 1.0)
    g = grid1(n)
    mu = mollify_y(embed(ClassicalMap(grid=g, values=d.nodes[:, 0])), 1.0)
    rep = solve_eulerian(mu, d, full_mask(d), quadratic(0.5))
    assert abs(rep.value - 0.5) / 0.5 <= 0.05
    assert rep.gap <= 1e-10


def test_solver_sqrt_circle_quarter_pi():
    domain, grid, mu = build_sqrt_circle(16)
    rep = solve_eulerian(mu, domain, full_mask(domain), quadratic(0.5))
    assert rep.value <= 1.05 * math.pi / 4
    assert rep.value == pytest.approx(math.pi / 4, rel=1e-12)
    assert rep.residual <= 1e-12


def test_solver_lifting_identity_one_cell_staircase():
    rng = np.random.default_rng(1)
    n = 16
    d = build_interval(n, 1.0)
    g = grid1(n + 1)
    W = quadratic(0.5)
    cells = np.cumsum(rng.integers(-1, 2, size=n)) + n // 2
    cells = np.clip(cells, 0, n)
    u = ClassicalMap(grid=g, values=g.centers(0)[cells])
    mu = embed(u)
    rep = solve_eulerian(mu, d, full_mask(d), W)
    assert rep.value == pytest.approx(eval_energy(u, d, full_mask(d), W), abs=1e-10)


def test_solver_two_cell_jump_is_infinite():
    d = build_interval(3, 1.0)
    g = grid1(6)
    u = ClassicalMap(grid=g, values=g.centers(0)[[0, 2, 4]])
    mu = embed(u)
    rep = solve_eulerian(mu, d, full_mask(d), quadratic(0.5))
    assert math.isinf(rep.value)
    # 1-homogeneous kinds keep the value finite (mass may jump)
    tv = solve_eulerian(mu, d, full_mask(d), operator_norm_tv(1.0))
    assert math.isfinite(tv.value)


def test_splitting_agrees_with_direct():
    d, g, mu = random_instance(3)
    for W in (quadratic(0.5), operator_norm_tv(1.0)):
        direct = solve_eulerian(mu, d, full_mask(d), W)
        split = solve_eulerian(mu, d, full_mask(d), W, method="splitting",
                               tol=1e-6, max_iter=6_000)
        assert split.value == pytest.approx(direct.value, rel=1e-4, abs=1e-6)


def test_splitting_periodic_target_agrees():
    rng = np.random.default_rng(9)
    d = build_interval(3, 1.0)
    g = grid1(6, periodic=True, hi=6.0)
    mu = measure_from_rows(g, random_rows(rng, 3, 6, floor=0.2))
    direct = solve_eulerian(mu, d, full_mask(d), quadratic(0.5))
    split = solve_eulerian(mu, d, full_mask(d), quadratic(0.5), method="splitting",
                           tol=1e-6, max_iter=6_000)
    assert split.value == pytest.approx(direct.value, rel=1e-4, abs=1e-6)


def test_p_power_solver_runs():
    d, g, mu = random_instance(11)
    rep = solve_eulerian(mu, d, full_mask(d), p_power(3.0, 1.0))
    assert math.isfinite(rep.value) and rep.residual <= 1e-10


# ---------------------------------------------------------------------------
# certificates


def test_certificate_zero_bound_zero():
    d, g, mu = random_instance(0)
    cert = EulerianCertificate(phi=np.zeros((d.n_nodes, g.n_cells, 1)))
    feas, bound = check_eulerian_certificate(cert, mu, d, full_mask(d), quadratic(0.5))
    assert feas and bound == pytest.approx(0.0, abs=1e-12)


def test_emitted_certificate_tight_on_geodesic():
    n = 32
    d = build_interval(n, 1.0)
    g = grid1(n)
    mu = mollify_y(embed(ClassicalMap(grid=g, values=d.nodes[:, 0])), 1.0)
    W = quadratic(0.5)
    rep = solve_eulerian(mu, d, full_mask(d), W)
    feas, bound = check_eulerian_certificate(rep.certificate, mu, d, full_mask(d), W)
    assert feas
    assert bound <= rep.value + 1e-8
    assert bound >= 0.95 * rep.value


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_emitted_bound_never_exceeds_value(seed):
    d, g, mu = random_instance(seed, n=4, m=5, floor=0.1)
    W = quadratic(0.5)
    rep = solve_eulerian(mu, d, full_mask(d), W)
    assert rep.certificate_bound <= rep.value + 1e-8
    feas, bound = check_eulerian_certificate(rep.certificate, mu, d, full_mask(d), W)
    assert bound <= rep.value + 1e-8


def test_tv_certificate_lipschitz_slices_feasible():
    d, g, mu = random_instance(7)
    W = operator_norm_tv(1.0)
    centers = g.centers(0)
    phi = np.zeros((d.n_nodes, g.n_cells, 1))
    phi[:, :, 0] = 0.9 * centers[None, :]  # y-slope 0.9 < 1 everywhere
    feas, bound = check_eulerian_certificate(EulerianCertificate(phi=phi), mu, d,
                                             full_mask(d), W)
    assert feas
    steep = EulerianCertificate(phi=2.0 * phi)
    feas2, _ = check_eulerian_certificate(steep, mu, d, full_mask(d), W)
    assert not feas2


# ---------------------------------------------------------------------------
# localized solves


def test_localized_repeat_masks_deterministic():
    d, g, mu = random_instance(13)
    mask = SubdomainMask((1, 2, 3))
    reps = solve_eulerian_localized(mu, d, [mask, mask], quadratic(0.5))
    assert reps[0].value == reps[1].value


def test_localized_disjoint_additivity():
    d, g, mu = random_instance(17, n=8)
    A1 = SubdomainMask((0, 1, 2))
    A2 = SubdomainMask((5, 6, 7))
    union = SubdomainMask((0, 1, 2, 5, 6, 7))
    W = quadratic(0.5)
    r1, r2, ru = solve_eulerian_localized(mu, d, [A1, A2, union], W)
    assert ru.value == pytest.approx(r1.value + r2.value, abs=1e-10)


def test_localized_nested_monotone():
    d, g, mu = random_instance(19, n=8)
    inner = SubdomainMask((2, 3, 4))
    outer = SubdomainMask((1, 2, 3, 4, 5, 6))
    W = quadratic(0.5)
    ri, ro = solve_eulerian_localized(mu, d, [inner, outer], W)
    assert ri.value <= ro.value + 1e-10


def test_flux_below_coupling_on_positive_instances():
    from mvlift import default_edge_costs, solve_exact

    for seed in range(5):
        d, g, mu = random_instance(seed + 100, n=4, m=4, floor=0.25)
        W = quadratic(0.5)
        costs = default_edge_costs(d, full_mask(d), g, W)
        te = solve_exact(mu, d, full_mask(d), costs).value
        teul = solve_eulerian(mu, d, full_mask(d), W).value
        assert teul <= te + 0.02 * max(1.0, te)
