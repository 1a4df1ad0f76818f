import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvlift import SubdomainMask, build_circle, build_grid2d, build_interval, full_mask, restrict
from mvlift.errors import InvalidParameterError


def test_interval_two_nodes():
    d = build_interval(2, 1.0)
    assert np.allclose(d.nodes.ravel(), [0.25, 0.75])
    assert d.n_edges == 1
    assert d.edge_length[0] == pytest.approx(0.5)
    assert np.allclose(d.node_weights, 0.5)


def test_interval_weights_normalize():
    d = build_interval(4, 1.0)
    assert d.node_weights.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("bad", [(1, 1.0), (0, 1.0), (3, 0.0), (3, -2.0)])
def test_interval_invalid(bad):
    with pytest.raises(InvalidParameterError):
        build_interval(*bad)


def test_circle_structure():
    c = build_circle(4, 2 * np.pi)
    assert c.n_edges == 4
    assert np.allclose(c.edge_length, np.pi / 2)
    assert c.node_weights.sum() == pytest.approx(2 * np.pi)


def test_circle_single_cycle():
    c = build_circle(8, 2 * np.pi)
    # follow successors: one cycle covering all nodes
    succ = {int(t): int(h) for t, h in zip(c.edge_tail, c.edge_head)}
    seen, cur = [], 0
    for _ in range(8):
        seen.append(cur)
        cur = succ[cur]
    assert cur == 0 and sorted(seen) == list(range(8))


def test_circle_too_small():
    with pytest.raises(InvalidParameterError):
        build_circle(2, 2 * np.pi)


def test_grid2d_counts():
    g = build_grid2d(2, 2, (1, 1))
    assert g.n_nodes == 4 and g.n_edges == 4
    assert g.node_weights.sum() == pytest.approx(1.0)


def test_grid2d_edge_enumeration():
    # 3x2 cell-center grid: forward edges per axis, counted by hand
    g = build_grid2d(3, 2, (1, 1))
    assert g.n_nodes == 6
    axis = g.edge_axis
    assert (axis == 0).sum() == 4  # (3-1)*2 x-direction
    assert (axis == 1).sum() == 3  # 3*(2-1) y-direction
    assert g.n_edges == 7


def test_grid2d_invalid():
    with pytest.raises(InvalidParameterError):
        build_grid2d(1, 4, (1, 1))


def test_restrict_full_is_identity():
    d = build_circle(6, 2 * np.pi)
    r = restrict(d, full_mask(d))
    assert r.kind == "circle"
    assert r.n_edges == d.n_edges
    assert np.allclose(r.nodes, d.nodes)


def test_restrict_breaks_cycle():
    c = build_circle(8, 2 * np.pi)
    r = restrict(c, SubdomainMask(tuple(range(5))))
    assert r.kind == "custom-graph"
    assert r.n_nodes == 5 and r.n_edges == 4


def test_restrict_disjoint_arcs_have_no_cross_edges():
    c = build_circle(8, 2 * np.pi)
    mask = SubdomainMask((0, 1, 2, 4, 5, 6))
    r = restrict(c, mask)
    assert r.n_edges == 4  # two paths of two edges each
    comps = set()
    parent = list(range(r.n_nodes))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for t, h in zip(r.edge_tail, r.edge_head):
        parent[find(int(t))] = find(int(h))
    comps = {find(i) for i in range(r.n_nodes)}
    assert len(comps) == 2


def test_restrict_idempotent():
    d = build_interval(10, 2.0)
    m = SubdomainMask((2, 3, 4, 7))
    once = restrict(d, m)
    twice = restrict(once, full_mask(once))
    assert np.allclose(once.nodes, twice.nodes)
    assert np.array_equal(once.edge_tail, twice.edge_tail)


def test_restrict_empty_mask_rejected():
    with pytest.raises(InvalidParameterError):
        SubdomainMask(())


@settings(max_examples=50, deadline=None)
@given(st.sets(st.integers(min_value=0, max_value=11), min_size=1),
       st.sets(st.integers(min_value=0, max_value=11), min_size=1))
def test_mask_weight_additivity_and_edge_superset(a, b):
    d = build_circle(12, 2 * np.pi)
    b = b - a
    if not b:
        return
    ma, mb = SubdomainMask(tuple(a)), SubdomainMask(tuple(b))
    mu_mask = SubdomainMask(tuple(a | b))
    assert d.mask_volume(mu_mask) == pytest.approx(d.mask_volume(ma) + d.mask_volume(mb))
    union_edges = set(d.induced_edges(mu_mask))
    assert set(d.induced_edges(ma)) | set(d.induced_edges(mb)) <= union_edges
