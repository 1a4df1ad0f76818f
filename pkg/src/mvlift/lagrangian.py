"""Coupling-side lifting: the value inf over couplings of the expected energy.

Couplings are finitely supported probability measures over assignments of
target cells to the mask's nodes.  The exact solver restricts atoms to the
product of row supports (mass off the supports is infeasible for the
marginal constraints) and solves a linear program; paths decompose into
two-marginal problems glued along the chain; cycles get an entropic
transfer-matrix solver.  Dual certificates are node-by-cell potential tables
whose feasibility is decided exactly by dynamic programming.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .domain import SpatialDomain, SubdomainMask
from .errors import (
    CapacityError,
    InvalidInputError,
    StructureError,
    UnsupportedError,
)
from .fields import ClassicalMap, MeasureField, TargetGrid, embed
from .integrand import Integrand, eval_W, eval_energy

_SUPPORT_TOL = 0.0  # strictly positive entries form the support
_MASS_TOL = 1e-10


# ---------------------------------------------------------------------------
# cost tables and couplings


@dataclass(frozen=True, eq=False)
class EdgeCostTable:
    """Per-induced-edge cell-to-cell costs, shape (n_edges, M, M), M = flat cells."""

    edge_indices: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        if self.costs.ndim != 3 or self.costs.shape[0] != self.edge_indices.shape[0]:
            raise InvalidInputError("cost table must be (n_edges, M, M)")
        if np.any(self.costs < 0) or not np.all(np.isfinite(self.costs)):
            raise InvalidInputError("edge costs must be non-negative and finite")


def default_edge_costs(domain: SpatialDomain, mask: SubdomainMask, grid: TargetGrid,
                       W: Integrand) -> EdgeCostTable:
    """c_e(j, j') = w_e * W((y_j' - y_j) / l_e), shortest representative on periodic axes."""
    edges = domain.induced_edges(mask)
    pts = grid.center_points()
    M = pts.shape[0]
    delta = pts[None, :, :] - pts[:, None, :]
    for a in range(grid.q):
        delta[:, :, a] = grid.wrap_delta(a, delta[:, :, a])
    costs = np.zeros((edges.size, M, M))
    for k, e in enumerate(edges):
        ell, w = domain.edge_length[e], domain.edge_weight[e]
        if W.kind in ("quadratic", "p_power", "operator_norm_tv"):
            r = np.linalg.norm(delta, axis=2) / ell
            costs[k] = w * W.coeff * r**W.p
        else:
            tau = float(domain.edge_dir[e, domain.edge_axis[e]])
            for j in range(M):
                for jp in range(M):
                    costs[k, j, jp] = w * eval_W(W, delta[j, jp, 0] * tau / ell)
    return EdgeCostTable(edge_indices=edges, costs=costs)


@dataclass(frozen=True, eq=False)
class Coupling:
    """Atoms (assignment of one flat cell per mask node, mass >= 0), masses sum to 1."""

    node_indices: tuple
    assignments: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        if self.assignments.shape != (self.masses.shape[0], len(self.node_indices)):
            raise InvalidInputError("assignment table shape mismatch")
        if np.any(self.masses < -_MASS_TOL):
            raise InvalidInputError("atom masses must be non-negative")
        if abs(float(self.masses.sum()) - 1.0) > _MASS_TOL:
            raise InvalidInputError("atom masses must sum to 1")

    @property
    def n_atoms(self) -> int:
        return self.masses.shape[0]

    def pushforward(self, n_cells: int) -> np.ndarray:
        """Per-node marginal rows implied by the atoms, shape (n_mask_nodes, M)."""
        rows = np.zeros((len(self.node_indices), n_cells))
        for t in range(len(self.node_indices)):
            np.add.at(rows[t], self.assignments[:, t], self.masses)
        return rows


def check_marginals(coupling: Coupling, mu: MeasureField, mask: SubdomainMask) -> float:
    """Max over nodes of the total-variation distance pushforward vs. row."""
    if coupling.node_indices != mask.nodes:
        raise InvalidInputError("coupling nodes do not match the mask")
    rows = coupling.pushforward(mu.grid.n_cells)
    target = mu.flat()[list(mask.nodes)]
    return float(0.5 * np.abs(rows - target).sum(axis=1).max())


def coupling_cost(coupling: Coupling, costs: EdgeCostTable, domain: SpatialDomain) -> float:
    node_pos = {g: t for t, g in enumerate(coupling.node_indices)}
    total = np.zeros(coupling.n_atoms)
    for k, e in enumerate(costs.edge_indices):
        t = node_pos[int(domain.edge_tail[e])]
        h = node_pos[int(domain.edge_head[e])]
        total += costs.costs[k][coupling.assignments[:, t], coupling.assignments[:, h]]
    return float(total @ coupling.masses)


def _linear_offset(mu: MeasureField, mask: SubdomainMask, node_costs: np.ndarray | None) -> float:
    # node-separable costs are linear in the fixed marginals, hence constant over couplings
    if node_costs is None:
        return 0.0
    idx = list(mask.nodes)
    return float((node_costs[idx] * mu.flat()[idx]).sum())


# ---------------------------------------------------------------------------
# exact linear-programming solver


@dataclass(frozen=True, eq=False)
class ExactResult:
    value: float
    coupling: Coupling
    certificate: "LagrangianCertificate"
    dual_bound: float
    marginal_error: float


def _supports(mu: MeasureField, mask: SubdomainMask):
    flat = mu.flat()
    return [np.nonzero(flat[i] > _SUPPORT_TOL)[0] for i in mask.nodes]


def solve_exact(mu: MeasureField, domain: SpatialDomain, mask: SubdomainMask,
                costs: EdgeCostTable, budget: int = 200_000,
                node_costs: np.ndarray | None = None) -> ExactResult:
    """Exact coupling value by LP over the product of row supports."""
    supports = _supports(mu, mask)
    n_atoms = 1
    for s in supports:
        n_atoms *= s.size
        if n_atoms > budget:
            raise CapacityError(
                f"support-restricted atom count exceeds budget {budget}; "
                "try the cycle-entropic solver or a smaller mask")
    idx = list(mask.nodes)
    local = {g: t for t, g in enumerate(idx)}
    atoms = np.array(list(itertools.product(*supports)), dtype=int)

    cost_vec = np.zeros(n_atoms)
    for k, e in enumerate(costs.edge_indices):
        t = local[int(domain.edge_tail[e])]
        h = local[int(domain.edge_head[e])]
        cost_vec += costs.costs[k][atoms[:, t], atoms[:, h]]

    rows = []
    rhs = []
    flat = mu.flat()
    row_key = []
    for t, i in enumerate(idx):
        for j in supports[t]:
            rows.append(atoms[:, t] == j)
            rhs.append(flat[i, j])
            row_key.append((t, int(j)))
    A_eq = np.array(rows, dtype=float)
    res = linprog(cost_vec, A_eq=A_eq, b_eq=np.array(rhs), bounds=(0, None), method="highs-ds")
    if res.status == 2:
        raise InvalidInputError("infeasible marginals in the exact coupling LP")
    if not res.success:
        raise InvalidInputError(f"exact coupling LP failed: {res.message}")

    keep = res.x > 1e-13
    coupling = Coupling(node_indices=tuple(idx), assignments=atoms[keep],
                        masses=res.x[keep] / res.x[keep].sum())
    value = float(res.fun) + _linear_offset(mu, mask, node_costs)

    duals = np.asarray(res.eqlin.marginals, dtype=float)
    if abs(float(duals @ rhs) + float(res.fun)) < abs(float(duals @ rhs) - float(res.fun)):
        duals = -duals
    cert = _certificate_from_duals(duals, row_key, mu, domain, mask, costs, node_costs)
    feasible, bound, _ = check_certificate(cert, mu, domain, mask, costs, node_costs)
    assert feasible
    err = check_marginals(coupling, mu, mask)
    return ExactResult(value=value, coupling=coupling, certificate=cert,
                       dual_bound=bound, marginal_error=err)


# ---------------------------------------------------------------------------
# two-marginal and path solvers


def solve_ot2(rho1, rho2, cost: np.ndarray):
    """Exact two-marginal transport on the support-restricted transportation polytope."""
    r1 = np.asarray(rho1, dtype=float).ravel()
    r2 = np.asarray(rho2, dtype=float).ravel()
    for r in (r1, r2):
        if abs(r.sum() - 1.0) > _MASS_TOL or np.any(r < -_MASS_TOL):
            raise InvalidInputError("marginals must be probability rows")
    s1 = np.nonzero(r1 > _SUPPORT_TOL)[0]
    s2 = np.nonzero(r2 > _SUPPORT_TOL)[0]
    sub = cost[np.ix_(s1, s2)]
    n1, n2 = s1.size, s2.size
    c = sub.ravel()
    A = np.zeros((n1 + n2, n1 * n2))
    for a in range(n1):
        A[a, a * n2:(a + 1) * n2] = 1.0
    for b in range(n2):
        A[n1 + b, b::n2] = 1.0
    bvec = np.concatenate([r1[s1], r2[s2]])
    res = linprog(c, A_eq=A, b_eq=bvec, bounds=(0, None), method="highs-ds")
    if not res.success:
        raise InvalidInputError(f"two-marginal LP failed: {res.message}")
    plan = np.zeros_like(cost, dtype=float)
    plan[np.ix_(s1, s2)] = res.x.reshape(n1, n2)
    return float(res.fun), plan


def _component_split(domain: SpatialDomain, mask: SubdomainMask):
    """Connected components of the induced graph with a path/cycle classification."""
    edges = domain.induced_edges(mask)
    idx = list(mask.nodes)
    adj = {i: [] for i in idx}
    for e in edges:
        t, h = int(domain.edge_tail[e]), int(domain.edge_head[e])
        adj[t].append((h, int(e), False))
        adj[h].append((t, int(e), True))
    seen = set()
    comps = []
    for start in idx:
        if start in seen:
            continue
        stack, nodes, comp_edges = [start], [], set()
        seen.add(start)
        while stack:
            i = stack.pop()
            nodes.append(i)
            for j, e, _ in adj[i]:
                comp_edges.add(e)
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        degs = [len(adj[i]) for i in nodes]
        if len(comp_edges) == len(nodes) - 1 and max(degs, default=0) <= 2:
            kind = "path"
        elif len(comp_edges) == len(nodes) and all(d == 2 for d in degs) and len(nodes) >= 3:
            kind = "cycle"
        else:
            kind = "general"
        comps.append((kind, sorted(nodes), sorted(comp_edges), adj))
    return comps


def _walk(nodes, edges, adj, start):
    """Order nodes along a path or cycle from ``start``; yields (node, edge, reversed)."""
    order = [(start, None, False)]
    prev, cur = None, start
    while True:
        nxt = None
        for j, e, rev in sorted(adj[cur]):
            if j != prev and (len(order) == 1 or e != order[-1][1]):
                nxt = (j, e, rev)
                break
        if nxt is None:
            break
        order.append(nxt)
        prev, cur = cur, nxt[0]
        if cur == start or len(order) > len(nodes):
            break
    return order


@dataclass(frozen=True, eq=False)
class PathResult:
    value: float
    plans: list
    plan_edges: np.ndarray


def solve_path(mu: MeasureField, domain: SpatialDomain, mask: SubdomainMask,
               costs: EdgeCostTable, node_costs: np.ndarray | None = None) -> PathResult:
    """Edge-by-edge two-marginal solves; exact when the induced graph is a forest."""
    comps = _component_split(domain, mask)
    if any(kind != "path" for kind, *_ in comps):
        raise StructureError("induced graph must be a disjoint union of paths")
    flat = mu.flat()
    cost_by_edge = {int(e): costs.costs[k] for k, e in enumerate(costs.edge_indices)}
    plans, plan_edges = [], []
    value = _linear_offset(mu, mask, node_costs)
    for e in sorted(cost_by_edge):
        t, h = int(domain.edge_tail[e]), int(domain.edge_head[e])
        v, plan = solve_ot2(flat[t], flat[h], cost_by_edge[e])
        value += v
        plans.append(plan)
        plan_edges.append(e)
    return PathResult(value=value, plans=plans, plan_edges=np.array(plan_edges, dtype=int))


def glue_path_coupling(result: PathResult, mu: MeasureField, domain: SpatialDomain,
                       mask: SubdomainMask, budget: int = 200_000) -> Coupling:
    """Materialize the Markov gluing of the pairwise plans along each path."""
    comps = _component_split(domain, mask)
    plan_by_edge = {int(e): p for e, p in zip(result.plan_edges, result.plans)}
    flat = mu.flat()
    idx = list(mask.nodes)
    local = {g: t for t, g in enumerate(idx)}
    atoms = [({}, 1.0)]
    for kind, nodes, comp_edges, adj in comps:
        start = next((i for i in nodes if len(adj[i]) <= 1), nodes[0])
        order = _walk(nodes, comp_edges, adj, start)
        comp_atoms = [({start: int(j)}, float(flat[start, j]))
                      for j in np.nonzero(flat[start] > 0)[0]]
        prev_node = start
        for (node, e, rev) in order[1:]:
            plan = plan_by_edge[int(e)]
            if rev:
                plan = plan.T
            new = []
            for assign, mass in comp_atoms:
                row = plan[assign[prev_node]]
                tot = row.sum()
                if tot <= 0:
                    continue
                for j in np.nonzero(row > 1e-15)[0]:
                    a2 = dict(assign)
                    a2[node] = int(j)
                    new.append((a2, mass * row[j] / tot))
            comp_atoms = new
            prev_node = node
            if len(comp_atoms) > budget:
                raise CapacityError("glued coupling would exceed the atom budget")
        atoms = [({**assign, **cassign}, mass * cmass)
                 for assign, mass in atoms for cassign, cmass in comp_atoms]
        if len(atoms) > budget:
            raise CapacityError("glued coupling would exceed the atom budget")
    table = np.array([[assign[g] for g in idx] for assign, _ in atoms], dtype=int)
    masses = np.array([m for _, m in atoms])
    return Coupling(node_indices=tuple(idx), assignments=table, masses=masses / masses.sum())


# ---------------------------------------------------------------------------
# entropic solver on a cycle


@dataclass(frozen=True, eq=False)
class EntropicResult:
    value: float
    marginal_error: float
    converged: bool
    iterations: int
    epsilon: float


def _cycle_order(domain, mask, comps):
    if len(comps) != 1 or comps[0][0] != "cycle":
        raise StructureError("entropic solver requires a single induced cycle")
    kind, nodes, comp_edges, adj = comps[0]
    order = _walk(nodes, comp_edges, adj, min(nodes))
    if order[-1][0] == order[0][0]:
        closing = order[-1]
        order = order[:-1]
    else:
        # closing edge between last and first
        last, first = order[-1][0], order[0][0]
        closing = None
        for j, e, rev in adj[last]:
            if j == first and e != order[-1][1]:
                closing = (first, e, rev)
        if closing is None:
            raise StructureError("cycle closure not found")
    return order, closing


def solve_cycle_entropic(mu: MeasureField, domain: SpatialDomain, mask: SubdomainMask,
                         costs: EdgeCostTable, epsilon: float, tol: float = 1e-9,
                         max_iter: int = 2000, node_costs: np.ndarray | None = None,
                         warm_schedule: bool = True) -> EntropicResult:
    """Sinkhorn-style scaling of node potentials against cyclic transfer products.

    Returns the plan's linear cost (entropy excluded) and the residual
    marginal deviation; the epsilon schedule halves down from 8x the target,
    warm-starting the potentials.
    """
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    comps = _component_split(domain, mask)
    order, closing = _cycle_order(domain, mask, comps)
    seq = [i for i, _, _ in order]
    N = len(seq)
    M = mu.grid.n_cells
    cost_by_edge = {int(e): costs.costs[k] for k, e in enumerate(costs.edge_indices)}
    C = []
    for k in range(N):
        _, e, rev = (order[k + 1] if k + 1 < N else closing)
        c = cost_by_edge[int(e)]
        C.append(c.T if rev else c)

    flat = mu.flat()
    rho = flat[seq]
    a = np.ones((N, M))
    eps_list = [epsilon * f for f in (8.0, 4.0, 2.0, 1.0)] if warm_schedule else [epsilon]

    def products(K):
        B = [a[k][:, None] * K[k] for k in range(N)]
        suffix = [None] * (N + 1)
        suffix[N] = np.eye(M)
        for k in range(N - 1, -1, -1):
            s = B[k] @ suffix[k + 1]
            m = s.max()
            suffix[k] = s / m if m > 0 else s
        return B, suffix

    def marginal(i, K):
        # diag of the rescaled cycle product starting at node i
        P = np.eye(M)
        for k in range(N):
            kk = (i + k) % N
            P = P @ (a[kk][:, None] * K[kk])
            m = P.max()
            if m > 0:
                P /= m
        d = np.diag(P).copy()
        s = d.sum()
        return d / s if s > 0 else d

    iterations = 0
    err = math.inf
    for eps in eps_list:
        K = [np.exp(-c / eps) for c in C]
        for _ in range(max_iter):
            iterations += 1
            for i in range(N):
                p = marginal(i, K)
                upd = np.zeros(M)
                np.divide(rho[i], p, out=upd, where=p > 0)
                a[i] *= upd
                mx = a[i].max()
                if mx > 0:
                    a[i] /= mx
            err = max(0.5 * np.abs(marginal(i, K) - rho[i]).sum() for i in range(N))
            if err < tol:
                break

    # pairwise marginals for the linear cost
    K = [np.exp(-c / epsilon) for c in C]
    value = _linear_offset(mu, mask, node_costs)
    for k in range(N):
        rest = np.eye(M)
        for s in range(k + 1, k + N):
            ss = s % N
            rest = rest @ (a[ss][:, None] * K[ss])
            m = rest.max()
            if m > 0:
                rest /= m
        pair = (a[k][:, None] * K[k]) * rest.T
        tot = pair.sum()
        if tot > 0:
            pair /= tot
        value += float((pair * C[k]).sum())
    return EntropicResult(value=value, marginal_error=float(err),
                          converged=bool(err < tol), iterations=iterations, epsilon=epsilon)


# ---------------------------------------------------------------------------
# quantile (comonotone) coupling, q = 1


def comonotone_coupling(mu: MeasureField, mask: SubdomainMask) -> Coupling:
    """Feasible coupling from per-node quantile functions at shared latent levels."""
    if mu.grid.q != 1:
        raise UnsupportedError("quantile couplings are defined for 1-d targets only")
    idx = list(mask.nodes)
    flat = mu.flat()[idx]
    cums = np.cumsum(flat, axis=1)
    levels = np.unique(np.concatenate([[0.0], cums.ravel(), [1.0]]))
    levels = levels[(levels > -1e-15) & (levels < 1.0 + 1e-15)]
    masses = np.diff(levels)
    keep = masses > 1e-15
    mids = (levels[:-1] + 0.5 * masses)[keep]
    masses = masses[keep]
    assigns = np.empty((masses.size, len(idx)), dtype=int)
    for t in range(len(idx)):
        assigns[:, t] = np.searchsorted(cums[t], mids, side="left")
    assigns = np.clip(assigns, 0, mu.grid.n_cells - 1)
    # merge consecutive identical assignments
    out_a, out_m = [assigns[0]], [masses[0]]
    for k in range(1, masses.size):
        if np.array_equal(assigns[k], out_a[-1]):
            out_m[-1] += masses[k]
        else:
            out_a.append(assigns[k])
            out_m.append(masses[k])
    return Coupling(node_indices=tuple(idx), assignments=np.array(out_a, dtype=int),
                    masses=np.array(out_m))


# ---------------------------------------------------------------------------
# parametric flow coupling


@dataclass(frozen=True, eq=False)
class FlowCouplingResult:
    maps: list
    weights: np.ndarray
    value: float
    marginal_deviation: float
    clamp_count: int


def _arc_order(domain: SpatialDomain, mask: SubdomainMask, x0: int):
    """Mask nodes ordered along a contiguous 1-d run (wrap-aware on circles)."""
    comps = _component_split(domain, mask)
    if len(comps) != 1 or comps[0][0] not in ("path", "cycle"):
        raise StructureError("flow coupling needs one contiguous 1-d mask")
    kind, nodes, comp_edges, adj = comps[0]
    if x0 not in nodes:
        raise StructureError("center node must belong to the mask")
    if kind == "cycle":
        order = [i for i, _, _ in _walk(nodes, comp_edges, adj, x0)]
        return order, True
    start = next(i for i in nodes if len(adj[i]) <= 1)
    order = [i for i, _, _ in _walk(nodes, comp_edges, adj, start)]
    return order, False


def parametric_flow_coupling(mu: MeasureField, v: np.ndarray, domain: SpatialDomain,
                             mask: SubdomainMask, x0: int, W: Integrand,
                             steps: int = 32) -> FlowCouplingResult:
    """Weighted map family generated by integrating cell trajectories from x0.

    For every target cell y with weight mu_{x0}(y), a 4th-order explicit
    scheme integrates dy/dt = v((1-t) x0 + t x, y) (x - x0) along the index
    segment from x0 to each mask node x; the family's energy and its
    marginal deviation from mu are reported.  One-dimensional domains only.
    """
    if domain.dim != 1:
        raise UnsupportedError("flow couplings are implemented for 1-d domains")
    if mu.grid.q != 1:
        raise UnsupportedError("flow couplings are implemented for 1-d targets")
    if np.min(mu.flat()[list(mask.nodes)]) <= 0:
        raise InvalidInputError("flow coupling needs strictly positive rows; regularize first")
    order, is_cycle = _arc_order(domain, mask, x0)
    M = mu.grid.n_cells
    vt = v.reshape(domain.n_nodes, M)
    grid = mu.grid
    h = grid.spacing(0)
    periodic = grid.periodic[0]
    lo, span = grid.mins[0], grid.length(0)
    centers0 = grid.centers(0)

    # unwrapped node positions along the run, oriented increasing
    pos = np.zeros(len(order))
    for k in range(1, len(order)):
        d = domain.nodes[order[k], 0] - domain.nodes[order[k - 1], 0]
        if domain.kind == "circle":
            d = d - domain.total_volume * np.round(d / domain.total_volume)
        pos[k] = pos[k - 1] + d
    if len(order) > 1 and pos[-1] < pos[0]:
        order = order[::-1]
        pos = pos[::-1].copy()
    k0 = order.index(x0)

    def v_at(s: float, y: np.ndarray) -> np.ndarray:
        # linear interpolation in arc position, then in target position
        k = int(np.clip(np.searchsorted(pos, s) - 1, 0, len(order) - 2))
        t = (s - pos[k]) / (pos[k + 1] - pos[k]) if len(order) > 1 else 0.0
        t = min(max(t, 0.0), 1.0)
        vrow = (1 - t) * vt[order[k]] + t * vt[order[k + 1]]
        u = (y - lo) / h if periodic else (y - lo) / h - 0.5
        c = np.floor(u).astype(int)
        th = u - c
        if periodic:
            return (1 - th) * vrow[c % M] + th * vrow[(c + 1) % M]
        c = np.clip(c, 0, M - 2)
        th = np.clip(u - c, 0.0, 1.0)
        return (1 - th) * vrow[c] + th * vrow[c + 1]

    clamp_count = 0
    values = np.full((M, domain.n_nodes), np.nan)
    for k, node in enumerate(order):
        target_pos = pos[k]
        y = centers0.copy()
        if k != k0:
            dt = 1.0 / steps
            for s_i in range(steps):
                t = s_i * dt

                def rhs(tt, yy):
                    return v_at(pos[k0] + tt * (target_pos - pos[k0]), yy) * (target_pos - pos[k0])

                k1 = rhs(t, y)
                k2 = rhs(t + dt / 2, y + dt / 2 * k1)
                k3 = rhs(t + dt / 2, y + dt / 2 * k2)
                k4 = rhs(t + dt, y + dt * k3)
                y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                if periodic:
                    y = lo + np.mod(y - lo, span)
                else:
                    clipped = np.clip(y, lo, grid.maxs[0])
                    clamp_count += int(np.sum(clipped != y))
                    y = clipped
        values[:, node] = y

    weights = mu.flat()[x0].copy()
    maps, energy = [], 0.0
    push = np.zeros((domain.n_nodes, M))
    for c in range(M):
        cmap = ClassicalMap(grid=grid, values=values[c])
        maps.append(cmap)
        energy += weights[c] * eval_energy(cmap, domain, mask, W)
        emb = embed(ClassicalMap(grid=grid, values=values[c, list(mask.nodes)]), grid)
        push[list(mask.nodes)] += weights[c] * emb.rho
    dev = float(0.5 * np.abs(push[list(mask.nodes)] - mu.flat()[list(mask.nodes)]).sum(axis=1).max())
    return FlowCouplingResult(maps=maps, weights=weights, value=float(energy),
                              marginal_deviation=dev, clamp_count=clamp_count)


# ---------------------------------------------------------------------------
# dual certificates


@dataclass(frozen=True, eq=False)
class LagrangianCertificate:
    """Potential table phi[node, cell]; feasible when sum_i m_i phi(i, u_i) <= E(u) for all u."""

    phi: np.ndarray


def check_certificate(cert: LagrangianCertificate, mu: MeasureField, domain: SpatialDomain,
                      mask: SubdomainMask, costs: EdgeCostTable,
                      node_costs: np.ndarray | None = None,
                      budget: int = 200_000):
    """Exact feasibility by dynamic programming over maps; returns (feasible, bound, max_gain).

    The maximized gain is sup_u sum m_i phi(i, u_i) - E(u); feasibility is
    max <= 0 within 1e-10, and the bound is the pairing of phi with mu.
    """
    idx = list(mask.nodes)
    M = mu.grid.n_cells
    phi = cert.phi
    if phi.shape != (domain.n_nodes, M):
        raise InvalidInputError("certificate table has the wrong shape")
    m_w = domain.node_weights
    gain = {i: m_w[i] * phi[i] - (node_costs[i] if node_costs is not None else 0.0) for i in idx}
    cost_by_edge = {}
    for k, e in enumerate(costs.edge_indices):
        cost_by_edge[int(e)] = costs.costs[k]

    total = 0.0
    for kind, nodes, comp_edges, adj in _component_split(domain, mask):
        if kind == "path":
            start = next((i for i in nodes if len(adj[i]) <= 1), nodes[0])
            order = _walk(nodes, comp_edges, adj, start)
            f = gain[order[0][0]].copy()
            for (node, e, rev) in order[1:]:
                c = cost_by_edge[int(e)]
                trans = c.T if rev else c
                f = gain[node] + (f[:, None] - trans).max(axis=0)
            total += float(f.max())
        elif kind == "cycle":
            order = _walk(nodes, comp_edges, adj, min(nodes))
            if order[-1][0] == order[0][0]:
                closing = order[-1]
                order = order[:-1]
            else:
                last, first = order[-1][0], order[0][0]
                closing = next((j, e, rev) for j, e, rev in adj[last] if j == first and e != order[-1][1])
            best = -math.inf
            cclose = cost_by_edge[int(closing[1])]
            cclose = cclose.T if closing[2] else cclose
            for j0 in range(M):
                f = np.full(M, -math.inf)
                f[j0] = gain[order[0][0]][j0]
                for (node, e, rev) in order[1:]:
                    c = cost_by_edge[int(e)]
                    trans = c.T if rev else c
                    f = gain[node] + (f[:, None] - trans).max(axis=0)
                best = max(best, float((f - cclose[:, j0]).max()))
            total += best
        else:
            size = M ** len(nodes)
            if size > budget:
                raise UnsupportedError("certificate check on general masks needs enumeration "
                                       f"but {size} maps exceed the budget")
            best = -math.inf
            for assign in itertools.product(range(M), repeat=len(nodes)):
                val = sum(gain[i][assign[t]] for t, i in enumerate(nodes))
                for e in comp_edges:
                    t = nodes.index(int(domain.edge_tail[e]))
                    h = nodes.index(int(domain.edge_head[e]))
                    val -= cost_by_edge[int(e)][assign[t], assign[h]]
                best = max(best, val)
            total += best

    bound = float(sum((m_w[i] * phi[i] * mu.flat()[i]).sum() for i in idx))
    return bool(total <= 1e-10), bound, float(total)


def _certificate_from_duals(duals, row_key, mu, domain, mask, costs, node_costs):
    idx = list(mask.nodes)
    M = mu.grid.n_cells
    phi = np.zeros((domain.n_nodes, M))
    seen = np.zeros((domain.n_nodes, M), dtype=bool)
    for (t, j), y in zip(row_key, duals):
        i = idx[t]
        phi[i, j] = y / domain.node_weights[i]
        seen[i, j] = True
    # off-support cells get a value low enough never to enter any maximizing map
    scale = float(np.abs(phi).max()) + 1.0
    safe = -(scale * (len(idx) + 1) * (1.0 + domain.node_weights.max() / domain.node_weights.min()))
    for i in idx:
        phi[i, ~seen[i]] = safe
    cert = LagrangianCertificate(phi=phi)
    feasible, bound, gain = check_certificate(cert, mu, domain, mask, costs, node_costs)
    if gain > 0:
        i0 = idx[0]
        phi = phi.copy()
        phi[i0] -= (gain + 1e-12) / domain.node_weights[i0]
        cert = LagrangianCertificate(phi=phi)
    return cert
