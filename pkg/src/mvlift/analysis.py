"""Counterexample gallery, gap reports, additivity probes and refinement studies.

The circle gallery carries the two-branch square-root field whose coupling
value blows up under refinement while the flux value stays put; the disk
gallery is its two-dimensional analogue.  Studies return small tabular
objects with fitted log-log slopes and CSV export.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import (
    SpatialDomain,
    SubdomainMask,
    build_circle,
    build_grid2d,
    build_interval,
    full_mask,
    restrict,
)
from .errors import CapacityError, InvalidParameterError
from .eulerian import solve_eulerian
from .fields import ClassicalMap, MeasureField, TargetGrid, embed, mollify_y, regularize
from .integrand import Integrand, eval_W, eval_energy, quadratic
from .lagrangian import (
    EdgeCostTable,
    _component_split,
    comonotone_coupling,
    coupling_cost,
    default_edge_costs,
    parametric_flow_coupling,
    solve_exact,
    solve_path,
)

# ---------------------------------------------------------------------------
# gallery builders


def build_sqrt_circle(N: int):
    """Circle domain with the two-branch square-root rows on a 2N-cell target.

    Node i sits at angle 2*pi*i/N; its row puts mass 1/2 at angles pi*i/N and
    pi*i/N + pi, both exact cell centers of the periodic target grid.
    """
    if N < 4 or N % 2:
        raise InvalidParameterError("need an even node count >= 4")
    domain = build_circle(N, 2 * math.pi)
    M = 2 * N
    grid = TargetGrid(q=1, cells=(M,), mins=(0.0,), maxs=(2 * math.pi,), periodic=(True,))
    rho = np.zeros((N, M))
    for i in range(N):
        rho[i, i % M] = 0.5
        rho[i, (i + N) % M] = 0.5
    return domain, grid, MeasureField(grid=grid, rho=rho)


def sqrt_circle_branch_maps(N: int, grid: TargetGrid):
    """The two half-speed branch selections as per-node value tables."""
    angles = 2 * math.pi * np.arange(N) / N
    u1 = angles / 2.0
    u2 = np.mod(angles / 2.0 + math.pi, 2 * math.pi)
    return (ClassicalMap(grid=grid, values=u1), ClassicalMap(grid=grid, values=u2))


def build_sqrt_disk(n: int):
    """Unit-disk restriction of an n x n grid with two-branch square-root rows."""
    if n < 8:
        raise InvalidParameterError("need a grid resolution >= 8")
    base = build_grid2d(n, n, (2.0, 2.0))
    centered = base.nodes - 1.0
    inside = np.nonzero(np.linalg.norm(centered, axis=1) <= 1.0)[0]
    domain = restrict(base, SubdomainMask(tuple(int(i) for i in inside)))
    points = domain.nodes - 1.0
    grid = TargetGrid(q=2, cells=(n, n), mins=(-1.0, -1.0), maxs=(1.0, 1.0),
                      periodic=(False, False))
    rho = 0.5 * sum(embed(u, grid).rho for u in _disk_branch_values(points, grid, 0.0))
    return domain, grid, MeasureField(grid=grid, rho=rho)


def _disk_branch_values(points: np.ndarray, grid: TargetGrid, cut: float):
    # half-angle selections x = r exp(it) -> +/- r exp(it/2), branch cut at angle ``cut``
    r = np.linalg.norm(points, axis=1)
    t = cut + np.mod(np.arctan2(points[:, 1], points[:, 0]) - cut, 2 * math.pi)
    branch = r[:, None] * np.stack([np.cos(t / 2), np.sin(t / 2)], axis=1)
    return (ClassicalMap(grid=grid, values=branch), ClassicalMap(grid=grid, values=-branch))


def sqrt_disk_branch_maps(domain: SpatialDomain, grid: TargetGrid, cut: float = 0.0):
    """Branch selections smooth away from the half line at the cut angle."""
    return _disk_branch_values(domain.nodes - 1.0, grid, cut)


# ---------------------------------------------------------------------------
# value dispatch and reports


def lagrangian_value(mu: MeasureField, domain: SpatialDomain, mask: SubdomainMask,
                     costs: EdgeCostTable, budget: int = 200_000,
                     node_costs: np.ndarray | None = None):
    """(value, method): path solver on forests, else the exact LP under budget."""
    comps = _component_split(domain, mask)
    if all(kind == "path" for kind, *_ in comps):
        return solve_path(mu, domain, mask, costs, node_costs).value, "path"
    res = solve_exact(mu, domain, mask, costs, budget=budget, node_costs=node_costs)
    return res.value, "exact"


def lagrangian_upper_bracket(mu: MeasureField, domain: SpatialDomain,
                             mask: SubdomainMask, costs: EdgeCostTable) -> float:
    """Quantile-coupling cost: always feasible, hence an upper bound (q = 1)."""
    return coupling_cost(comonotone_coupling(mu, mask), costs, domain)


@dataclass(frozen=True, eq=False)
class GapReport:
    instance_id: str
    masks: list
    lagrangian_values: list
    lagrangian_methods: list
    eulerian_values: list
    gaps: list
    violations: list

    @property
    def max_gap(self) -> float:
        return max(self.gaps)


def gap_report(mu: MeasureField, domain: SpatialDomain, grid: TargetGrid, W: Integrand,
               masks: list, instance_id: str = "", budget: int = 200_000,
               tol: float = 1e-9) -> GapReport:
    """Run both liftings per mask; flag any flux value above its coupling value."""
    lv, lm, ev, gaps, violations = [], [], [], [], []
    for k, mask in enumerate(masks):
        costs = default_edge_costs(domain, mask, grid, W)
        value, method = lagrangian_value(mu, domain, mask, costs, budget=budget)
        rep = solve_eulerian(mu, domain, mask, W, tol=tol)
        lv.append(value)
        lm.append(method)
        ev.append(rep.value)
        gaps.append(value - rep.value)
        if rep.value > value + 0.02 * max(1.0, abs(value)):
            violations.append(f"mask {k}: flux value exceeds coupling value")
    return GapReport(instance_id=instance_id, masks=list(masks), lagrangian_values=lv,
                     lagrangian_methods=lm, eulerian_values=ev, gaps=gaps,
                     violations=violations)


@dataclass(frozen=True, eq=False)
class AdditivityProbe:
    values_lagrangian: dict
    values_eulerian: dict
    cross_edges: int
    superadditive: bool
    superadditivity_gap: float
    eulerian_additivity_defect: float
    eulerian_cross_mass: float
    subadditivity_violated: bool


def additivity_probe(mu: MeasureField, domain: SpatialDomain, grid: TargetGrid,
                     W: Integrand, A1: SubdomainMask, A2: SubdomainMask,
                     budget: int = 200_000, tol: float = 1e-9) -> AdditivityProbe:
    """Compare both liftings on A1, A2 and their union (disjoint node sets).

    The coupling value is superadditive; the flux value decomposes edge by
    edge, so its union defect equals the flux energy of the cross edges and
    vanishes when the union induces none.
    """
    if set(A1.nodes) & set(A2.nodes):
        raise InvalidParameterError("additivity probes need disjoint masks")
    union = SubdomainMask(A1.nodes + A2.nodes)
    vals_l, vals_e = {}, {}
    for key, mask in (("A1", A1), ("A2", A2), ("union", union)):
        costs = default_edge_costs(domain, mask, grid, W)
        vals_l[key], _ = lagrangian_value(mu, domain, mask, costs, budget=budget)
        vals_e[key] = solve_eulerian(mu, domain, mask, W, tol=tol).value
    part_edges = set(domain.induced_edges(A1)) | set(domain.induced_edges(A2))
    union_edges = domain.induced_edges(union)
    cross = [e for e in union_edges if e not in part_edges]
    gap = vals_l["union"] - vals_l["A1"] - vals_l["A2"]
    defect = vals_e["union"] - vals_e["A1"] - vals_e["A2"]
    return AdditivityProbe(values_lagrangian=vals_l, values_eulerian=vals_e,
                           cross_edges=len(cross), superadditive=bool(gap >= -1e-8),
                           superadditivity_gap=float(gap),
                           eulerian_additivity_defect=float(defect),
                           eulerian_cross_mass=float(sum(domain.edge_weight[e] for e in cross)),
                           subadditivity_violated=bool(gap > 1e-8))


# ---------------------------------------------------------------------------
# refinement studies


@dataclass(eq=False)
class RefinementStudy:
    columns: tuple
    rows: list = field(default_factory=list)

    def add(self, **kwargs):
        self.rows.append({k: kwargs[k] for k in self.columns})

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def loglog_slope(self, y: str, x: str) -> float:
        xs, ys = self.column(x), self.column(y)
        keep = (xs > 0) & (ys > 0)
        if keep.sum() < 2:
            return math.nan
        return float(np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)[0])

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for r in self.rows:
            lines.append(",".join(_fmt(r[c]) for c in self.columns))
        return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def superposition_study(levels=((16, 16), (32, 32), (64, 64)), sigma: float = 1.0,
                        W: Integrand | None = None) -> RefinementStudy:
    """Mollified straight-line rows on intervals: both liftings against 1/2.

    The coupling side is the path solver (exact on intervals); the relative
    gap between the liftings shrinks under refinement.
    """
    W = W if W is not None else quadratic(0.5)
    study = RefinementStudy(columns=("nodes", "cells", "value_coupling", "value_flux",
                                     "rel_gap"))
    for (n, m) in levels:
        domain = build_interval(n, 1.0)
        grid = TargetGrid(q=1, cells=(m,), mins=(0.0,), maxs=(1.0,), periodic=(False,))
        mu = mollify_y(embed(ClassicalMap(grid=grid, values=domain.nodes[:, 0]), grid), sigma)
        mask = full_mask(domain)
        costs = default_edge_costs(domain, mask, grid, W)
        te = solve_path(mu, domain, mask, costs).value
        teul = solve_eulerian(mu, domain, mask, W).value
        study.add(nodes=n, cells=m, value_coupling=te, value_flux=teul,
                  rel_gap=(te - teul) / max(te, 1e-300))
    return study


def divergence_study(Ns=(6, 8, 10, 12), budget_cap: int = 14) -> RefinementStudy:
    """Exact coupling value on the full two-branch circle against the flux value.

    The coupling value grows without bound under refinement while the flux
    value stays at pi/4; arcs missing one node stay below volume/8.
    """
    W = quadratic(0.5)
    study = RefinementStudy(columns=("nodes", "value_coupling", "value_flux", "ratio",
                                     "arc_coupling", "arc_volume_over_8"))
    for N in Ns:
        if N > budget_cap:
            raise CapacityError(f"exact circle solves are capped at {budget_cap} nodes")
        domain, grid, mu = build_sqrt_circle(N)
        mask = full_mask(domain)
        costs = default_edge_costs(domain, mask, grid, W)
        te = solve_exact(mu, domain, mask, costs, budget=2 ** budget_cap + 1).value
        teul = solve_eulerian(mu, domain, mask, W).value
        arc = SubdomainMask(tuple(range(1, N)))
        arc_costs = default_edge_costs(domain, arc, grid, W)
        arc_te = solve_path(mu, domain, arc, arc_costs).value
        study.add(nodes=N, value_coupling=te, value_flux=teul, ratio=te / teul,
                  arc_coupling=arc_te, arc_volume_over_8=domain.mask_volume(arc) / 8.0)
    return study


def smoothing_check(mu: MeasureField, domain: SpatialDomain, grid: TargetGrid,
                    W: Integrand, mask: SubdomainMask, sigmas=(0.5, 1.0, 2.0),
                    budget: int = 200_000, tol: float = 1e-9) -> RefinementStudy:
    """Both lifting values before and after row mollification, per width."""
    study = RefinementStudy(columns=("sigma", "coupling_base", "coupling_mollified",
                                     "flux_base", "flux_mollified", "monotone"))
    costs = default_edge_costs(domain, mask, grid, W)
    te0, _ = lagrangian_value(mu, domain, mask, costs, budget=budget)
    teul0 = solve_eulerian(mu, domain, mask, W, tol=tol).value
    for s in sigmas:
        sm = mollify_y(mu, s)
        te, _ = lagrangian_value(sm, domain, mask, costs, budget=budget)
        teul = solve_eulerian(sm, domain, mask, W, tol=tol).value
        study.add(sigma=s, coupling_base=te0, coupling_mollified=te,
                  flux_base=teul0, flux_mollified=teul,
                  monotone=bool(te <= te0 + 1e-8))
    return study


# ---------------------------------------------------------------------------
# flow-construction rate


def velocity_energy(mu: MeasureField, vt: np.ndarray, domain: SpatialDomain,
                    mask: SubdomainMask, W: Integrand) -> float:
    """Perspective energy of a node velocity table: sum_e w_e sum_c rho_bar W(v_bar)."""
    flat = mu.flat()
    table = vt.reshape(domain.n_nodes, -1)
    total = 0.0
    for e in domain.induced_edges(mask):
        t, h = int(domain.edge_tail[e]), int(domain.edge_head[e])
        rb = 0.5 * (flat[t] + flat[h])
        vbar = 0.5 * (table[t] + table[h])
        if W.kind in ("quadratic", "p_power"):
            vals = W.coeff * np.abs(vbar) ** W.p
        else:
            vals = np.array([eval_W(W, np.array([[v]])) for v in vbar])
        total += float(domain.edge_weight[e]) * float((rb * vals).sum())
    return total


def rotating_transport_field(mu: MeasureField, circulation: float) -> np.ndarray:
    """Exact transport table for integer-shift rotating rows plus a constant flux.

    Rows of the two-branch circle advance by exactly one cell per node, so
    v = 1/2 transports them exactly; adding a constant mass flux through
    every level set preserves the transport identity and gives
    v = 1/2 + flux * h / mass.
    """
    h = mu.grid.spacing(0)
    return 0.5 + circulation * h / mu.flat()


def flow_rate_study(levels=(96, 192, 384), arc_nodes: int = 13, lam: float = 0.05,
                    sigma: float = 1.0, circulation: float = 0.003,
                    steps: int = 32) -> RefinementStudy:
    """Ray-flow coupling energy against the velocity's perspective energy.

    Arcs keep a fixed node count while the circle refines, so the arc
    diameter is the single shrinking length scale.  The velocity is the
    exact rotation of the regularized two-branch rows plus a small
    circulation; the pure rotation is degenerate (its error vanishes
    identically), the circulation makes the rate visible.
    """
    W = quadratic(0.5)
    study = RefinementStudy(columns=("nodes", "diameter", "flow_energy",
                                     "velocity_energy", "normalized_error",
                                     "marginal_deviation", "clamps"))
    for N in levels:
        domain, grid, mu = build_sqrt_circle(N)
        mut = regularize(mu, lam, sigma)
        half = arc_nodes // 2
        mask = SubdomainMask(tuple(i % N for i in range(-half, half + 1)))
        vt = rotating_transport_field(mut, circulation / grid.n_cells)
        fl = parametric_flow_coupling(mut, vt, domain, mask, 0, W, steps=steps)
        bw = velocity_energy(mut, vt, domain, mask, W)
        vol = domain.mask_volume(mask)
        study.add(nodes=N, diameter=(arc_nodes - 1) * 2 * math.pi / N,
                  flow_energy=fl.value, velocity_energy=bw,
                  normalized_error=abs(fl.value - bw) / vol,
                  marginal_deviation=fl.marginal_deviation, clamps=fl.clamp_count)
    return study


# ---------------------------------------------------------------------------
# disk gallery


def disk_sector_mask(domain: SpatialDomain, t0: float = 0.0, width: float = 0.5) -> SubdomainMask:
    """Nodes of the restricted disk away from the half line at angle t0."""
    points = domain.nodes - 1.0
    ang = np.mod(np.arctan2(points[:, 1], points[:, 0]) - t0, 2 * math.pi)
    keep = np.nonzero((ang > width) & (ang < 2 * math.pi - width))[0]
    return SubdomainMask(tuple(int(i) for i in keep))


def disk_gallery(n: int = 12, width: float = 0.5) -> dict:
    """Flux value and two-branch upper bracket on a disk sector; informational."""
    W = quadratic(0.5, q=2, d=2)
    domain, grid, mu = build_sqrt_disk(n)
    mask = disk_sector_mask(domain, 0.0, width)
    rep = solve_eulerian(mu, domain, mask, W)
    u1, u2 = sqrt_disk_branch_maps(domain, grid)
    upper = 0.5 * (eval_energy(u1, domain, mask, W) + eval_energy(u2, domain, mask, W))
    volume = domain.mask_volume(mask)
    return {
        "nodes": domain.n_nodes,
        "sector_nodes": len(mask),
        "flux_value": rep.value,
        "two_branch_upper": upper,
        "volume": volume,
        "bound_5_over_8": 5.0 * volume / 8.0,
    }
