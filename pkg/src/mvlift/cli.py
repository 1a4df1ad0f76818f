"""Instance files, run reports and the command-line surface.

Instances are strict-schema JSON (unknown fields rejected, errors carry the
dotted field path); reports are canonical JSON plus CSV tables so runs diff
cleanly.  Exit codes: 0 all assertions pass, 1 an assertion failed, 2 a
solver failed to converge.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .domain import SpatialDomain, SubdomainMask, build_circle, build_grid2d, build_interval, full_mask
from .errors import InvalidInputError, InvalidParameterError, NumericalError
from .eulerian import check_eulerian_certificate, solve_eulerian
from .fields import ClassicalMap, MeasureField, TargetGrid, embed, mollify_y, regularize
from .integrand import Integrand, operator_norm_tv, p_power, quadratic
from .lagrangian import (
    check_certificate,
    check_marginals,
    comonotone_coupling,
    coupling_cost,
    default_edge_costs,
    parametric_flow_coupling,
    solve_cycle_entropic,
    solve_exact,
    solve_path,
)


class SchemaError(ValueError):
    """Instance file violates the schema; message names the dotted field path."""


@dataclass
class Instance:
    domain: SpatialDomain
    grid: TargetGrid
    integrand: Integrand
    mu: MeasureField
    mask: SubdomainMask
    tol: float
    max_iter: int
    epsilon: float
    budget: int
    deterministic: bool
    seed: int
    raw: dict = field(repr=False, default_factory=dict)

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.raw).encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


_SOLVER_DEFAULTS = {"tol": 1e-9, "max_iter": 20000, "epsilon": 0.05,
                    "budget": 200000, "deterministic": True, "seed": 0}
_SCHEMA = {
    "": {"domain", "target", "integrand", "data_term", "measure", "mask", "solver"},
    "domain": {"kind", "nodes", "nx", "ny", "length", "circumference", "lengths"},
    "target": {"cells", "min", "max", "periodic"},
    "integrand": {"kind", "coeff", "p"},
    "measure": {"rows", "builtin", "sigma", "lam", "seed", "max_step"},
    "solver": set(_SOLVER_DEFAULTS),
}


def _check_keys(section: dict, path: str):
    allowed = _SCHEMA[path]
    for k in section:
        if k not in allowed:
            raise SchemaError(f"unknown field {path + '.' if path else ''}{k}")


def _require(cond: bool, fieldpath: str, message: str):
    if not cond:
        raise SchemaError(f"{fieldpath}: {message}")


def _build_domain(spec: dict) -> SpatialDomain:
    _check_keys(spec, "domain")
    kind = spec.get("kind")
    if kind == "interval":
        n = spec.get("nodes", 0)
        _require(isinstance(n, int) and n >= 2, "domain.nodes", "need an integer >= 2")
        return build_interval(n, float(spec.get("length", 1.0)))
    if kind == "circle":
        n = spec.get("nodes", 0)
        _require(isinstance(n, int) and n >= 3, "domain.nodes", "need an integer >= 3")
        return build_circle(n, float(spec.get("circumference", 2 * math.pi)))
    if kind == "grid2d":
        nx, ny = spec.get("nx", 0), spec.get("ny", 0)
        _require(isinstance(nx, int) and nx >= 2, "domain.nx", "need an integer >= 2")
        _require(isinstance(ny, int) and ny >= 2, "domain.ny", "need an integer >= 2")
        return build_grid2d(nx, ny, spec.get("lengths", [1.0, 1.0]))
    raise SchemaError("domain.kind: expected interval | circle | grid2d")


def _build_grid(spec: dict) -> TargetGrid:
    _check_keys(spec, "target")
    cells = spec.get("cells")
    _require(isinstance(cells, list) and len(cells) in (1, 2), "target.cells",
             "need a list of 1 or 2 cell counts")
    q = len(cells)
    mins = spec.get("min", [0.0] * q)
    maxs = spec.get("max", [1.0] * q)
    periodic = spec.get("periodic", [False] * q)
    for name, val in (("min", mins), ("max", maxs), ("periodic", periodic)):
        _require(isinstance(val, list) and len(val) == q, f"target.{name}",
                 f"need a list of length {q}")
    return TargetGrid(q=q, cells=tuple(int(c) for c in cells), mins=tuple(float(v) for v in mins),
                      maxs=tuple(float(v) for v in maxs), periodic=tuple(bool(v) for v in periodic))


def _build_integrand(spec: dict, grid: TargetGrid, domain: SpatialDomain) -> Integrand:
    _check_keys(spec, "integrand")
    kind = spec.get("kind", "quadratic")
    coeff = float(spec.get("coeff", 0.5))
    if kind == "quadratic":
        return quadratic(coeff, q=grid.q, d=domain.dim)
    if kind == "p_power":
        return p_power(float(spec.get("p", 2.0)), coeff, q=grid.q, d=domain.dim)
    if kind == "operator_norm_tv":
        return operator_norm_tv(coeff, q=grid.q, d=domain.dim)
    raise SchemaError("integrand.kind: expected quadratic | p_power | operator_norm_tv")


def _build_measure(spec: dict, domain: SpatialDomain, grid: TargetGrid) -> MeasureField:
    _check_keys(spec, "measure")
    if "rows" in spec:
        rows = np.asarray(spec["rows"], dtype=float)
        _require(rows.shape[0] == domain.n_nodes, "measure.rows",
                 f"need one row per node ({domain.n_nodes})")
        try:
            return MeasureField(grid=grid, rho=rows.reshape(domain.n_nodes, *grid.shape))
        except (InvalidInputError, ValueError) as exc:
            raise SchemaError(f"measure.rows: {exc}") from exc
    builtin = spec.get("builtin")
    if builtin == "uniform":
        rho = np.full((domain.n_nodes, *grid.shape), 1.0 / grid.n_cells)
        return MeasureField(grid=grid, rho=rho)
    if builtin == "sqrt_circle":
        _require(domain.kind == "circle" and grid.cells == (2 * domain.n_nodes,),
                 "measure.builtin", "sqrt_circle needs a circle domain and 2N target cells")
        _, _, mu = analysis.build_sqrt_circle(domain.n_nodes)
        lam = float(spec.get("lam", 0.0))
        sigma = float(spec.get("sigma", 0.0))
        return regularize(mu, lam, sigma) if (lam or sigma) else mu
    if builtin == "geodesic":
        _require(domain.dim == 1 and grid.q == 1, "measure.builtin", "geodesic needs 1-d data")
        u = ClassicalMap(grid=grid, values=domain.nodes[:, 0])
        return mollify_y(embed(u, grid), float(spec.get("sigma", 1.0)))
    if builtin == "staircase":
        _require(domain.dim == 1 and grid.q == 1, "measure.builtin", "staircase needs 1-d data")
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        step = int(spec.get("max_step", 1))
        M = grid.cells[0]
        cells = np.empty(domain.n_nodes, dtype=int)
        cells[0] = M // 2
        for i in range(1, domain.n_nodes):
            cells[i] = np.clip(cells[i - 1] + rng.integers(-step, step + 1), 0, M - 1)
        u = ClassicalMap(grid=grid, values=grid.centers(0)[cells])
        return embed(u, grid)
    raise SchemaError("measure: need rows or a known builtin generator")


def parse_instance(path: str, seed: int | None = None,
                   deterministic: bool | None = None) -> Instance:
    """Load and validate a strict-schema instance file.

    ``seed``/``deterministic`` override the instance's solver section (and the
    seed of any seeded measure generator).
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed JSON at line {exc.lineno}, column {exc.colno}") from exc
    if seed is not None and isinstance(raw, dict):
        raw.setdefault("solver", {})["seed"] = int(seed)
        if isinstance(raw.get("measure"), dict) and "seed" in raw["measure"]:
            raw["measure"]["seed"] = int(seed)
    if deterministic is not None and isinstance(raw, dict):
        raw.setdefault("solver", {})["deterministic"] = bool(deterministic)
    if not isinstance(raw, dict):
        raise SchemaError("instance file must hold a JSON object")
    _check_keys(raw, "")
    for section in ("domain", "target", "measure"):
        _require(section in raw, section, "required section missing")
    domain = _build_domain(raw["domain"])
    grid = _build_grid(raw["target"])
    W = _build_integrand(raw.get("integrand", {}), grid, domain)
    mu = _build_measure(raw["measure"], domain, grid)
    if raw.get("data_term") is not None:
        raise SchemaError("data_term: only null is supported in instance files")
    mask_spec = raw.get("mask")
    if mask_spec is None:
        mask = full_mask(domain)
    else:
        _require(isinstance(mask_spec, list) and mask_spec, "mask", "need a non-empty index list")
        _require(all(isinstance(i, int) and 0 <= i < domain.n_nodes for i in mask_spec),
                 "mask", "indices out of range")
        mask = SubdomainMask(tuple(mask_spec))
    solver = dict(_SOLVER_DEFAULTS)
    solver_spec = raw.get("solver", {})
    _check_keys(solver_spec, "solver")
    solver.update(solver_spec)
    return Instance(domain=domain, grid=grid, integrand=W, mu=mu, mask=mask,
                    tol=float(solver["tol"]), max_iter=int(solver["max_iter"]),
                    epsilon=float(solver["epsilon"]), budget=int(solver["budget"]),
                    deterministic=bool(solver["deterministic"]), seed=int(solver["seed"]),
                    raw=raw)


def write_instance(path: str, raw: dict):
    """Canonical writer: byte-stable under parse/serialize round trips."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(raw))


# ---------------------------------------------------------------------------
# reports


def _jsonable(x):
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class RunReport:
    instance_digest: str
    command: str
    results: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    wall_time_s: float = 0.0

    def check(self, name: str, lhs: float, op: str, rhs: float, tol: float = 0.0) -> bool:
        ok = {"<=": lhs <= rhs + tol, ">=": lhs >= rhs - tol,
              "==": abs(lhs - rhs) <= tol}[op]
        self.assertions.append({"name": name, "lhs": _jsonable(lhs), "op": op,
                                "rhs": _jsonable(rhs), "tol": tol, "passed": bool(ok)})
        return ok

    @property
    def all_passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def to_json(self) -> str:
        return canonical_json({
            "instance_digest": self.instance_digest,
            "command": self.command,
            "results": _jsonable(self.results),
            "assertions": self.assertions,
            "wall_time_s": self.wall_time_s,
        })


def _write_out(report: RunReport, out: str | None, quiet: bool = False):
    text = report.to_json()
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if not quiet:
        sys.stdout.write(text)


def _svg_heatmap(table: np.ndarray, path: str, cell: int = 8):
    """Minimal deterministic grayscale SVG of a 2-d table."""
    t = np.asarray(table, dtype=float)
    if t.ndim == 1:
        t = t[None, :]
    lo, hi = float(t.min()), float(t.max())
    span = hi - lo if hi > lo else 1.0
    rows, cols = t.shape
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * cell}" height="{rows * cell}">']
    for i in range(rows):
        for j in range(cols):
            g = int(round(255 * (t[i, j] - lo) / span))
            parts.append(f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                         f'fill="rgb({g},{g},{g})"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_solve_lagrangian(args) -> int:
    inst = parse_instance(args.instance, args.seed, args.deterministic or None)
    t0 = time.time()
    report = RunReport(instance_digest=inst.digest(), command="solve-lagrangian")
    costs = default_edge_costs(inst.domain, inst.mask, inst.grid, inst.integrand)
    if args.method == "exact":
        res = solve_exact(inst.mu, inst.domain, inst.mask, costs, budget=inst.budget)
        order = np.argsort(res.coupling.masses)[::-1][:args.atom_cap]
        atom_list = [{"assignment": [int(c) for c in res.coupling.assignments[k]],
                      "mass": float(res.coupling.masses[k])} for k in order]
        report.results = {"value": res.value, "atoms": int(res.coupling.n_atoms),
                          "atom_list": atom_list, "marginal_error": res.marginal_error,
                          "dual_bound": res.dual_bound, "method": "exact"}
        report.check("marginals", res.marginal_error, "<=", 1e-9)
        report.check("dual_bound_below_value", res.dual_bound, "<=", res.value, 1e-8)
    elif args.method == "path":
        res = solve_path(inst.mu, inst.domain, inst.mask, costs)
        report.results = {"value": res.value, "edges": int(res.plan_edges.size), "method": "path"}
    elif args.method == "cycle-entropic":
        res = solve_cycle_entropic(inst.mu, inst.domain, inst.mask, costs,
                                   epsilon=inst.epsilon, tol=max(inst.tol, 1e-9),
                                   max_iter=inst.max_iter)
        report.results = {"value": res.value, "marginal_error": res.marginal_error,
                          "iterations": res.iterations, "converged": res.converged,
                          "method": "cycle-entropic"}
        if not res.converged:
            _write_out(report, args.out)
            return 2
    elif args.method == "comonotone":
        coupling = comonotone_coupling(inst.mu, inst.mask)
        value = coupling_cost(coupling, costs, inst.domain)
        err = check_marginals(coupling, inst.mu, inst.mask)
        report.results = {"value": value, "atoms": int(coupling.n_atoms),
                          "marginal_error": err, "method": "comonotone"}
        report.check("marginals", err, "<=", 1e-9)
    elif args.method == "flow":
        rep = solve_eulerian(inst.mu, inst.domain, inst.mask, inst.integrand, tol=inst.tol)
        from .fields import extract_velocity

        v, _ = extract_velocity(inst.mu, rep.momentum)
        vt = np.zeros((inst.domain.n_nodes, inst.grid.n_cells))
        cnt = np.zeros(inst.domain.n_nodes)
        edges = inst.domain.induced_edges(inst.mask)
        for k, e in enumerate(edges):
            for nd in (inst.domain.edge_tail[e], inst.domain.edge_head[e]):
                vt[nd] += v[k, :, 0]
                cnt[nd] += 1
        vt[cnt > 0] /= cnt[cnt > 0, None]
        fl = parametric_flow_coupling(inst.mu, vt, inst.domain, inst.mask,
                                      x0=inst.mask.nodes[len(inst.mask) // 2],
                                      W=inst.integrand)
        report.results = {"value": fl.value, "marginal_deviation": fl.marginal_deviation,
                          "clamps": fl.clamp_count, "method": "flow"}
    report.wall_time_s = time.time() - t0
    _write_out(report, args.out)
    return 0 if report.all_passed else 1


def _cmd_solve_eulerian(args) -> int:
    inst = parse_instance(args.instance, args.seed, args.deterministic or None)
    t0 = time.time()
    report = RunReport(instance_digest=inst.digest(), command="solve-eulerian")
    rep = solve_eulerian(inst.mu, inst.domain, inst.mask, inst.integrand,
                         tol=args.tol if args.tol else inst.tol,
                         max_iter=inst.max_iter, method=args.method)
    report.results = {"value": rep.value, "residual": rep.residual, "gap": rep.gap,
                      "iterations": rep.iterations, "converged": rep.converged,
                      "certificate_bound": rep.certificate_bound, "method": rep.method}
    if math.isfinite(rep.value):
        report.check("residual", rep.residual, "<=", max(inst.tol, 1e-7))
        if rep.certificate is not None:
            report.check("certificate_bound_below_value", rep.certificate_bound, "<=",
                         rep.value, 1e-8)
    report.wall_time_s = time.time() - t0
    if args.svg and rep.momentum is not None:
        _svg_heatmap(inst.mu.flat(), args.svg)
    if args.trace_csv:
        with open(args.trace_csv, "w", encoding="utf-8") as fh:
            fh.write(rep.trace_csv())
    _write_out(report, args.out)
    if not rep.converged and math.isfinite(rep.value):
        return 2
    return 0 if report.all_passed else 1


def _cmd_verify(args) -> int:
    inst = parse_instance(args.instance, args.seed, args.deterministic or None)
    with open(args.result, "r", encoding="utf-8") as fh:
        rec = json.load(fh)
    report = RunReport(instance_digest=inst.digest(), command="verify")
    t0 = time.time()
    if rec.get("instance_digest") != inst.digest():
        report.assertions.append({"name": "instance_digest_matches", "lhs": rec.get("instance_digest"),
                                  "op": "==", "rhs": inst.digest(), "tol": 0, "passed": False})
    else:
        recorded = rec.get("results", {})
        value = recorded.get("value")
        command = rec.get("command", "")
        if command == "solve-eulerian":
            rep = solve_eulerian(inst.mu, inst.domain, inst.mask, inst.integrand, tol=inst.tol)
            report.check("value_reproduced", float(value), "==", rep.value,
                         1e-6 * (1 + abs(rep.value)))
            report.check("residual_below_tol", rep.residual, "<=", max(inst.tol, 1e-7))
            if rep.certificate is not None:
                feas, bound = check_eulerian_certificate(rep.certificate, inst.mu, inst.domain,
                                                         inst.mask, inst.integrand)
                report.check("certificate_feasible", float(feas), ">=", 1.0)
                report.check("certificate_bound_below_value", bound, "<=", rep.value, 1e-8)
        else:
            costs = default_edge_costs(inst.domain, inst.mask, inst.grid, inst.integrand)
            res = solve_exact(inst.mu, inst.domain, inst.mask, costs, budget=inst.budget)
            report.check("value_reproduced", float(value), "==", res.value,
                         1e-8 * (1 + abs(res.value)))
            report.check("marginals", res.marginal_error, "<=", 1e-9)
            feas, bound, _ = check_certificate(res.certificate, inst.mu, inst.domain,
                                               inst.mask, costs)
            report.check("certificate_feasible", float(feas), ">=", 1.0)
            report.check("certificate_bound_matches_value", bound, "==", res.value, 1e-8)
    report.wall_time_s = time.time() - t0
    _write_out(report, args.out)
    if not report.all_passed:
        bad = next(a for a in report.assertions if not a["passed"])
        sys.stderr.write(f"verification failed: {bad['name']}\n")
        return 1
    return 0


def _cmd_gap(args) -> int:
    inst = parse_instance(args.instance, args.seed, args.deterministic or None)
    t0 = time.time()
    report = RunReport(instance_digest=inst.digest(), command="gap")
    gr = analysis.gap_report(inst.mu, inst.domain, inst.grid, inst.integrand,
                             [inst.mask], budget=inst.budget, tol=inst.tol)
    report.results = {"lagrangian": gr.lagrangian_values[0], "method": gr.lagrangian_methods[0],
                      "eulerian": gr.eulerian_values[0], "gap": gr.gaps[0],
                      "violations": gr.violations}
    report.check("flux_below_coupling", gr.eulerian_values[0], "<=", gr.lagrangian_values[0],
                 0.02 * max(1.0, abs(gr.lagrangian_values[0])))
    report.wall_time_s = time.time() - t0
    _write_out(report, args.out)
    return 0 if report.all_passed else 1


def _cmd_gallery(args) -> int:
    report = RunReport(instance_digest="", command=f"gallery-{args.which}")
    t0 = time.time()
    if args.which == "circle":
        Ns = tuple(int(s) for s in args.nodes.split(","))
        study = analysis.divergence_study(Ns)
        if args.csv:
            with open(args.csv, "w", encoding="utf-8") as fh:
                fh.write(study.to_csv())
        te = study.column("value_coupling")
        teul = study.column("value_flux")
        arcs = study.column("arc_coupling")
        arc_bound = study.column("arc_volume_over_8")
        report.results = {"table": study.rows}
        report.check("coupling_strictly_increasing", float(np.min(np.diff(te))), ">=", 1e-9)
        report.check("flux_within_bound", float(np.max(teul)), "<=", 1.05 * math.pi / 4)
        report.check("ratio_at_finest", float(te[-1] / teul[-1]), ">=", 3.0)
        report.check("arc_bound", float(np.max(arcs / arc_bound)), "<=", 1.05)
    else:
        out = analysis.disk_gallery(n=args.resolution)
        report.results = out
        report.check("sector_flux_bound", out["flux_value"], "<=", 1.1 * out["bound_5_over_8"])
    report.wall_time_s = time.time() - t0
    _write_out(report, args.out)
    return 0 if report.all_passed else 1


def _cmd_study(args) -> int:
    report = RunReport(instance_digest="", command=f"study-{args.which}")
    t0 = time.time()
    if args.which == "superposition":
        study = analysis.superposition_study()
        gaps = study.column("rel_gap")
        report.check("both_near_half", max(abs(study.column("value_coupling")[-1] - 0.5),
                                           abs(study.column("value_flux")[-1] - 0.5)), "<=", 0.025)
        report.check("gap_strictly_decreasing", float(np.max(np.diff(gaps))), "<=", -1e-12)
    elif args.which == "divergence":
        study = analysis.divergence_study()
        report.check("coupling_strictly_increasing",
                     float(np.min(np.diff(study.column("value_coupling")))), ">=", 1e-9)
    elif args.which == "smoothing":
        domain, grid, mu = analysis.build_sqrt_circle(8)
        arc = SubdomainMask(tuple(range(1, 8)))
        study = analysis.smoothing_check(mu, domain, grid, quadratic(0.5), arc)
        report.check("monotone", float(np.min(study.column("monotone"))), ">=", 1.0)
    elif args.which == "flow-rate":
        study = analysis.flow_rate_study()
        report.check("slope", study.loglog_slope("normalized_error", "diameter"), ">=", 0.8)
        report.check("marginal_deviation", float(np.max(study.column("marginal_deviation"))),
                     "<=", 1e-3)
    report.results = {"table": study.rows}
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(study.to_csv())
    report.wall_time_s = time.time() - t0
    _write_out(report, args.out)
    return 0 if report.all_passed else 1


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvlift",
                                 description="liftings of map energies to measure-valued maps")
    ap.add_argument("--seed", type=int, default=None, help="override the instance seed")
    ap.add_argument("--deterministic", action="store_true", help="fixed reduction order")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sl = sub.add_parser("solve-lagrangian", help="coupling-side solvers")
    sl.add_argument("instance")
    sl.add_argument("--method", choices=["exact", "path", "cycle-entropic", "comonotone", "flow"],
                    default="exact")
    sl.add_argument("--atom-cap", type=int, default=32, help="atoms listed in the report")
    sl.add_argument("--out", default=None)
    sl.set_defaults(fn=_cmd_solve_lagrangian)

    se = sub.add_parser("solve-eulerian", help="flux-side solver")
    se.add_argument("instance")
    se.add_argument("--tol", type=float, default=None)
    se.add_argument("--method", choices=["auto", "splitting"], default="auto")
    se.add_argument("--svg", default=None, help="write a row-table heatmap SVG")
    se.add_argument("--trace-csv", default=None, help="write the iteration trace")
    se.add_argument("--out", default=None)
    se.set_defaults(fn=_cmd_solve_eulerian)

    ve = sub.add_parser("verify", help="re-check a recorded result")
    ve.add_argument("instance")
    ve.add_argument("result")
    ve.add_argument("--out", default=None)
    ve.set_defaults(fn=_cmd_verify)

    gp = sub.add_parser("gap", help="both liftings on one instance")
    gp.add_argument("instance")
    gp.add_argument("--out", default=None)
    gp.set_defaults(fn=_cmd_gap)

    ga = sub.add_parser("gallery", help="counterexample galleries")
    ga.add_argument("which", choices=["circle", "disk"])
    ga.add_argument("--nodes", default="6,8,10,12")
    ga.add_argument("--resolution", type=int, default=12)
    ga.add_argument("--csv", default=None)
    ga.add_argument("--out", default=None)
    ga.set_defaults(fn=_cmd_gallery)

    st = sub.add_parser("study", help="refinement studies")
    st.add_argument("which", choices=["superposition", "divergence", "smoothing", "flow-rate"])
    st.add_argument("--csv", default=None)
    st.add_argument("--out", default=None)
    st.set_defaults(fn=_cmd_study)
    return ap


def main(argv=None) -> int:
    threads = os.environ.get("MVLIFT_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SchemaError, InvalidParameterError, InvalidInputError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except NumericalError as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
