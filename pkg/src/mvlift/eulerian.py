"""Flux-side lifting: minimize the perspective energy under per-edge continuity.

With the rows fixed as data, the discrete program decouples across induced
x-edges: each edge carries an independent divergence-constrained convex
problem in its face fluxes.  One-dimensional targets reduce to at most one
scalar degree of freedom per edge and are solved in closed form;
two-dimensional quadratic problems go through a sparse KKT system; the
1-homogeneous kind uses a linear program; ``method="splitting"`` forces the
first-order primal-dual iteration built on the perspective prox.  Reported
certificate bounds come from the exact discrete dual, so they never exceed
the primal value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linprog, minimize

from .domain import SpatialDomain, SubdomainMask
from .errors import InvalidInputError, NumericalError, UnsupportedError
from .fields import MeasureField, MomentumField, TargetGrid, continuity_residual
from .integrand import Integrand, conjugate, perspective, prox_perspective

_ZERO_RHO = 1e-14


@dataclass(frozen=True, eq=False)
class EulerianCertificate:
    """Node potential table phi[node, cell, axis] (one R^d vector per node and cell)."""

    phi: np.ndarray


@dataclass(frozen=True, eq=False)
class EulerianReport:
    value: float
    momentum: MomentumField | None
    residual: float
    gap: float
    iterations: int
    converged: bool
    certificate: EulerianCertificate | None
    certificate_bound: float
    method: str
    trace: tuple = ()  # (iteration, primal value, residual, gap) checkpoints

    def trace_csv(self) -> str:
        lines = ["iteration,primal_value,residual,gap"]
        for row in self.trace:
            lines.append(",".join(format(x, ".17g") for x in row))
        return "\n".join(lines) + "\n"


def _col_integrand(W: Integrand) -> Integrand:
    """Restriction of W to single-column matrices (what one axis edge sees)."""
    return replace(W, d=1)


def _persp_column(W: Integrand, rho_bar: np.ndarray, p: np.ndarray) -> float:
    """sum_c persp(rho_bar_c, p_c); p_c scalar or q-vector per cell.  Extended real."""
    mag = np.linalg.norm(p, axis=-1) if p.ndim > rho_bar.ndim else np.abs(p)
    if W.kind == "operator_norm_tv":
        return float(W.coeff * mag.sum())
    pos = rho_bar > _ZERO_RHO
    if np.any(mag[~pos] > 1e-12):
        return math.inf
    if W.kind in ("quadratic", "p_power"):
        return float((W.coeff * mag[pos] ** W.p / rho_bar[pos] ** (W.p - 1.0)).sum())
    Wc = _col_integrand(W)
    signed = p if p.ndim == rho_bar.ndim else mag
    return float(sum(perspective(Wc, float(r), np.array([[float(s)]]))
                     for r, s in zip(rho_bar[pos], signed[pos])))


def eval_BW(mu: MeasureField, J: MomentumField, mask: SubdomainMask, W: Integrand) -> float:
    """Perspective energy sum_e w_e sum_c persp(rho_bar, J at the cell); extended real."""
    domain = J.domain
    edges = domain.induced_edges(mask)
    if edges.size != J.edge_indices.size or np.any(edges != J.edge_indices):
        raise InvalidInputError("momentum edges do not match the mask")
    if edges.size == 0:
        return 0.0
    tails, heads = domain.edge_tail[edges], domain.edge_head[edges]
    rho_bar = 0.5 * (mu.flat()[tails] + mu.flat()[heads])
    cells = J.cell_values().reshape(edges.size, -1, mu.grid.q)
    total = 0.0
    for k in range(edges.size):
        contrib = _persp_column(W, rho_bar[k], cells[k])
        if math.isinf(contrib):
            return math.inf
        total += domain.edge_weight[edges[k]] * contrib
    return float(total)


# ---------------------------------------------------------------------------
# per-edge machinery, 1-d target


def _face_average_matrix(M: int, periodic: bool) -> np.ndarray:
    """Cells-by-free-faces averaging p = S J; bounded boundary faces are fixed zero."""
    if periodic:
        S = np.zeros((M, M))
        for c in range(M):
            S[c, c] = 0.5
            S[c, (c + 1) % M] = 0.5
        return S
    S = np.zeros((M, M - 1))
    for c in range(M):
        for f in (c, c + 1):
            if 1 <= f <= M - 1:
                S[c, f - 1] = 0.5
    return S


def _face_divergence_matrix(M: int, h: float, periodic: bool) -> np.ndarray:
    """Cells-by-free-faces divergence (div J)_c = (J_{c+1} - J_c)/h."""
    if periodic:
        D = np.zeros((M, M))
        for c in range(M):
            D[c, c] = -1.0 / h
            D[c, (c + 1) % M] = 1.0 / h
        return D
    D = np.zeros((M, M - 1))
    for c in range(M):
        for f, sgn in ((c, -1.0), (c + 1, 1.0)):
            if 1 <= f <= M - 1:
                D[c, f - 1] = sgn / h
    return D


def _edge_problem_1d(r0, r1, ell, grid: TargetGrid):
    """Required divergence and the particular face flux from cumulative sums."""
    M = grid.cells[0]
    h = grid.spacing(0)
    g = -(r1 - r0) / ell
    if grid.periodic[0]:
        part = np.concatenate([[0.0], h * np.cumsum(g)[:-1]])
        return g, part, True
    part = np.concatenate([[0.0], h * np.cumsum(g)])
    part[-1] = 0.0  # row masses agree; kill float noise on the last face
    return g, part, False


def _cells_from_faces_1d(J, periodic):
    if periodic:
        return 0.5 * (J + np.roll(J, -1))
    return 0.5 * (J[:-1] + J[1:])


def _optimal_circulation(W: Integrand, rho_bar, p_part, periodic: bool):
    """Best constant added to the particular cell momentum on a periodic axis.

    Returns (shift, feasible): cells with zero mass pin the shift for
    superlinear kinds; inconsistent pins mean no finite-energy flux exists.
    """
    if not periodic:
        return 0.0, True
    zero = rho_bar <= _ZERO_RHO
    if W.kind != "operator_norm_tv" and np.any(zero):
        forced = -p_part[zero]
        if forced.size and np.max(forced) - np.min(forced) > 1e-9:
            return 0.0, False
        return float(forced.mean()), True
    if W.kind == "quadratic":
        inv = 1.0 / rho_bar
        return float(-(p_part * inv).sum() / inv.sum()), True
    if W.kind == "operator_norm_tv":
        return float(-np.median(p_part)), True
    from .integrand import _golden_min

    span = float(np.abs(p_part).max()) + 1.0
    return float(_golden_min(lambda s: _persp_column(W, rho_bar, p_part + s), -span, span)), True


def _multipliers_1d(W: Integrand, w: float, rho_bar, p, periodic: bool, h: float):
    """Continuity multipliers by the face stationarity recursion.

    beta_c = w * d/dp persp(rho_c, p_c); lambda_f - lambda_{f-1} =
    -(h/2)(beta_{f-1} + beta_f).  Zero-mass cells carry free subgradients,
    used to close the periodic wrap exactly.
    """
    M = rho_bar.size
    zero = rho_bar <= _ZERO_RHO
    beta = np.zeros(M)
    pos = ~zero
    if W.kind == "quadratic":
        beta[pos] = w * 2.0 * W.coeff * p[pos] / rho_bar[pos]
    elif W.kind == "operator_norm_tv":
        beta = w * W.coeff * np.sign(p)
    else:
        eps = 1e-7
        for c in np.nonzero(pos)[0]:
            up = _persp_column(W, rho_bar[c:c + 1], np.array([p[c] + eps]))
            dn = _persp_column(W, rho_bar[c:c + 1], np.array([p[c] - eps]))
            beta[c] = w * (up - dn) / (2 * eps)

    def run(beta_vec):
        lam = np.zeros(M)
        for f in range(1, M):
            lam[f] = lam[f - 1] - 0.5 * h * (beta_vec[f - 1] + beta_vec[f])
        return lam

    if periodic:
        lam = run(beta)
        defect = -0.5 * h * (beta[M - 1] + beta[0]) + lam[M - 1] - lam[0]
        nz = int(zero.sum())
        if abs(defect) > 0 and nz:
            beta = beta.copy()
            beta[zero] += defect / (h * nz)
        lam = run(beta)
    else:
        lam = run(beta)
    return lam - lam.mean()


def _dual_value_edge(W: Integrand, w: float, rho_bar, lam, g, grid: TargetGrid):
    """Exact dual value <lam, g> - sup_J (<D^T lam, J> - w * Phi(J)) for one edge.

    Quadratic kinds solve the concave sup by least squares (exact), the
    1-homogeneous kind by an LP feasibility check; the remaining kinds use a
    numeric inner solve and are estimates rather than guarantees.
    """
    M = grid.cells[0]
    h = grid.spacing(0)
    periodic = grid.periodic[0]
    D = _face_divergence_matrix(M, h, periodic)
    S = _face_average_matrix(M, periodic)
    v = D.T @ lam
    lin = float(lam @ g)
    if W.kind == "operator_norm_tv":
        res = linprog(np.zeros(M), A_eq=S.T, b_eq=v,
                      bounds=[(-w * W.coeff, w * W.coeff)] * M, method="highs-ds")
        return lin if res.success else -math.inf
    if W.kind == "quadratic":
        # sup over the subspace where zero-mass cells carry no momentum:
        # value is (1/2) v^T N (N^T Q N)^+ N^T v on the null space N of those rows
        pos = rho_bar > _ZERO_RHO
        dvec = np.zeros(M)
        dvec[pos] = 2.0 * w * W.coeff / rho_bar[pos]
        scale = max(1.0, float(np.abs(v).max()))
        if np.all(pos):
            Q = sp.csr_matrix(S.T @ np.diag(dvec) @ S)
            sol = spla.lsqr(Q, v, atol=1e-14, btol=1e-14, iter_lim=10 * M + 100)[0]
            if np.max(np.abs(Q @ sol - v)) > 1e-7 * scale:
                return -math.inf
            return lin - 0.5 * float(v @ sol)
        from scipy.linalg import null_space

        N = null_space(S[~pos])
        if N.shape[1] == 0:
            return lin if float(np.abs(v).max()) <= 1e-9 * scale else -math.inf
        Qr = N.T @ (S.T @ np.diag(dvec) @ S) @ N
        vr = N.T @ v
        sol, *_ = np.linalg.lstsq(Qr, vr, rcond=None)
        if np.max(np.abs(Qr @ sol - vr)) > 1e-7 * scale:
            return -math.inf
        return lin - 0.5 * float(vr @ sol)

    def neg(Jf):
        val = _persp_column(W, rho_bar, S @ Jf)
        return 1e30 if math.isinf(val) else w * val - float(v @ Jf)

    res = minimize(neg, np.zeros(S.shape[1]), method="L-BFGS-B")
    return lin + float(res.fun)


# ---------------------------------------------------------------------------
# splitting solver (1-d targets, any kind), vectorized over edges


def _power_norm(S: np.ndarray, D: np.ndarray, iters: int = 60) -> float:
    """Power-method estimate of the stacked constraint operator norm."""
    M, nF = S.shape
    rng = np.random.default_rng(0)
    z = rng.standard_normal(2 * M + nF)
    n = 1.0
    for _ in range(iters):
        r, p, J = z[:M], z[M:2 * M], z[2 * M:]
        y1 = D @ J
        y2 = p - S @ J
        y3 = r
        back = np.concatenate([y3, y2, D.T @ y1 - S.T @ y2])
        n = float(np.linalg.norm(back))
        if n == 0:
            return 1.0
        z = back / n
    return math.sqrt(n)


def _prox_quadratic_batch(c_arr, tau, r_hat, p_hat):
    """Vectorized quadratic perspective prox: Newton from the right on the cubic."""
    nj2 = p_hat**2
    lo = np.maximum(r_hat, 0.0)
    r = lo + np.cbrt(c_arr * tau * nj2) + 1.0
    for _ in range(60):
        P = (r - r_hat) * (r + 2 * c_arr * tau) ** 2 - c_arr * tau * nj2
        dP = (r + 2 * c_arr * tau) ** 2 + 2 * (r - r_hat) * (r + 2 * c_arr * tau)
        step = P / np.maximum(dP, 1e-300)
        r = np.maximum(r - step, lo)
        if np.max(np.abs(step)) < 1e-14 * (1.0 + np.max(r)):
            break
    p = p_hat * r / (r + 2 * c_arr * tau)
    obj = np.where(r > 0, c_arr * p**2 / np.maximum(r, 1e-300), 0.0) \
        + ((r - r_hat) ** 2 + (p - p_hat) ** 2) / (2 * tau)
    apex = (r_hat**2 + nj2) / (2 * tau)
    use_apex = (apex < obj) | (r <= 0)
    return np.where(use_apex, 0.0, r), np.where(use_apex, 0.0, p)


def _splitting_1d(W, weights, rho_bar, g_all, grid, tol, max_iter):
    """Primal-dual proximal iterations on (mass slack, cell momentum, face flux).

    Dual ascent on the affine constraints [div J = g, p = S J, r = rho_bar],
    perspective prox on (r, p); steps satisfy the 0.95 safety factor on the
    power-method operator norm estimate.
    """
    E, M = rho_bar.shape
    h = grid.spacing(0)
    periodic = grid.periodic[0]
    S = _face_average_matrix(M, periodic)
    D = _face_divergence_matrix(M, h, periodic)
    nF = S.shape[1]
    step = 0.95 / _power_norm(S, D)
    sigma = tau = step
    Wc = _col_integrand(W)
    w_col = np.broadcast_to(np.asarray(weights)[:, None], (E, M))
    r = rho_bar.copy()
    p = np.zeros((E, M))
    J = np.zeros((E, nF))
    lam = np.zeros((E, M))
    beta = np.zeros((E, M))
    gam = np.zeros((E, M))
    rb, pb, Jb = r.copy(), p.copy(), J.copy()
    value = math.inf
    trace = []
    for it in range(1, max_iter + 1):
        lam = lam + sigma * (Jb @ D.T - g_all)
        beta = beta + sigma * (pb - Jb @ S.T)
        gam = gam + sigma * (rb - rho_bar)
        r_old, p_old, J_old = r, p, J
        J = J - tau * (lam @ D - beta @ S)
        r_in = r - tau * gam
        p_in = p - tau * beta
        if W.kind == "quadratic":
            r, p = _prox_quadratic_batch(w_col * W.coeff, tau, r_in, p_in)
        elif W.kind == "operator_norm_tv":
            radius = tau * w_col * W.coeff
            r = np.maximum(r_in, 0.0)
            p = np.sign(p_in) * np.maximum(np.abs(p_in) - radius, 0.0)
        else:
            r = np.empty_like(r_in)
            p = np.empty_like(p_in)
            for e in range(E):
                for c in range(M):
                    rr, pp = prox_perspective(Wc, tau, float(r_in[e, c]),
                                              np.array([[p_in[e, c]]]),
                                              scale=float(weights[e]))
                    r[e, c] = rr
                    p[e, c] = float(pp[0, 0])
        rb, pb, Jb = 2 * r - r_old, 2 * p - p_old, 2 * J - J_old
        if it % 25 == 0 or it == max_iter:
            res = float(np.max(np.abs(J @ D.T - g_all)))
            pc = J @ S.T
            value = sum(float(weights[e]) * _persp_column(W, rho_bar[e], pc[e]) for e in range(E))
            dual = sum(_dual_value_edge(W, float(weights[e]), rho_bar[e], lam[e], g_all[e], grid)
                       for e in range(E))
            gap = abs(value - dual) / (1.0 + abs(value))
            trace.append((it, value, res, gap))
            if res < tol and gap < tol * (1.0 + abs(value)):
                return J, lam, value, it, True, trace
    return J, lam, value, max_iter, False, trace


# ---------------------------------------------------------------------------
# per-edge solves, 2-d target


def _axis_operators_2d(grid: TargetGrid):
    """Per axis: sparse divergence and averaging from free faces to cells."""
    M0, M1 = grid.cells
    ops = []
    for a in range(2):
        per = grid.periodic[a]
        n_face = grid.n_faces(a)
        faces_shape = (n_face, M1) if a == 0 else (M0, n_face)
        free = np.ones(faces_shape, dtype=bool)
        if not per:
            if a == 0:
                free[0, :] = free[-1, :] = False
            else:
                free[:, 0] = free[:, -1] = False
        face_id = -np.ones(faces_shape, dtype=int)
        face_id[free] = np.arange(int(free.sum()))
        h = grid.spacing(a)
        rows_d, cols_d, vals_d = [], [], []
        rows_s, cols_s, vals_s = [], [], []
        for c0 in range(M0):
            for c1 in range(M1):
                cell = c0 * M1 + c1
                if a == 0:
                    lo = (c0, c1)
                    hi = ((c0 + 1) % n_face if per else c0 + 1, c1)
                else:
                    lo = (c0, c1)
                    hi = (c0, (c1 + 1) % n_face if per else c1 + 1)
                for f, sgn in ((lo, -1.0), (hi, 1.0)):
                    fid = face_id[f]
                    if fid >= 0:
                        rows_d.append(cell)
                        cols_d.append(fid)
                        vals_d.append(sgn / h)
                        rows_s.append(cell)
                        cols_s.append(fid)
                        vals_s.append(0.5)
        n_free = int(free.sum())
        D = sp.csr_matrix((vals_d, (rows_d, cols_d)), shape=(M0 * M1, n_free))
        S = sp.csr_matrix((vals_s, (rows_s, cols_s)), shape=(M0 * M1, n_free))
        ops.append((D, S, free))
    return ops


def _solve_edge_2d_quadratic(W, w, rho_bar, g, ops):
    D = sp.hstack([ops[0][0], ops[1][0]]).tocsr()
    S0, S1 = ops[0][1], ops[1][1]
    nf0, nf1 = S0.shape[1], S1.shape[1]
    pos = rho_bar > _ZERO_RHO
    dvec = np.zeros(rho_bar.size)
    dvec[pos] = 2.0 * w * W.coeff / rho_bar[pos]
    Q = sp.block_diag([S0.T @ sp.diags(dvec) @ S0, S1.T @ sp.diags(dvec) @ S1]).tocsr()
    cons = [D]
    rhs = [g]
    if np.any(~pos):
        Z0, Z1 = S0[~pos], S1[~pos]
        cons.append(sp.hstack([Z0, sp.csr_matrix((Z0.shape[0], nf1))]))
        cons.append(sp.hstack([sp.csr_matrix((Z1.shape[0], nf0)), Z1]))
        rhs += [np.zeros(Z0.shape[0]), np.zeros(Z1.shape[0])]
    A = sp.vstack(cons).tocsr()
    b = np.concatenate(rhs)
    n, m = Q.shape[0], A.shape[0]
    reg = 1e-11
    kkt = sp.bmat([[Q + reg * sp.eye(n), A.T], [A, -reg * sp.eye(m)]]).tocsc()
    sol = spla.spsolve(kkt, np.concatenate([np.zeros(n), b]))
    J = sol[:n]
    feas = float(np.max(np.abs(A @ J - b)))
    if feas > 1e-6:
        raise NumericalError(f"edge KKT solve infeasible, residual {feas:.2e}")
    return J[:nf0], J[nf0:]


def _solve_edge_2d_tv(W, w, rho_bar, g, ops):
    D = sp.hstack([ops[0][0], ops[1][0]]).tocsr()
    S = sp.block_diag([ops[0][1], ops[1][1]]).tocsr()
    nJ = D.shape[1]
    nP = S.shape[0]
    A_eq = sp.hstack([D, sp.csr_matrix((D.shape[0], nP))])
    A_ub = sp.vstack([sp.hstack([S, -sp.eye(nP)]), sp.hstack([-S, -sp.eye(nP)])])
    c = np.concatenate([np.zeros(nJ), w * W.coeff * np.ones(nP)])
    res = linprog(c, A_ub=A_ub.toarray(), b_ub=np.zeros(2 * nP),
                  A_eq=A_eq.toarray(), b_eq=g, bounds=(None, None), method="highs-ds")
    if not res.success:
        raise NumericalError(f"edge TV LP failed: {res.message}")
    J = res.x[:nJ]
    nf0 = ops[0][1].shape[1]
    return J[:nf0], J[nf0:]


# ---------------------------------------------------------------------------
# main solver


def _comp_shape(grid: TargetGrid, axis: int) -> tuple:
    s = list(grid.shape)
    s[axis] = grid.n_faces(axis)
    return tuple(s)


def solve_eulerian(mu: MeasureField, domain: SpatialDomain, mask: SubdomainMask,
                   W: Integrand, tol: float = 1e-9, max_iter: int = 20000,
                   method: str = "auto") -> EulerianReport:
    """Minimize the perspective energy over fluxes satisfying per-edge continuity.

    ``method="auto"`` picks closed forms / KKT / LP as available;
    ``method="splitting"`` forces the first-order primal-dual iteration
    (1-d targets).  A +inf value is exact: no finite-energy flux exists.
    """
    grid = mu.grid
    if mu.n_nodes != domain.n_nodes:
        raise InvalidInputError("measure field does not match the domain")
    edges = domain.induced_edges(mask)
    flat = mu.flat()
    comps = [np.zeros((edges.size, *_comp_shape(grid, a))) for a in range(grid.q)]
    if edges.size == 0:
        J = MomentumField(domain=domain, grid=grid, edge_indices=edges, components=tuple(comps))
        return EulerianReport(value=0.0, momentum=J, residual=0.0, gap=0.0, iterations=0,
                              converged=True, certificate=None, certificate_bound=0.0,
                              method="empty")
    tails, heads = domain.edge_tail[edges], domain.edge_head[edges]
    rho_bar = 0.5 * (flat[tails] + flat[heads])
    trace = []
    weights = domain.edge_weight[edges]
    lengths = domain.edge_length[edges]
    g_all = np.stack([-(flat[heads[k]] - flat[tails[k]]).reshape(-1) / lengths[k]
                      for k in range(edges.size)])
    total = 0.0
    dual_total = 0.0
    iterations = 0
    converged = True
    # certificates only where the discrete dual evaluates exactly
    emit_certificate = grid.q == 1 and W.kind in ("quadratic", "operator_norm_tv")
    lam_all = np.zeros((edges.size, grid.n_cells))

    if grid.q == 1 and method == "splitting":
        used = "splitting"
        Jf, lam_all, total, iterations, converged, trace = _splitting_1d(
            W, weights, rho_bar, g_all, grid, tol, max_iter)
        periodic = grid.periodic[0]
        for k in range(edges.size):
            if periodic:
                comps[0][k] = Jf[k]
            else:
                comps[0][k, 1:-1] = Jf[k]
        dual_total = sum(_dual_value_edge(W, float(weights[k]), rho_bar[k], lam_all[k],
                                          g_all[k], grid) for k in range(edges.size))
    elif grid.q == 1:
        used = "direct"
        h = grid.spacing(0)
        for k in range(edges.size):
            w = float(weights[k])
            g, part, per = _edge_problem_1d(flat[tails[k]], flat[heads[k]], float(lengths[k]), grid)
            p_part = _cells_from_faces_1d(part, per)
            s, ok = _optimal_circulation(W, rho_bar[k], p_part, per)
            J_edge = part + s if per else part
            comps[0][k] = J_edge
            if not ok:
                total = math.inf
                continue
            p = _cells_from_faces_1d(J_edge, per)
            contrib = _persp_column(W, rho_bar[k], p)
            if math.isinf(contrib):
                total = math.inf
                continue
            if not math.isinf(total):
                total += w * contrib
            if emit_certificate:
                lam_all[k] = _multipliers_1d(W, w, rho_bar[k], p, per, h)
                dual_total += _dual_value_edge(W, w, rho_bar[k], lam_all[k], g, grid)
            else:
                dual_total += w * contrib  # gap falls back to the residual proxy below
    elif grid.q == 2:
        if method == "splitting":
            raise UnsupportedError("the splitting path is implemented for 1-d targets")
        if W.kind == "quadratic":
            used = "kkt"
        elif W.kind == "operator_norm_tv":
            used = "lp"
        else:
            raise UnsupportedError("2-d targets support quadratic and 1-homogeneous kinds")
        ops = _axis_operators_2d(grid)
        emit_certificate = False
        for k in range(edges.size):
            w = float(weights[k])
            if used == "kkt":
                J0, J1 = _solve_edge_2d_quadratic(W, w, rho_bar[k], g_all[k], ops)
            else:
                J0, J1 = _solve_edge_2d_tv(W, w, rho_bar[k], g_all[k], ops)
            comps[0][k][ops[0][2]] = J0
            comps[1][k][ops[1][2]] = J1
            pvec = np.stack([ops[0][1] @ J0, ops[1][1] @ J1], axis=-1)
            contrib = _persp_column(W, rho_bar[k], pvec)
            total = math.inf if math.isinf(contrib) else total + w * contrib
    else:
        raise UnsupportedError("targets must be 1- or 2-dimensional")

    J = MomentumField(domain=domain, grid=grid, edge_indices=edges, components=tuple(comps))
    residual = continuity_residual(mu, J, mask)
    if math.isinf(total):
        return EulerianReport(value=math.inf, momentum=J, residual=residual, gap=math.nan,
                              iterations=iterations, converged=True, certificate=None,
                              certificate_bound=math.nan, method=used, trace=tuple(trace))
    if emit_certificate:
        cert = _certificate_from_multipliers(lam_all, edges, domain, grid)
        gap = abs(total - dual_total) / (1.0 + abs(total))
        bound = float(dual_total)
    else:
        cert, gap, bound = None, residual / (1.0 + abs(total)), math.nan
    ok = converged and residual < max(tol, 1e-7)
    if not trace:
        trace = [(iterations, float(total), residual, float(gap))]
    return EulerianReport(value=float(total), momentum=J, residual=residual, gap=float(gap),
                          iterations=iterations, converged=bool(ok), certificate=cert,
                          certificate_bound=bound, method=used, trace=tuple(trace))


def solve_eulerian_localized(mu: MeasureField, domain: SpatialDomain, masks,
                             W: Integrand, tol: float = 1e-9) -> list:
    """Independent solves restricted to each mask's induced edges."""
    return [solve_eulerian(mu, domain, m, W, tol=tol) for m in masks]


# ---------------------------------------------------------------------------
# certificates


def _certificate_from_multipliers(lam_all, edges, domain: SpatialDomain, grid: TargetGrid):
    """Node potential: per axis, incident edge multipliers averaged over w_e."""
    d = domain.dim
    phi = np.zeros((domain.n_nodes, grid.n_cells, d))
    count = np.zeros((domain.n_nodes, d))
    for k in range(edges.size):
        e = edges[k]
        a = int(domain.edge_axis[e])
        tau = float(domain.edge_dir[e, a])
        val = lam_all[k] / float(domain.edge_weight[e]) * tau
        for node in (int(domain.edge_tail[e]), int(domain.edge_head[e])):
            phi[node, :, a] += val
            count[node, a] += 1.0
    nz = count > 0
    for a in range(d):
        sel = nz[:, a]
        phi[sel, :, a] /= count[sel, a][:, None]
    return EulerianCertificate(phi=phi)


def check_eulerian_certificate(cert: EulerianCertificate, mu: MeasureField,
                               domain: SpatialDomain, mask: SubdomainMask,
                               W: Integrand):
    """(feasible, lower bound) for a node potential table, 1-d targets.

    Feasibility samples conjugate finiteness at the centered cell differences
    of the edge-averaged potential; the bound is the exact discrete dual of
    the per-edge problems at the induced multipliers, hence never exceeds
    the primal optimum for quadratic and 1-homogeneous kinds.
    """
    if mu.grid.q != 1:
        raise UnsupportedError("certificate checks are implemented for 1-d targets")
    edges = domain.induced_edges(mask)
    flat = mu.flat()
    M = mu.grid.n_cells
    h = mu.grid.spacing(0)
    periodic = mu.grid.periodic[0]
    feasible = True
    bound = 0.0
    Wc = _col_integrand(W)
    for e in edges:
        t, hd = int(domain.edge_tail[e]), int(domain.edge_head[e])
        a = int(domain.edge_axis[e])
        tau = float(domain.edge_dir[e, a])
        Phi = 0.5 * (cert.phi[t, :, a] + cert.phi[hd, :, a]) * tau
        if periodic:
            gy = (np.roll(Phi, -1) - np.roll(Phi, 1)) / (2 * h)
        else:
            gy = np.gradient(Phi, h)
        if any(math.isinf(conjugate(Wc, np.array([[gc]]))) for gc in gy):
            feasible = False
        w = float(domain.edge_weight[e])
        lam = w * Phi
        lam = lam - lam.mean()
        g = -(flat[hd] - flat[t]) / float(domain.edge_length[e])
        rho_bar = 0.5 * (flat[t] + flat[hd])
        bound += _dual_value_edge(W, w, rho_bar, lam, g, mu.grid)
    return feasible, float(bound)
