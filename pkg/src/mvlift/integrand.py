"""Convex integrands W on q x d matrices and the classical localized energy.

Built-in kinds: ``quadratic`` (coeff * |v|_F^2), ``p_power`` (coeff * |v|_F^p,
p > 1), ``operator_norm_tv`` (coeff * largest singular value, 1-homogeneous)
and ``convex_table`` (piecewise-linear scalar W sampled on a grid).  Each
integrand carries recorded growth constants so coercivity checks are
assertable, plus the conjugate, recession and perspective maps and the
proximal operator of the perspective used by the flux solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .domain import SpatialDomain, SubdomainMask
from .errors import (
    InvalidInputError,
    InvalidParameterError,
    NumericalError,
    UnsupportedError,
)
from .fields import ClassicalMap, MeasureField, TargetGrid

_PROX_TOL = 1e-12
_PROX_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class Integrand:
    kind: str
    q: int
    d: int
    p: float
    coeff: float
    table_v: np.ndarray | None = None
    table_w: np.ndarray | None = None
    approximately_radial: bool = True

    @property
    def one_homogeneous(self) -> bool:
        return self.kind == "operator_norm_tv"

    @property
    def growth(self) -> tuple:
        """(p, C1, C2) with W(v) >= C1 |v|_F^p - C2."""
        if self.kind in ("quadratic", "p_power"):
            return (self.p, self.coeff, 0.0)
        if self.kind == "operator_norm_tv":
            return (1.0, self.coeff / math.sqrt(min(self.q, self.d)), 0.0)
        c1 = min(self.table_slopes[1], -self.table_slopes[0])
        c2 = float(np.max(c1 * np.abs(self.table_v) - self.table_w))
        return (1.0, c1, max(c2, 0.0))

    @property
    def linear_growth(self) -> tuple:
        """(C1, C2) with W(v) >= C1 |v|_F - C2, used by the coercivity bound."""
        if self.kind == "quadratic":
            return (2.0 * math.sqrt(self.coeff), 1.0)
        if self.kind == "p_power":
            return (self.coeff * self.p, self.coeff * (self.p - 1.0))
        p, c1, c2 = self.growth
        return (c1, c2)

    @property
    def table_slopes(self) -> tuple:
        dv = np.diff(self.table_v)
        dw = np.diff(self.table_w)
        s = dw / dv
        return (float(s[0]), float(s[-1]))


def quadratic(coeff: float = 0.5, q: int = 1, d: int = 1) -> Integrand:
    if coeff <= 0:
        raise InvalidParameterError("coefficient must be positive")
    return Integrand(kind="quadratic", q=q, d=d, p=2.0, coeff=float(coeff))


def p_power(p: float, coeff: float = 1.0, q: int = 1, d: int = 1) -> Integrand:
    if p <= 1:
        raise InvalidParameterError("p_power needs p > 1; use operator_norm_tv for p = 1")
    if coeff <= 0:
        raise InvalidParameterError("coefficient must be positive")
    return Integrand(kind="p_power", q=q, d=d, p=float(p), coeff=float(coeff))


def operator_norm_tv(coeff: float = 1.0, q: int = 1, d: int = 1) -> Integrand:
    if coeff <= 0:
        raise InvalidParameterError("coefficient must be positive")
    return Integrand(kind="operator_norm_tv", q=q, d=d, p=1.0, coeff=float(coeff))


def convex_table(v_grid, w_values) -> Integrand:
    """Scalar piecewise-linear convex integrand from sampled values.

    Outside the sampled range the end slopes are extended linearly, so the
    conjugate over the slope range is exact.
    """
    v = np.asarray(v_grid, dtype=float)
    w = np.asarray(w_values, dtype=float)
    if v.ndim != 1 or v.size < 3 or np.any(np.diff(v) <= 0):
        raise InvalidParameterError("table grid must be strictly increasing with >= 3 points")
    slopes = np.diff(w) / np.diff(v)
    if np.any(np.diff(slopes) < -1e-12):
        raise InvalidParameterError("table values are not convex")
    if np.any(w < 0):
        raise InvalidParameterError("table values must be non-negative")
    return Integrand(kind="convex_table", q=1, d=1, p=1.0, coeff=1.0, table_v=v, table_w=w,
                     approximately_radial=False)


def as_matrix(v, q: int, d: int) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.shape != (q, d):
        raise InvalidInputError(f"expected a {q}x{d} matrix, got shape {a.shape}")
    return a


def eval_W(W: Integrand, v) -> float:
    a = as_matrix(v, W.q, W.d)
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("argument must be finite")
    if W.kind == "quadratic":
        with np.errstate(over="ignore"):
            return W.coeff * float((a * a).sum())
    if W.kind == "p_power":
        with np.errstate(over="ignore"):
            return W.coeff * float(np.linalg.norm(a)) ** W.p
    if W.kind == "operator_norm_tv":
        if 1 in a.shape:
            return W.coeff * float(np.linalg.norm(a))
        return W.coeff * float(np.linalg.norm(a, ord=2))
    return _table_eval(W, float(a[0, 0]))


def _table_eval(W: Integrand, x: float) -> float:
    v, w = W.table_v, W.table_w
    if x <= v[0]:
        return float(w[0] + W.table_slopes[0] * (x - v[0]))
    if x >= v[-1]:
        return float(w[-1] + W.table_slopes[1] * (x - v[-1]))
    return float(np.interp(x, v, w))


def conjugate(W: Integrand, b) -> float:
    """Legendre transform sup_v b.v - W(v); may be +inf."""
    r = as_matrix(b, W.q, W.d)
    if W.kind == "quadratic":
        return float((r * r).sum()) / (4.0 * W.coeff)
    if W.kind == "p_power":
        pc = W.p / (W.p - 1.0)
        nb = float(np.linalg.norm(r))
        return (W.p - 1.0) / W.p * (W.coeff * W.p) ** (-1.0 / (W.p - 1.0)) * nb**pc
    if W.kind == "operator_norm_tv":
        nuc = float(np.abs(r).sum()) if 1 in r.shape else float(np.linalg.svd(r, compute_uv=False).sum())
        return 0.0 if nuc <= W.coeff * (1.0 + 1e-12) else math.inf
    s_lo, s_hi = W.table_slopes
    x = float(r[0, 0])
    if x > s_hi + 1e-12 or x < s_lo - 1e-12:
        return math.inf
    return float(np.max(x * W.table_v - W.table_w))


def recession(W: Integrand, v) -> float:
    """lim_t W(tv)/t: 1-homogeneous; +inf off zero for superlinear kinds."""
    a = as_matrix(v, W.q, W.d)
    if float(np.abs(a).max()) == 0.0:
        return 0.0
    if W.kind in ("quadratic", "p_power"):
        return math.inf
    if W.kind == "operator_norm_tv":
        return eval_W(W, a)
    x = float(a[0, 0])
    s_lo, s_hi = W.table_slopes
    return x * s_hi if x > 0 else x * s_lo


def perspective(W: Integrand, rho: float, J) -> float:
    """rho * W(J / rho) for rho > 0, recession of J at rho = 0."""
    if rho < 0:
        raise InvalidParameterError("perspective needs rho >= 0")
    a = as_matrix(J, W.q, W.d)
    if rho == 0.0:
        return recession(W, a)
    with np.errstate(over="ignore"):
        scaled = a / rho
    if not np.all(np.isfinite(scaled)):
        return math.inf  # J/rho overflows: the superlinear value is astronomically large
    return rho * eval_W(W, scaled)


# ---------------------------------------------------------------------------
# proximal map of the perspective


def prox_perspective(W: Integrand, tau: float, rho_hat: float, J_hat, scale: float = 1.0):
    """argmin over rho >= 0, J of scale*persp(rho, J) + ((rho-rho_hat)^2 + |J-J_hat|^2)/(2 tau).

    Quadratic W reduces to a scalar cubic root; 1-homogeneous W decouples
    into clipping the mass and shrinking J onto the dual ball; the remaining
    kinds run a capped alternating coordinate search.
    """
    if tau <= 0:
        raise InvalidParameterError("prox step must be positive")
    p_hat = as_matrix(J_hat, W.q, W.d)
    if W.kind == "quadratic":
        return _prox_quadratic(scale * W.coeff, tau, float(rho_hat), p_hat)
    if W.kind == "operator_norm_tv":
        return max(float(rho_hat), 0.0), _shrink_operator_norm(p_hat, tau * scale * W.coeff)
    return _prox_alternating(W, tau, float(rho_hat), p_hat, scale)


def _prox_quadratic(c: float, tau: float, rho_hat: float, p_hat: np.ndarray):
    nj2 = float((p_hat * p_hat).sum())
    zero_obj = (rho_hat**2 + nj2) / (2.0 * tau)
    if nj2 == 0.0:
        return max(rho_hat, 0.0), np.zeros_like(p_hat)

    def cubic(r):
        return (r - rho_hat) * (r + 2.0 * c * tau) ** 2 - c * tau * nj2

    lo = max(rho_hat, 0.0)
    hi = lo + (c * tau * nj2) ** (1.0 / 3.0) + 1.0
    while cubic(hi) < 0:
        hi *= 2.0
    r = brentq(cubic, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=_PROX_MAX_ITER)
    if r <= 0.0:
        return 0.0, np.zeros_like(p_hat)
    J = p_hat * (r / (r + 2.0 * c * tau))
    obj = c * float((J * J).sum()) / r + ((r - rho_hat) ** 2 + float(((J - p_hat) ** 2).sum())) / (2 * tau)
    if zero_obj < obj:
        return 0.0, np.zeros_like(p_hat)
    return float(r), J


def _project_l1(x: np.ndarray, radius: float) -> np.ndarray:
    if x.sum() <= radius:
        return x.copy()
    u = np.sort(x)[::-1]
    cum = np.cumsum(u)
    k = np.arange(1, x.size + 1)
    cond = u - (cum - radius) / k > 0
    kmax = k[cond][-1]
    theta = (cum[kmax - 1] - radius) / kmax
    return np.maximum(x - theta, 0.0)


def _shrink_operator_norm(p_hat: np.ndarray, radius: float) -> np.ndarray:
    """prox of radius * opnorm: subtract the projection onto the nuclear ball."""
    if radius <= 0:
        return p_hat.copy()
    if 1 in p_hat.shape:
        n = float(np.linalg.norm(p_hat))
        if n <= radius:
            return np.zeros_like(p_hat)
        return p_hat * (1.0 - radius / n)
    U, s, Vt = np.linalg.svd(p_hat, full_matrices=False)
    s_proj = _project_l1(s, radius)
    return U @ np.diag(s - s_proj) @ Vt


def _golden_min(fn, a: float, b: float, tol: float = _PROX_TOL) -> float:
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    c1, c2 = b - golden * (b - a), a + golden * (b - a)
    f1, f2 = fn(c1), fn(c2)
    for _ in range(_PROX_MAX_ITER):
        if f1 <= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - golden * (b - a)
            f1 = fn(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + golden * (b - a)
            f2 = fn(c2)
        if b - a < tol * max(1.0, abs(b)):
            break
    return 0.5 * (a + b)


def _prox_alternating(W: Integrand, tau: float, rho_hat: float, p_hat: np.ndarray, scale: float):
    """Alternating exact coordinate descent on the jointly convex prox objective.

    Valid for radial kinds (J stays on the ray of J_hat) and for scalar
    tables (signed magnitude); both reduce the matrix block to one scalar.
    """
    signed = W.kind == "convex_table"
    nj = float(np.linalg.norm(p_hat))
    direction = p_hat / nj if nj > 0 else np.zeros_like(p_hat)
    m0 = float(p_hat[0, 0]) if signed else nj

    def to_matrix(m_):
        return np.array([[m_]]) if signed else m_ * direction

    def obj(r_, m_):
        return (scale * perspective(W, r_, to_matrix(m_))
                + ((r_ - rho_hat) ** 2 + (m_ - m0) ** 2) / (2 * tau))

    def solve_m(r_):
        lo = m0 - tau * scale * 100.0 - 1.0 if signed else 0.0
        hi = abs(m0) + tau * scale * 100.0 + 1.0
        return _golden_min(lambda m_: obj(r_, m_), lo, hi)

    def solve_r(m_):
        hi = max(rho_hat, 0.0) + tau * scale * (1.0 + abs(m_)) * 100.0 + 1.0
        return _golden_min(lambda r_: obj(r_, m_), 0.0, hi)

    r, m = max(rho_hat, 1e-6), m0
    prev = math.inf
    for _ in range(_PROX_MAX_ITER):
        m = solve_m(r)
        r = solve_r(m)
        cur = obj(r, m)
        if abs(prev - cur) <= 1e-13 * max(1.0, abs(cur)):
            break
        prev = cur
    else:
        raise NumericalError(f"perspective prox did not converge: objective {cur:.6e}, "
                             f"iterate (rho={r:.3e}, m={m:.3e})")
    # compare against the apex candidate (0, 0)
    if (rho_hat**2 + m0**2) / (2 * tau) < obj(r, m):
        return 0.0, np.zeros_like(p_hat)
    return float(r), to_matrix(m)


# ---------------------------------------------------------------------------
# data terms and the classical localized energy


@dataclass(frozen=True, eq=False)
class DataTerm:
    """Non-negative sampled data cost f(x_i, y_cell), shape (n_nodes, *grid.shape)."""

    grid: TargetGrid
    table: np.ndarray

    def __post_init__(self):
        if self.table.shape[1:] != self.grid.shape:
            raise InvalidInputError("data table shape does not match the grid")
        if np.any(self.table < 0) or not np.all(np.isfinite(self.table)):
            raise InvalidInputError("data term entries must be non-negative and finite")

    @classmethod
    def from_function(cls, domain: SpatialDomain, grid: TargetGrid, fn) -> "DataTerm":
        pts = grid.center_points()
        table = np.zeros((domain.n_nodes, grid.n_cells))
        for i in range(domain.n_nodes):
            table[i] = [fn(domain.nodes[i], y) for y in pts]
        return cls(grid=grid, table=table.reshape(domain.n_nodes, *grid.shape))

    def against(self, mu: MeasureField, node_weights: np.ndarray, nodes) -> float:
        idx = np.asarray(nodes, dtype=int)
        flat = self.table.reshape(self.table.shape[0], -1)
        return float((node_weights[idx] * (flat[idx] * mu.flat()[idx]).sum(axis=1)).sum())


def _edge_displacements(u_values: np.ndarray, grid: TargetGrid, tails, heads) -> np.ndarray:
    disp = u_values[heads] - u_values[tails]
    for a in range(grid.q):
        disp[:, a] = grid.wrap_delta(a, disp[:, a])
    return disp


def eval_energy(u: ClassicalMap, domain: SpatialDomain, mask: SubdomainMask,
                W: Integrand, data: DataTerm | None = None) -> float:
    """Discrete localized energy: edge (d=1) or node (d=2) gradient terms plus data.

    In one dimension the gradient on edge (i -> i') is (u_i' - u_i)/l_e,
    using the shortest representative on periodic target axes.  In two
    dimensions the Jacobian is assembled per node from its outgoing axis
    edges and only nodes whose full forward stencil is induced contribute.
    """
    idx = np.asarray(mask.nodes, dtype=int)
    vals = u.values
    if np.any(~np.isfinite(vals[idx])):
        raise InvalidInputError("map is undefined on some mask node")
    grid = u.grid
    if W.q != grid.q or W.d != domain.dim:
        raise InvalidInputError("integrand shape does not match domain/target")
    edges = domain.induced_edges(mask)
    total = 0.0
    if domain.dim == 1:
        if edges.size:
            disp = _edge_displacements(vals, grid, domain.edge_tail[edges], domain.edge_head[edges])
            grads = disp / domain.edge_length[edges][:, None]
            w = domain.edge_weight[edges]
            if W.kind in ("quadratic", "p_power"):
                total += float((w * (W.coeff * np.linalg.norm(grads, axis=1) ** W.p)).sum())
            else:
                total += sum(float(we) * eval_W(W, g[:, None]) for we, g in zip(w, grads))
    elif domain.dim == 2:
        out_edge = {}
        for k in edges:
            out_edge[(int(domain.edge_tail[k]), int(domain.edge_axis[k]))] = int(k)
        for i in idx:
            ks = [out_edge.get((int(i), a)) for a in range(2)]
            if any(k is None for k in ks):
                continue
            jac = np.zeros((grid.q, 2))
            for a, k in enumerate(ks):
                disp = _edge_displacements(vals, grid, [domain.edge_tail[k]], [domain.edge_head[k]])[0]
                jac[:, a] = disp / domain.edge_length[k]
            total += float(domain.node_weights[i]) * eval_W(W, jac)
    else:
        raise UnsupportedError("only 1- and 2-dimensional domains are supported")
    if data is not None:
        from .fields import embed

        rows = embed(ClassicalMap(grid=grid, values=vals[idx]), grid)
        flat = data.table.reshape(data.table.shape[0], -1)[idx]
        total += float((domain.node_weights[idx] * (flat * rows.flat()).sum(axis=1)).sum())
    return total
