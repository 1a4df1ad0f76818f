"""Discrete measure-valued maps, classical maps and momentum tables.

A measure-valued map is stored as a row-stochastic table over (node, target
cell).  Momenta live on (x-edge, y-face) pairs, one face array per target
axis, with zero flux through non-periodic target boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import SpatialDomain, SubdomainMask, full_mask
from .errors import InvalidInputError, InvalidParameterError

ROW_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TargetGrid:
    """Uniform cell grid on a box in R^q (q = 1 or 2), axes optionally periodic.

    On a periodic axis cell centers start at ``min`` and wrap; on a bounded
    axis they are offset half a cell from the ends.  Faces separate
    consecutive cells; a bounded axis has M+1 faces, a periodic one M.
    """

    q: int
    cells: tuple
    mins: tuple
    maxs: tuple
    periodic: tuple

    def __post_init__(self):
        if self.q not in (1, 2) or len(self.cells) != self.q:
            raise InvalidParameterError("target grid must be 1- or 2-dimensional")
        if any(m < 2 for m in self.cells):
            raise InvalidParameterError("need at least 2 cells per axis")
        if any(self.maxs[a] <= self.mins[a] for a in range(self.q)):
            raise InvalidParameterError("axis bounds must satisfy min < max")

    @property
    def shape(self) -> tuple:
        return tuple(self.cells)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    def spacing(self, axis: int) -> float:
        return (self.maxs[axis] - self.mins[axis]) / self.cells[axis]

    def length(self, axis: int) -> float:
        return self.maxs[axis] - self.mins[axis]

    def centers(self, axis: int) -> np.ndarray:
        h = self.spacing(axis)
        if self.periodic[axis]:
            return self.mins[axis] + h * np.arange(self.cells[axis])
        return self.mins[axis] + h * (np.arange(self.cells[axis]) + 0.5)

    def n_faces(self, axis: int) -> int:
        return self.cells[axis] if self.periodic[axis] else self.cells[axis] + 1

    def wrap_delta(self, axis: int, delta):
        """Shortest representative of a displacement along a periodic axis."""
        if not self.periodic[axis]:
            return delta
        L = self.length(axis)
        return delta - L * np.round(np.asarray(delta) / L)

    def center_points(self) -> np.ndarray:
        """All cell centers as an (n_cells, q) array in C order of the cell grid."""
        axes = [self.centers(a) for a in range(self.q)]
        if self.q == 1:
            return axes[0][:, None]
        yy = np.meshgrid(*axes, indexing="ij")
        return np.stack([y.ravel() for y in yy], axis=1)


@dataclass(frozen=True, eq=False)
class MeasureField:
    """Row-stochastic table rho[node, cell...]: one probability row per node."""

    grid: TargetGrid
    rho: np.ndarray

    def __post_init__(self):
        if self.rho.shape[1:] != self.grid.shape:
            raise InvalidInputError("row table shape does not match the grid")
        if np.any(self.rho < -ROW_TOL) or not np.all(np.isfinite(self.rho)):
            raise InvalidInputError("rows must be non-negative and finite")
        sums = self.rho.reshape(self.rho.shape[0], -1).sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_TOL):
            raise InvalidInputError("rows must each sum to 1")

    @property
    def n_nodes(self) -> int:
        return self.rho.shape[0]

    def flat(self) -> np.ndarray:
        return self.rho.reshape(self.n_nodes, -1)

    def row_means(self) -> np.ndarray:
        """Per-node mean target position, shape (n, q). Not wrap-aware."""
        pts = self.grid.center_points()
        return self.flat() @ pts


@dataclass(frozen=True, eq=False)
class ClassicalMap:
    """Per-node target values, shape (n, q)."""

    grid: TargetGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[1] != self.grid.q:
            raise InvalidInputError("value dimension does not match the grid")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class MomentumField:
    """Per-(x-edge, y-face) flux tables, one array per target axis.

    ``components[a]`` has shape (n_induced_edges, ..., n_faces(a), ...) with
    the face index in slot a of the target shape.  Non-periodic boundary
    faces must carry zero flux.
    """

    domain: SpatialDomain
    grid: TargetGrid
    edge_indices: np.ndarray
    components: tuple

    def __post_init__(self):
        E = self.edge_indices.shape[0]
        for a in range(self.grid.q):
            comp = self.components[a]
            if comp.shape[0] != E or comp.shape[1:] != self._comp_shape(a):
                raise InvalidInputError("momentum component shape mismatch")
            if not np.all(np.isfinite(comp)):
                raise InvalidInputError("momentum entries must be finite")
            if not self.grid.periodic[a] and E > 0:
                first = comp.take(0, axis=1 + a)
                last = comp.take(-1, axis=1 + a)
                if np.max(np.abs(first)) > 0 or np.max(np.abs(last)) > 0:
                    raise InvalidInputError("non-periodic boundary faces must carry zero flux")

    def _comp_shape(self, axis: int) -> tuple:
        s = list(self.grid.shape)
        s[axis] = self.grid.n_faces(axis)
        return tuple(s)

    def cell_values(self) -> np.ndarray:
        """Face fluxes averaged to cell centers, shape (E, *grid.shape, q)."""
        out = []
        for a in range(self.grid.q):
            comp = self.components[a]
            if self.grid.periodic[a]:
                lo = comp
                hi = np.roll(comp, -1, axis=1 + a)
            else:
                sl_lo = [slice(None)] * comp.ndim
                sl_hi = [slice(None)] * comp.ndim
                sl_lo[1 + a] = slice(0, -1)
                sl_hi[1 + a] = slice(1, None)
                lo, hi = comp[tuple(sl_lo)], comp[tuple(sl_hi)]
            out.append(0.5 * (lo + hi))
        return np.stack(out, axis=-1)

    def face_divergence(self) -> np.ndarray:
        """sum_a (J[face+] - J[face-])/h_a per (edge, cell)."""
        div = None
        for a in range(self.grid.q):
            comp = self.components[a]
            h = self.grid.spacing(a)
            if self.grid.periodic[a]:
                d = (np.roll(comp, -1, axis=1 + a) - comp) / h
            else:
                d = np.diff(comp, axis=1 + a) / h
            div = d if div is None else div + d
        return div


def zero_momentum(domain: SpatialDomain, grid: TargetGrid, mask: SubdomainMask | None = None) -> MomentumField:
    mask = mask if mask is not None else full_mask(domain)
    edges = domain.induced_edges(mask)
    comps = []
    for a in range(grid.q):
        shape = list(grid.shape)
        shape[a] = grid.n_faces(a)
        comps.append(np.zeros((edges.size, *shape)))
    return MomentumField(domain=domain, grid=grid, edge_indices=edges, components=tuple(comps))


# ---------------------------------------------------------------------------
# embedding and smoothing


def _axis_split(pos: np.ndarray, grid: TargetGrid, axis: int, mode: str):
    """Indices and weights distributing points onto the two surrounding cells."""
    h = grid.spacing(axis)
    M = grid.cells[axis]
    if grid.periodic[axis]:
        t = (pos - grid.mins[axis]) / h
        k = np.floor(t).astype(int)
        theta = t - k
        if mode == "nearest":
            k = np.round(t).astype(int)
            return k % M, np.ones_like(pos), (k + 1) % M, np.zeros_like(pos)
        return k % M, 1.0 - theta, (k + 1) % M, theta
    if np.any(pos < grid.mins[axis] - 1e-12) or np.any(pos > grid.maxs[axis] + 1e-12):
        raise InvalidInputError("map value outside the target box on a bounded axis")
    t = (pos - grid.mins[axis]) / h - 0.5
    if mode == "nearest":
        k = np.clip(np.round(t).astype(int), 0, M - 1)
        return k, np.ones_like(pos), np.minimum(k + 1, M - 1), np.zeros_like(pos)
    k = np.floor(t).astype(int)
    theta = t - k
    # values beyond the outermost centers put all mass on the end cell
    below = k < 0
    above = k > M - 2
    k = np.clip(k, 0, M - 2)
    theta = np.where(below, 0.0, np.where(above, 1.0, theta))
    return k, 1.0 - theta, k + 1, theta


def embed(u: ClassicalMap, grid: TargetGrid | None = None, mode: str = "multilinear") -> MeasureField:
    """Represent a classical map as one-point rows split onto surrounding cells.

    The multilinear split preserves the row mean exactly for interior values;
    ``mode="nearest"`` snaps to the closest cell instead.
    """
    grid = grid if grid is not None else u.grid
    if mode not in ("multilinear", "nearest"):
        raise InvalidParameterError(f"unknown embedding mode {mode!r}")
    n = u.values.shape[0]
    rho = np.zeros((n, *grid.shape))
    splits = [_axis_split(u.values[:, a], grid, a, mode) for a in range(grid.q)]
    if grid.q == 1:
        k0, w0, k1, w1 = splits[0]
        np.add.at(rho, (np.arange(n), k0), w0)
        np.add.at(rho, (np.arange(n), k1), w1)
    else:
        (a0, aw0, a1, aw1), (b0, bw0, b1, bw1) = splits
        rows = np.arange(n)
        for ka, wa in ((a0, aw0), (a1, aw1)):
            for kb, wb in ((b0, bw0), (b1, bw1)):
                np.add.at(rho, (rows, ka, kb), wa * wb)
    return MeasureField(grid=grid, rho=rho)


def _smoothing_matrix(M: int, sigma: float, periodic: bool) -> np.ndarray:
    """Column-stochastic cell-to-cell operator for a truncated Gaussian kernel."""
    radius = int(np.ceil(4.0 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kern = np.exp(-0.5 * (offsets / sigma) ** 2)
    kern /= kern.sum()
    op = np.zeros((M, M))
    for off, w in zip(offsets, kern):
        src = np.arange(M)
        dst = src + off
        if periodic:
            dst %= M
        else:
            # symmetric fold with period 2M: -1 -> 0, M -> M-1
            dst %= 2 * M
            dst = np.where(dst >= M, 2 * M - 1 - dst, dst)
        np.add.at(op, (dst, src), w)
    return op


def mollify_y(mu: MeasureField, sigma: float) -> MeasureField:
    """Convolve every row with a normalized truncated Gaussian of std sigma cells."""
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return mu
    rho = mu.rho
    for a in range(mu.grid.q):
        op = _smoothing_matrix(mu.grid.cells[a], sigma, mu.grid.periodic[a])
        rho = np.moveaxis(np.tensordot(op, np.moveaxis(rho, 1 + a, 0), axes=(1, 0)), 0, 1 + a)
    rho = np.clip(rho, 0.0, None)
    rho /= rho.reshape(rho.shape[0], -1).sum(axis=1).reshape((-1,) + (1,) * mu.grid.q)
    return MeasureField(grid=mu.grid, rho=rho)


def regularize(mu: MeasureField, lam: float, sigma: float) -> MeasureField:
    """Mollify, then mix with the uniform row: min entry >= lam / n_cells."""
    if not 0.0 <= lam <= 1.0:
        raise InvalidParameterError(f"mixing weight must lie in [0, 1], got {lam}")
    sm = mollify_y(mu, sigma)
    if lam == 0.0:
        return sm
    uniform = 1.0 / mu.grid.n_cells
    return MeasureField(grid=mu.grid, rho=(1.0 - lam) * sm.rho + lam * uniform)


# ---------------------------------------------------------------------------
# generalized continuity equation


def continuity_residual(mu: MeasureField, J: MomentumField, mask: SubdomainMask | None = None) -> float:
    """Max-norm defect of the per-edge balance (rho_head - rho_tail)/l + div_y J."""
    domain = J.domain
    mask = mask if mask is not None else full_mask(domain)
    edges = domain.induced_edges(mask)
    if edges.size != J.edge_indices.size or np.any(edges != J.edge_indices):
        raise InvalidInputError("momentum edges do not match the mask's induced edges")
    if mu.n_nodes != domain.n_nodes:
        raise InvalidInputError("measure field does not match the domain")
    if edges.size == 0:
        return 0.0
    tails = domain.edge_tail[edges]
    heads = domain.edge_head[edges]
    grad = (mu.rho[heads] - mu.rho[tails]) / domain.edge_length[edges].reshape((-1,) + (1,) * mu.grid.q)
    return float(np.max(np.abs(grad + J.face_divergence())))


def extract_velocity(mu: MeasureField, J: MomentumField, eps_floor: float = 0.0):
    """Split J into v * rho_bar plus the part carried by cells with rho_bar <= floor.

    Returns (v, singular_mass): v has shape (E, *grid.shape, q) and is zero
    where the edge-averaged density does not exceed ``eps_floor``; the
    leftover |J| mass on those cells is accumulated into ``singular_mass``.
    """
    if eps_floor < 0:
        raise InvalidParameterError("eps_floor must be non-negative")
    domain = J.domain
    tails = domain.edge_tail[J.edge_indices]
    heads = domain.edge_head[J.edge_indices]
    rho_bar = 0.5 * (mu.rho[tails] + mu.rho[heads])
    cell = J.cell_values()
    ok = rho_bar > eps_floor
    v = np.zeros_like(cell)
    np.divide(cell, rho_bar[..., None], out=v, where=ok[..., None])
    singular = float(np.sqrt((cell**2).sum(axis=-1))[~ok].sum())
    return v, singular


def edge_average_rows(mu: MeasureField, domain: SpatialDomain, edges: np.ndarray) -> np.ndarray:
    """rho_bar on each listed edge: arithmetic mean of endpoint rows."""
    return 0.5 * (mu.rho[domain.edge_tail[edges]] + mu.rho[domain.edge_head[edges]])
