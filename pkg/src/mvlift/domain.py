"""Discrete source domains: weighted node sets with an oriented edge graph.

A domain carries quadrature weights ``m_i`` for the reference measure and,
per edge, a unit direction, a length and a quadrature weight ``w_e`` chosen
so that sums ``sum_e w_e W(D_e u)`` are Riemann sums of the corresponding
gradient integral.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

_VOLUME_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SpatialDomain:
    """Immutable discrete domain (X, m) with an oriented edge graph.

    kind is one of ``interval``, ``circle``, ``grid2d``, ``custom-graph``.
    ``nodes`` has shape (n, dim); edge arrays are parallel, one entry per edge.
    """

    kind: str
    dim: int
    nodes: np.ndarray
    node_weights: np.ndarray
    edge_tail: np.ndarray
    edge_head: np.ndarray
    edge_dir: np.ndarray
    edge_length: np.ndarray
    edge_weight: np.ndarray
    total_volume: float

    def __post_init__(self):
        n = self.nodes.shape[0]
        if np.any(self.node_weights <= 0):
            raise InvalidParameterError("node weights must be positive")
        if self.edge_length.size and (np.any(self.edge_length <= 0) or np.any(self.edge_weight <= 0)):
            raise InvalidParameterError("edge lengths and weights must be positive")
        if self.edge_tail.size:
            if np.any(self.edge_tail == self.edge_head):
                raise InvalidParameterError("edges must connect distinct nodes")
            if self.edge_tail.min() < 0 or max(self.edge_tail.max(), self.edge_head.max()) >= n:
                raise InvalidParameterError("edge endpoints out of range")
        if abs(float(self.node_weights.sum()) - self.total_volume) > _VOLUME_TOL * max(1.0, self.total_volume):
            raise InvalidParameterError("node weights do not sum to the declared volume")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_tail.shape[0]

    @property
    def edge_axis(self) -> np.ndarray:
        """Dominant axis of each edge direction (all builtin kinds are axis-aligned)."""
        if self.n_edges == 0:
            return np.zeros(0, dtype=int)
        return np.argmax(np.abs(self.edge_dir), axis=1)

    def induced_edges(self, mask: "SubdomainMask") -> np.ndarray:
        """Indices of edges with both endpoints in the mask, in fixed edge order."""
        inside = np.zeros(self.n_nodes, dtype=bool)
        inside[list(mask.nodes)] = True
        keep = inside[self.edge_tail] & inside[self.edge_head]
        return np.nonzero(keep)[0]

    def mask_volume(self, mask: "SubdomainMask") -> float:
        return float(self.node_weights[list(mask.nodes)].sum())


@dataclass(frozen=True)
class SubdomainMask:
    """A subset of node indices; the induced edge set is derived, never stored."""

    nodes: tuple

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.nodes)))
        if len(idx) == 0:
            raise InvalidParameterError("mask must contain at least one node")
        if idx[0] < 0:
            raise InvalidParameterError("mask indices must be non-negative")
        object.__setattr__(self, "nodes", idx)

    def __len__(self) -> int:
        return len(self.nodes)


def full_mask(domain: SpatialDomain) -> SubdomainMask:
    return SubdomainMask(tuple(range(domain.n_nodes)))


def build_interval(n: int, length: float) -> SpatialDomain:
    """Uniform cell-centered discretization of a segment of the given length."""
    if n < 2:
        raise InvalidParameterError(f"interval needs at least 2 nodes, got {n}")
    if not length > 0:
        raise InvalidParameterError(f"length must be positive, got {length}")
    h = length / n
    nodes = (np.arange(n) + 0.5)[:, None] * h
    tails = np.arange(n - 1)
    return SpatialDomain(
        kind="interval",
        dim=1,
        nodes=nodes,
        node_weights=np.full(n, h),
        edge_tail=tails,
        edge_head=tails + 1,
        edge_dir=np.ones((n - 1, 1)),
        edge_length=np.full(n - 1, h),
        edge_weight=np.full(n - 1, h),
        total_volume=float(length),
    )


def build_circle(n: int, circumference: float) -> SpatialDomain:
    """n equispaced nodes on a circle parameterized by [0, circumference)."""
    if n < 3:
        raise InvalidParameterError(f"circle needs at least 3 nodes, got {n}")
    if not circumference > 0:
        raise InvalidParameterError(f"circumference must be positive, got {circumference}")
    h = circumference / n
    nodes = np.arange(n)[:, None] * h
    tails = np.arange(n)
    return SpatialDomain(
        kind="circle",
        dim=1,
        nodes=nodes,
        node_weights=np.full(n, h),
        edge_tail=tails,
        edge_head=(tails + 1) % n,
        edge_dir=np.ones((n, 1)),
        edge_length=np.full(n, h),
        edge_weight=np.full(n, h),
        total_volume=float(circumference),
    )


def build_grid2d(nx: int, ny: int, lengths) -> SpatialDomain:
    """Tensor-product cell-centered grid with axis-aligned forward edges."""
    if nx < 2 or ny < 2:
        raise InvalidParameterError(f"grid needs at least 2 nodes per axis, got ({nx}, {ny})")
    lx, ly = float(lengths[0]), float(lengths[1])
    if lx <= 0 or ly <= 0:
        raise InvalidParameterError(f"lengths must be positive, got {lengths}")
    hx, hy = lx / nx, ly / ny
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    nodes = np.stack([(ix.ravel() + 0.5) * hx, (iy.ravel() + 0.5) * hy], axis=1)
    cell = hx * hy

    def nid(i, j):
        return i * ny + j

    tails, heads, dirs, lens = [], [], [], []
    for i in range(nx):
        for j in range(ny):
            if i + 1 < nx:
                tails.append(nid(i, j))
                heads.append(nid(i + 1, j))
                dirs.append((1.0, 0.0))
                lens.append(hx)
            if j + 1 < ny:
                tails.append(nid(i, j))
                heads.append(nid(i, j + 1))
                dirs.append((0.0, 1.0))
                lens.append(hy)
    return SpatialDomain(
        kind="grid2d",
        dim=2,
        nodes=nodes,
        node_weights=np.full(nx * ny, cell),
        edge_tail=np.array(tails, dtype=int),
        edge_head=np.array(heads, dtype=int),
        edge_dir=np.array(dirs),
        edge_length=np.array(lens),
        edge_weight=np.full(len(tails), cell),
        total_volume=lx * ly,
    )


def restrict(domain: SpatialDomain, mask: SubdomainMask) -> SpatialDomain:
    """Sub-domain with the masked nodes, their weights, and induced edges only.

    Node indices are renumbered to 0..len(mask)-1 in increasing original order.
    """
    idx = np.array(mask.nodes, dtype=int)
    if idx.max() >= domain.n_nodes:
        raise InvalidParameterError("mask index out of range")
    renum = -np.ones(domain.n_nodes, dtype=int)
    renum[idx] = np.arange(idx.size)
    keep = domain.induced_edges(mask)
    kind = domain.kind if idx.size == domain.n_nodes else "custom-graph"
    return SpatialDomain(
        kind=kind,
        dim=domain.dim,
        nodes=domain.nodes[idx],
        node_weights=domain.node_weights[idx],
        edge_tail=renum[domain.edge_tail[keep]],
        edge_head=renum[domain.edge_head[keep]],
        edge_dir=domain.edge_dir[keep],
        edge_length=domain.edge_length[keep],
        edge_weight=domain.edge_weight[keep],
        total_volume=float(domain.node_weights[idx].sum()),
    )
