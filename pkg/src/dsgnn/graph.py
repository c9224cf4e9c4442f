"""Dual-scale crystal graph construction.

Edges connect each cell atom to every periodic image within the edge
cutoff. Each edge additionally carries two sets of vertex angles: at the
source atom, the angles between the edge and the bonds to the source's
angle neighbors (images within the smaller angle cutoff); symmetrically at
the destination. The image that *is* the edge partner is excluded from its
own angle set (its angle is identically zero).

Edge ordering is deterministic: sorted by (source atom, distance, image
offset, destination atom). Angle entries follow the same canonical order
of the vertex's angle neighbors. This makes graphs reproducible and keeps
downstream reductions stable under atom permutations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .crystal import Crystal
from .errors import ConfigError, EmptyGraphError, ZeroVectorError

DEFAULT_EDGE_CUTOFF = 8.0  # A, the scale CGCNN-family models use


@dataclass(frozen=True)
class CutoffConfig:
    """Edge and angle neighbor cutoffs (A).

    ``paper_mode`` ties the angle cutoff to the square root of the edge
    cutoff (numeric values in A). ``max_neighbors`` optionally caps edges
    per atom, keeping the closest; capping can break edge reciprocity and
    is off by default.
    """

    edge_cutoff: float = DEFAULT_EDGE_CUTOFF
    angle_cutoff: float = math.sqrt(DEFAULT_EDGE_CUTOFF)
    max_neighbors: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.edge_cutoff) and math.isfinite(self.angle_cutoff)):
            raise ConfigError("cutoffs must be finite")
        if not 0 < self.angle_cutoff <= self.edge_cutoff:
            raise ConfigError(
                f"need 0 < angle_cutoff <= edge_cutoff, got "
                f"{self.angle_cutoff} / {self.edge_cutoff}"
            )
        if self.max_neighbors is not None and self.max_neighbors < 1:
            raise ConfigError(f"max_neighbors must be >= 1, got {self.max_neighbors}")

    @classmethod
    def paper_mode(cls, edge_cutoff: float = DEFAULT_EDGE_CUTOFF,
                   max_neighbors: int | None = None) -> "CutoffConfig":
        return cls(edge_cutoff, math.sqrt(edge_cutoff), max_neighbors)

    def is_paper_mode(self) -> bool:
        return abs(self.angle_cutoff**2 - self.edge_cutoff) <= 1e-9 * max(1.0, self.edge_cutoff)


@dataclass(frozen=True)
class Edge:
    """Directed bond from a cell atom to a periodic image."""

    src: int
    dst: int
    offset: tuple[int, int, int]
    distance: float
    unit_vector: np.ndarray


@dataclass(frozen=True)
class AngleSet:
    """Vertex angles of one edge: at the source and at the destination."""

    at_src: np.ndarray
    at_dst: np.ndarray


@dataclass(frozen=True)
class NeighborSet:
    """All periodic images within a cutoff of one cell atom."""

    atom: np.ndarray  # (M,) cell index of each image
    offset: np.ndarray  # (M, 3) integer image offsets
    distance: np.ndarray  # (M,)
    displacement: np.ndarray  # (M, 3) vector from the center atom to the image


class CrystalGraph:
    """Edges, per-edge angle sets, and bookkeeping for one crystal."""

    def __init__(self, crystal, cutoffs, src, dst, offsets, dists, units,
                 ang_src_flat, ang_src_counts, ang_dst_flat, ang_dst_counts,
                 angle_neighbor_counts):
        self.crystal = crystal
        self.cutoffs = cutoffs
        self.src = src
        self.dst = dst
        self.offsets = offsets
        self.dists = dists
        self.units = units
        self.ang_src_flat = ang_src_flat
        self.ang_src_counts = ang_src_counts
        self.ang_dst_flat = ang_dst_flat
        self.ang_dst_counts = ang_dst_counts
        self.angle_neighbor_counts = angle_neighbor_counts
        for arr in (src, dst, offsets, dists, units, ang_src_flat,
                    ang_src_counts, ang_dst_flat, ang_dst_counts,
                    angle_neighbor_counts):
            arr.setflags(write=False)

    @property
    def num_atoms(self) -> int:
        return self.crystal.num_atoms

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    @property
    def num_angles(self) -> int:
        return int(self.ang_src_counts.sum() + self.ang_dst_counts.sum())

    @cached_property
    def edges(self) -> list[Edge]:
        return [
            Edge(int(self.src[k]), int(self.dst[k]), tuple(int(o) for o in self.offsets[k]),
                 float(self.dists[k]), self.units[k])
            for k in range(self.num_edges)
        ]

    @cached_property
    def angle_sets(self) -> list[AngleSet]:
        src_ends = np.cumsum(self.ang_src_counts)
        dst_ends = np.cumsum(self.ang_dst_counts)
        out = []
        s0 = d0 = 0
        for k in range(self.num_edges):
            out.append(AngleSet(self.ang_src_flat[s0:src_ends[k]],
                                self.ang_dst_flat[d0:dst_ends[k]]))
            s0, d0 = int(src_ends[k]), int(dst_ends[k])
        return out


def angle_between(u, v) -> float:
    """Angle in [0, pi] between two 3-vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu <= 1e-12 or nv <= 1e-12:
        raise ZeroVectorError(f"cannot take an angle with norms {nu:.3e}, {nv:.3e}")
    cos = float(np.dot(u, v)) / (nu * nv)
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def neighbor_images(crystal: Crystal, cutoff: float) -> list[NeighborSet]:
    """Every periodic image with 0 < distance <= cutoff, per cell atom.

    The integer search range per axis is ceil(cutoff / perpendicular cell
    width) plus the fractional spread of the coordinates, so unwrapped
    inputs are handled correctly.
    """
    if not (math.isfinite(cutoff) and cutoff > 0):
        raise ConfigError(f"cutoff must be positive, got {cutoff}")
    return _images_within(crystal, float(cutoff))


def _images_within(crystal: Crystal, cutoff: float) -> list[NeighborSet]:
    lat = crystal.lattice
    coords = crystal.cart_coords
    n = crystal.num_atoms

    frac = crystal.frac_coords()
    span = frac.max(axis=0) - frac.min(axis=0)
    reach = np.ceil(cutoff / lat.perpendicular_widths() + span).astype(int)
    grids = np.meshgrid(*(np.arange(-r, r + 1) for r in reach), indexing="ij")
    offsets = np.stack([g.ravel() for g in grids], axis=1)  # (O, 3)
    shifts = offsets @ lat.matrix

    out = []
    for i in range(n):
        # (x_j - x_i) + shift: the reverse edge's displacement is then the
        # exact negation, so reciprocity holds bitwise.
        rel = coords - coords[i]
        disp = (rel[None, :, :] + shifts[:, None, :]).reshape(-1, 3)
        dist = np.linalg.norm(disp, axis=1)
        keep = (dist > 0.0) & (dist <= cutoff)
        idx = np.nonzero(keep)[0]
        atom = idx % n
        off = offsets[idx // n]
        d = dist[idx]
        order = np.lexsort((atom, off[:, 2], off[:, 1], off[:, 0], d))
        out.append(NeighborSet(atom[order], off[order], d[order], disp[idx][order]))
    return out


def build_graph(crystal: Crystal, cutoffs: CutoffConfig | None = None,
                include_angles: bool = True) -> CrystalGraph:
    """Construct the dual-scale graph: edges at the edge cutoff, vertex
    angle sets from images within the angle cutoff.

    ``include_angles=False`` skips angle enumeration entirely (all angle
    sets empty); used by the angle-free ablation and the --no-angles path.
    """
    cutoffs = cutoffs or CutoffConfig()
    nbrs = _images_within(crystal, cutoffs.edge_cutoff)
    n = crystal.num_atoms

    edge_nbrs = nbrs
    if cutoffs.max_neighbors is not None:
        cap = cutoffs.max_neighbors
        edge_nbrs = [
            NeighborSet(s.atom[:cap], s.offset[:cap], s.distance[:cap], s.displacement[:cap])
            for s in nbrs
        ]

    if sum(s.atom.size for s in edge_nbrs) == 0:
        raise EmptyGraphError(
            f"no neighbors within edge cutoff {cutoffs.edge_cutoff} A; cutoff too small"
        )

    # Angle neighbors: the images within the angle cutoff (subset of nbrs,
    # already canonically sorted).
    ang = []
    for s in nbrs:
        mask = s.distance <= cutoffs.angle_cutoff
        ang.append(NeighborSet(s.atom[mask], s.offset[mask], s.distance[mask],
                               s.displacement[mask]))
    angle_neighbor_counts = np.array([s.atom.size for s in ang], dtype=np.int64)

    src = np.concatenate([np.full(s.atom.size, i, dtype=np.int64)
                          for i, s in enumerate(edge_nbrs)])
    dst = np.concatenate([s.atom for s in edge_nbrs])
    offsets = np.concatenate([s.offset for s in edge_nbrs])
    dists = np.concatenate([s.distance for s in edge_nbrs])
    disps = np.concatenate([s.displacement for s in edge_nbrs])
    units = disps / dists[:, None]
    num_edges = src.size

    empty = np.empty(0, dtype=np.float64)
    zeros = np.zeros(num_edges, dtype=np.int64)
    if not include_angles:
        return CrystalGraph(crystal, cutoffs, src, dst, offsets, dists, units,
                            empty, zeros.copy(), empty.copy(), zeros.copy(),
                            np.zeros(n, dtype=np.int64))

    # Row lookup per atom: (neighbor atom, offset) -> position in its
    # angle-neighbor list, for excluding the edge partner from its own set.
    row_of = []
    for s in ang:
        row_of.append({(int(a), int(o[0]), int(o[1]), int(o[2])): r
                       for r, (a, o) in enumerate(zip(s.atom, s.offset))})

    src_lists = _angles_at_vertex(ang, row_of, src, dst, offsets, disps, dists)
    dst_lists = _angles_at_vertex(ang, row_of, dst, src, -offsets, -disps, dists)

    ang_src_counts = np.array([a.size for a in src_lists], dtype=np.int64)
    ang_dst_counts = np.array([a.size for a in dst_lists], dtype=np.int64)
    ang_src_flat = np.concatenate(src_lists) if src_lists else empty
    ang_dst_flat = np.concatenate(dst_lists) if dst_lists else empty

    return CrystalGraph(crystal, cutoffs, src, dst, offsets, dists, units,
                        ang_src_flat, ang_src_counts, ang_dst_flat, ang_dst_counts,
                        angle_neighbor_counts)


def _angles_at_vertex(ang, row_of, vertex, partner, partner_offsets, edge_disps,
                      edge_dists):
    """Angle list per edge, one vertex side.

    Source side: the vertex is the edge's source atom and the bond vector
    is the edge displacement. Destination side: the vertex is the image at
    the far end — its angle-neighbor geometry equals the cell atom's
    (translation invariance), the bond vector is the edge displacement
    negated, and the excluded partner sits at the negated offset.
    """
    num_edges = vertex.size
    lists: list[np.ndarray] = [None] * num_edges
    for a in range(len(ang)):
        cols = np.nonzero(vertex == a)[0]
        if cols.size == 0:
            continue
        s = ang[a]
        if s.atom.size == 0:
            for k in cols:
                lists[k] = np.empty(0, dtype=np.float64)
            continue
        bond = edge_disps[cols]  # (E_a, 3), vertex -> far end
        cos = (s.displacement @ bond.T) / (s.distance[:, None] * edge_dists[cols][None, :])
        angles = np.arccos(np.clip(cos, -1.0, 1.0))  # (K_a, E_a)
        for c, k in enumerate(cols):
            key = (int(partner[k]), int(partner_offsets[k][0]),
                   int(partner_offsets[k][1]), int(partner_offsets[k][2]))
            drop = row_of[a].get(key)
            col = angles[:, c]
            if drop is None:
                lists[k] = col.copy()
            else:
                lists[k] = np.delete(col, drop)
    return lists


def build_graph_single_scale(crystal: Crystal, cutoff: float,
                             max_neighbors: int | None = None) -> CrystalGraph:
    """Single-cutoff comparator: angle neighbors share the edge cutoff."""
    return build_graph(crystal, CutoffConfig(cutoff, cutoff, max_neighbors))


def graph_stats(graph: CrystalGraph) -> dict:
    """Counts and per-atom averages describing the graph's input volume."""
    n = graph.num_atoms
    return {
        "num_atoms": n,
        "num_edges": graph.num_edges,
        "num_angles": graph.num_angles,
        "m_avg": graph.num_edges / n,
        "k_avg": float(graph.angle_neighbor_counts.mean()) if n else 0.0,
    }


def graph_to_dict(graph: CrystalGraph) -> dict:
    """JSON-ready document: {edges: [...], angles: [...], stats: {...}}."""
    edges = [
        {
            "src": e.src,
            "dst": e.dst,
            "offset": list(e.offset),
            "distance": e.distance,
            "unit_vector": e.unit_vector.tolist(),
        }
        for e in graph.edges
    ]
    angles = [
        {"at_src": a.at_src.tolist(), "at_dst": a.at_dst.tolist()}
        for a in graph.angle_sets
    ]
    return {"edges": edges, "angles": angles, "stats": graph_stats(graph)}
