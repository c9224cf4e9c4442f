"""Basis expansions turning graph geometry into fixed-size features.

Distances expand in a radial basis of zeroth-order spherical Bessel
functions, sin(n*pi*d/cutoff)/(n*pi*d/cutoff) for n = 1..n_rbf; every
component vanishes at the cutoff. Angles expand per angle in Legendre
polynomials of cos(angle) (the zonal harmonics), then reduce over each
vertex's angle set — mean by default so magnitudes do not scale with
neighbor count, sum behind a config switch. An empty angle set reduces to
the zero vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elements import group_of
from .errors import ConfigError, OutOfRangeError
from .graph import DEFAULT_EDGE_CUTOFF, AngleSet, CrystalGraph


@dataclass(frozen=True)
class BasisConfig:
    n_rbf: int = 8
    n_sbf: int = 8
    edge_cutoff: float = DEFAULT_EDGE_CUTOFF
    angle_reduction: str = "mean"  # or "sum"

    def __post_init__(self):
        if self.n_rbf < 1 or self.n_sbf < 1:
            raise ConfigError(f"basis sizes must be >= 1, got {self.n_rbf}/{self.n_sbf}")
        if self.edge_cutoff <= 0:
            raise ConfigError(f"edge cutoff must be positive, got {self.edge_cutoff}")
        if self.angle_reduction not in ("mean", "sum"):
            raise ConfigError(f"unknown angle reduction {self.angle_reduction!r}")


@dataclass(frozen=True)
class AtomIndexPair:
    """Atomic number with its periodic-table group, the node inputs."""

    atom_number: int
    group_number: int

    def __post_init__(self):
        expect = group_of(self.atom_number)
        if self.group_number != expect:
            raise ConfigError(
                f"group {self.group_number} inconsistent with Z={self.atom_number} "
                f"(expected {expect})"
            )


@dataclass(frozen=True)
class FeaturizedGraph:
    """Arrays aligned with the graph's edge ordering, ready for the net."""

    atom_pairs: np.ndarray  # (N, 2): atomic number, group number
    edge_rbf: np.ndarray  # (E, n_rbf)
    edge_sbf: np.ndarray  # (E, 2*n_sbf): source block then destination block
    src: np.ndarray  # (E,)
    dst: np.ndarray  # (E,)
    config: BasisConfig

    def __post_init__(self):
        for arr in (self.atom_pairs, self.edge_rbf, self.edge_sbf, self.src, self.dst):
            arr.setflags(write=False)

    @property
    def num_atoms(self) -> int:
        return int(self.atom_pairs.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.src.size)


def atom_groups(atomic_number: int) -> AtomIndexPair:
    z = int(atomic_number)
    return AtomIndexPair(z, group_of(z))


def rbf(d, config: BasisConfig) -> np.ndarray:
    """Radial expansion of distances in (0, cutoff]; (n_rbf,) per distance."""
    d_arr = np.atleast_1d(np.asarray(d, dtype=np.float64))
    if np.any(d_arr <= 0.0) or np.any(d_arr > config.edge_cutoff):
        bad = d_arr[(d_arr <= 0.0) | (d_arr > config.edge_cutoff)][0]
        raise OutOfRangeError(
            f"distance {bad} outside (0, {config.edge_cutoff}] A"
        )
    freqs = np.arange(1, config.n_rbf + 1) * np.pi / config.edge_cutoff
    x = d_arr[:, None] * freqs[None, :]
    out = np.sin(x) / x
    return out[0] if np.ndim(d) == 0 else out


def legendre_cos(angles: np.ndarray, n_terms: int) -> np.ndarray:
    """P_l(cos angle) for l = 0..n_terms-1, via the three-term recurrence."""
    x = np.cos(np.asarray(angles, dtype=np.float64))
    cols = [np.ones_like(x)]
    if n_terms > 1:
        cols.append(x)
    for l in range(2, n_terms):
        cols.append(((2 * l - 1) * x * cols[l - 1] - (l - 1) * cols[l - 2]) / l)
    return np.stack(cols, axis=-1)


def sbf(angle_set: AngleSet, config: BasisConfig) -> np.ndarray:
    """Angular expansion of one edge's two angle sets; (2*n_sbf,)."""
    return np.concatenate([
        _reduce_block(np.asarray(angle_set.at_src, dtype=np.float64), config),
        _reduce_block(np.asarray(angle_set.at_dst, dtype=np.float64), config),
    ])


def _reduce_block(angles: np.ndarray, config: BasisConfig) -> np.ndarray:
    if angles.size == 0:
        return np.zeros(config.n_sbf)
    basis = legendre_cos(angles, config.n_sbf)
    return basis.mean(axis=0) if config.angle_reduction == "mean" else basis.sum(axis=0)


def _segment_reduce(flat_angles, counts, config: BasisConfig) -> np.ndarray:
    """Per-edge reduction of Legendre features over ragged angle segments."""
    out = np.zeros((counts.size, config.n_sbf))
    if flat_angles.size == 0:
        return out
    basis = legendre_cos(flat_angles, config.n_sbf)
    starts = np.cumsum(counts) - counts
    nonempty = counts > 0
    sums = np.add.reduceat(basis, starts[nonempty], axis=0)
    if config.angle_reduction == "mean":
        sums = sums / counts[nonempty, None]
    out[nonempty] = sums
    return out


def featurize_graph(graph: CrystalGraph, config: BasisConfig) -> FeaturizedGraph:
    if abs(graph.cutoffs.edge_cutoff - config.edge_cutoff) > 1e-12:
        raise ConfigError(
            f"graph built at cutoff {graph.cutoffs.edge_cutoff} A but basis "
            f"expects {config.edge_cutoff} A"
        )
    numbers = graph.crystal.atomic_numbers
    pairs = np.stack([numbers, np.array([group_of(int(z)) for z in numbers])], axis=1)
    edge_sbf = np.hstack([
        _segment_reduce(graph.ang_src_flat, graph.ang_src_counts, config),
        _segment_reduce(graph.ang_dst_flat, graph.ang_dst_counts, config),
    ])
    return FeaturizedGraph(
        atom_pairs=pairs.astype(np.int64),
        edge_rbf=rbf(graph.dists, config),
        edge_sbf=edge_sbf,
        src=graph.src.copy(),
        dst=graph.dst.copy(),
        config=config,
    )


def featurized_to_dict(feat: FeaturizedGraph) -> dict:
    return {
        "atom_pairs": feat.atom_pairs.tolist(),
        "edge_rbf": feat.edge_rbf.tolist(),
        "edge_sbf": feat.edge_sbf.tolist(),
        "adjacency": {"src": feat.src.tolist(), "dst": feat.dst.tolist()},
        "basis": {
            "n_rbf": feat.config.n_rbf,
            "n_sbf": feat.config.n_sbf,
            "edge_cutoff": feat.config.edge_cutoff,
            "angle_reduction": feat.config.angle_reduction,
        },
    }
