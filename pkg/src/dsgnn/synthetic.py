"""Seeded synthetic crystals and an analytic regression target.

The generator fills a cell with atoms on a jittered grid, rejecting draws
until every periodic pair separation clears a floor. The analytic target
is computable directly from graph geometry — the mean first radial basis
component over edges plus a tenth of the mean angle cosine — so training
runs can be checked against a label the featurization itself defines.
"""

from __future__ import annotations

import numpy as np

from .crystal import Crystal, Lattice, PropertyRecord, cart_to_frac
from .errors import GenerationFailedError
from .graph import CrystalGraph, CutoffConfig, build_graph

MIN_SEPARATION = 0.7  # A
_MAX_ATTEMPTS = 200


def jittered_cell(lattice: Lattice, n_atoms: int, rng: np.random.Generator,
                  jitter: float = 0.3, min_separation: float = MIN_SEPARATION,
                  max_z: int = 83, crystal_id: str | None = None) -> Crystal:
    """Place n_atoms on a jittered grid inside the cell; rejection-sample
    until all periodic image separations are >= min_separation."""
    if n_atoms == 1:
        return Crystal(rng.integers(1, max_z + 1, size=1), np.zeros((1, 3)), lattice,
                       id=crystal_id)
    m = int(np.ceil(n_atoms ** (1.0 / 3.0)))
    sites = np.array([(i, j, k) for i in range(m) for j in range(m) for k in range(m)],
                     dtype=np.float64)
    numbers = rng.integers(1, max_z + 1, size=n_atoms)
    for _ in range(_MAX_ATTEMPTS):
        chosen = sites[rng.choice(len(sites), size=n_atoms, replace=False)]
        frac = (chosen + 0.5 + rng.uniform(-jitter, jitter, size=(n_atoms, 3))) / m
        coords = frac @ lattice.matrix
        if _min_image_separation(coords, lattice) >= min_separation:
            return Crystal(numbers, coords, lattice, id=crystal_id)
    raise GenerationFailedError(
        f"could not place {n_atoms} atoms with separation >= {min_separation} A "
        f"in a cell of volume {lattice.volume:.1f} A^3"
    )


def _min_image_separation(coords: np.ndarray, lattice: Lattice) -> float:
    n = coords.shape[0]
    if n < 2:
        return np.inf
    frac = cart_to_frac(coords, lattice)
    delta = frac[:, None, :] - frac[None, :, :]
    delta -= np.round(delta)
    dist = np.linalg.norm(delta @ lattice.matrix, axis=-1)
    dist[np.diag_indices(n)] = np.inf
    return float(dist.min())


def analytic_target(graph: CrystalGraph) -> float:
    """Mean of sin(pi*d/cutoff)/(pi*d/cutoff) over edges, plus 0.1 times
    the mean cosine over all vertex angles (0 if the graph has none)."""
    radial = float(np.mean(np.sinc(graph.dists / graph.cutoffs.edge_cutoff)))
    angles = np.concatenate([graph.ang_src_flat, graph.ang_dst_flat])
    angular = float(np.mean(np.cos(angles))) if angles.size else 0.0
    return radial + 0.1 * angular


def make_overfit_dataset(n_crystals: int = 50,
                         cutoffs: CutoffConfig | None = None,
                         seed: int = 0) -> list[PropertyRecord]:
    """Labeled dataset for overfit checks: small jittered cells with mixed
    shapes, targets from ``analytic_target`` under the given cutoffs."""
    cutoffs = cutoffs or CutoffConfig.paper_mode(4.5)
    rng = np.random.default_rng(seed)
    records = []
    for k in range(n_crystals):
        n_atoms = int(rng.integers(2, 7))
        a = rng.uniform(3.2, 4.2)
        aspect = rng.uniform(0.85, 1.2, size=3)
        aspect /= aspect.prod() ** (1.0 / 3.0)
        lattice = Lattice(np.diag(a * aspect))
        crystal = jittered_cell(lattice, n_atoms, rng, crystal_id=f"synth-{k}")
        graph = build_graph(crystal, cutoffs)
        records.append(PropertyRecord(crystal, analytic_target(graph)))
    return records
