"""Shared helpers: seeded random crystals and brute-force geometry oracles.

The oracles deliberately avoid the package's vectorized code paths: plain
loops over an explicitly materialized supercell, distances via math.dist,
angles via math.acos.
"""

from __future__ import annotations

import math

import numpy as np

from dsgnn.crystal import Crystal, Lattice
from dsgnn.errors import DataError


def make_random_crystal(rng, n_atoms=None, min_width=2.0, skew=0.4, max_z=83):
    """Random (possibly skewed) cell with wrapped coordinates."""
    for _ in range(500):
        n = int(n_atoms or rng.integers(1, 9))
        base = rng.uniform(2.5, 5.0, size=3)
        matrix = np.diag(base)
        matrix[1, 0] = rng.uniform(-skew, skew) * base[0]
        matrix[2, 0] = rng.uniform(-skew, skew) * base[0]
        matrix[2, 1] = rng.uniform(-skew, skew) * base[1]
        lattice = Lattice(matrix)
        if lattice.perpendicular_widths().min() < min_width:
            continue
        frac = rng.uniform(0.0, 1.0, size=(n, 3))
        try:
            return Crystal(rng.integers(1, max_z + 1, size=n), frac @ matrix, lattice)
        except DataError:
            continue
    raise RuntimeError("could not draw a valid random crystal")


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    return q * np.sign(np.diag(r))


def brute_force_images(crystal: Crystal, cutoff: float):
    """Per-atom [(neighbor atom, offset, distance)] from a supercell scan
    with a generous extra margin."""
    matrix = crystal.lattice.matrix
    widths = 1.0 / np.linalg.norm(np.linalg.inv(matrix), axis=0)
    frac = crystal.cart_coords @ np.linalg.inv(matrix)
    span = frac.max(axis=0) - frac.min(axis=0)
    reach = [int(math.ceil(cutoff / w + s)) + 1 for w, s in zip(widths, span)]
    coords = [tuple(row) for row in crystal.cart_coords]
    n = len(coords)
    found = [[] for _ in range(n)]
    for o1 in range(-reach[0], reach[0] + 1):
        for o2 in range(-reach[1], reach[1] + 1):
            for o3 in range(-reach[2], reach[2] + 1):
                shift = o1 * matrix[0] + o2 * matrix[1] + o3 * matrix[2]
                for j in range(n):
                    pos = tuple(crystal.cart_coords[j] + shift)
                    for i in range(n):
                        d = math.dist(pos, coords[i])
                        if 0.0 < d <= cutoff:
                            found[i].append((j, (o1, o2, o3), d))
    return found


def brute_force_angle_sets(crystal: Crystal, edge_cutoff: float, angle_cutoff: float):
    """Per-edge sorted angle lists keyed by (src, dst, offset), both vertex
    sides, with the edge partner excluded from its own set."""
    edge_nbrs = brute_force_images(crystal, edge_cutoff)
    angle_nbrs = brute_force_images(crystal, angle_cutoff)
    matrix = crystal.lattice.matrix

    def displacement(i, j, offset):
        shift = offset[0] * matrix[0] + offset[1] * matrix[1] + offset[2] * matrix[2]
        return crystal.cart_coords[j] + shift - crystal.cart_coords[i]

    def angle(u, v):
        cos = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
        return math.acos(max(-1.0, min(1.0, cos)))

    out = {}
    for i, nbrs in enumerate(edge_nbrs):
        for j, offset, _d in nbrs:
            bond = displacement(i, j, offset)
            at_src = sorted(
                angle(displacement(i, jk, ok), bond)
                for jk, ok, _dk in angle_nbrs[i]
                if (jk, ok) != (j, offset)
            )
            neg = (-offset[0], -offset[1], -offset[2])
            at_dst = sorted(
                angle(displacement(j, jk, ok), -bond)
                for jk, ok, _dk in angle_nbrs[j]
                if (jk, ok) != (i, neg)
            )
            out[(i, j, offset)] = (at_src, at_dst)
    return out


SIMPLE_CUBIC_PO = """po simple cubic
1.0
3.34 0.0 0.0
0.0 3.34 0.0
0.0 0.0 3.34
Po
1
Direct
0.0 0.0 0.0
"""

NACL_POSCAR = """rock salt
1.0
5.64 0.0 0.0
0.0 5.64 0.0
0.0 0.0 5.64
Na Cl
4 4
Direct
0.0 0.0 0.0
0.5 0.5 0.0
0.5 0.0 0.5
0.0 0.5 0.5
0.5 0.5 0.5
0.0 0.0 0.5
0.0 0.5 0.0
0.5 0.0 0.0
"""
