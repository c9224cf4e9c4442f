"""Regenerate tests/data/simple_cubic_features.json from first principles.

Computes the expected features for the one-atom simple-cubic fixture
(a = 1.0, edge cutoff 1.1, angle cutoff 1.05, n_rbf = n_sbf = 4) without
using the package's graph or basis code: the geometry is known in closed
form (six unit-length edges along the axes; per edge and vertex, four
right angles and one straight angle), and the basis values come from
scipy.

Usage: python tests/make_golden.py
"""

import json
import math
from pathlib import Path

import numpy as np
from scipy import special

EDGE_CUTOFF = 1.1
N_RBF = 4
N_SBF = 4

# Edge order follows the package's canonical sort: all six edges share
# src=0 and d=1.0, so the image offsets decide, lexicographically.
OFFSETS = [(-1, 0, 0), (0, -1, 0), (0, 0, -1), (0, 0, 1), (0, 1, 0), (1, 0, 0)]
ANGLES = [math.pi / 2] * 4 + [math.pi]  # at either vertex of every edge


def radial_row(d):
    return [float(special.spherical_jn(0, n * math.pi * d / EDGE_CUTOFF))
            for n in range(1, N_RBF + 1)]


def angular_block(angles):
    cos = np.cos(angles)
    return [float(np.mean(special.eval_legendre(l, cos))) for l in range(N_SBF)]


def main():
    block = angular_block(ANGLES)
    doc = {
        "atom_pairs": [[84, 16]],  # polonium, group 16
        "edge_rbf": [radial_row(1.0) for _ in OFFSETS],
        "edge_sbf": [block + block for _ in OFFSETS],
        "adjacency": {"src": [0] * 6, "dst": [0] * 6},
    }
    out = Path(__file__).parent / "data" / "simple_cubic_features.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
