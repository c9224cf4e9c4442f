"""Periodic crystal structures and file ingestion.

A crystal is a unit cell: a 3x3 lattice matrix (rows are the cell vectors,
in angstroms), one atomic number per atom, and cartesian coordinates in
angstroms. Coordinates are stored cartesian; fractional coordinates are
computed on demand. All arrays are float64 and frozen after construction.

Supported formats: POSCAR for single structures, JSON lines for labeled
datasets (one object per line with lattice / atomic_numbers / cart_coords /
target).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .elements import MAX_Z, symbol_to_z, z_to_symbol
from .errors import DataError, DegenerateLatticeError, ParseError

DET_FLOOR = 1e-8  # A^3; below this the cell is treated as degenerate
DUPLICATE_TOL = 1e-4  # A; two atoms closer than this (mod lattice) collide


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Lattice:
    """Unit cell spanned by the three row vectors of ``matrix`` (A)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise DegenerateLatticeError(f"lattice matrix must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DegenerateLatticeError("lattice matrix has non-finite entries")
        if abs(float(np.linalg.det(m))) <= DET_FLOOR:
            raise DegenerateLatticeError(
                f"cell volume {abs(float(np.linalg.det(m))):.3e} A^3 is below {DET_FLOOR:.0e}"
            )
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def cubic(cls, a: float) -> "Lattice":
        return cls(np.eye(3) * float(a))

    @classmethod
    def orthorhombic(cls, a: float, b: float, c: float) -> "Lattice":
        return cls(np.diag([float(a), float(b), float(c)]))

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.matrix)))

    def perpendicular_widths(self) -> np.ndarray:
        """Perpendicular width of the cell along each axis (A).

        Computed from the inverse-matrix columns; row norms would
        under-cover skewed cells.
        """
        inv = np.linalg.inv(self.matrix)
        return 1.0 / np.linalg.norm(inv, axis=0)


@dataclass(frozen=True)
class Crystal:
    """One unit cell: atomic numbers, cartesian coordinates (A), lattice."""

    atomic_numbers: np.ndarray
    cart_coords: np.ndarray
    lattice: Lattice
    id: str | None = None

    def __post_init__(self):
        numbers = np.asarray(self.atomic_numbers, dtype=np.int64)
        coords = np.asarray(self.cart_coords, dtype=np.float64)
        if numbers.ndim != 1 or numbers.size < 1:
            raise DataError("crystal needs at least one atom")
        if coords.shape != (numbers.size, 3):
            raise DataError(
                f"coords shape {coords.shape} inconsistent with {numbers.size} atoms"
            )
        if not np.all(np.isfinite(coords)):
            raise DataError("non-finite atomic coordinate")
        if np.any(numbers < 1) or np.any(numbers > MAX_Z):
            bad = numbers[(numbers < 1) | (numbers > MAX_Z)][0]
            raise DataError(f"atomic number {bad} outside [1, {MAX_Z}]")
        object.__setattr__(self, "atomic_numbers", _frozen(numbers))
        object.__setattr__(self, "cart_coords", _frozen(coords))
        _check_no_duplicates(coords, self.lattice)

    @property
    def num_atoms(self) -> int:
        return int(self.atomic_numbers.size)

    def frac_coords(self) -> np.ndarray:
        return cart_to_frac(self.cart_coords, self.lattice)


@dataclass(frozen=True)
class PropertyRecord:
    """Crystal plus its scalar regression target (eV or eV/atom)."""

    crystal: Crystal
    target: float

    def __post_init__(self):
        t = float(self.target)
        if not math.isfinite(t):
            raise DataError(f"target {self.target!r} is not finite")
        object.__setattr__(self, "target", t)


def frac_to_cart(frac, lattice: Lattice) -> np.ndarray:
    """cart = f1*l1 + f2*l2 + f3*l3 (rows of the lattice matrix)."""
    return np.asarray(frac, dtype=np.float64) @ lattice.matrix


def cart_to_frac(cart, lattice: Lattice) -> np.ndarray:
    return np.asarray(cart, dtype=np.float64) @ np.linalg.inv(lattice.matrix)


def wrap_to_cell(crystal: Crystal) -> Crystal:
    """Translate every atom so its fractional coordinates lie in [0, 1)."""
    frac = crystal.frac_coords() % 1.0
    frac[frac >= 1.0] = 0.0  # float round-up of tiny negatives
    return replace(crystal, cart_coords=frac_to_cart(frac, crystal.lattice))


def replicate(crystal: Crystal, reps: tuple[int, int, int]) -> Crystal:
    """Integer supercell: tile the cell reps[k] times along axis k."""
    ra, rb, rc = (int(r) for r in reps)
    if min(ra, rb, rc) < 1:
        raise DataError(f"replication counts must be >= 1, got {reps}")
    shifts = np.array(
        [(i, j, k) for i in range(ra) for j in range(rb) for k in range(rc)],
        dtype=np.float64,
    )
    cart_shifts = shifts @ crystal.lattice.matrix
    coords = (crystal.cart_coords[None, :, :] + cart_shifts[:, None, :]).reshape(-1, 3)
    numbers = np.tile(crystal.atomic_numbers, len(shifts))
    lattice = Lattice(crystal.lattice.matrix * np.array([[ra], [rb], [rc]], dtype=np.float64))
    return Crystal(numbers, coords, lattice, id=crystal.id)


def _check_no_duplicates(coords: np.ndarray, lattice: Lattice) -> None:
    n = coords.shape[0]
    if n < 2:
        return
    frac = cart_to_frac(coords, lattice)
    delta = frac[:, None, :] - frac[None, :, :]
    delta -= np.round(delta)  # nearest periodic image
    dist = np.linalg.norm(delta @ lattice.matrix, axis=-1)
    dist[np.diag_indices(n)] = np.inf
    if np.min(dist) < DUPLICATE_TOL:
        i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
        raise DataError(
            f"atoms {i} and {j} coincide modulo the lattice "
            f"(separation {dist[i, j]:.2e} A < {DUPLICATE_TOL:.0e} A)"
        )


# ---------------------------------------------------------------------------
# POSCAR
# ---------------------------------------------------------------------------

def parse_poscar(text: str) -> Crystal:
    """Parse a POSCAR document.

    Expected layout: comment, scale, three lattice rows, species symbols,
    per-species counts, optional selective-dynamics line, Direct/Cartesian
    flag, one coordinate row per atom. Raises ParseError with the offending
    line number.
    """
    raw = text.splitlines()
    lines = [(lineno, line.strip()) for lineno, line in enumerate(raw, start=1)]

    def take(idx: int, what: str) -> tuple[int, str]:
        if idx >= len(lines):
            raise ParseError(f"file ends before {what}", line=len(raw) + 1)
        return lines[idx]

    _, comment = take(0, "comment line")

    lineno, scale_text = take(1, "scale line")
    try:
        scale = float(scale_text.split()[0])
    except (ValueError, IndexError):
        raise ParseError(f"bad scale factor {scale_text!r}", line=lineno) from None
    if scale <= 0:
        raise ParseError(f"unsupported non-positive scale {scale}", line=lineno)

    rows = []
    for k in range(3):
        lineno, row_text = take(2 + k, f"lattice row {k + 1}")
        parts = row_text.split()
        if len(parts) < 3:
            raise ParseError(f"lattice row needs 3 components, got {row_text!r}", line=lineno)
        try:
            rows.append([float(p) for p in parts[:3]])
        except ValueError:
            raise ParseError(f"bad lattice component in {row_text!r}", line=lineno) from None
    lattice = Lattice(np.array(rows) * scale)

    lineno, species_text = take(5, "species line")
    symbols = species_text.split()
    if not symbols or any(s[0].isdigit() for s in symbols):
        raise ParseError(
            "species symbols line missing (counts-only POSCAR not supported)",
            line=lineno,
        )
    species_z = []
    for sym in symbols:
        try:
            species_z.append(symbol_to_z(sym))
        except Exception:
            raise ParseError(f"unknown element symbol {sym!r}", line=lineno) from None

    lineno, counts_text = take(6, "counts line")
    try:
        counts = [int(c) for c in counts_text.split()]
    except ValueError:
        raise ParseError(f"bad species counts {counts_text!r}", line=lineno) from None
    if len(counts) != len(symbols) or any(c < 1 for c in counts):
        raise ParseError(
            f"{len(counts)} counts for {len(symbols)} species in {counts_text!r}",
            line=lineno,
        )

    idx = 7
    lineno, mode_text = take(idx, "coordinate mode line")
    if mode_text[:1] in ("S", "s"):  # selective dynamics
        idx += 1
        lineno, mode_text = take(idx, "coordinate mode line")
    mode = mode_text[:1].lower()
    if mode not in ("d", "c", "k"):
        raise ParseError(f"expected Direct or Cartesian, got {mode_text!r}", line=lineno)
    direct = mode == "d"

    total = sum(counts)
    coords = np.empty((total, 3))
    for a in range(total):
        lineno, coord_text = take(idx + 1 + a, f"coordinates of atom {a + 1}")
        parts = coord_text.split()
        if len(parts) < 3:
            raise ParseError(f"coordinate row needs 3 numbers, got {coord_text!r}", line=lineno)
        try:
            coords[a] = [float(p) for p in parts[:3]]
        except ValueError:
            raise ParseError(f"bad coordinate in {coord_text!r}", line=lineno) from None

    numbers = np.repeat(species_z, counts)
    cart = frac_to_cart(coords, lattice) if direct else coords * scale
    return Crystal(numbers, cart, lattice, id=comment.strip() or None)


def to_poscar(crystal: Crystal) -> str:
    """Serialize with Direct coordinates; parse_poscar round-trips it."""
    out = [crystal.id or "dsgnn structure", "1.0"]
    for row in crystal.lattice.matrix:
        out.append(" ".join(f"{v:.16g}" for v in row))
    # Group contiguous runs of equal species so atom order is preserved.
    symbols, counts = [], []
    for z in crystal.atomic_numbers:
        sym = z_to_symbol(int(z))
        if symbols and symbols[-1] == sym:
            counts[-1] += 1
        else:
            symbols.append(sym)
            counts.append(1)
    out.append(" ".join(symbols))
    out.append(" ".join(str(c) for c in counts))
    out.append("Direct")
    for frac in crystal.frac_coords():
        out.append(" ".join(f"{v:.16g}" for v in frac))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# JSON-lines datasets
# ---------------------------------------------------------------------------

def record_from_dict(obj: dict) -> PropertyRecord:
    for key in ("lattice", "atomic_numbers", "cart_coords", "target"):
        if key not in obj:
            raise DataError(f"missing field {key!r}")
    target = obj["target"]
    if not isinstance(target, (int, float)) or isinstance(target, bool):
        raise DataError(f"target {target!r} is not a number")
    crystal = Crystal(
        np.asarray(obj["atomic_numbers"]),
        np.asarray(obj["cart_coords"], dtype=np.float64),
        Lattice(np.asarray(obj["lattice"], dtype=np.float64)),
        id=obj.get("id"),
    )
    return PropertyRecord(crystal, float(target))


def record_to_dict(record: PropertyRecord) -> dict:
    c = record.crystal
    out = {
        "lattice": c.lattice.matrix.tolist(),
        "atomic_numbers": c.atomic_numbers.tolist(),
        "cart_coords": c.cart_coords.tolist(),
        "target": record.target,
    }
    if c.id is not None:
        out["id"] = c.id
    return out


def parse_dataset_jsonl(path) -> list[PropertyRecord]:
    """Load one PropertyRecord per non-blank line, in file order.

    All malformed lines are reported together in a single ParseError.
    """
    records: list[PropertyRecord] = []
    problems: list[str] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
            except (DataError, DegenerateLatticeError) as exc:
                problems.append(f"line {lineno}: {exc}")
    if problems:
        raise ParseError(f"{path}: " + "; ".join(problems))
    return records


def write_dataset_jsonl(records: Iterable[PropertyRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record_to_dict(record)) + "\n")
