"""Periodic table lookups: symbols, atomic numbers, IUPAC group numbers.

Lanthanides and actinides are folded into group 3 so every element maps
onto the 18 main groups.
"""

import operator

from .errors import UnknownElementError

MAX_Z = 118

# fmt: off
SYMBOLS = [
    "H", "He",
    "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar",
    "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I", "Xe",
    "Cs", "Ba",
    "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er",
    "Tm", "Yb", "Lu",
    "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn",
    "Fr", "Ra",
    "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
    "Md", "No", "Lr",
    "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
    "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
]

# One entry per element, Z = 1..118.
GROUPS = [
    1, 18,
    1, 2, 13, 14, 15, 16, 17, 18,
    1, 2, 13, 14, 15, 16, 17, 18,
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12,
    13, 14, 15, 16, 17, 18,
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12,
    13, 14, 15, 16, 17, 18,
    1, 2,
    3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3,
    3, 3, 3,
    4, 5, 6, 7, 8, 9, 10, 11, 12,
    13, 14, 15, 16, 17, 18,
    1, 2,
    3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3,
    3, 3, 3,
    4, 5, 6, 7, 8, 9, 10, 11, 12,
    13, 14, 15, 16, 17, 18,
]
# fmt: on

assert len(SYMBOLS) == MAX_Z
assert len(GROUPS) == MAX_Z

_Z_BY_SYMBOL = {sym: z for z, sym in enumerate(SYMBOLS, start=1)}


def symbol_to_z(symbol: str) -> int:
    try:
        return _Z_BY_SYMBOL[symbol]
    except KeyError:
        raise UnknownElementError(f"unknown element symbol {symbol!r}") from None


def z_to_symbol(z: int) -> str:
    return SYMBOLS[_check_z(z) - 1]


def group_of(z: int) -> int:
    """IUPAC group (1..18) for atomic number z."""
    return GROUPS[_check_z(z) - 1]


def _check_z(z) -> int:
    # Accepts plain and numpy integers; rejects bools and floats.
    try:
        zi = operator.index(z)
    except TypeError:
        raise UnknownElementError(f"atomic number {z!r} is not an integer") from None
    if isinstance(z, bool) or not 1 <= zi <= MAX_Z:
        raise UnknownElementError(f"atomic number {z!r} outside [1, {MAX_Z}]")
    return zi
