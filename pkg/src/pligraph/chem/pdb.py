"""Minimal PDB reader for protein structures.

Reads fixed-column ATOM records only. HETATM records, waters (HOH/WAT) and
hydrogens are discarded; bonds are left empty and inferred later from
geometry. Column layout follows the wwPDB format description: atom name in
columns 13-16, residue name in 18-20, coordinates in 31-54, element symbol
in 77-78 with a fallback to the first letter of the atom name.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyStructureError, MoleculeParseError
from .structures import (
    KIND_PROTEIN,
    Atom,
    MolecularStructure,
    normalize_element,
)

WATER_RESIDUES = frozenset({"HOH", "WAT"})


def _raw_element(line: str) -> str:
    """Element symbol before table normalization (the H/D filter needs it)."""
    sym = line[76:78].strip() if len(line) >= 78 else ""
    if not sym:
        # Fall back to the first alphabetic character of the atom name.
        name = line[12:16]
        sym = next((c for c in name if c.isalpha()), "")
    return sym.strip().capitalize()


def parse_pdb(text: str, source_id: str = "") -> MolecularStructure:
    """Parse PDB text into a protein structure.

    Raises MoleculeParseError on malformed coordinate fields (with the
    1-based line number) and EmptyStructureError when no atom survives the
    water/hydrogen/HETATM filters.
    """
    atoms = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.startswith("ATOM"):
            continue
        residue = line[17:20].strip()
        if residue in WATER_RESIDUES:
            continue
        raw = _raw_element(line)
        if raw in ("H", "D"):
            continue
        try:
            x = float(line[30:38])
            y = float(line[38:46])
            z = float(line[46:54])
        except (ValueError, IndexError):
            raise MoleculeParseError(
                f"malformed coordinates in ATOM record: {line.rstrip()!r}",
                line=lineno,
            ) from None
        atoms.append(Atom(
            element=normalize_element(raw),
            position=np.array([x, y, z]),
            residue_name=residue,
        ))
    if not atoms:
        raise EmptyStructureError(
            f"no protein atoms left after filtering in {source_id or '<text>'}"
        )
    return MolecularStructure(atoms=atoms, bonds=[], source_id=source_id, kind=KIND_PROTEIN)
