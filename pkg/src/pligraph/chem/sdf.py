"""SDF / MOL V2000 reader and canonical writer.

Handles multi-record files separated by ``$$$$``. Atom-block charge codes
and ``M  CHG`` property lines are both honored, with ``M  CHG`` overriding
the atom-block value for the atoms it names. V3000 records are rejected.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyStructureError, MoleculeParseError
from .structures import (
    BOND_AROMATIC,
    KIND_LIGAND,
    Atom,
    Bond,
    MolecularStructure,
    normalize_element,
)

# Atom-block charge column: code -> formal charge (4 is a radical, charge 0).
_CHARGE_CODE = {0: 0, 1: 3, 2: 2, 3: 1, 4: 0, 5: -1, 6: -2, 7: -3}

_BOND_ORDER = {1: 1, 2: 2, 3: 3, 4: BOND_AROMATIC}


def parse_sdf(text: str, source_id: str = "") -> list[MolecularStructure]:
    """Parse possibly-concatenated V2000 records into ligand structures."""
    records = []
    current: list[tuple[int, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith("$$$$"):
            if any(s.strip() for _, s in current):
                records.append(current)
            current = []
        else:
            current.append((lineno, line))
    if any(s.strip() for _, s in current):
        records.append(current)

    mols = []
    for k, record in enumerate(records, start=1):
        fallback = f"{source_id or 'mol'}_{k}"
        mols.append(_parse_record(record, fallback))
    return mols


def _parse_record(record: list[tuple[int, str]], fallback_id: str) -> MolecularStructure:
    if len(record) < 4:
        raise MoleculeParseError(
            "record too short for a V2000 connection table", line=record[0][0]
        )
    title = record[0][1].strip()
    counts_lineno, counts = record[3]
    try:
        n_atoms = int(counts[0:3])
        n_bonds = int(counts[3:6])
    except (ValueError, IndexError):
        raise MoleculeParseError(
            f"bad counts line: {counts!r}", line=counts_lineno
        ) from None
    version = counts[33:39].strip()
    if version and version != "V2000":
        raise MoleculeParseError(
            f"unsupported connection-table version {version!r}", line=counts_lineno
        )
    if n_atoms < 1:
        raise EmptyStructureError(f"record {title or fallback_id!r} declares zero atoms")
    if len(record) < 4 + n_atoms + n_bonds:
        raise MoleculeParseError(
            f"counts line declares {n_atoms} atoms / {n_bonds} bonds but the "
            f"record has only {len(record) - 4} block lines",
            line=counts_lineno,
        )

    atoms = []
    for lineno, line in record[4:4 + n_atoms]:
        try:
            x = float(line[0:10])
            y = float(line[10:20])
            z = float(line[20:30])
            symbol = line[31:34].strip()
        except (ValueError, IndexError):
            raise MoleculeParseError(
                f"bad atom line: {line!r}", line=lineno
            ) from None
        if not symbol:
            raise MoleculeParseError(f"missing element symbol: {line!r}", line=lineno)
        code_field = line[36:39].strip()
        try:
            charge = _CHARGE_CODE.get(int(code_field), 0) if code_field else 0
        except ValueError:
            raise MoleculeParseError(
                f"bad charge code field: {line!r}", line=lineno
            ) from None
        atoms.append(Atom(
            element=normalize_element(symbol),
            position=np.array([x, y, z]),
            formal_charge=charge,
        ))

    bonds = []
    for lineno, line in record[4 + n_atoms:4 + n_atoms + n_bonds]:
        try:
            i = int(line[0:3]) - 1
            j = int(line[3:6]) - 1
            code = int(line[6:9])
        except (ValueError, IndexError):
            raise MoleculeParseError(f"bad bond line: {line!r}", line=lineno) from None
        if not (0 <= i < n_atoms and 0 <= j < n_atoms):
            raise MoleculeParseError(
                f"bond atom index out of range: {line!r}", line=lineno
            )
        if code not in _BOND_ORDER:
            raise MoleculeParseError(
                f"unsupported bond type {code}: {line!r}", line=lineno
            )
        bonds.append(Bond(i=i, j=j, order=_BOND_ORDER[code]))

    # Property block: M  CHG overrides the atom-block charge per named atom.
    for lineno, line in record[4 + n_atoms + n_bonds:]:
        if line.startswith("M  END"):
            break
        if line.startswith("M  CHG"):
            fields = line.split()
            try:
                count = int(fields[2])
                pairs = [(int(fields[3 + 2 * t]), int(fields[4 + 2 * t]))
                         for t in range(count)]
            except (ValueError, IndexError):
                raise MoleculeParseError(
                    f"bad M  CHG line: {line!r}", line=lineno
                ) from None
            for idx1, charge in pairs:
                if not 1 <= idx1 <= n_atoms:
                    raise MoleculeParseError(
                        f"M  CHG atom index {idx1} out of range", line=lineno
                    )
                atoms[idx1 - 1].formal_charge = charge

    return MolecularStructure(
        atoms=atoms, bonds=bonds,
        source_id=title or fallback_id, kind=KIND_LIGAND,
    )


def write_sdf(mols: MolecularStructure | list[MolecularStructure]) -> str:
    """Canonical V2000 writer; parse_sdf(write_sdf(m)) round-trips exactly."""
    if isinstance(mols, MolecularStructure):
        mols = [mols]
    out = []
    for mol in mols:
        out.append(mol.source_id)
        out.append("  pligraph")
        out.append("")
        out.append(f"{len(mol.atoms):3d}{len(mol.bonds):3d}  0  0  0  0  0  0  0  0999 V2000")
        for a in mol.atoms:
            x, y, z = a.position
            sym = a.element if a.element != "other" else "X"
            out.append(f"{x:10.4f}{y:10.4f}{z:10.4f} {sym:<3s} 0  0  0  0  0  0  0  0  0  0  0  0")
        for b in mol.bonds:
            code = 4 if b.order == BOND_AROMATIC else b.order
            out.append(f"{b.i + 1:3d}{b.j + 1:3d}{code:3d}  0")
        charged = [(i + 1, a.formal_charge) for i, a in enumerate(mol.atoms)
                   if a.formal_charge != 0]
        for start in range(0, len(charged), 8):
            chunk = charged[start:start + 8]
            line = f"M  CHG{len(chunk):3d}"
            for idx1, chg in chunk:
                line += f"{idx1:4d}{chg:4d}"
            out.append(line)
        out.append("M  END")
        out.append("$$$$")
    return "\n".join(out) + "\n"
