"""In-memory molecular structures shared by the PDB and SDF parsers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

# Bond orders; 4 marks aromatic bonds, matching the V2000 convention.
BOND_SINGLE = 1
BOND_DOUBLE = 2
BOND_TRIPLE = 3
BOND_AROMATIC = 4

KIND_PROTEIN = "protein"
KIND_LIGAND = "ligand"

# Closed element symbol table; anything else collapses to the sentinel.
ELEMENT_TABLE = ("C", "N", "O", "S", "F", "P", "Cl", "Br", "I", "B", "H")
ELEMENT_OTHER = "other"

# Average atomic masses for molecular-weight filtering (sentinel gets a
# generous placeholder so unknown-element ligands are not silently kept).
ATOMIC_MASS = {
    "C": 12.011, "N": 14.007, "O": 15.999, "S": 32.06, "F": 18.998,
    "P": 30.974, "Cl": 35.45, "Br": 79.904, "I": 126.904, "B": 10.81,
    "H": 1.008, ELEMENT_OTHER: 40.0,
}

# Default valences used to infer implicit hydrogen counts.
DEFAULT_VALENCE = {
    "C": 4, "N": 3, "O": 2, "S": 2, "P": 3,
    "F": 1, "Cl": 1, "Br": 1, "I": 1, "B": 3, "H": 1,
    ELEMENT_OTHER: 0,
}

HYB_SP = "SP"
HYB_SP2 = "SP2"
HYB_SP3 = "SP3"
HYB_OTHER = "other"


def normalize_element(symbol: str) -> str:
    """Map a raw element symbol onto the closed table (unknown -> "other")."""
    sym = symbol.strip().capitalize()
    return sym if sym in ELEMENT_TABLE else ELEMENT_OTHER


@dataclass
class Atom:
    element: str
    position: np.ndarray  # (3,) float64, Angstrom
    formal_charge: int = 0
    residue_name: str = ""  # 3-letter code, protein atoms only

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        if self.position.shape != (3,) or not np.all(np.isfinite(self.position)):
            raise DataError(f"atom position must be a finite 3-vector, got {self.position}")
        if not -4 <= self.formal_charge <= 4:
            raise DataError(f"formal charge {self.formal_charge} outside [-4, 4]")

    @property
    def is_heavy(self) -> bool:
        return self.element != "H"


@dataclass
class Bond:
    i: int
    j: int
    order: int = BOND_SINGLE


@dataclass
class MolecularStructure:
    atoms: list[Atom]
    bonds: list[Bond]
    source_id: str
    kind: str  # KIND_PROTEIN or KIND_LIGAND

    def __post_init__(self):
        n = len(self.atoms)
        seen = set()
        for b in self.bonds:
            if b.i == b.j:
                raise DataError(f"self-bond on atom {b.i} in {self.source_id!r}")
            if not (0 <= b.i < n and 0 <= b.j < n):
                raise DataError(f"bond ({b.i},{b.j}) out of range in {self.source_id!r}")
            key = (min(b.i, b.j), max(b.i, b.j))
            if key in seen:
                raise DataError(f"duplicate bond {key} in {self.source_id!r}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def positions(self) -> np.ndarray:
        """(N, 3) coordinate array."""
        if not self.atoms:
            return np.zeros((0, 3))
        return np.stack([a.position for a in self.atoms])

    @property
    def elements(self) -> list[str]:
        return [a.element for a in self.atoms]

    def molecular_weight(self) -> float:
        """Mass of heavy atoms plus explicit hydrogens (implicit H not included)."""
        return sum(ATOMIC_MASS[a.element] for a in self.atoms)


@dataclass
class PerceivedLigand:
    """Heavy-atom ligand with derived per-atom chemistry.

    Explicit hydrogens of the source structure survive only as counts in
    ``num_hydrogens``; ``base`` holds heavy atoms with reindexed bonds.
    """

    base: MolecularStructure
    degree: list[int] = field(default_factory=list)
    num_hydrogens: list[int] = field(default_factory=list)
    implicit_valence: list[int] = field(default_factory=list)
    aromatic: list[bool] = field(default_factory=list)
    in_ring: list[bool] = field(default_factory=list)
    hybridization: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.base.atoms)
