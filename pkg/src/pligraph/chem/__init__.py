from .structures import (
    ATOMIC_MASS,
    BOND_AROMATIC,
    BOND_DOUBLE,
    BOND_SINGLE,
    BOND_TRIPLE,
    DEFAULT_VALENCE,
    ELEMENT_OTHER,
    ELEMENT_TABLE,
    HYB_OTHER,
    HYB_SP,
    HYB_SP2,
    HYB_SP3,
    KIND_LIGAND,
    KIND_PROTEIN,
    Atom,
    Bond,
    MolecularStructure,
    PerceivedLigand,
    normalize_element,
)
from .pdb import parse_pdb
from .perceive import infer_protein_bonds, perceive_ligand, ring_atoms
from .sdf import parse_sdf, write_sdf

__all__ = [
    "ATOMIC_MASS", "BOND_AROMATIC", "BOND_DOUBLE", "BOND_SINGLE", "BOND_TRIPLE",
    "DEFAULT_VALENCE", "ELEMENT_OTHER", "ELEMENT_TABLE",
    "HYB_OTHER", "HYB_SP", "HYB_SP2", "HYB_SP3",
    "KIND_LIGAND", "KIND_PROTEIN",
    "Atom", "Bond", "MolecularStructure", "PerceivedLigand",
    "normalize_element", "parse_pdb", "parse_sdf", "write_sdf",
    "perceive_ligand", "infer_protein_bonds", "ring_atoms",
]
