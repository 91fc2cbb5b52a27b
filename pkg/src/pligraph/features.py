"""Fixed-width one-hot atom features for ligand and protein nodes.

Ligand atoms get element, degree, hydrogen-count, implicit-valence,
hybridization and formal-charge one-hots plus aromatic/ring flags (41
columns). Protein atoms get element and residue one-hots (33 columns).
Out-of-range counts clamp into the last bin; unknown residues map to
"other". The schema version string is persisted in checkpoints so that
inference refuses mismatched encodings.
"""

from __future__ import annotations

import numpy as np

from .chem import MolecularStructure, PerceivedLigand

ELEMENT_VOCAB = ("C", "N", "O", "S", "F", "P", "Cl", "Br", "I", "B", "H", "other")
RESIDUE_VOCAB = (
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
    "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
    "other",
)
HYBRIDIZATION_VOCAB = ("SP", "SP2", "SP3", "other")

DEGREE_BINS = 6            # 0..5, clamped
NUM_H_BINS = 5             # 0..4, clamped
IMPLICIT_VALENCE_BINS = 7  # 0..6, clamped
FORMAL_CHARGE_BINS = 5     # -2..+2, clamped

LIGAND_WIDTH = (len(ELEMENT_VOCAB) + DEGREE_BINS + NUM_H_BINS
                + IMPLICIT_VALENCE_BINS + len(HYBRIDIZATION_VOCAB)
                + FORMAL_CHARGE_BINS + 2)
PROTEIN_WIDTH = len(ELEMENT_VOCAB) + len(RESIDUE_VOCAB)

assert LIGAND_WIDTH == 41 and PROTEIN_WIDTH == 33

FEATURE_SCHEMA_VERSION = "atoms41/33-v1"

_ELEMENT_IDX = {e: i for i, e in enumerate(ELEMENT_VOCAB)}
_RESIDUE_IDX = {r: i for i, r in enumerate(RESIDUE_VOCAB)}
_HYB_IDX = {h: i for i, h in enumerate(HYBRIDIZATION_VOCAB)}


def _clamp_bin(value: int, n_bins: int, low: int = 0) -> int:
    return min(max(value - low, 0), n_bins - 1)


def featurize_ligand(lig: PerceivedLigand) -> np.ndarray:
    """(N, 41) binary matrix in schema order."""
    n = len(lig)
    out = np.zeros((n, LIGAND_WIDTH))
    for i in range(n):
        col = 0
        out[i, col + _ELEMENT_IDX.get(lig.base.atoms[i].element, len(ELEMENT_VOCAB) - 1)] = 1.0
        col += len(ELEMENT_VOCAB)
        out[i, col + _clamp_bin(lig.degree[i], DEGREE_BINS)] = 1.0
        col += DEGREE_BINS
        out[i, col + _clamp_bin(lig.num_hydrogens[i], NUM_H_BINS)] = 1.0
        col += NUM_H_BINS
        out[i, col + _clamp_bin(lig.implicit_valence[i], IMPLICIT_VALENCE_BINS)] = 1.0
        col += IMPLICIT_VALENCE_BINS
        out[i, col + _HYB_IDX[lig.hybridization[i]]] = 1.0
        col += len(HYBRIDIZATION_VOCAB)
        out[i, col + _clamp_bin(lig.base.atoms[i].formal_charge, FORMAL_CHARGE_BINS, low=-2)] = 1.0
        col += FORMAL_CHARGE_BINS
        if lig.aromatic[i]:
            out[i, col] = 1.0
        if lig.in_ring[i]:
            out[i, col + 1] = 1.0
    return out


def featurize_protein(pocket: MolecularStructure) -> np.ndarray:
    """(N, 33) binary matrix: element one-hot followed by residue one-hot."""
    n = len(pocket.atoms)
    out = np.zeros((n, PROTEIN_WIDTH))
    for i, atom in enumerate(pocket.atoms):
        out[i, _ELEMENT_IDX.get(atom.element, len(ELEMENT_VOCAB) - 1)] = 1.0
        res = _RESIDUE_IDX.get(atom.residue_name, len(RESIDUE_VOCAB) - 1)
        out[i, len(ELEMENT_VOCAB) + res] = 1.0
    return out
