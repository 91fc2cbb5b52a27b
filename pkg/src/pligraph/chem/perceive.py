"""Derived chemistry: ligand perception and geometric protein bonds.

Everything here is re-derived from file content with explicit rules so that
results do not depend on an external cheminformatics toolkit.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import EmptyStructureError
from .structures import (
    BOND_AROMATIC,
    BOND_DOUBLE,
    BOND_SINGLE,
    BOND_TRIPLE,
    DEFAULT_VALENCE,
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
)

# Geometric covalent-bond thresholds for protein heavy atoms.
BOND_CUTOFF = 1.9
BOND_CUTOFF_SULFUR = 2.4

_ORDER_SUM = {
    BOND_SINGLE: 1.0,
    BOND_DOUBLE: 2.0,
    BOND_TRIPLE: 3.0,
    BOND_AROMATIC: 1.5,
}


def ring_atoms(n_atoms: int, bonds: list[Bond]) -> list[bool]:
    """Mark atoms lying on a simple cycle of the bond graph.

    An edge lies on a cycle iff its endpoints stay connected after the edge
    is removed; an atom is in a ring iff one of its edges is. Quadratic in
    the edge count, which is fine at ligand sizes.
    """
    adj: list[set[int]] = [set() for _ in range(n_atoms)]
    for b in bonds:
        adj[b.i].add(b.j)
        adj[b.j].add(b.i)

    in_ring = [False] * n_atoms
    for b in bonds:
        if in_ring[b.i] and in_ring[b.j]:
            continue
        # Temporarily drop the edge and test reachability.
        adj[b.i].discard(b.j)
        adj[b.j].discard(b.i)
        cyclic = _reachable(adj, b.i, b.j)
        adj[b.i].add(b.j)
        adj[b.j].add(b.i)
        if cyclic:
            in_ring[b.i] = True
            in_ring[b.j] = True
    return in_ring


def _reachable(adj: list[set[int]], src: int, dst: int) -> bool:
    stack = [src]
    seen = {src}
    while stack:
        u = stack.pop()
        if u == dst:
            return True
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


def perceive_ligand(mol: MolecularStructure) -> PerceivedLigand:
    """Derive per-atom chemistry for a parsed ligand.

    Explicit hydrogens are removed from the atom set and folded into the
    hydrogen counts; implicit hydrogens come from the default-valence rule
    (aromatic bonds count 1.5 toward the bond-order sum, which is rounded
    up before subtracting).
    """
    if mol.kind != KIND_LIGAND:
        raise ValueError(f"perceive_ligand expects a ligand, got {mol.kind!r}")

    n = len(mol.atoms)
    explicit_h = [0] * n
    order_sum = [0.0] * n
    n_double = [0] * n
    n_triple = [0] * n
    n_arom = [0] * n
    heavy_neighbors = [0] * n

    for b in mol.bonds:
        for u, v in ((b.i, b.j), (b.j, b.i)):
            order_sum[u] += _ORDER_SUM[b.order]
            if mol.atoms[v].element == "H":
                explicit_h[u] += 1
            else:
                heavy_neighbors[u] += 1
            if b.order == BOND_DOUBLE:
                n_double[u] += 1
            elif b.order == BOND_TRIPLE:
                n_triple[u] += 1
            elif b.order == BOND_AROMATIC:
                n_arom[u] += 1

    heavy_idx = [i for i, a in enumerate(mol.atoms) if a.is_heavy]
    if not heavy_idx:
        raise EmptyStructureError(f"ligand {mol.source_id!r} has no heavy atoms")
    remap = {old: new for new, old in enumerate(heavy_idx)}
    heavy_atoms = [
        Atom(element=mol.atoms[i].element, position=mol.atoms[i].position.copy(),
             formal_charge=mol.atoms[i].formal_charge)
        for i in heavy_idx
    ]
    heavy_bonds = [
        Bond(i=remap[b.i], j=remap[b.j], order=b.order)
        for b in mol.bonds
        if b.i in remap and b.j in remap
    ]
    base = MolecularStructure(
        atoms=heavy_atoms, bonds=heavy_bonds,
        source_id=mol.source_id, kind=KIND_LIGAND,
    )
    rings = ring_atoms(len(heavy_atoms), heavy_bonds)

    perceived = PerceivedLigand(base=base)
    for old in heavy_idx:
        atom = mol.atoms[old]
        valence = DEFAULT_VALENCE[atom.element]
        charge_adj = atom.formal_charge if atom.element in ("N", "O") else 0
        implicit = max(0, valence + charge_adj - math.ceil(order_sum[old]))
        if n_triple[old] >= 1 or n_double[old] >= 2:
            hyb = HYB_SP
        elif n_double[old] >= 1 or n_arom[old] >= 1:
            hyb = HYB_SP2
        elif atom.element in ("C", "N", "O", "S"):
            hyb = HYB_SP3
        else:
            hyb = HYB_OTHER
        perceived.degree.append(heavy_neighbors[old])
        perceived.num_hydrogens.append(explicit_h[old] + implicit)
        perceived.implicit_valence.append(implicit)
        perceived.aromatic.append(n_arom[old] >= 1)
        perceived.in_ring.append(rings[remap[old]])
        perceived.hybridization.append(hyb)
    return perceived


def infer_protein_bonds(mol: MolecularStructure) -> MolecularStructure:
    """Add geometric single bonds between close heavy-atom pairs.

    Pairs within 1.9 A are bonded; the threshold stretches to 2.4 A when
    either atom is sulfur. Returns a new structure, input untouched.
    """
    if mol.kind != KIND_PROTEIN:
        raise ValueError(f"infer_protein_bonds expects a protein, got {mol.kind!r}")
    pos = mol.positions
    elements = mol.elements
    n = len(mol.atoms)
    bonds = []
    if n > 1:
        is_s = np.array([e == "S" for e in elements])
        # Chunk rows to keep the pairwise matrix small for large inputs.
        for start in range(0, n, 512):
            stop = min(start + 512, n)
            d = np.linalg.norm(pos[start:stop, None, :] - pos[None, :, :], axis=2)
            cut = np.where(is_s[start:stop, None] | is_s[None, :],
                           BOND_CUTOFF_SULFUR, BOND_CUTOFF)
            ii, jj = np.nonzero(d <= cut)
            for a, b in zip(ii, jj):
                i, j = start + int(a), int(b)
                if i < j:
                    bonds.append(Bond(i=i, j=j, order=BOND_SINGLE))
    atoms = [
        Atom(element=a.element, position=a.position.copy(),
             formal_charge=a.formal_charge, residue_name=a.residue_name)
        for a in mol.atoms
    ]
    return MolecularStructure(atoms=atoms, bonds=bonds,
                              source_id=mol.source_id, kind=mol.kind)
