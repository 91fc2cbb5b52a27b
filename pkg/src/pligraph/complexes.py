"""Labeled protein-ligand complex graphs and their interchange format.

Covers pocket cropping, pose RMSD and its activity thresholds, label-value
math, graph assembly (covalent adjacencies plus intermolecular distance
pairs), the JSON-Lines dataset format, and deterministic train/test splits.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

import numpy as np

from .chem import (
    KIND_LIGAND,
    KIND_PROTEIN,
    Atom,
    Bond,
    MolecularStructure,
    PerceivedLigand,
)
from .errors import DataError, DatasetError, EmptyPocketError
from .features import (
    HYBRIDIZATION_VOCAB,
    featurize_ligand,
    featurize_protein,
)

POCKET_CUTOFF = 8.0
INTERACTION_CUTOFF = 5.0

# Pose-activity thresholds on RMSD to the crystal pose.
RMSD_ACTIVE_MAX = 2.0
RMSD_INACTIVE_MIN = 4.0

LABEL_ACTIVITY = "activity"
LABEL_AFFINITY = "affinity"
LABEL_PIC50 = "pic50"
LABEL_DOCKING = "docking"
LABEL_KINDS = (LABEL_ACTIVITY, LABEL_AFFINITY, LABEL_PIC50, LABEL_DOCKING)


@dataclass(frozen=True)
class LabelValue:
    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in LABEL_KINDS:
            raise DataError(f"unknown label kind {self.kind!r}")
        if not math.isfinite(self.value):
            raise DataError(f"label value must be finite, got {self.value}")
        if self.kind == LABEL_ACTIVITY and self.value not in (0.0, 1.0):
            raise DataError(f"activity label must be 0 or 1, got {self.value}")


# ---------------------------------------------------------------------------
# labels

def label_pose_by_rmsd(rmsd: float) -> LabelValue | None:
    """Active at rmsd <= 2 A, inactive at >= 4 A, None (drop) in between."""
    if rmsd < 0:
        raise DataError(f"rmsd must be non-negative, got {rmsd}")
    if rmsd <= RMSD_ACTIVE_MAX:
        return LabelValue(LABEL_ACTIVITY, 1.0)
    if rmsd >= RMSD_INACTIVE_MIN:
        return LabelValue(LABEL_ACTIVITY, 0.0)
    return None


def affinity_label(measure_kind: str, value_molar: float) -> LabelValue:
    """Experimental binding affinity: -log10 of the Ki or Kd constant."""
    if measure_kind not in ("Ki", "Kd"):
        raise DataError(f"measure kind must be Ki or Kd, got {measure_kind!r}")
    if value_molar <= 0:
        raise DataError(f"{measure_kind} must be positive molar, got {value_molar}")
    return LabelValue(LABEL_AFFINITY, -math.log10(value_molar))


def pic50_label(ic50_molar: float) -> LabelValue:
    if ic50_molar <= 0:
        raise DataError(f"IC50 must be positive molar, got {ic50_molar}")
    return LabelValue(LABEL_PIC50, -math.log10(ic50_molar))


def pic50_label_mean(ic50_values_molar) -> LabelValue:
    """Multiple measurements average in log space (scale robustness)."""
    values = list(ic50_values_molar)
    if not values:
        raise DataError("no IC50 measurements given")
    pics = [pic50_label(v).value for v in values]
    return LabelValue(LABEL_PIC50, sum(pics) / len(pics))


# ---------------------------------------------------------------------------
# geometry

def crop_pocket(protein: MolecularStructure, ligand: MolecularStructure,
                cutoff: float = POCKET_CUTOFF, sample_id: str | None = None
                ) -> MolecularStructure:
    """Protein atoms whose minimum distance to any ligand atom is <= cutoff.

    Original atom ordering and residue names are preserved; bonds between
    retained atoms are kept and reindexed."""
    if cutoff <= 0:
        raise DataError(f"pocket cutoff must be positive, got {cutoff}")
    if not protein.atoms or not ligand.atoms:
        raise DataError("crop_pocket needs non-empty structures")
    pp = protein.positions
    lp = ligand.positions
    dmin = np.sqrt(((pp[:, None, :] - lp[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
    keep = np.nonzero(dmin <= cutoff)[0]
    if keep.size == 0:
        raise EmptyPocketError(sample_id or protein.source_id, cutoff)
    remap = {int(old): new for new, old in enumerate(keep)}
    atoms = [
        Atom(element=protein.atoms[i].element,
             position=protein.atoms[i].position.copy(),
             formal_charge=protein.atoms[i].formal_charge,
             residue_name=protein.atoms[i].residue_name)
        for i in keep
    ]
    bonds = [Bond(i=remap[b.i], j=remap[b.j], order=b.order)
             for b in protein.bonds if b.i in remap and b.j in remap]
    return MolecularStructure(atoms=atoms, bonds=bonds,
                              source_id=protein.source_id, kind=protein.kind)


def heavy_atom_rmsd(pose_a: MolecularStructure, pose_b: MolecularStructure) -> float:
    """Root-mean-square distance over heavy atoms, no superposition.

    Poses are assumed to share the crystal frame and atom ordering; an
    alignment step would change the activity labels."""
    pa = np.array([a.position for a in pose_a.atoms if a.is_heavy])
    pb = np.array([a.position for a in pose_b.atoms if a.is_heavy])
    if pa.shape[0] != pb.shape[0]:
        raise DataError(
            f"heavy-atom count mismatch: {pa.shape[0]} vs {pb.shape[0]}")
    if pa.shape[0] == 0:
        raise DataError("no heavy atoms to compare")
    return float(np.sqrt(((pa - pb) ** 2).sum(axis=1).mean()))


# ---------------------------------------------------------------------------
# graphs

def _adjacency(n: int, pairs) -> np.ndarray:
    adj = np.eye(n)
    for i, j in pairs:
        adj[i, j] = 1.0
        adj[j, i] = 1.0
    return adj


@dataclass(eq=False)
class ComplexGraph:
    sample_id: str
    target_id: str
    pose_rank: int
    label: LabelValue
    ligand: PerceivedLigand
    protein: MolecularStructure
    interaction_cutoff: float
    rmsd: float | None
    ligand_adj: np.ndarray
    protein_adj: np.ndarray
    covalent_adj: np.ndarray
    interaction: list[tuple[int, int, float]]
    ligand_features: np.ndarray
    protein_features: np.ndarray

    @property
    def n_ligand(self) -> int:
        return len(self.ligand)

    @property
    def n_protein(self) -> int:
        return len(self.protein.atoms)

    def check_invariants(self) -> None:
        n_p, n_l = self.n_protein, self.n_ligand
        for name, adj in (("ligand_adj", self.ligand_adj),
                          ("protein_adj", self.protein_adj),
                          ("covalent_adj", self.covalent_adj)):
            if not np.array_equal(adj, adj.T):
                raise DataError(f"{name} not symmetric")
            if not np.all(np.diag(adj) == 1.0):
                raise DataError(f"{name} missing self-loops")
            if adj.min() < 0.0 or adj.max() > 1.0:
                raise DataError(f"{name} entries outside [0, 1]")
        if np.any(self.covalent_adj[:n_p, n_p:] != 0.0):
            raise DataError("covalent adjacency has intermolecular entries")
        for p, l, d in self.interaction:
            if not (0 <= p < n_p and 0 <= l < n_l):
                raise DataError(f"interaction pair ({p}, {l}) out of range")
            if not 0.0 < d <= self.interaction_cutoff:
                raise DataError(f"interaction distance {d} outside (0, cutoff]")
        if self.ligand_features.shape[0] != n_l:
            raise DataError("ligand feature rows do not match atom count")
        if self.protein_features.shape[0] != n_p:
            raise DataError("protein feature rows do not match atom count")


def build_complex_graph(pocket: MolecularStructure, ligand: PerceivedLigand,
                        label: LabelValue,
                        interaction_cutoff: float = INTERACTION_CUTOFF,
                        sample_id: str = "", target_id: str = "",
                        pose_rank: int = 0, rmsd: float | None = None
                        ) -> ComplexGraph:
    """Assemble the joined graph for one pocket/ligand pair.

    Protein nodes come first in the joined index space. Interaction pairs
    list every protein-ligand heavy-atom pair within the cutoff."""
    n_p = len(pocket.atoms)
    n_l = len(ligand)
    ligand_adj = _adjacency(n_l, [(b.i, b.j) for b in ligand.base.bonds])
    protein_adj = _adjacency(n_p, [(b.i, b.j) for b in pocket.bonds])
    covalent = np.zeros((n_p + n_l, n_p + n_l))
    covalent[:n_p, :n_p] = protein_adj
    covalent[n_p:, n_p:] = ligand_adj

    dists = np.sqrt(((pocket.positions[:, None, :]
                      - ligand.base.positions[None, :, :]) ** 2).sum(axis=2))
    interaction = []
    for p in range(n_p):
        for l in range(n_l):
            d = float(dists[p, l])
            if d <= interaction_cutoff:
                if d == 0.0:
                    raise DataError(
                        f"coincident protein/ligand atoms ({p}, {l}) in "
                        f"{sample_id or pocket.source_id!r}")
                interaction.append((p, l, d))

    sid = sample_id or ligand.base.source_id
    graph = ComplexGraph(
        sample_id=sid,
        target_id=target_id or pocket.source_id,
        pose_rank=pose_rank,
        label=label,
        ligand=_rename(ligand, sid),
        protein=_rename_struct(pocket, sid),
        interaction_cutoff=interaction_cutoff,
        rmsd=rmsd,
        ligand_adj=ligand_adj,
        protein_adj=protein_adj,
        covalent_adj=covalent,
        interaction=interaction,
        ligand_features=featurize_ligand(ligand),
        protein_features=featurize_protein(pocket),
    )
    graph.check_invariants()
    return graph


def _rename_struct(mol: MolecularStructure, source_id: str) -> MolecularStructure:
    return MolecularStructure(atoms=mol.atoms, bonds=mol.bonds,
                              source_id=source_id, kind=mol.kind)


def _rename(lig: PerceivedLigand, source_id: str) -> PerceivedLigand:
    return PerceivedLigand(
        base=_rename_struct(lig.base, source_id),
        degree=lig.degree, num_hydrogens=lig.num_hydrogens,
        implicit_valence=lig.implicit_valence, aromatic=lig.aromatic,
        in_ring=lig.in_ring, hybridization=lig.hybridization,
    )


def graphs_equal(a: ComplexGraph, b: ComplexGraph) -> bool:
    """Field-for-field equality (used to verify dataset round trips)."""
    return (
        a.sample_id == b.sample_id
        and a.target_id == b.target_id
        and a.pose_rank == b.pose_rank
        and a.label == b.label
        and a.rmsd == b.rmsd
        and a.interaction_cutoff == b.interaction_cutoff
        and a.ligand.base.elements == b.ligand.base.elements
        and np.array_equal(a.ligand.base.positions, b.ligand.base.positions)
        and [(x.i, x.j, x.order) for x in a.ligand.base.bonds]
            == [(x.i, x.j, x.order) for x in b.ligand.base.bonds]
        and [x.formal_charge for x in a.ligand.base.atoms]
            == [x.formal_charge for x in b.ligand.base.atoms]
        and a.ligand.degree == b.ligand.degree
        and a.ligand.num_hydrogens == b.ligand.num_hydrogens
        and a.ligand.implicit_valence == b.ligand.implicit_valence
        and a.ligand.aromatic == b.ligand.aromatic
        and a.ligand.in_ring == b.ligand.in_ring
        and a.ligand.hybridization == b.ligand.hybridization
        and a.protein.elements == b.protein.elements
        and [x.residue_name for x in a.protein.atoms]
            == [x.residue_name for x in b.protein.atoms]
        and np.array_equal(a.protein.positions, b.protein.positions)
        and [(x.i, x.j) for x in a.protein.bonds] == [(x.i, x.j) for x in b.protein.bonds]
        and np.array_equal(a.ligand_adj, b.ligand_adj)
        and np.array_equal(a.protein_adj, b.protein_adj)
        and np.array_equal(a.covalent_adj, b.covalent_adj)
        and a.interaction == b.interaction
        and np.array_equal(a.ligand_features, b.ligand_features)
        and np.array_equal(a.protein_features, b.protein_features)
    )


# ---------------------------------------------------------------------------
# dataset interchange (JSON-Lines, one record per sample)

def _graph_record(g: ComplexGraph) -> dict:
    lig = g.ligand
    rec = {
        "id": g.sample_id,
        "target": g.target_id,
        "pose_rank": g.pose_rank,
        "label": {"kind": g.label.kind, "value": g.label.value},
        "ligand": {
            "elements": lig.base.elements,
            "pos": [[float(v) for v in a.position] for a in lig.base.atoms],
            "bonds": [[b.i, b.j, b.order] for b in lig.base.bonds],
            "formal_charge": [a.formal_charge for a in lig.base.atoms],
            "aromatic": lig.aromatic,
            "in_ring": lig.in_ring,
            "degree": lig.degree,
            "num_h": lig.num_hydrogens,
            "implicit_valence": lig.implicit_valence,
            "hybridization": lig.hybridization,
        },
        "protein": {
            "elements": g.protein.elements,
            "residues": [a.residue_name for a in g.protein.atoms],
            "pos": [[float(v) for v in a.position] for a in g.protein.atoms],
            "bonds": [[b.i, b.j] for b in g.protein.bonds],
        },
    }
    if g.rmsd is not None:
        rec["rmsd"] = g.rmsd
    return rec


def write_dataset(path, graphs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in graphs:
            fh.write(json.dumps(_graph_record(g), separators=(",", ":")))
            fh.write("\n")


def _require(cond: bool, message: str, line: int) -> None:
    if not cond:
        raise DatasetError(message, line=line)


def _graph_from_record(rec: dict, interaction_cutoff: float, line: int) -> ComplexGraph:
    for key in ("id", "target", "pose_rank", "label", "ligand", "protein"):
        _require(key in rec, f"missing key {key!r}", line)
    label = rec["label"]
    _require(isinstance(label, dict) and "kind" in label and "value" in label,
             "label must be an object with kind and value", line)
    _require(label["kind"] in LABEL_KINDS, f"unknown label kind {label['kind']!r}", line)

    lig = rec["ligand"]
    per_atom = ("elements", "pos", "formal_charge", "aromatic", "in_ring",
                "degree", "num_h", "implicit_valence", "hybridization")
    for key in per_atom + ("bonds",):
        _require(key in lig, f"ligand record missing {key!r}", line)
    n_l = len(lig["elements"])
    _require(n_l >= 1, "ligand must have at least one atom", line)
    for key in per_atom:
        _require(len(lig[key]) == n_l, f"ligand {key!r} length mismatch", line)
    for h in lig["hybridization"]:
        _require(h in HYBRIDIZATION_VOCAB, f"bad hybridization {h!r}", line)

    prot = rec["protein"]
    for key in ("elements", "residues", "pos", "bonds"):
        _require(key in prot, f"protein record missing {key!r}", line)
    n_p = len(prot["elements"])
    _require(n_p >= 1, "protein must have at least one atom", line)
    _require(len(prot["residues"]) == n_p and len(prot["pos"]) == n_p,
             "protein per-atom length mismatch", line)

    try:
        base = MolecularStructure(
            atoms=[Atom(element=e, position=np.array(p, dtype=np.float64),
                        formal_charge=int(c))
                   for e, p, c in zip(lig["elements"], lig["pos"], lig["formal_charge"])],
            bonds=[Bond(i=int(i), j=int(j), order=int(o)) for i, j, o in lig["bonds"]],
            source_id=rec["id"], kind=KIND_LIGAND,
        )
        perceived = PerceivedLigand(
            base=base,
            degree=[int(v) for v in lig["degree"]],
            num_hydrogens=[int(v) for v in lig["num_h"]],
            implicit_valence=[int(v) for v in lig["implicit_valence"]],
            aromatic=[bool(v) for v in lig["aromatic"]],
            in_ring=[bool(v) for v in lig["in_ring"]],
            hybridization=[str(v) for v in lig["hybridization"]],
        )
        pocket = MolecularStructure(
            atoms=[Atom(element=e, position=np.array(p, dtype=np.float64),
                        residue_name=r)
                   for e, p, r in zip(prot["elements"], prot["pos"], prot["residues"])],
            bonds=[Bond(i=int(i), j=int(j)) for i, j in prot["bonds"]],
            source_id=rec["target"], kind=KIND_PROTEIN,
        )
        return build_complex_graph(
            pocket, perceived,
            LabelValue(label["kind"], float(label["value"])),
            interaction_cutoff=interaction_cutoff,
            sample_id=rec["id"], target_id=rec["target"],
            pose_rank=int(rec["pose_rank"]),
            rmsd=float(rec["rmsd"]) if "rmsd" in rec else None,
        )
    except (DataError, ValueError, TypeError) as exc:
        raise DatasetError(str(exc), line=line) from exc


def read_dataset(path, interaction_cutoff: float = INTERACTION_CUTOFF
                 ) -> list[ComplexGraph]:
    """Read a JSON-Lines dataset; schema violations name the line."""
    graphs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON ({exc.msg})", line=line_no) from exc
            _require(isinstance(rec, dict), "record must be a JSON object", line_no)
            graphs.append(_graph_from_record(rec, interaction_cutoff, line_no))
    return graphs


# ---------------------------------------------------------------------------
# splits

@dataclass(frozen=True)
class DatasetSplit:
    train_ids: tuple
    test_ids: tuple
    seed: int


def split_dataset(ids, ratio: float = 0.8, seed: int = 0) -> DatasetSplit:
    """Deterministic shuffled split; train gets round(ratio * n) ids,
    clamped so both sides stay non-empty."""
    ids = list(ids)
    n = len(ids)
    if n < 2:
        raise DataError(f"need at least 2 ids to split, got {n}")
    if not 0.0 < ratio < 1.0:
        raise DataError(f"ratio must be in (0, 1), got {ratio}")
    rng = random.Random(seed)
    rng.shuffle(ids)
    n_train = min(max(round(ratio * n), 1), n - 1)
    return DatasetSplit(train_ids=tuple(ids[:n_train]),
                        test_ids=tuple(ids[n_train:]), seed=seed)
