import math

import numpy as np
import pytest

from pligraph.chem import Atom, Bond, MolecularStructure, perceive_ligand
from pligraph.complexes import (
    LABEL_ACTIVITY,
    LabelValue,
    affinity_label,
    build_complex_graph,
    crop_pocket,
    heavy_atom_rmsd,
    label_pose_by_rmsd,
    pic50_label,
    pic50_label_mean,
    split_dataset,
)
from pligraph.errors import DataError, EmptyPocketError

from synthetic import make_complex


def _mol(kind, specs, bonds=(), source="m"):
    atoms = []
    for spec in specs:
        if len(spec) == 2:
            element, pos = spec
            res = "GLY" if kind == "protein" else ""
        else:
            element, pos, res = spec
        atoms.append(Atom(element, np.array(pos, dtype=float), residue_name=res))
    return MolecularStructure(atoms=atoms, bonds=list(bonds),
                              source_id=source, kind=kind)


# ---------------------------------------------------------------------------
# crop

def test_crop_threshold_boundaries():
    ligand = _mol("ligand", [("C", [0, 0, 0])])
    protein = _mol("protein", [("C", [7.9, 0, 0]), ("C", [8.1, 0, 0])])
    pocket = crop_pocket(protein, ligand, 8.0)
    assert len(pocket.atoms) == 1
    assert pocket.atoms[0].position[0] == 7.9


def test_crop_line_of_atoms():
    ligand = _mol("ligand", [("C", [0, 0, 0])])
    protein = _mol("protein", [("C", [5.0 + i, 0, 0]) for i in range(10)])
    pocket = crop_pocket(protein, ligand, 8.0)
    assert [a.position[0] for a in pocket.atoms] == [5.0, 6.0, 7.0, 8.0]


def test_crop_empty_pocket_flags_sample():
    ligand = _mol("ligand", [("C", [0, 0, 0])])
    protein = _mol("protein", [("C", [50, 0, 0])])
    with pytest.raises(EmptyPocketError) as err:
        crop_pocket(protein, ligand, 8.0, sample_id="s42")
    assert err.value.sample_id == "s42"


def test_crop_monotone_in_cutoff(rng):
    ligand = _mol("ligand", [("C", rng.uniform(-2, 2, 3).tolist()) for _ in range(3)])
    protein = _mol("protein", [("C", rng.uniform(-12, 12, 3).tolist())
                               for _ in range(40)])
    kept = []
    for cutoff in (4.0, 6.0, 8.0, 10.0):
        try:
            pocket = crop_pocket(protein, ligand, cutoff)
            kept.append({tuple(a.position) for a in pocket.atoms})
        except EmptyPocketError:
            kept.append(set())
    for small, big in zip(kept, kept[1:]):
        assert small <= big


def test_crop_preserves_order_and_residues():
    ligand = _mol("ligand", [("C", [0, 0, 0])])
    protein = _mol("protein", [("N", [1, 0, 0], "ALA"), ("C", [30, 0, 0], "GLY"),
                               ("O", [2, 0, 0], "SER")])
    pocket = crop_pocket(protein, ligand, 8.0)
    assert [a.residue_name for a in pocket.atoms] == ["ALA", "SER"]


# ---------------------------------------------------------------------------
# rmsd

def test_rmsd_identity_and_translation():
    a = _mol("ligand", [("C", [0, 0, 0]), ("N", [1, 1, 1])])
    assert heavy_atom_rmsd(a, a) == 0.0
    b = _mol("ligand", [("C", [3, 0, 0]), ("N", [4, 1, 1])])
    assert heavy_atom_rmsd(a, b) == pytest.approx(3.0, abs=1e-12)


def test_rmsd_hand_case():
    a = _mol("ligand", [("C", [0, 0, 0]), ("C", [1, 0, 0])])
    b = _mol("ligand", [("C", [1, 0, 0]), ("C", [4, 0, 0])])
    assert heavy_atom_rmsd(a, b) == pytest.approx(math.sqrt(5.0), rel=1e-12)


def test_rmsd_ignores_hydrogens_and_checks_counts():
    a = _mol("ligand", [("C", [0, 0, 0]), ("H", [9, 9, 9])])
    b = _mol("ligand", [("C", [0, 0, 0])])
    assert heavy_atom_rmsd(a, b) == 0.0
    c = _mol("ligand", [("C", [0, 0, 0]), ("C", [1, 0, 0])])
    with pytest.raises(DataError) as err:
        heavy_atom_rmsd(b, c)
    assert "1" in str(err.value) and "2" in str(err.value)


def test_rmsd_metric_properties(rng):
    def rand_pose(base=None):
        pos = base if base is not None else rng.uniform(-5, 5, size=(4, 3))
        return _mol("ligand", [("C", p.tolist()) for p in pos]), pos

    for _ in range(20):
        a, pa = rand_pose()
        b, pb = rand_pose()
        c, pc = rand_pose()
        dab = heavy_atom_rmsd(a, b)
        assert dab == heavy_atom_rmsd(b, a)
        assert dab >= 0.0
        same, _ = rand_pose(pa)
        assert heavy_atom_rmsd(a, same) == 0.0
        assert dab <= heavy_atom_rmsd(a, c) + heavy_atom_rmsd(c, b) + 1e-12


# ---------------------------------------------------------------------------
# labels

def test_rmsd_label_thresholds():
    assert label_pose_by_rmsd(1.99).value == 1.0
    assert label_pose_by_rmsd(2.0).value == 1.0
    assert label_pose_by_rmsd(3.0) is None
    assert label_pose_by_rmsd(4.0).value == 0.0
    assert label_pose_by_rmsd(2.0000001) is None
    assert label_pose_by_rmsd(100.0).value == 0.0


def test_affinity_label_values():
    assert affinity_label("Kd", 1e-9).value == pytest.approx(9.0, abs=1e-12)
    assert affinity_label("Ki", 1.0).value == 0.0
    assert affinity_label("Kd", 5e-7).value == pytest.approx(6.301029995663981, rel=1e-12)
    with pytest.raises(DataError):
        affinity_label("Kd", 0.0)
    with pytest.raises(DataError):
        affinity_label("IC50", 1e-9)


def test_pic50_label_values():
    assert pic50_label(1e-6).value == pytest.approx(6.0, abs=1e-12)
    assert pic50_label(4.2658e-6).value == pytest.approx(5.37, abs=1e-4)
    with pytest.raises(DataError):
        pic50_label(-1.0)


def test_pic50_multiple_measurements_average_in_log_space():
    label = pic50_label_mean([1e-6, 1e-5])
    assert label.value == pytest.approx(5.5, abs=1e-12)


def test_label_validation():
    with pytest.raises(DataError):
        LabelValue(LABEL_ACTIVITY, 0.5)
    with pytest.raises(DataError):
        LabelValue("unknown", 1.0)


# ---------------------------------------------------------------------------
# graphs

def _tiny_graph(distance, cutoff=5.0):
    ligand = perceive_ligand(_mol("ligand", [("C", [0, 0, 0])]))
    protein = _mol("protein", [("C", [distance, 0, 0])])
    return build_complex_graph(protein, ligand,
                               LabelValue(LABEL_ACTIVITY, 1.0),
                               interaction_cutoff=cutoff, sample_id="t")


def test_single_pair_graph():
    g = _tiny_graph(3.0)
    assert np.array_equal(g.covalent_adj, np.eye(2))
    assert g.interaction == [(0, 0, 3.0)]


def test_no_pairs_beyond_cutoff():
    g = _tiny_graph(6.0)
    assert g.interaction == []


def test_ethane_ligand_adjacency():
    ligand = perceive_ligand(_mol("ligand", [("C", [0, 0, 0]), ("C", [1.5, 0, 0])],
                                  bonds=[Bond(0, 1)]))
    protein = _mol("protein", [("C", [0, 3, 0])])
    g = build_complex_graph(protein, ligand, LabelValue(LABEL_ACTIVITY, 0.0))
    assert np.array_equal(g.ligand_adj, np.ones((2, 2)))


def test_coincident_atoms_rejected():
    ligand = perceive_ligand(_mol("ligand", [("C", [0, 0, 0])]))
    protein = _mol("protein", [("C", [0, 0, 0])])
    with pytest.raises(DataError):
        build_complex_graph(protein, ligand, LabelValue(LABEL_ACTIVITY, 1.0))


def test_graph_invariants_on_synthetic(rng):
    for k in range(5):
        g = make_complex(rng, contact=bool(k % 2), sample_id=f"s{k}")
        g.check_invariants()
        n = g.n_protein + g.n_ligand
        assert g.covalent_adj.shape == (n, n)
        assert np.array_equal(np.diag(g.covalent_adj), np.ones(n))
        assert g.ligand_features.shape == (g.n_ligand, 41)
        assert g.protein_features.shape == (g.n_protein, 33)
        for p, l, d in g.interaction:
            assert 0.0 < d <= g.interaction_cutoff


# ---------------------------------------------------------------------------
# splits

def test_split_deterministic_and_proportional():
    ids = [f"id{i}" for i in range(10)]
    s1 = split_dataset(ids, ratio=0.8, seed=3)
    s2 = split_dataset(ids, ratio=0.8, seed=3)
    assert s1 == s2
    assert len(s1.train_ids) == 8 and len(s1.test_ids) == 2
    assert set(s1.train_ids) | set(s1.test_ids) == set(ids)
    assert set(s1.train_ids) & set(s1.test_ids) == set()


def test_split_seeds_differ():
    ids = [f"id{i}" for i in range(100)]
    a = split_dataset(ids, seed=1)
    b = split_dataset(ids, seed=2)
    assert a.train_ids != b.train_ids


def test_split_errors_and_clamping():
    with pytest.raises(DataError):
        split_dataset(["only"], seed=0)
    s = split_dataset(["a", "b"], ratio=0.8, seed=0)
    assert len(s.train_ids) == 1 and len(s.test_ids) == 1
