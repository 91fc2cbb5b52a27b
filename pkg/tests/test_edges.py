"""Edge-path coverage: reindexing, degenerate inputs, concurrency."""

import threading

import numpy as np
import pytest

from pligraph.chem import Atom, Bond, MolecularStructure, perceive_ligand
from pligraph.complexes import crop_pocket
from pligraph.errors import DataError, EmptyStructureError
import pligraph.tensorcore as tc
from pligraph.tensorcore import Tape, Tensor

from test_gatcore import BACKENDS


def test_crop_reindexes_bonds():
    atoms = [Atom("C", np.array([float(x), 0.0, 0.0]), residue_name="GLY")
             for x in (1.0, 30.0, 2.0, 3.0)]
    bonds = [Bond(0, 2), Bond(2, 3), Bond(1, 3)]  # one bond leaves the pocket
    protein = MolecularStructure(atoms=atoms, bonds=bonds, source_id="p",
                                 kind="protein")
    ligand = MolecularStructure(atoms=[Atom("C", np.array([0.0, 0.0, 0.0]))],
                                bonds=[], source_id="l", kind="ligand")
    pocket = crop_pocket(protein, ligand, 8.0)
    assert [a.position[0] for a in pocket.atoms] == [1.0, 2.0, 3.0]
    assert [(b.i, b.j) for b in pocket.bonds] == [(0, 1), (1, 2)]


def test_perceive_all_hydrogen_ligand_rejected():
    mol = MolecularStructure(
        atoms=[Atom("H", np.array([0.0, 0.0, 0.0])),
               Atom("H", np.array([0.8, 0.0, 0.0]))],
        bonds=[Bond(0, 1)], source_id="h2", kind="ligand")
    with pytest.raises(EmptyStructureError):
        perceive_ligand(mol)


def test_read_predictions_requires_columns(tmp_path):
    from pligraph.metrics import read_predictions
    path = tmp_path / "bad.csv"
    path.write_text("sample,score\na,0.5\n")
    with pytest.raises(DataError):
        read_predictions(path)


@pytest.mark.parametrize("impl", [b[1] for b in BACKENDS],
                         ids=[b[0] for b in BACKENDS])
def test_kernel_empty_mask_row(impl, rng):
    """A node with no attention partners gets a zero aggregate and its gate
    passes the input through halfway (zero gate vector)."""
    n, d = 3, 2
    h = np.ascontiguousarray(rng.normal(size=(n, d)))
    adj = np.eye(n)
    adj[1, 1] = 0.0  # node 1 fully isolated, not even a self-loop
    mask = np.ascontiguousarray(adj > 0, dtype=np.uint8)
    wt = np.eye(d)
    wa = np.eye(d)
    u = np.zeros((2 * d, 1))
    out, ctx = impl.block_forward(h, adj, mask, wt, wa, u, 0.0)
    s = np.asarray(ctx[6])
    assert np.all(s[1, :] == 0.0)
    # gate 0.5, neighbor aggregate zero: output row is h/2
    assert np.allclose(np.asarray(out)[1], 0.5 * h[1])
    grads = impl.block_backward(ctx, np.ones((n, d)))
    assert all(np.all(np.isfinite(np.asarray(g))) for g in grads)


def test_tapes_are_thread_independent(rng):
    """Independent tapes on independent threads reproduce the sequential
    result; no cross-thread state leaks."""
    w_data = rng.normal(size=(6, 6))

    def run_once():
        w = Tensor(w_data.copy(), requires_grad=True)
        with Tape() as tape:
            loss = tc.sum_all(tc.sigmoid(tc.matmul(w, tc.transpose(w))))
        return loss.item(), tape.backward(loss)[w.node_id].data

    expected_loss, expected_grad = run_once()
    results = [None] * 8
    errors = []

    def worker(k):
        try:
            for _ in range(20):
                results[k] = run_once()
        except Exception as exc:  # noqa: BLE001 - surfaced below
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    for loss, grad in results:
        assert loss == expected_loss
        assert np.array_equal(grad, expected_grad)
