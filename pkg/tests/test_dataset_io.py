import json

import numpy as np
import pytest

from pligraph.complexes import (
    LabelValue,
    graphs_equal,
    read_dataset,
    write_dataset,
)
from pligraph.errors import DatasetError

from synthetic import build_from, make_complex


@pytest.fixture
def graphs(rng):
    out = [make_complex(rng, contact=True, sample_id="a1"),
           make_complex(rng, contact=False, sample_id="b2"),
           make_complex(rng, contact=True, sample_id="c3", n_ligand=4)]
    out[2] = build_from(out[2], LabelValue("pic50", 6.25))
    out[1].rmsd = 4.5
    return out


def test_round_trip_identity(tmp_path, graphs):
    path = tmp_path / "data.jsonl"
    write_dataset(path, graphs)
    back = read_dataset(path)
    assert len(back) == 3
    for orig, received in zip(graphs, back):
        assert graphs_equal(orig, received)


def test_round_trip_is_stable_bytes(tmp_path, graphs):
    p1 = tmp_path / "a.jsonl"
    p2 = tmp_path / "b.jsonl"
    write_dataset(p1, graphs)
    write_dataset(p2, read_dataset(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_empty_file_reads_empty(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert read_dataset(path) == []


def test_truncated_final_line_names_line(tmp_path, graphs):
    path = tmp_path / "data.jsonl"
    write_dataset(path, graphs)
    text = path.read_text()
    path.write_text(text[:-40])
    with pytest.raises(DatasetError) as err:
        read_dataset(path)
    assert err.value.line == 3


def test_schema_violation_names_line(tmp_path, graphs):
    path = tmp_path / "data.jsonl"
    write_dataset(path, graphs[:1])
    rec = json.loads(path.read_text())
    del rec["ligand"]["degree"]
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(DatasetError) as err:
        read_dataset(path)
    assert err.value.line == 1
    assert "degree" in str(err.value)


def test_bad_label_kind_rejected(tmp_path, graphs):
    path = tmp_path / "data.jsonl"
    write_dataset(path, graphs[:1])
    rec = json.loads(path.read_text())
    rec["label"]["kind"] = "potency"
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(DatasetError):
        read_dataset(path)


def test_interaction_cutoff_controls_pairs(tmp_path, graphs):
    path = tmp_path / "data.jsonl"
    write_dataset(path, graphs)
    tight = read_dataset(path, interaction_cutoff=2.0)
    loose = read_dataset(path, interaction_cutoff=6.0)
    for t, l in zip(tight, loose):
        assert len(t.interaction) <= len(l.interaction)


def test_numbers_survive_json_exactly(tmp_path, rng):
    g = make_complex(rng, contact=True, sample_id="precise")
    path = tmp_path / "data.jsonl"
    write_dataset(path, [g])
    back = read_dataset(path)[0]
    assert np.array_equal(back.ligand.base.positions, g.ligand.base.positions)
    assert back.interaction == g.interaction
