import numpy as np
import pytest


def pdb_line(serial, name, res, seq, x, y, z, element):
    return (f"ATOM  {serial:5d} {name:<4s} {res:<3s} A{seq:4d}    "
            f"{x:8.3f}{y:8.3f}{z:8.3f}  1.00  0.00          {element:>2s}")


@pytest.fixture
def mini_pdb_text():
    """3-residue protein: 24 ATOM lines = 18 heavy + 2 hydrogens + 4 waters."""
    heavy = [
        ("N", "ALA", 1), ("CA", "ALA", 1), ("C", "ALA", 1), ("O", "ALA", 1),
        ("CB", "ALA", 1),
        ("N", "ALA", 2), ("CA", "ALA", 2), ("C", "ALA", 2), ("O", "ALA", 2),
        ("CB", "ALA", 2),
        ("N", "VAL", 3), ("CA", "VAL", 3), ("C", "VAL", 3), ("O", "VAL", 3),
        ("CB", "VAL", 3), ("CG1", "VAL", 3), ("CG2", "VAL", 3), ("OXT", "VAL", 3),
    ]
    lines = []
    serial = 1
    for i, (name, res, seq) in enumerate(heavy):
        element = name[0]
        lines.append(pdb_line(serial, name, res, seq,
                              1.5 * i, 0.25 * i, -0.5 * i, element))
        serial += 1
    lines.append(pdb_line(serial, "H", "ALA", 1, 0.5, 1.0, 0.0, "H"))
    serial += 1
    lines.append(pdb_line(serial, "HB1", "ALA", 2, 8.0, 1.0, -3.0, "H"))
    serial += 1
    for w in range(4):
        lines.append(pdb_line(serial, "O", "HOH", 90 + w,
                              30.0 + w, 30.0, 30.0, "O"))
        serial += 1
    return "\n".join(lines) + "\n"


BENZENE_SDF = """\
benzene
  test

  6  6  0  0  0  0  0  0  0  0999 V2000
    0.0000    1.3905    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.2042    0.6953    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.2042   -0.6953    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    0.0000   -1.3905    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
   -1.2042   -0.6953    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
   -1.2042    0.6953    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  4  0
  2  3  4  0
  3  4  4  0
  4  5  4  0
  5  6  4  0
  6  1  4  0
M  END
$$$$
"""


@pytest.fixture
def benzene_sdf_text():
    return BENZENE_SDF


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
