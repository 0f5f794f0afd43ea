import numpy as np
import pytest

from sftlab import MarkovMeasure, Sft

GOLDEN = [[1, 1], [1, 0]]
SWAP = [[0, 1], [1, 0]]


@pytest.fixture(scope="session")
def full2():
    return Sft(np.ones((2, 2), dtype=np.int64))


@pytest.fixture(scope="session")
def full3():
    return Sft(np.ones((3, 3), dtype=np.int64))


@pytest.fixture(scope="session")
def golden():
    return Sft(np.array(GOLDEN, dtype=np.int64))


@pytest.fixture(scope="session")
def swap2():
    # period-2 matrix: irreducible but not aperiodic
    return Sft(np.array(SWAP, dtype=np.int64))


@pytest.fixture(scope="session")
def bern_half():
    return MarkovMeasure.bernoulli([0.5, 0.5])


@pytest.fixture()
def matrix_file(tmp_path):
    def write(rows, name="A.txt"):
        path = tmp_path / name
        lines = [str(len(rows))]
        lines += [" ".join(str(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
        return str(path)

    return write


@pytest.fixture()
def potential_file(tmp_path):
    def write(text, name="f.pot"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return write
