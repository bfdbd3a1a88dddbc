import numpy as np
import pytest

from editsim.alphabet import Alphabet


@pytest.fixture
def ab2():
    return Alphabet(("a", "b"))


@pytest.fixture
def ab3():
    return Alphabet(("a", "b", "c"))


@pytest.fixture
def table_costs(ab2):
    """The worked example cost matrix over {a, b}."""
    from editsim.distances import CostMatrix

    return CostMatrix(
        np.array([[0.0, 2.0, 10.0], [2.0, 0.0, 4.0], [10.0, 4.0, 0.0]]), ab2
    )


@pytest.fixture
def copy_model(ab2):
    """Deterministic copier: never inserts or deletes, keeps every symbol."""
    from editsim.transducer import MemorylessTransducer

    probs = np.zeros((3, 3))
    probs[0, 0] = 1.0
    probs[1, 1] = 1.0
    probs[2, 2] = 1.0
    return MemorylessTransducer(probs, ab2)
