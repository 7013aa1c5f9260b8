import numpy as np
import pytest

from qitelab import basis_state, deuteron_hamiltonian, load_builtin_h2_coefficients
from qitelab.qite import build_pool


@pytest.fixture(scope="session")
def deuteron2():
    full, groups = deuteron_hamiltonian(2)
    return {
        "full": full,
        "groups": groups,
        "pool": build_pool(2, 1, restricted=True),
        "psi0": basis_state(2, "10"),
        "exact_ground": float(np.linalg.eigvalsh(full.matrix()).min()),
    }


@pytest.fixture(scope="session")
def deuteron3():
    full, groups = deuteron_hamiltonian(3)
    return {
        "full": full,
        "groups": groups,
        "pool": build_pool(3, 2, restricted=True),
        "psi0": basis_state(3, "100"),
        "exact_ground": float(np.linalg.eigvalsh(full.matrix()).min()),
    }


@pytest.fixture(scope="session")
def h2_table():
    return load_builtin_h2_coefficients()
