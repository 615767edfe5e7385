import numpy as np
import pytest

from qbat.model import SystemSpec, hamiltonian_set
from qbat.model import ec_operator as _ec_operator

# Raw Kronecker building blocks used by test oracles, independent of qbat.qalg.
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def kron(*mats):
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def raw_cell_coupling(j=1.0):
    """Coupling Hamiltonian of one cell built by hand: J sum (x x + y y)."""
    return j * (kron(X, I2, X) + kron(Y, I2, Y) + kron(I2, X, X) + kron(I2, Y, Y))


def raw_bare(omega=1.0):
    """Per-qubit bare term omega*(|1><1| - |0><0|)."""
    return omega * np.diag([-1.0, 1.0]).astype(complex)


@pytest.fixture(scope="session")
def spec():
    return SystemSpec()


@pytest.fixture(scope="session")
def hs(spec):
    return hamiltonian_set(spec)


@pytest.fixture(scope="session")
def p_hat(hs):
    return _ec_operator(hs.h0_hub, hs.h_charging)
