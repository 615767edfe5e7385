"""Dense operator/state algebra on small multi-qubit Hilbert spaces.

Conventions used throughout the package:

* hbar = 1; energies carry their unit (hbar*omega or hbar*J) in the docs of
  whatever constructed them.
* Basis ordering is big-endian: qubit 0 is the most significant bit, so the
  computational basis index of |b0 b1 ... b_{n-1}> is sum_k b_k * 2**(n-1-k).
* ``pauli("z")`` is the standard diag(+1, -1) in the (|0>, |1>) basis.  The
  bare qubit Hamiltonian is built from projectors instead (see ``model``),
  which makes |1> the excited state without relying on a sign convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

MAX_QUBITS = 12

HERMITIAN_ATOL = 1e-12
UNITARY_ATOL = 1e-10
NORM_ATOL = 1e-12
TRACE_ATOL = 1e-12
EIG_FLOOR = -1e-10


def _frozen_array(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=complex, copy=True)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_n_qubits(n_qubits: int, dim: int) -> None:
    if n_qubits < 1 or n_qubits > MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    if dim != 2**n_qubits:
        raise ValueError(f"dimension {dim} does not match 2**{n_qubits}")


def max_abs(matrix: np.ndarray) -> float:
    """Entrywise max-norm, the norm used by the package's tolerances."""
    return float(np.max(np.abs(matrix))) if matrix.size else 0.0


@dataclass(frozen=True, eq=False)
class Operator:
    """A dense complex matrix acting on ``n_qubits`` qubits.

    ``hermitian`` and ``unitary`` record the constructor's intent and are
    verified on construction (max-norm tolerances 1e-12 and 1e-10).
    """

    n_qubits: int
    matrix: np.ndarray
    hermitian: bool = False
    unitary: bool = False

    def __post_init__(self):
        mat = _frozen_array(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"operator matrix must be square, got {mat.shape}")
        _check_n_qubits(self.n_qubits, mat.shape[0])
        object.__setattr__(self, "matrix", mat)
        if self.hermitian and max_abs(mat - mat.conj().T) > HERMITIAN_ATOL:
            raise ValueError("operator flagged hermitian violates A == A^dagger")
        if self.unitary:
            defect = mat.conj().T @ mat - np.eye(mat.shape[0])
            if max_abs(defect) > UNITARY_ATOL:
                raise ValueError("operator flagged unitary violates U^dagger U == 1")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "Operator":
        return Operator(self.n_qubits, self.matrix.conj().T,
                        hermitian=self.hermitian, unitary=self.unitary)

    def __add__(self, other: "Operator") -> "Operator":
        self._check_same_dim(other)
        return Operator(self.n_qubits, self.matrix + other.matrix,
                        hermitian=self.hermitian and other.hermitian)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_same_dim(other)
        return Operator(self.n_qubits, self.matrix - other.matrix,
                        hermitian=self.hermitian and other.hermitian)

    def __neg__(self) -> "Operator":
        return Operator(self.n_qubits, -self.matrix, hermitian=self.hermitian)

    def __mul__(self, scalar: complex) -> "Operator":
        keep = self.hermitian and float(np.imag(scalar)) == 0.0
        return Operator(self.n_qubits, self.matrix * scalar, hermitian=keep)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_same_dim(other)
        return Operator(self.n_qubits, self.matrix @ other.matrix)

    def _check_same_dim(self, other: "Operator") -> None:
        if not isinstance(other, Operator):
            raise TypeError(f"expected Operator, got {type(other).__name__}")
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")


@dataclass(frozen=True, eq=False)
class PureState:
    """A normalized state vector on ``n_qubits`` qubits (norm within 1e-12 of 1)."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = _frozen_array(self.amplitudes)
        if amp.ndim != 1:
            raise ValueError(f"state vector must be 1-d, got shape {amp.shape}")
        _check_n_qubits(self.n_qubits, amp.shape[0])
        object.__setattr__(self, "amplitudes", amp)
        norm = float(np.linalg.norm(amp))
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValueError(f"state vector norm {norm} deviates from 1 by more than {NORM_ATOL}")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def overlap(self, other: "PureState") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "PureState") -> float:
        """|<self|other>|^2, insensitive to global phase."""
        return float(abs(self.overlap(other)) ** 2)

    def tensor(self, other: "PureState") -> "PureState":
        return PureState(self.n_qubits + other.n_qubits,
                         np.kron(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Unit-trace Hermitian PSD matrix on ``n_qubits`` qubits."""

    n_qubits: int
    entries: np.ndarray

    def __post_init__(self):
        mat = _frozen_array(self.entries)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got {mat.shape}")
        _check_n_qubits(self.n_qubits, mat.shape[0])
        object.__setattr__(self, "entries", mat)
        if max_abs(mat - mat.conj().T) > HERMITIAN_ATOL:
            raise ValueError("density matrix is not hermitian within 1e-12")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"density matrix trace {tr} deviates from 1")
        if float(np.linalg.eigvalsh(mat).min()) < EIG_FLOOR:
            raise ValueError("density matrix has an eigenvalue below -1e-10")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


State = Union[PureState, DensityMatrix]


@dataclass(frozen=True)
class BatteryQubit:
    cell: int
    slot: int  # 1 or 2


@dataclass(frozen=True)
class HubQubit:
    cell: int


Role = Union[BatteryQubit, HubQubit]


@dataclass(frozen=True)
class QubitLayout:
    """Ordered role assignment of qubits to battery cells and hub qubits.

    Each cell owns exactly two battery slots and one hub qubit.  The basis
    ordering tag documents the fixed big-endian convention (qubit 0 most
    significant).
    """

    roles: tuple
    ordering: str = "qubit0-most-significant"

    def __post_init__(self):
        roles = tuple(self.roles)
        object.__setattr__(self, "roles", roles)
        if not roles:
            raise ValueError("layout must contain at least one qubit")
        if len(set(roles)) != len(roles):
            raise ValueError("layout role assignments must be unique")
        cells = sorted({r.cell for r in roles})
        for cell in cells:
            slots = sorted(r.slot for r in roles if isinstance(r, BatteryQubit) and r.cell == cell)
            hubs = [r for r in roles if isinstance(r, HubQubit) and r.cell == cell]
            if slots != [1, 2] or len(hubs) != 1:
                raise ValueError(f"cell {cell} must have battery slots 1, 2 and one hub qubit")
        if cells != list(range(len(cells))):
            raise ValueError("cell indices must be contiguous starting at 0")

    @classmethod
    def single_cell(cls) -> "QubitLayout":
        return cls.cells(1)

    @classmethod
    def cells(cls, n_cells: int) -> "QubitLayout":
        """Default layout: per cell the qubit order is battery 1, battery 2, hub."""
        if n_cells < 1:
            raise ValueError("n_cells must be >= 1")
        roles = []
        for c in range(n_cells):
            roles += [BatteryQubit(c, 1), BatteryQubit(c, 2), HubQubit(c)]
        return cls(tuple(roles))

    @property
    def n_qubits(self) -> int:
        return len(self.roles)

    @property
    def n_cells(self) -> int:
        return len({r.cell for r in self.roles})

    def site_of(self, role: Role) -> int:
        return self.roles.index(role)

    def battery_site(self, cell: int, slot: int) -> int:
        return self.site_of(BatteryQubit(cell, slot))

    def hub_site(self, cell: int) -> int:
        return self.site_of(HubQubit(cell))

    @property
    def battery_sites(self) -> tuple:
        return tuple(i for i, r in enumerate(self.roles) if isinstance(r, BatteryQubit))

    @property
    def hub_sites(self) -> tuple:
        return tuple(i for i, r in enumerate(self.roles) if isinstance(r, HubQubit))


_PAULI_MATRICES = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(axis: str) -> Operator:
    """Single-qubit Pauli operator; ``axis`` is one of "i", "x", "y", "z"."""
    key = str(axis).lower()
    if key not in _PAULI_MATRICES:
        raise ValueError(f"unknown Pauli axis {axis!r}; expected one of i, x, y, z")
    return Operator(1, _PAULI_MATRICES[key], hermitian=True, unitary=True)


def identity(n_qubits: int) -> Operator:
    return Operator(n_qubits, np.eye(2**n_qubits), hermitian=True, unitary=True)


def tensor(*ops: Operator) -> Operator:
    """Tensor product of operators, first factor most significant."""
    if not ops:
        raise ValueError("tensor() requires at least one operator")
    mat = np.array([[1.0 + 0j]])
    n = 0
    herm = all(op.hermitian for op in ops)
    unit = all(op.unitary for op in ops)
    for op in ops:
        mat = np.kron(mat, op.matrix)
        n += op.n_qubits
    return Operator(n, mat, hermitian=herm, unitary=unit)


def ket(bits: str) -> PureState:
    """Computational basis state from a bit string, e.g. ket("010")."""
    if not bits or any(b not in "01" for b in bits):
        raise ValueError(f"invalid bit string {bits!r}")
    n = len(bits)
    amp = np.zeros(2**n, dtype=complex)
    amp[int(bits, 2)] = 1.0
    return PureState(n, amp)


def basis_index(bits: str) -> int:
    return int(bits, 2)


def embed(op: Operator, target_sites: Sequence[int], n_total: int) -> Operator:
    """Embed ``op`` so that its k-th tensor factor acts on ``target_sites[k]``.

    The remaining sites carry the identity; the result is expressed in the
    layout's big-endian basis order.
    """
    sites = [int(s) for s in target_sites]
    if len(sites) != op.n_qubits:
        raise ValueError(f"operator acts on {op.n_qubits} qubits but {len(sites)} sites given")
    if len(set(sites)) != len(sites):
        raise ValueError(f"duplicate site index in {sites}")
    if any(s < 0 or s >= n_total for s in sites):
        raise ValueError(f"site index out of range for {n_total} qubits: {sites}")
    rest = [q for q in range(n_total) if q not in sites]
    order = sites + rest  # tensor factor j of the kron below acts on qubit order[j]
    big = np.kron(op.matrix, np.eye(2 ** len(rest)))
    tensor_form = big.reshape((2,) * (2 * n_total))
    inv = np.argsort(order)
    axes = list(inv) + [n_total + int(i) for i in inv]
    mat = np.transpose(tensor_form, axes).reshape(2**n_total, 2**n_total)
    return Operator(n_total, mat, hermitian=op.hermitian, unitary=op.unitary)


def commutator(a: Operator, b: Operator) -> Operator:
    """[a, b] = ab - ba, exactly as written (no symmetrization)."""
    a._check_same_dim(b)
    return Operator(a.n_qubits, a.matrix @ b.matrix - b.matrix @ a.matrix)


def expectation(op: Operator, state: State):
    """<psi|A|psi> or tr(A rho).

    For a hermitian-flagged operator the imaginary part must be below 1e-10
    (raises otherwise) and the real part is returned as a float; otherwise the
    complex value is returned.
    """
    if isinstance(state, PureState):
        if state.dim != op.dim:
            raise ValueError(f"dimension mismatch: operator {op.dim}, state {state.dim}")
        value = complex(np.vdot(state.amplitudes, op.matrix @ state.amplitudes))
    elif isinstance(state, DensityMatrix):
        if state.dim != op.dim:
            raise ValueError(f"dimension mismatch: operator {op.dim}, state {state.dim}")
        value = complex(np.trace(op.matrix @ state.entries))
    else:
        raise TypeError(f"expected PureState or DensityMatrix, got {type(state).__name__}")
    if op.hermitian:
        if abs(value.imag) > 1e-10:
            raise ValueError(f"hermitian expectation has imaginary part {value.imag}")
        return float(value.real)
    return value


def eigh(op: Operator):
    """Eigendecomposition of a hermitian-flagged operator.

    Returns (eigenvalues ascending, orthonormal eigenvector columns).  Inside
    degenerate subspaces no particular eigenvector choice is promised; use
    eigenspace projectors downstream.
    """
    if not op.hermitian:
        raise ValueError("eigh requires a hermitian-flagged operator")
    w, v = np.linalg.eigh(op.matrix)
    return w, v


def eigenspace_projector(op: Operator, eigenvalue: float, atol: float = 1e-9) -> np.ndarray:
    """Projector onto the span of eigenvectors with eigenvalue near ``eigenvalue``."""
    w, v = eigh(op)
    cols = v[:, np.abs(w - eigenvalue) <= atol]
    if cols.shape[1] == 0:
        raise ValueError(f"no eigenvalue within {atol} of {eigenvalue}")
    return cols @ cols.conj().T


def partial_trace(state: State, keep: Iterable[int]) -> DensityMatrix:
    """Reduced density matrix on the (ascending) ``keep`` qubits."""
    keep = sorted(int(q) for q in keep)
    n = state.n_qubits
    if len(set(keep)) != len(keep) or any(q < 0 or q >= n for q in keep):
        raise ValueError(f"invalid keep set {keep} for {n} qubits")
    if isinstance(state, PureState):
        rho = np.outer(state.amplitudes, state.amplitudes.conj())
    else:
        rho = state.entries
    tensor_form = rho.reshape((2,) * (2 * n))
    row_labels = list(range(n))
    col_labels = [n + q if q in keep else q for q in range(n)]
    out_labels = keep + [n + q for q in keep]
    reduced = np.einsum(tensor_form, row_labels + col_labels, out_labels)
    d = 2 ** len(keep)
    return DensityMatrix(len(keep), reduced.reshape(d, d))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """T(a, b) = (1/2) ||a - b||_1."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.entries - b.entries
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())
