"""Discharge protocols and baselines for the Bell-pair battery cell.

The four Bell states of the battery pair map onto four discharge behaviors:
the singlet keeps its energy locked while coupled to the hub, the triplet
|01>+|10> releases all of it, and the remaining two release half.  Local
Pauli gates on a single battery qubit switch between these regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import evolve_static, sample_trajectory
from .model import (
    HamiltonianSet,
    SystemSpec,
    charge,
    ec_operator,
    hamiltonian_set,
    qubit_energy_term,
)
from .qalg import (
    DensityMatrix,
    Operator,
    PureState,
    embed,
    ket,
    pauli,
    tensor,
    trace_distance,
)

# Fraction of the stored cell energy each Bell state hands to the hub.
_TRANSFER_FRACTION = {(0, 0): 0.5, (0, 1): 0.5, (1, 0): 1.0, (1, 1): 0.0}


@dataclass(frozen=True)
class BellLabel:
    """Label (n, m) of the Bell state (|0 n> + (-1)^m |1 nbar>)/sqrt(2)."""

    n: int
    m: int

    def __post_init__(self):
        if self.n not in (0, 1) or self.m not in (0, 1):
            raise ValueError(f"Bell label bits must be 0 or 1, got ({self.n}, {self.m})")

    @classmethod
    def parse(cls, text: str) -> "BellLabel":
        text = text.strip()
        if len(text) != 2 or any(c not in "01" for c in text):
            raise ValueError(f"bell label must be two bits like '10', got {text!r}")
        return cls(int(text[0]), int(text[1]))


def bell_state(label: BellLabel) -> PureState:
    """The two-qubit Bell state for ``label``; (1, 1) is the singlet."""
    amp = np.zeros(4, dtype=complex)
    amp[label.n] = 1.0 / math.sqrt(2)
    amp[2 + (1 - label.n)] = (-1.0) ** label.m / math.sqrt(2)
    return PureState(2, amp)


def bell_with_empty_hub(label: BellLabel) -> PureState:
    """Battery prepared in a Bell state, hub in its empty state |0>."""
    return bell_state(label).tensor(ket("0"))


def discharge_time(spec: SystemSpec) -> float:
    """First time of full transfer for the fully releasing Bell state: pi/(4*sqrt(2)*J)."""
    return math.pi / (4.0 * math.sqrt(2.0) * spec.j_coupling)


def bell_charge_closed_form(label: BellLabel, t: float, spec: SystemSpec) -> float:
    """Closed-form hub charge 2*hbar*omega * g_nm * sin^2(2*sqrt(2)*J*t).

    g is 1/2 for the (0, m) states, 1 for (1, 0) and 0 for the singlet; the
    normalization is pinned by exact diagonalization of the three-qubit cell.
    """
    g = _TRANSFER_FRACTION[(label.n, label.m)]
    return spec.full_cell_energy * g * math.sin(2.0 * math.sqrt(2.0) * spec.j_coupling * t) ** 2


@dataclass(frozen=True)
class TrapReport:
    """Outcome of the energy-trapping check for one candidate state.

    A state is trapped when it is simultaneously an eigenstate of the coupling
    Hamiltonian and of the energy-current operator with eigenvalue zero; the
    Hamiltonians need not commute for this to hold.
    """

    is_h_eigenstate: bool
    h_eigenvalue: float
    ec_value: float
    trapped: bool
    residual_h: float
    residual_p: float


def trapping_check(h_int: Operator, hs: HamiltonianSet, psi: PureState,
                   tol: float = 1e-10) -> TrapReport:
    """Test whether ``psi`` keeps the battery energy locked under ``h_int``."""
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if h_int.dim != psi.dim:
        raise ValueError(f"dimension mismatch: operator {h_int.dim}, state {psi.dim}")
    amps = psi.amplitudes
    h_psi = h_int.matrix @ amps
    h_value = float(np.vdot(amps, h_psi).real)
    residual_h = float(np.linalg.norm(h_psi - h_value * amps))
    p_hat = ec_operator(hs.h0_hub, h_int)
    p_psi = p_hat.matrix @ amps
    ec_value = float(np.vdot(amps, p_psi).real)
    residual_p = float(np.linalg.norm(p_psi))
    is_eig = residual_h <= tol
    return TrapReport(
        is_h_eigenstate=is_eig,
        h_eigenvalue=h_value,
        ec_value=ec_value,
        trapped=is_eig and abs(ec_value) <= tol and residual_p <= tol,
        residual_h=residual_h,
        residual_p=residual_p,
    )


def blocking_state_from_constraints() -> DensityMatrix:
    """Battery state solved from the energy-blocking constraints.

    In the basis 1 <-> |00>, 2 <-> |01>, 3 <-> |10>, 4 <-> |11>, a battery
    density matrix (diagonal plus a real rho23 coherence) blocks all transfer
    iff:

      (1) rho11 == rho44                        (full stored energy available)
      (2) 2*rho11 + rho22 + rho33 + 2*rho23 == 0  (zero energy current)
      (3) unit trace
      (4) positivity, in particular rho22*rho33 >= rho23**2

    (2) and (3) give rho23 = -1/2; positivity then needs
    rho22*rho33 = (1 - 2*rho11 - rho33)*rho33 >= 1/4, whose maximum over
    rho33 is ((1 - 2*rho11)/2)**2, so rho11 <= 0 hence rho11 = 0, attained
    only at rho33 = 1/2.  The solution is returned (it is the singlet
    projector).
    """
    rho23 = -0.5                    # from 1 + 2*rho23 = 0 under (1)-(3)
    rho11 = 0.0                     # ((1 - 2*rho11)/2)**2 >= 1/4 with rho11 >= 0
    rho33 = (1.0 - 2.0 * rho11) / 2.0
    rho22 = 1.0 - 2.0 * rho11 - rho33
    rho44 = rho11
    mat = np.zeros((4, 4), dtype=complex)
    mat[0, 0] = rho11
    mat[1, 1] = rho22
    mat[2, 2] = rho33
    mat[3, 3] = rho44
    mat[1, 2] = mat[2, 1] = rho23
    return DensityMatrix(2, mat)


def blocking_conditions(rho_battery: DensityMatrix, spec: SystemSpec,
                        n_times: int = 32, ec_tol: float = 1e-9):
    """Evaluate the two blocking conditions for a battery density matrix.

    Returns (passes_available_energy, passes_zero_ec, max_abs_ec).  The
    available-energy condition is the explicit trace formula
    hbar*omega*(2 + rho11 - rho44) == 2*hbar*omega, i.e. rho11 == rho44;
    the zero-current condition is tested by direct simulation over one full
    transfer period.
    """
    diag = np.diagonal(rho_battery.entries).real
    ca = bool(abs(diag[0] - diag[3]) <= ec_tol)
    rho_full = np.kron(rho_battery.entries, np.diag([1.0, 0.0]).astype(complex))
    max_ec = float(np.abs(_ec_samples(rho_full[None, :, :], spec, n_times)).max())
    cb = bool(max_ec <= ec_tol * spec.omega * spec.j_coupling)
    return ca, cb, max_ec


def _ec_samples(rho_full_batch: np.ndarray, spec: SystemSpec, n_times: int) -> np.ndarray:
    """Energy current tr(P_hat(t) rho(t)) on a time grid, batched over states.

    Evolution runs in the frame co-moving with the bare Hamiltonian, where the
    coupling is constant; the current is frame independent.
    """
    hs = hamiltonian_set(spec)
    p_hat = ec_operator(hs.h0_hub, hs.h_charging)
    taud = discharge_time(spec)
    times = np.linspace(0.0, 2.0 * taud, n_times)
    w, v = np.linalg.eigh(hs.h_charging.matrix)
    heis = np.empty((n_times, 8, 8), dtype=complex)
    for k, t in enumerate(times):
        u = (v * np.exp(-1j * w * t)) @ v.conj().T
        heis[k] = u.conj().T @ p_hat.matrix @ u
    return np.einsum("kab,nba->nk", heis, rho_full_batch).real


@dataclass(frozen=True)
class UniquenessScanReport:
    """Result of scanning density matrices for further energy-blocking states."""

    constraint_trace_distance: float
    n_samples: int
    n_pass_available: int
    n_pass_zero_ec: int
    n_pass_both: int
    counterexamples: tuple
    n_unrestricted: int
    n_unrestricted_pass_both: int
    unrestricted_counterexamples: tuple
    seed: int

    @property
    def n_counterexamples(self) -> int:
        return len(self.counterexamples)


def trapping_uniqueness_scan(n_random: int, tol: float = 1e-3, *,
                             seed: int = 42, spec: SystemSpec | None = None,
                             n_times: int = 32, ec_tol: float = 1e-9,
                             n_unrestricted: int | None = None) -> UniquenessScanReport:
    """Search the battery-state space for energy-blocking states.

    Samples ``n_random`` states from the restricted family (diagonal plus a
    real rho23 coherence), tests the available-energy and zero-current
    conditions, and records any state passing both that is farther than
    ``tol`` in trace distance from the singlet projector.  An additional
    unrestricted random-density-matrix scan is run and reported rather than
    asserted empty.
    """
    if n_random < 1:
        raise ValueError(f"n_random must be >= 1, got {n_random}")
    spec = spec or SystemSpec()
    rng = np.random.default_rng(seed)
    singlet = bell_state(BellLabel(1, 1)).density()

    solved = blocking_state_from_constraints()
    solved_distance = trace_distance(solved, singlet)

    # Restricted family: Dirichlet diagonal, real rho23 bounded by positivity.
    diags = rng.dirichlet(np.ones(4), size=n_random)
    u = rng.uniform(-1.0, 1.0, size=n_random)
    rho23 = u * np.sqrt(diags[:, 1] * diags[:, 2])
    batch = np.zeros((n_random, 4, 4), dtype=complex)
    batch[:, 0, 0] = diags[:, 0]
    batch[:, 1, 1] = diags[:, 1]
    batch[:, 2, 2] = diags[:, 2]
    batch[:, 3, 3] = diags[:, 3]
    batch[:, 1, 2] = batch[:, 2, 1] = rho23

    def _scan(rho_batch: np.ndarray):
        empty = np.diag([1.0, 0.0]).astype(complex)
        full = np.einsum("nab,cd->nacbd", rho_batch, empty).reshape(-1, 8, 8)
        currents = _ec_samples(full, spec, n_times)
        pass_cb = np.abs(currents).max(axis=1) <= ec_tol * spec.omega * spec.j_coupling
        diag = np.einsum("naa->na", rho_batch).real
        pass_ca = np.abs(diag[:, 0] - diag[:, 3]) <= ec_tol
        both = pass_ca & pass_cb
        counters = []
        for idx in np.nonzero(both)[0]:
            dist = trace_distance(DensityMatrix(2, rho_batch[idx]), singlet)
            if dist > tol:
                counters.append((int(idx), float(dist)))
        return int(pass_ca.sum()), int(pass_cb.sum()), int(both.sum()), tuple(counters)

    n_ca, n_cb, n_both, counters = _scan(batch)

    # Unrestricted scan: Ginibre-random density matrices.
    n_unres = n_random if n_unrestricted is None else n_unrestricted
    g = rng.normal(size=(n_unres, 4, 4)) + 1j * rng.normal(size=(n_unres, 4, 4))
    wish = g @ g.conj().transpose(0, 2, 1)
    wish /= np.einsum("naa->n", wish).real[:, None, None]
    _, _, n_unres_both, unres_counters = _scan(wish)

    return UniquenessScanReport(
        constraint_trace_distance=float(solved_distance),
        n_samples=n_random,
        n_pass_available=n_ca,
        n_pass_zero_ec=n_cb,
        n_pass_both=n_both,
        counterexamples=counters,
        n_unrestricted=n_unres,
        n_unrestricted_pass_both=n_unres_both,
        unrestricted_counterexamples=unres_counters,
        seed=seed,
    )


class SwitchGate(Enum):
    """Local Pauli gates that unblock a stored cell.

    A bit flip on either battery qubit converts the singlet into a
    half-release Bell state; a phase flip converts it into the full-release
    one.  Neither changes the energy stored in the battery.
    """

    HALF_ON_QUBIT1 = ("x", 0)
    HALF_ON_QUBIT2 = ("x", 1)
    FULL_ON_QUBIT1 = ("z", 0)
    FULL_ON_QUBIT2 = ("z", 1)

    @classmethod
    def from_kind(cls, kind: str, qubit: int) -> "SwitchGate":
        table = {("half", 1): cls.HALF_ON_QUBIT1, ("half", 2): cls.HALF_ON_QUBIT2,
                 ("full", 1): cls.FULL_ON_QUBIT1, ("full", 2): cls.FULL_ON_QUBIT2}
        try:
            return table[(kind, qubit)]
        except KeyError:
            raise ValueError(f"unknown switch gate kind={kind!r} qubit={qubit}") from None


def switch_gate(kind: SwitchGate, psi: PureState) -> PureState:
    """Apply the chosen gate to one battery qubit of a cell + hub state."""
    if psi.n_qubits != 3:
        raise ValueError(f"switch gates act on a 3-qubit cell + hub state, got {psi.n_qubits}")
    axis, site = kind.value
    gate = embed(pauli(axis), [site], 3)
    return PureState(3, gate.matrix @ psi.amplitudes)


@dataclass(frozen=True)
class SeparableParams:
    """Product battery state (a1|0> + b1 e^{i t1}|1>) x (a2|0> + b2 e^{i t2}|1>).

    The amplitudes b1, b2 lie in [0, 1]; a_n = sqrt(1 - b_n^2) is real.
    """

    beta1: float
    beta2: float
    theta1: float = 0.0
    theta2: float = 0.0

    def __post_init__(self):
        for name, b in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not 0.0 <= b <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {b}")

    @property
    def alpha1(self) -> float:
        return math.sqrt(1.0 - self.beta1**2)

    @property
    def alpha2(self) -> float:
        return math.sqrt(1.0 - self.beta2**2)


def separable_state(p: SeparableParams) -> PureState:
    one = np.array([p.alpha1, p.beta1 * np.exp(1j * p.theta1)])
    two = np.array([p.alpha2, p.beta2 * np.exp(1j * p.theta2)])
    return PureState(2, np.kron(one, two))


def separable_max_charge(p: SeparableParams, spec: SystemSpec = SystemSpec()) -> float:
    """Peak hub charge for a product battery state, reached at the usual
    transfer time pi/(4*sqrt(2)*J):

        E0 * [ b1 b2 a1 a2 cos(t1 - t2) + (b1^2 + b2^2)/2 ]

    with E0 = 2*hbar*omega.  It reaches E0 iff b1 = b2 = 1.
    """
    cross = p.beta1 * p.beta2 * p.alpha1 * p.alpha2 * math.cos(p.theta1 - p.theta2)
    return spec.full_cell_energy * (cross + (p.beta1**2 + p.beta2**2) / 2.0)


@dataclass(frozen=True, eq=False)
class SeparableSweepResult:
    """Phase-optimized peak-charge surface over the (beta1, beta2) grid."""

    beta_grid: np.ndarray
    surface_over_e0: np.ndarray
    argmax: tuple
    max_over_e0: float


def separable_sweep(grid_n: int, spec: SystemSpec = SystemSpec(), *,
                    seed: int = 42, n_spot_checks: int = 24) -> SeparableSweepResult:
    """Scan the phase-optimized peak charge over [0, 1]^2.

    The optimum over the relative phase is at theta1 == theta2.  A random
    subsample of grid points is cross-checked against direct three-qubit
    simulation; disagreement beyond 1e-9 raises.
    """
    if grid_n < 2:
        raise ValueError(f"grid_n must be >= 2, got {grid_n}")
    betas = np.linspace(0.0, 1.0, grid_n)
    b1, b2 = np.meshgrid(betas, betas, indexing="ij")
    cross = b1 * b2 * np.sqrt((1.0 - b1**2) * (1.0 - b2**2))
    surface = cross + (b1**2 + b2**2) / 2.0

    hs = hamiltonian_set(spec)
    taud = discharge_time(spec)
    rng = np.random.default_rng(seed)
    flat = rng.choice(grid_n * grid_n, size=min(n_spot_checks, grid_n * grid_n), replace=False)
    for idx in flat:
        i, j = divmod(int(idx), grid_n)
        state = separable_state(SeparableParams(betas[i], betas[j])).tensor(ket("0"))
        simulated = charge(evolve_static(hs.h_charging, state, taud), hs)
        if abs(simulated - surface[i, j] * spec.full_cell_energy) > 1e-9:
            raise RuntimeError(
                f"separable closed form disagrees with simulation at beta=({betas[i]}, {betas[j]})")

    best = int(np.argmax(surface))
    i, j = divmod(best, grid_n)
    return SeparableSweepResult(
        beta_grid=betas,
        surface_over_e0=surface,
        argmax=(float(betas[i]), float(betas[j])),
        max_over_e0=float(surface[i, j]),
    )


def single_particle_transfer_time(spec: SystemSpec) -> float:
    """Full transfer time pi/(4J) for a one-qubit battery, slower than the
    Bell cell by a factor sqrt(2)."""
    return math.pi / (4.0 * spec.j_coupling)


def single_particle_baseline(t: float, spec: SystemSpec) -> float:
    """Hub charge 2*hbar*omega*sin^2(2Jt) for a one-qubit battery in |1>
    coupled to the hub by one XY term."""
    return spec.full_cell_energy * math.sin(2.0 * spec.j_coupling * t) ** 2


def single_particle_system(spec: SystemSpec):
    """Two-qubit model (battery, hub) for the single-particle baseline.

    Returns (hamiltonians, coupling-frame ec operator); the battery qubit is
    site 0, the hub site 1.
    """
    term = qubit_energy_term(spec.omega)
    h_b = embed(term, [0], 2)
    h_a = embed(term, [1], 2)
    xy = tensor(pauli("x"), pauli("x")) + tensor(pauli("y"), pauli("y"))
    h_int = spec.j_coupling * xy
    hs = HamiltonianSet(h0_battery=h_b, h0_hub=h_a, h0_total=h_b + h_a,
                        h_charging=h_int, e_empty=-spec.omega)
    return hs, ec_operator(h_a, h_int)


def single_particle_trajectory(spec: SystemSpec, t_final: float,
                               n_samples: int) -> "TimeSeries":
    """Simulated charge/current channels for the one-qubit battery."""
    hs, p_hat = single_particle_system(spec)
    psi0 = ket("10")
    return sample_trajectory(hs.h_charging, psi0, t_final, n_samples, hs, p_hat)


class CellAction(Enum):
    """What one cell of a multi-cell battery does during a transfer window."""

    HOLD = "hold"
    HALF = "half"
    FULL = "full"

    @classmethod
    def parse(cls, token: str) -> "CellAction":
        # single letters are case sensitive: h = hold, H = half, f/F = full
        short = {"h": cls.HOLD, "H": cls.HALF, "f": cls.FULL, "F": cls.FULL}
        if token in short:
            return short[token]
        try:
            return cls(token.lower())
        except ValueError:
            raise ValueError(
                f"unknown cell action {token!r}; use hold/half/full or h/H/f") from None


@dataclass(frozen=True)
class NCellPlan:
    """Per-cell actions for an independent-cell battery bank.

    Cells are uncoupled, so each cell is simulated as its own three-qubit
    block; the transferable quantum is half a cell, hbar*omega.
    """

    actions: tuple

    def __post_init__(self):
        actions = tuple(self.actions)
        object.__setattr__(self, "actions", actions)
        if not actions:
            raise ValueError("plan must contain at least one cell")
        if not all(isinstance(a, CellAction) for a in actions):
            raise ValueError("plan entries must be CellAction values")

    @classmethod
    def parse(cls, text: str) -> "NCellPlan":
        return cls(tuple(CellAction.parse(tok.strip()) for tok in text.split(",") if tok.strip()))

    @property
    def n_cells(self) -> int:
        return len(self.actions)


_GATE_FOR_ACTION = {CellAction.HALF: SwitchGate.HALF_ON_QUBIT1,
                    CellAction.FULL: SwitchGate.FULL_ON_QUBIT1}


def cell_state_after_action(action: CellAction) -> PureState:
    """Stored cell (singlet battery, empty hub), with the action's gate applied."""
    psi = bell_with_empty_hub(BellLabel(1, 1))
    if action is CellAction.HOLD:
        return psi
    return switch_gate(_GATE_FOR_ACTION[action], psi)


def ncell_plan_energy(plan: NCellPlan, spec: SystemSpec):
    """Energy delivered by each cell at the transfer time, plus the total.

    Each cell is simulated independently as a three-qubit block.  Holds
    deliver nothing, half actions one quantum (hbar*omega), full actions two.
    """
    cell_spec = SystemSpec(spec.omega, spec.j_coupling)
    hs = hamiltonian_set(cell_spec)
    taud = discharge_time(cell_spec)
    per_cell = []
    for action in plan.actions:
        psi = cell_state_after_action(action)
        final = evolve_static(hs.h_charging, psi, taud)
        per_cell.append(charge(final, hs))
    return float(sum(per_cell)), tuple(float(c) for c in per_cell)
