"""Time evolution engines.

Constant Hamiltonians are propagated exactly through their eigendecomposition.
Time-dependent ones use exponential-midpoint stepping: each step applies the
exact exponential of the Hamiltonian sampled at the interval midpoint, so
every step is exactly unitary and the global error is second order in the
step size (exact for constant Hamiltonians).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .model import ChargeRecord, HamiltonianSet
from .qalg import DensityMatrix, Operator, PureState

HofS = Callable[[float], Operator]

_CHUNK = 8192  # batched-eigh chunk size for long stepped evolutions


@dataclass(frozen=True)
class SteppingConfig:
    """Step density for the exponential-midpoint integrator.

    ``steps_per_unit_jt`` counts steps per unit of dimensionless Jt.
    """

    steps_per_unit_jt: int = 256
    method: str = "exponential-midpoint"

    def __post_init__(self):
        if self.steps_per_unit_jt < 16:
            raise ValueError(f"steps_per_unit_jt must be >= 16, got {self.steps_per_unit_jt}")
        if self.method != "exponential-midpoint":
            raise ValueError(f"unsupported stepping method {self.method!r}")

    def n_steps(self, duration_jt: float) -> int:
        return max(1, math.ceil(self.steps_per_unit_jt * duration_jt))


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled trajectory data.

    ``times`` are in units 1/J, ``charge`` in hbar*omega, ``ec`` in
    hbar*omega*J.  ``extra`` holds further channels (fidelities, populations)
    keyed by label; every channel has the length of ``times``.
    """

    times: np.ndarray
    charge: np.ndarray
    ec: np.ndarray
    extra: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "charge", np.asarray(self.charge, dtype=float))
        object.__setattr__(self, "ec", np.asarray(self.ec, dtype=float))
        if times.ndim != 1 or times.size < 1:
            raise ValueError("times must be a non-empty 1-d array")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        for name, channel in [("charge", self.charge), ("ec", self.ec)] + list(self.extra.items()):
            if np.asarray(channel).shape != times.shape:
                raise ValueError(f"channel {name!r} does not match the length of times")

    @property
    def n_samples(self) -> int:
        return self.times.size

    def channel(self, name: str) -> np.ndarray:
        if name == "charge":
            return self.charge
        if name == "ec":
            return self.ec
        return np.asarray(self.extra[name])

    def records(self) -> list:
        """The core channels as a list of ChargeRecord rows."""
        return [ChargeRecord(time=float(t), charge=float(c), ec=float(p))
                for t, c, p in zip(self.times, self.charge, self.ec)]


def _require_hermitian(h: Operator, context: str) -> None:
    if not h.hermitian:
        raise ValueError(f"{context} requires a hermitian-flagged Hamiltonian")


def propagator(h: Operator, t: float) -> Operator:
    """exp(-i H t) computed through the eigendecomposition of H."""
    _require_hermitian(h, "propagator")
    w, v = np.linalg.eigh(h.matrix)
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    return Operator(h.n_qubits, u, unitary=True)


def evolve_static(h: Operator, psi0: PureState, t: float) -> PureState:
    """exp(-i H t)|psi0> for constant H, exact to machine precision."""
    _require_hermitian(h, "evolve_static")
    if h.dim != psi0.dim:
        raise ValueError(f"dimension mismatch: operator {h.dim}, state {psi0.dim}")
    w, v = np.linalg.eigh(h.matrix)
    amps = v @ (np.exp(-1j * w * t) * (v.conj().T @ psi0.amplitudes))
    return PureState(psi0.n_qubits, amps)


def _midpoint_states(h_of: HofS, psi0: PureState, tau: float, n_steps: int,
                     record_steps) -> np.ndarray:
    """Run the midpoint stepper, returning states after the listed step counts.

    ``record_steps`` is an increasing sequence starting at 0 (the initial
    state) and ending at ``n_steps``.
    """
    dt = tau / n_steps
    psi = psi0.amplitudes.copy()
    recorded = [psi.copy()]
    want = list(record_steps)
    if want[0] == 0:
        want = want[1:]
    next_idx = 0
    done = 0
    while done < n_steps:
        m = min(_CHUNK, n_steps - done)
        mids = (done + np.arange(m) + 0.5) / n_steps
        stack = np.empty((m, psi.size, psi.size), dtype=complex)
        for k, s in enumerate(mids):
            h = h_of(float(s))
            _require_hermitian(h, "evolve_timedep sample")
            stack[k] = h.matrix
        w, v = np.linalg.eigh(stack)
        phases = np.exp(-1j * w * dt)
        for k in range(m):
            psi = v[k] @ (phases[k] * (v[k].conj().T @ psi))
            step = done + k + 1
            while next_idx < len(want) and want[next_idx] == step:
                recorded.append(psi.copy())
                next_idx += 1
        done += m
    return np.array(recorded)


def evolve_timedep(h_of: HofS, psi0: PureState, tau: float,
                   cfg: SteppingConfig = SteppingConfig(),
                   n_steps: int | None = None) -> PureState:
    """Propagate under a Hamiltonian given as a function of s = t/tau in [0, 1].

    ``tau`` is interpreted in the unit system in which the Hamiltonian entries
    are O(1) (per unit Jt for couplings carrying J); callers with other scales
    pass ``n_steps`` explicitly.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if tau == 0:
        return psi0
    n = n_steps if n_steps is not None else cfg.n_steps(tau)
    if n < 1:
        raise ValueError(f"n_steps must be >= 1, got {n}")
    states = _midpoint_states(h_of, psi0, tau, n, [0, n])
    return PureState(psi0.n_qubits, states[-1])


def to_interaction_picture(h0: Operator, obj, t: float):
    """Rotate a state or conjugate an operator into the frame co-moving with h0.

    States map as exp(+i h0 t)|psi>, operators as exp(+i h0 t) A exp(-i h0 t).
    Calling again with ``-t`` undoes the transform.
    """
    _require_hermitian(h0, "to_interaction_picture")
    w, v = np.linalg.eigh(h0.matrix)
    zdag = (v * np.exp(1j * w * t)) @ v.conj().T
    if isinstance(obj, PureState):
        return PureState(obj.n_qubits, zdag @ obj.amplitudes)
    if isinstance(obj, DensityMatrix):
        return DensityMatrix(obj.n_qubits, zdag @ obj.entries @ zdag.conj().T)
    if isinstance(obj, Operator):
        return Operator(obj.n_qubits, zdag @ obj.matrix @ zdag.conj().T,
                        hermitian=obj.hermitian, unitary=obj.unitary)
    raise TypeError(f"cannot transform object of type {type(obj).__name__}")


def _observable_rows(states: np.ndarray, op: Operator) -> np.ndarray:
    """Real expectation of a hermitian op over a (n_samples, dim) state stack."""
    vals = np.einsum("ki,ij,kj->k", states.conj(), op.matrix, states)
    return vals.real


def sample_trajectory(h, psi0: PureState, t_final: float, n_samples: int,
                      hs: HamiltonianSet, p_hat: Operator,
                      cfg: SteppingConfig = SteppingConfig()) -> TimeSeries:
    """Uniformly sampled charge and energy-current channels along an evolution.

    ``h`` is either a constant Operator or a callable s in [0, 1] -> Operator.
    The extra channel ``fidelity_initial`` records |<psi0|psi(t)>|^2.
    """
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    if not t_final > 0:
        raise ValueError(f"t_final must be > 0, got {t_final}")
    if not p_hat.hermitian:
        raise ValueError("p_hat must be hermitian-flagged")
    times = np.linspace(0.0, t_final, n_samples)
    if isinstance(h, Operator):
        _require_hermitian(h, "sample_trajectory")
        w, v = np.linalg.eigh(h.matrix)
        weights = v.conj().T @ psi0.amplitudes
        states = (v @ (np.exp(-1j * np.outer(w, times)) * weights[:, None])).T
    else:
        per_segment = max(1, math.ceil(cfg.n_steps(t_final) / (n_samples - 1)))
        n_steps = per_segment * (n_samples - 1)
        record = list(range(0, n_steps + 1, per_segment))
        states = _midpoint_states(h, psi0, t_final, n_steps, record)
    charge_channel = _observable_rows(states, hs.h0_hub) - hs.e_empty
    ec_channel = _observable_rows(states, p_hat)
    fidelity = np.abs(states @ psi0.amplitudes.conj()) ** 2
    return TimeSeries(times, charge_channel, ec_channel,
                      extra={"fidelity_initial": fidelity})


def collective_dephasing_fixpoint(rho: DensityMatrix, gamma: float, t: float) -> DensityMatrix:
    """Collective pure dephasing of a two-qubit battery state.

    The channel is the Lindblad evolution generated by the single collective
    jump operator L = sqrt(gamma) * (z_B1 + z_B2), integrated exactly in the
    collective-z eigenbasis: a coherence between collective-z eigenvalues
    m and m' decays as exp(-gamma * t * (m - m')**2 / 2).  States supported on
    the zero-eigenvalue subspace span{|01>, |10>} are left untouched.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if rho.n_qubits != 2:
        raise ValueError(f"expected a two-qubit battery state, got {rho.n_qubits} qubits")
    m = np.array([2.0, 0.0, 0.0, -2.0])  # collective z of |00>, |01>, |10>, |11>
    decay = np.exp(-gamma * t * np.subtract.outer(m, m) ** 2 / 2.0)
    return DensityMatrix(2, rho.entries * decay)
