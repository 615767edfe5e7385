"""qbat: energy-current simulations of Bell-pair quantum batteries.

A battery cell is a pair of qubits whose singlet state keeps its energy
locked even while XY-coupled to a consumption hub; local Pauli gates release
half or all of it, and a parity-protected adiabatic drive empties the cell
with no energy backflow.  The package builds the operators, integrates the
dynamics, and ships its guarantees as a runnable acceptance suite
(``qbat selftest``).
"""

from .adiabatic import (
    AdiabaticDecomposition,
    AdiabaticSpec,
    DischargeReport,
    ParityCheckReport,
    Schedule,
    SweepPoint,
    adiabatic_decomposition,
    adiabatic_ec,
    adiabatic_rate_prediction,
    build_ht,
    min_sector_gap,
    parity_check,
    parity_operator,
    run_discharge,
    sweep_tau,
)
from .dynamics import (
    SteppingConfig,
    TimeSeries,
    collective_dephasing_fixpoint,
    evolve_static,
    evolve_timedep,
    propagator,
    sample_trajectory,
    to_interaction_picture,
)
from .model import (
    ChargeRecord,
    HamiltonianSet,
    SystemSpec,
    bare_hamiltonian,
    charge,
    charging_hamiltonian,
    ec_operator,
    ergotropy,
    hamiltonian_set,
    passive_state,
    qubit_energy_term,
)
from .protocols import (
    BellLabel,
    CellAction,
    NCellPlan,
    SeparableParams,
    SwitchGate,
    TrapReport,
    UniquenessScanReport,
    bell_charge_closed_form,
    bell_state,
    bell_with_empty_hub,
    discharge_time,
    ncell_plan_energy,
    separable_max_charge,
    separable_state,
    separable_sweep,
    single_particle_baseline,
    single_particle_trajectory,
    single_particle_transfer_time,
    switch_gate,
    trapping_check,
    trapping_uniqueness_scan,
)
from .qalg import (
    BatteryQubit,
    DensityMatrix,
    HubQubit,
    Operator,
    PureState,
    QubitLayout,
    commutator,
    eigh,
    embed,
    expectation,
    ket,
    partial_trace,
    pauli,
    tensor,
    trace_distance,
)

__version__ = "0.1.0"
