"""Command line front end.

Every subcommand emits either a sampled trajectory or a report as CSV or
JSON with reproducible formatting; physical parameters come from flags, an
optional ``qbat.json`` config file, or their defaults (flags win).  Exit
codes: 0 success, 2 parameter/usage error, 1 internal failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import acceptance, adiabatic, dynamics, model, protocols
from ._io import write_rows
from .adiabatic import AdiabaticSpec, Schedule
from .model import SystemSpec, hamiltonian_set
from .protocols import (
    BellLabel,
    NCellPlan,
    SwitchGate,
    bell_with_empty_hub,
    discharge_time,
    separable_sweep,
    single_particle_trajectory,
    switch_gate,
    trapping_check,
    trapping_uniqueness_scan,
)

CONFIG_FILE = "qbat.json"
_CONFIG_FIELDS = ("omega", "j_coupling", "seed", "format", "output")


@dataclass(frozen=True)
class RunConfig:
    """Run-wide physical parameters and output selection."""

    omega: float = 1.0
    j_coupling: float = 1.0
    seed: int = 42
    format: str = "csv"
    output: str = "-"

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if not self.j_coupling > 0:
            raise ValueError(f"j_coupling must be > 0, got {self.j_coupling}")
        if self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")
        if self.format not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {self.format!r}")

    @property
    def spec(self) -> SystemSpec:
        return SystemSpec(self.omega, self.j_coupling)


def _load_config_file(path: str | None) -> dict:
    chosen = path or CONFIG_FILE
    if path is None and not os.path.exists(chosen):
        return {}
    with open(chosen, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise ValueError(f"config file {chosen} must hold a JSON object")
    for key in data:
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"unknown config field {key!r} in {chosen}")
    return data


def _resolve_config(args) -> RunConfig:
    values = {"omega": 1.0, "j_coupling": 1.0, "seed": 42, "format": "csv", "output": "-"}
    values.update(_load_config_file(args.config))
    for field_name, flag in (("omega", "omega"), ("j_coupling", "j"), ("seed", "seed"),
                             ("format", "format"), ("output", "output")):
        given = getattr(args, flag, None)
        if given is not None:
            values[field_name] = given
    values["omega"] = float(values["omega"])
    values["j_coupling"] = float(values["j_coupling"])
    values["seed"] = int(values["seed"])
    return RunConfig(**values)


def _max_workers() -> int:
    raw = os.environ.get("QBAT_THREADS")
    if raw is None:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        raise ValueError(f"QBAT_THREADS must be a positive integer, got {raw!r}") from None
    if workers < 1:
        raise ValueError(f"QBAT_THREADS must be a positive integer, got {workers}")
    return workers


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--omega", type=float, default=None,
                        help="qubit splitting (default 1.0)")
    common.add_argument("--j", type=float, default=None, dest="j",
                        help="XY coupling strength (default 1.0)")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for randomized scans (default 42)")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output format (default csv)")
    common.add_argument("--output", default=None,
                        help="output path, '-' for stdout (default '-')")
    common.add_argument("--config", default=None,
                        help=f"config file path (default ./{CONFIG_FILE} when present)")

    parser = argparse.ArgumentParser(
        prog="qbat", description="Bell-pair quantum battery simulations")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discharge", parents=[common],
                       help="discharge of one cell prepared in a Bell state")
    p.add_argument("--bell", required=True, choices=("00", "01", "10", "11"),
                   help="Bell label nm of the initial battery state")
    p.add_argument("--gate", choices=("half", "full"), default=None,
                   help="switch gate applied before the evolution")
    p.add_argument("--gate-qubit", type=int, choices=(1, 2), default=1,
                   help="battery qubit the gate acts on (default 1)")
    p.add_argument("--tmax", type=float, default=None,
                   help="final time in units of 1/J (default two transfer times)")
    p.add_argument("--samples", type=int, default=257)

    p = sub.add_parser("trap-check", parents=[common],
                       help="trapping report for the Bell states and the empty cell")
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("trap-scan", parents=[common],
                       help="scan density matrices for further blocking states")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-3,
                   help="trace-distance tolerance for counterexamples")

    p = sub.add_parser("separable", parents=[common],
                       help="peak charge surface for product battery states")
    p.add_argument("--grid", type=int, default=101)

    p = sub.add_parser("single-particle", parents=[common],
                       help="one-qubit battery baseline")
    p.add_argument("--tmax", type=float, default=None,
                   help="final time in units of 1/J (default two transfer times)")
    p.add_argument("--samples", type=int, default=257)

    p = sub.add_parser("ncell", parents=[common],
                       help="independent-cell battery bank")
    p.add_argument("--plan", required=True,
                   help="comma list of cell actions: hold/half/full or h/H/f")

    p = sub.add_parser("adiabatic", parents=[common],
                       help="one adiabatic discharge run")
    p.add_argument("--jtau", type=float, required=True,
                   help="dimensionless run time J*tau")
    p.add_argument("--schedule", choices=[s.value for s in Schedule], default="linear")
    p.add_argument("--samples", type=int, default=513)

    p = sub.add_parser("sweep-tau", parents=[common],
                       help="final charge against J*tau for all schedules")
    p.add_argument("--from", dest="jtau_from", type=float, required=True)
    p.add_argument("--to", dest="jtau_to", type=float, required=True)
    p.add_argument("--points", type=int, required=True)

    sub.add_parser("selftest", parents=[common],
                   help="run the acceptance suite and print one line per criterion")
    return parser


# ----------------------------------------------------------------------
# Subcommand handlers; each returns the rows to emit.


def _cmd_discharge(cfg: RunConfig, args) -> list:
    spec = cfg.spec
    hs = hamiltonian_set(spec)
    p_hat = model.ec_operator(hs.h0_hub, hs.h_charging)
    psi0 = bell_with_empty_hub(BellLabel.parse(args.bell))
    if args.gate is not None:
        psi0 = switch_gate(SwitchGate.from_kind(args.gate, args.gate_qubit), psi0)
    tmax_jt = args.tmax if args.tmax is not None else 2 * discharge_time(spec) * spec.j_coupling
    if tmax_jt <= 0:
        raise ValueError(f"tmax must be > 0, got {tmax_jt}")
    if args.samples < 2:
        raise ValueError(f"samples must be >= 2, got {args.samples}")
    series = dynamics.sample_trajectory(hs.h_charging, psi0, tmax_jt / spec.j_coupling,
                                        args.samples, hs, p_hat)
    e0 = spec.full_cell_energy
    unit_p = spec.omega * spec.j_coupling
    return [{"t_J": t * spec.j_coupling, "charge_over_E0": c / e0, "ec_hbar_omega_J": p / unit_p}
            for t, c, p in zip(series.times, series.charge, series.ec)]


def _cmd_trap_check(cfg: RunConfig, args) -> list:
    spec = cfg.spec
    hs = hamiltonian_set(spec)
    states = [(f"bell_{n}{m}", bell_with_empty_hub(BellLabel(n, m)))
              for n in (0, 1) for m in (0, 1)]
    from .qalg import ket
    states.append(("empty_000", ket("000")))
    rows = []
    for label, psi in states:
        report = trapping_check(hs.h_charging, hs, psi, tol=args.tol)
        rows.append({
            "state": label,
            "is_h_eigenstate": report.is_h_eigenstate,
            "h_eigenvalue_hbar_J": report.h_eigenvalue / spec.j_coupling,
            "ec_value_hbar_omega_J": report.ec_value / (spec.omega * spec.j_coupling),
            "residual_h_hbar_J": report.residual_h / spec.j_coupling,
            "residual_p_hbar_omega_J": report.residual_p / (spec.omega * spec.j_coupling),
            "trapped": report.trapped,
        })
    return rows


def _cmd_trap_scan(cfg: RunConfig, args) -> list:
    if args.samples < 1:
        raise ValueError(f"samples must be >= 1, got {args.samples}")
    report = trapping_uniqueness_scan(args.samples, tol=args.tol, seed=cfg.seed,
                                      spec=cfg.spec)
    return [
        {"metric": "constraint_trace_distance", "value": report.constraint_trace_distance},
        {"metric": "n_samples", "value": report.n_samples},
        {"metric": "n_pass_available_energy", "value": report.n_pass_available},
        {"metric": "n_pass_zero_ec", "value": report.n_pass_zero_ec},
        {"metric": "n_pass_both", "value": report.n_pass_both},
        {"metric": "n_counterexamples", "value": report.n_counterexamples},
        {"metric": "n_unrestricted", "value": report.n_unrestricted},
        {"metric": "n_unrestricted_pass_both", "value": report.n_unrestricted_pass_both},
        {"metric": "n_unrestricted_counterexamples",
         "value": len(report.unrestricted_counterexamples)},
        {"metric": "seed", "value": report.seed},
    ]


def _cmd_separable(cfg: RunConfig, args) -> list:
    if args.grid < 2:
        raise ValueError(f"grid must be >= 2, got {args.grid}")
    sweep = separable_sweep(args.grid, cfg.spec, seed=cfg.seed)
    rows = []
    for i, b1 in enumerate(sweep.beta_grid):
        for j, b2 in enumerate(sweep.beta_grid):
            rows.append({"beta1": float(b1), "beta2": float(b2),
                         "cmax_over_E0": float(sweep.surface_over_e0[i, j])})
    return rows


def _cmd_single_particle(cfg: RunConfig, args) -> list:
    spec = cfg.spec
    t_sp = protocols.single_particle_transfer_time(spec)
    tmax_jt = args.tmax if args.tmax is not None else 2 * t_sp * spec.j_coupling
    if tmax_jt <= 0:
        raise ValueError(f"tmax must be > 0, got {tmax_jt}")
    if args.samples < 2:
        raise ValueError(f"samples must be >= 2, got {args.samples}")
    series = single_particle_trajectory(spec, tmax_jt / spec.j_coupling, args.samples)
    e0 = spec.full_cell_energy
    unit_p = spec.omega * spec.j_coupling
    return [{
        "t_J": t * spec.j_coupling,
        "charge_over_E0": c / e0,
        "ec_hbar_omega_J": p / unit_p,
        "closed_form_over_E0": protocols.single_particle_baseline(t, spec) / e0,
    } for t, c, p in zip(series.times, series.charge, series.ec)]


def _cmd_ncell(cfg: RunConfig, args) -> list:
    plan = NCellPlan.parse(args.plan)
    total, per_cell = protocols.ncell_plan_energy(plan, cfg.spec)
    rows = [{"cell": str(i), "action": action.value, "energy_hbar_omega": energy / cfg.omega}
            for i, (action, energy) in enumerate(zip(plan.actions, per_cell))]
    rows.append({"cell": "total", "action": "", "energy_hbar_omega": total / cfg.omega})
    return rows


def _cmd_adiabatic(cfg: RunConfig, args) -> list:
    if args.jtau <= 0:
        raise ValueError(f"jtau must be > 0, got {args.jtau}")
    if args.samples < 2:
        raise ValueError(f"samples must be >= 2, got {args.samples}")
    spec = AdiabaticSpec(tau=args.jtau / cfg.j_coupling, j_coupling=cfg.j_coupling,
                         schedule=Schedule(args.schedule))
    report = adiabatic.run_discharge(spec, omega=cfg.omega, n_samples=args.samples)
    series = report.series
    e0 = 2 * cfg.omega
    unit_p = cfg.omega * cfg.j_coupling
    return [{
        "t_J": t * cfg.j_coupling,
        "charge_over_E0": c / e0,
        "ec_hbar_omega_J": p / unit_p,
        "fidelity_target": f,
        "leakage_forbidden": leak,
        "parity": par,
    } for t, c, p, f, leak, par in zip(
        series.times, series.charge, series.ec, series.extra["fidelity_target"],
        series.extra["leakage_forbidden"], series.extra["parity"])]


def _cmd_sweep_tau(cfg: RunConfig, args) -> list:
    if args.points < 1:
        raise ValueError(f"points must be >= 1, got {args.points}")
    if args.jtau_from < 0 or args.jtau_to < args.jtau_from:
        raise ValueError("sweep range requires 0 <= from <= to")
    jtaus = np.linspace(args.jtau_from, args.jtau_to, args.points)
    points = adiabatic.sweep_tau(jtaus / cfg.j_coupling, omega=cfg.omega,
                                 j_coupling=cfg.j_coupling, max_workers=_max_workers())
    unit_p = cfg.omega * cfg.j_coupling
    return [{
        "tau_J": pt.jtau,
        "schedule": pt.schedule.value,
        "leakage_forbidden": pt.leakage_forbidden,
        "ec_tail_hbar_omega_J": pt.ec_tail / unit_p,
        "final_charge_over_E0": pt.ratio_to_cmax,
    } for pt in points]


def _cmd_selftest(cfg: RunConfig, args) -> int:
    results = acceptance.run_all(seed=cfg.seed)
    for result in results:
        print(result.line)
    if cfg.output != "-":
        rows = [{"criterion": r.name, "passed": r.passed, "description": r.description,
                 "details": r.details} for r in results]
        write_rows(rows, cfg.format, cfg.output)
    return 0 if all(r.passed for r in results) else 1


_HANDLERS = {
    "discharge": _cmd_discharge,
    "trap-check": _cmd_trap_check,
    "trap-scan": _cmd_trap_scan,
    "separable": _cmd_separable,
    "single-particle": _cmd_single_particle,
    "ncell": _cmd_ncell,
    "adiabatic": _cmd_adiabatic,
    "sweep-tau": _cmd_sweep_tau,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_code:
        return int(exit_code.code or 0)
    try:
        cfg = _resolve_config(args)
        if args.command == "selftest":
            return _cmd_selftest(cfg, args)
        rows = _HANDLERS[args.command](cfg, args)
        write_rows(rows, cfg.format, cfg.output)
        return 0
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
