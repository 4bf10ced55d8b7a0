"""Command-line driver.

Subcommands: ``run`` (execute a scenario and write energy/snapshot/alpha
artifacts plus a manifest), ``cfl`` (stable-step estimate), ``converge``
(smooth-pulse refinement study), ``relax`` (0D shear relaxation check)
and ``audit`` (conservation / energy-balance property run).

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up,
4 stable-step estimation failure; ``audit``/``converge``/``relax``
return 1 when their checks fail.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import outputs, scenarios
from .errors import BlowUpError, ConfigError, EstimationError
from .integrator import StaggeredState, estimate_tau_max, run
from .processes import ViscoplasticParams, viscoplastic_increment
from .scenarios import (
    ScenarioConfig,
    compile_scenario,
    config_from_text,
    n_steps_for,
    resolve_tau,
)


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario config file")
    p.add_argument("--preset", choices=sorted(scenarios.PRESETS), help="built-in scenario")
    p.add_argument("--desk", action="store_true", help="desk-scale preset grid (100x100)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--grid", default=None, metavar="NXxNY", help="grid override")
    p.add_argument("--tau-factor", type=float, default=None, help="tau = factor * tau_max")
    p.add_argument("--duration", type=float, default=None, help="final time override")
    p.add_argument("--snapshots", default=None, help="comma-separated snapshot times")
    p.add_argument("--vti", action="store_true", help="also write VTK image snapshots")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    p.add_argument("--allow-unstable", action="store_true", help="permit tau beyond the bound")
    p.add_argument("--eta", type=float, default=0.1, help="stability margin")


def _load_config(args) -> ScenarioConfig:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("exactly one of --config and --preset is required")
    if args.config:
        with open(args.config) as fh:
            config = config_from_text(fh.read())
    else:
        config = scenarios.PRESETS[args.preset](desk=args.desk)
    if args.grid:
        try:
            nx, ny = (int(s) for s in args.grid.lower().split("x"))
        except ValueError as err:
            raise ConfigError(f"bad --grid value {args.grid!r}") from err
        config = replace(config, nx=nx, ny=ny)
    if args.duration is not None:
        keep = tuple(t for t in config.snapshots if t <= args.duration)
        config = replace(config, t_final=args.duration, snapshots=keep)
    if args.snapshots is not None:
        times = tuple(float(s) for s in args.snapshots.split(",") if s.strip())
        config = replace(config, snapshots=times)
    if args.allow_unstable:
        config = replace(config, allow_unstable=True)
    if args.tau_factor is not None:
        config = replace(config, tau=None, cfl_factor=args.tau_factor)
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    if args.vti:
        config = replace(config, write_vti=True)
    return config


def _snapshot_steps(config: ScenarioConfig, tau: float, n_steps: int) -> dict[int, float]:
    table: dict[int, float] = {}
    for t in config.snapshots:
        k = min(max(1, round(t / tau)), n_steps)
        table[k] = t
    return table


def cmd_run(args) -> int:
    config = _load_config(args)
    compiled = compile_scenario(config)
    tau, tau_max = resolve_tau(compiled, eta=args.eta, seed=args.seed)
    n_steps = n_steps_for(config, tau)
    out_dir = config.out_dir
    outputs.ensure_dir(out_dir)

    manifest: dict = {
        "scenario": args.preset or args.config,
        "nx": config.nx,
        "ny": config.ny,
        "h": config.h,
        "lx": config.lx,
        "ly": config.ly,
        "bulk_modulus": config.material.bulk_modulus,
        "shear_modulus": config.material.shear_modulus,
        "density": config.material.density,
        "process": config.process.kind,
        "loading": config.loading.kind,
        "t_final": config.t_final,
        "tau": tau,
        "tau_max": tau_max,
        "eta": args.eta,
        "ratio_tau_to_max": tau / tau_max,
        "cfl_check": "ok" if tau <= tau_max else "exceeds",
        "n_steps": n_steps,
        "n_adhesive_segments": compiled.ops.n_seg,
        "seed": args.seed,
    }
    if tau > tau_max and not config.allow_unstable:
        print(
            f"warning: tau={tau:.6g} exceeds tau_max={tau_max:.6g} (eta={args.eta}); "
            "proceeding, blow-up detection active",
            file=sys.stderr,
        )

    monitors = []
    snap_steps = _snapshot_steps(config, tau, n_steps)
    ops = compiled.ops

    def snapshot_monitor(state, row):
        if state.k in snap_steps:
            if config.write_csv:
                outputs.write_snapshot_csv(
                    os.path.join(out_dir, f"snapshot_{state.k}.csv"), ops, state
                )
            if config.write_vti:
                outputs.write_snapshot_vti(
                    os.path.join(out_dir, f"snapshot_{state.k}.vti"), ops, state
                )

    monitors.append(snapshot_monitor)
    alpha_rec = None
    if compiled.ops.n_seg:
        alpha_rec = outputs.AlphaRecorder(ops, extra_steps=snap_steps)
        monitors.append(alpha_rec)

    status, failing_step, exit_code = "completed", "", 0
    try:
        result = run(
            compiled.state, ops, compiled.process, compiled.program, tau, n_steps,
            monitors=monitors,
        )
        ledger = result.ledger
        manifest.update(
            sup_v=result.sup_v, sup_sigma=result.sup_sigma, sup_z=result.sup_z
        )
    except BlowUpError as err:
        ledger = err.ledger
        status, failing_step, exit_code = "blowup", str(err.step_index), 3
    if ledger:
        manifest.update(
            a_min=min(r.a_coeff for r in ledger),
            dissipated_cum=ledger[-1].dissipated_cum,
            work_cum=ledger[-1].work_cum,
            max_abs_imbalance=max(abs(r.imbalance) for r in ledger),
        )
    if alpha_rec is not None:
        outputs.write_alpha_csv(os.path.join(out_dir, "alpha.csv"), alpha_rec.rows)
        manifest.update(
            first_rupture_t=(
                alpha_rec.first_rupture_t if alpha_rec.first_rupture_t is not None else "none"
            ),
            ruptured_segments=alpha_rec.ruptured_count,
            damaged_segments=alpha_rec.damaged_count,
        )
    outputs.write_energy_csv(os.path.join(out_dir, "energy.csv"), ledger)
    manifest.update(status=status, failing_step=failing_step, exit_code=exit_code)
    outputs.write_manifest(os.path.join(out_dir, "manifest.txt"), manifest)
    print(f"status={status} steps={len(ledger)}/{n_steps} out={out_dir}")
    return exit_code


def cmd_cfl(args) -> int:
    config = _load_config(args)
    compiled = compile_scenario(config)
    tau, tau_max = resolve_tau(compiled, eta=args.eta, seed=args.seed)
    ratio = tau / tau_max
    a_min_pred = 1.0 - ratio * ratio * (4.0 - args.eta) / 4.0
    print(f"tau_max={tau_max:.10g} eta={args.eta:g} ratio_to_config={ratio:.6g}")
    print(f"a_min_pred={a_min_pred:.6g} tau_config={tau:.10g}")
    return 0


def shear_relaxation_error(tau: float, t_final: float, shear_modulus: float, d_visc: float) -> float:
    """Error of the 0D midpoint shear relaxation against the exact decay."""
    params = ViscoplasticParams(sigma_y=0.0, d_visc=d_visc)
    sigma = np.array([0.0, 0.0, 1.0])
    pi = np.zeros(3)
    n = round(t_final / tau)
    for _ in range(n):
        pi = viscoplastic_increment(sigma, pi, tau, shear_modulus, 1.0, params)
    s_end = 1.0 - 2.0 * shear_modulus * pi[2]
    exact = math.exp(-2.0 * shear_modulus * (n * tau) / d_visc)
    return abs(s_end - exact)


def cmd_relax(args) -> int:
    g, d = 1.0, 0.5
    e1 = shear_relaxation_error(args.tau, args.t_final, g, d)
    e2 = shear_relaxation_error(args.tau / 2.0, args.t_final, g, d)
    order = math.log2(e1 / e2) if e2 > 0 else math.inf
    print(f"relaxation errors: tau={e1:.6e} tau/2={e2:.6e} order={order:.3f}")
    ok = 1.7 <= order <= 2.3
    print("PASS" if ok else "FAIL", "midpoint order within [1.7, 2.3]")
    return 0 if ok else 1


def cmd_converge(args) -> int:
    report = scenarios.run_convergence_study(args.levels, base_nx=args.base_nx)
    for i, err in enumerate(report.errors):
        print(f"level {i} vs {i + 1}: l2_diff={err:.6e}")
    for i, order in enumerate(report.orders):
        print(f"observed_order_{i}={order:.4f}")
    ok = all(1.7 <= o <= 2.2 for o in report.orders)
    print("PASS" if ok else "FAIL", "observed order within [1.7, 2.2]")
    return 0 if ok else 1


def cmd_audit(args) -> int:
    if args.config or args.preset:
        config = _load_config(args)
        compiled = compile_scenario(config)
        tau, tau_max = resolve_tau(compiled, eta=args.eta, seed=args.seed)
        n_steps = args.steps or n_steps_for(config, tau)
        state = compiled.state
    else:
        # Default audit: free vibration of random bounded data, no loads.
        try:
            nx, ny = (int(s) for s in (args.grid or "50x50").lower().split("x"))
        except ValueError as err:
            raise ConfigError(f"bad --grid value {args.grid!r}") from err
        config = ScenarioConfig(
            lx=10.0,
            ly=10.0 * ny / nx,
            nx=nx,
            ny=ny,
            material=scenarios.MaterialParams(1.66, 1.0, 1.0),
            process=scenarios.ProcessSpec(kind="null"),
            loading=scenarios.LoadingSpec(kind="pulse", amplitude=0.0),
            t_final=1.0,
            tau=1.0,
        )
        compiled = compile_scenario(config)
        tau_max = estimate_tau_max(compiled.ops, compiled.process, eta=args.eta, seed=args.seed)
        tau = 0.5 * tau_max
        n_steps = args.steps or 1000
        rng = np.random.default_rng(args.seed)
        state = StaggeredState(
            sigma=rng.uniform(-1.0, 1.0, compiled.ops.dim_s),
            v=rng.uniform(-1.0, 1.0, compiled.ops.dim_h),
            z=np.zeros(0),
            u=np.zeros(compiled.ops.dim_h),
        )
    p0 = compiled.ops.momentum(state.v)
    p_scale = max(float(np.sum(np.abs(state.v))) * compiled.ops.mass, 1e-30)
    result = run(state, compiled.ops, compiled.process, compiled.program, tau, n_steps)
    rows = result.ledger
    e_ref = abs(rows[0].total) if rows else 0.0
    drift = max(abs(r.total - rows[0].total) for r in rows) / max(e_ref, 1e-30)
    imb = max(abs(r.imbalance) / max(abs(r.total), 1e-30) for r in rows)
    mono = all(b.dissipated_cum >= a.dissipated_cum - 1e-12 for a, b in zip(rows, rows[1:]))
    a_min = min(r.a_coeff for r in rows)
    p_drift = float(np.max(np.abs(compiled.ops.momentum(result.state.v) - p0))) / p_scale
    conservative = compiled.process.dim_z == 0 and compiled.program.F is None
    print(f"steps={n_steps} tau={tau:.6g} tau_max={tau_max:.6g}")
    print(f"energy_drift_rel={drift:.3e}")
    print(f"max_imbalance_rel={imb:.3e}")
    print(f"momentum_drift_rel={p_drift:.3e}")
    print(f"a_min={a_min:.4f} dissipated_monotone={mono}")
    ok = imb <= 1e-8 and mono and a_min > 0.0
    if conservative:
        ok = ok and drift <= 1e-10 and p_drift <= 1e-12
    print("PASS" if ok else "FAIL", "energy audit")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stagwave",
        description="Explicit staggered elastodynamics with internal variables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write its artifacts")
    _add_scenario_args(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cfl = sub.add_parser("cfl", help="estimate the stable time step")
    _add_scenario_args(p_cfl)
    p_cfl.set_defaults(func=cmd_cfl)

    p_conv = sub.add_parser("converge", help="smooth-pulse refinement study")
    p_conv.add_argument("--levels", type=int, default=3)
    p_conv.add_argument("--base-nx", type=int, default=32)
    p_conv.set_defaults(func=cmd_converge)

    p_relax = sub.add_parser("relax", help="0D shear relaxation validation")
    p_relax.add_argument("--tau", type=float, default=0.05)
    p_relax.add_argument("--t-final", type=float, default=1.0)
    p_relax.set_defaults(func=cmd_relax)

    p_audit = sub.add_parser("audit", help="conservation / energy-balance audit")
    _add_scenario_args(p_audit)
    p_audit.add_argument("--steps", type=int, default=None)
    p_audit.set_defaults(func=cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except BlowUpError as err:
        print(f"blow-up: {err}", file=sys.stderr)
        return 3
    except EstimationError as err:
        print(f"estimation error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
