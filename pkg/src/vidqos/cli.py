"""Command-line front end.

    vidqos qos      --scenario FILE [--out DIR]
    vidqos allocate --scenario FILE [--policy sum|fair] [--out DIR]
    vidqos admit    --scenario FILE [--policy sum|fair] [--out DIR]
    vidqos sweep    --scenario FILE [--seed N] [--out DIR]
    vidqos validate --scenario FILE [--policy sum|fair] [--seed N] [--out DIR] [--trace]

Exit codes: 0 success, 2 scenario/schema error, 3 infeasible QoS or
allocation, 4 delay-guarantee validation failure, 1 unexpected error.
All data outputs are CSV with fixed headers; report paths also render a
PNG figure next to each CSV unless the scenario disables figures.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import figures
from .allocator import (
    AllocationResult,
    UserProfile,
    allocate_fairness,
    allocate_sum_quality,
    kkt_residual,
    make_profile,
)
from .cellsim import (
    METHODS,
    draw_users,
    replace_density,
    run_comparison,
    service_boundary_snr,
    write_summary_csv,
    write_users_csv,
)
from .errors import (
    AllocationError,
    BoundaryNotInGridError,
    InfeasibleAllocationError,
    QosInfeasibleError,
    ScenarioError,
    VidqosError,
)
from .fading import Rayleigh
from .qos import QosTarget, derive_qos
from .scenario import Scenario, UserSpec, load_scenario
from .scheduler import (
    admit_fairness,
    admit_sum_quality,
    min_bandwidth,
    schedule_fairness,
    schedule_sum_quality,
)
from .queuesim import validate_allocation

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_VALIDATION = 4


def _out_dir(args, scenario: Scenario) -> Path:
    out = Path(args.out) if args.out else Path(scenario.output.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solve_users(specs) -> tuple[list[UserProfile], list[tuple[UserSpec, str]]]:
    """QoS-solve each user spec; returns (profiles, failures as (spec, reason))."""
    profiles: list[UserProfile] = []
    failures: list[tuple[UserSpec, str]] = []
    for spec in specs:
        try:
            profiles.append(make_profile(spec.user_id, spec.target, spec.dist, spec.curve))
        except QosInfeasibleError as exc:
            failures.append((spec, str(exc)))
    return profiles, failures


def cmd_qos(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args, scenario)
    profiles, failures = _solve_users(scenario.users)
    rows = []
    for p in profiles:
        rows.append({
            "user_id": p.user_id,
            "status": "ok",
            "moment_target": p.derived.moment_target,
            "bw_exponent_product": p.derived.bw_exponent_product,
            "sse_bits_per_s_per_hz": p.derived.sse,
            "min_bandwidth_hz": min_bandwidth(p),
        })
    for spec, reason in failures:
        rows.append({
            "user_id": spec.user_id, "status": f"infeasible: {reason}",
            "moment_target": "", "bw_exponent_product": "",
            "sse_bits_per_s_per_hz": "", "min_bandwidth_hz": "",
        })
    cols = ["user_id", "status", "moment_target", "bw_exponent_product",
            "sse_bits_per_s_per_hz", "min_bandwidth_hz"]
    _write_csv(out / "qos.csv", cols, rows)
    print(f"{'user':<12} {'status':<10} {'moment_target':>14} {'d*T':>12} "
          f"{'sse [b/s/Hz]':>14} {'b_min [Hz]':>14}")
    for r in rows:
        status = r["status"] if r["status"] == "ok" else "infeasible"
        if r["status"] == "ok":
            print(f"{r['user_id']:<12} {status:<10} {r['moment_target']:>14.6g} "
                  f"{r['bw_exponent_product']:>12.6g} {r['sse_bits_per_s_per_hz']:>14.6g} "
                  f"{r['min_bandwidth_hz']:>14.6g}")
        else:
            print(f"{r['user_id']:<12} {status:<10}  ({r['status']})")
    print(f"wrote {out / 'qos.csv'}")
    return EXIT_INFEASIBLE if failures else EXIT_OK


def _schedule_and_allocate(
    profiles: list[UserProfile], policy: str, bandwidth_hz: float, coherence_time_s: float
):
    if policy == "fair":
        sched = schedule_fairness(profiles, bandwidth_hz)
        chosen = [p for p in profiles if p.user_id in set(sched.selected_ids)]
        alloc = (
            allocate_fairness(chosen, bandwidth_hz, coherence_time_s=coherence_time_s)
            if chosen else None
        )
    else:
        sched = schedule_sum_quality(profiles, bandwidth_hz)
        chosen = [p for p in profiles if p.user_id in set(sched.selected_ids)]
        alloc = (
            allocate_sum_quality(chosen, bandwidth_hz, coherence_time_s=coherence_time_s)
            if chosen else None
        )
    return sched, chosen, alloc


def cmd_allocate(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args, scenario)
    if not scenario.users:
        print("no users in scenario")
        return EXIT_OK
    profiles, failures = _solve_users(scenario.users)
    B = scenario.system.total_bandwidth_hz
    T = scenario.system.coherence_time_s
    policy = args.policy
    if not profiles:
        print("no feasible users")
        return EXIT_INFEASIBLE
    try:
        sched, chosen, alloc = _schedule_and_allocate(profiles, policy, B, T)
    except InfeasibleAllocationError as exc:
        print(f"allocation infeasible: {exc} (deficit {exc.deficit_hz:g} Hz)")
        return EXIT_INFEASIBLE
    except AllocationError as exc:
        print(f"allocation failed: {exc}")
        return EXIT_INFEASIBLE

    rows = []
    selected = set(sched.selected_ids)
    for p in profiles:
        entry = alloc.entry(p.user_id) if alloc and p.user_id in selected else None
        rows.append({
            "user_id": p.user_id,
            "scheduled": int(p.user_id in selected),
            "min_bandwidth_hz": sched.b_min_hz[p.user_id],
            "bandwidth_hz": entry.bandwidth_hz if entry else "",
            "rate_bps": entry.rate_bps if entry else "",
            "qos_exponent": entry.qos_exponent if entry else "",
            "quality": entry.quality if entry else "",
            "clamped_min": int(entry.clamped_min) if entry else "",
        })
    for spec, reason in failures:
        rows.append({"user_id": spec.user_id, "scheduled": 0,
                     "min_bandwidth_hz": "", "bandwidth_hz": "", "rate_bps": "",
                     "qos_exponent": "", "quality": "", "clamped_min": ""})
    cols = ["user_id", "scheduled", "min_bandwidth_hz", "bandwidth_hz", "rate_bps",
            "qos_exponent", "quality", "clamped_min"]
    _write_csv(out / "allocation.csv", cols, rows)

    summary = {
        "policy": policy,
        "n_candidates": len(scenario.users),
        "n_star": sched.n_star,
        "total_bandwidth_hz": B,
        "bandwidth_used_hz": alloc.bandwidth_used_hz() if alloc else 0.0,
        "budget_residual_hz": (alloc.bandwidth_used_hz() - B) if alloc else -B,
        "objective": (alloc.total_quality() if policy == "sum" else alloc.min_quality()) if alloc else "",
        "dual_price": alloc.dual_price if alloc and alloc.dual_price is not None else "",
        "common_quality": alloc.common_quality if alloc and alloc.common_quality is not None else "",
        "kkt_residual": kkt_residual(alloc, chosen) if alloc and policy == "sum" else "",
    }
    _write_csv(out / "allocation_summary.csv", list(summary), [summary])
    print(f"policy={policy} scheduled {sched.n_star}/{len(profiles)} feasible users")
    if alloc:
        for e in alloc.entries:
            print(f"  {e.user_id:<12} B={e.bandwidth_hz:>12.4g} Hz  R={e.rate_bps:>12.6g} bps  "
                  f"Q={e.quality:>10.4g}{'  [min-rate]' if e.clamped_min else ''}")
        if policy == "sum":
            print(f"  dual price rho = {alloc.dual_price:.6g}, objective = {alloc.total_quality():.6g}")
        else:
            print(f"  common quality q = {alloc.common_quality:.6g}")
    print(f"wrote {out / 'allocation.csv'}, {out / 'allocation_summary.csv'}")
    return EXIT_OK


def cmd_admit(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args, scenario)
    if scenario.admit is None:
        raise ScenarioError("scenario has no [admit] section", "admit")
    policy = args.policy or scenario.admit.policy
    profiles, failures = _solve_users(scenario.users)
    if failures:
        for spec, reason in failures:
            print(f"existing user {spec.user_id!r} dropped: {reason}")
    if not profiles:
        print("no feasible existing users")
        return EXIT_INFEASIBLE
    B = scenario.system.total_bandwidth_hz
    T = scenario.system.coherence_time_s
    try:
        new_profile = make_profile(
            scenario.admit.new_user.user_id,
            scenario.admit.new_user.target,
            scenario.admit.new_user.dist,
            scenario.admit.new_user.curve,
        )
    except QosInfeasibleError as exc:
        print(f"new user QoS infeasible: {exc}")
        return EXIT_INFEASIBLE
    try:
        sched, chosen, alloc = _schedule_and_allocate(profiles, policy, B, T)
    except AllocationError as exc:
        print(f"existing system allocation failed: {exc}")
        return EXIT_INFEASIBLE
    if alloc is None:
        print("existing system serves no users; run allocate instead")
        return EXIT_INFEASIBLE

    if policy == "fair":
        decision = admit_fairness(alloc, chosen, new_profile, B, coherence_time_s=T)
    else:
        decision = admit_sum_quality(alloc, chosen, new_profile, B, coherence_time_s=T)

    print(f"admission ({policy}): {'ADMIT' if decision.admit else 'REJECT'}")
    print(f"  new user rate at the post-admission operating point: {decision.new_user_rate_bps:.6g} bps")
    if decision.common_quality_final is not None:
        print(f"  post-admission common quality: {decision.common_quality_final:.6g}")
    if decision.failure_reason:
        print(f"  reason: {decision.failure_reason}")
    for uid, rate in sorted(decision.post_rates_bps.items()):
        print(f"  {uid:<12} post-admission rate {rate:.6g} bps")

    rows = [{
        "policy": policy,
        "admit": int(decision.admit),
        "new_user_id": new_profile.user_id,
        "new_user_rate_bps": decision.new_user_rate_bps,
        "common_quality_final": decision.common_quality_final
        if decision.common_quality_final is not None else "",
        "failure_reason": decision.failure_reason or "",
    }]
    _write_csv(out / "admit.csv", list(rows[0]), rows)
    post = [{"user_id": uid, "post_rate_bps": rate}
            for uid, rate in sorted(decision.post_rates_bps.items())]
    _write_csv(out / "admit_post_rates.csv", ["user_id", "post_rate_bps"], post)
    print(f"wrote {out / 'admit.csv'}, {out / 'admit_post_rates.csv'}")
    return EXIT_OK


def _sweep_sse(scenario: Scenario, out: Path, render: bool) -> None:
    sw = scenario.sweep.sse
    rows = []
    grid = np.full((len(sw.violation_probs.values), len(sw.delay_bounds_s.values)), math.nan)
    dist = Rayleigh(10.0 ** (sw.mean_snr_db / 10.0))
    for i, pv in enumerate(sw.violation_probs.values):
        for j, dv in enumerate(sw.delay_bounds_s.values):
            try:
                derived = derive_qos(QosTarget(dv, pv), dist)
                rows.append({"delay_bound_s": dv, "violation_prob": pv,
                             "sse_bits_per_s_per_hz": derived.sse, "status": "ok"})
                grid[i, j] = derived.sse
            except (QosInfeasibleError, VidqosError) as exc:
                rows.append({"delay_bound_s": dv, "violation_prob": pv,
                             "sse_bits_per_s_per_hz": "", "status": f"infeasible: {exc}"})
    _write_csv(out / "sweep_sse.csv",
               ["delay_bound_s", "violation_prob", "sse_bits_per_s_per_hz", "status"], rows)
    print(f"wrote {out / 'sweep_sse.csv'} ({len(rows)} points)")
    if render:
        figures.render_sse_contour(
            sw.delay_bounds_s.values, sw.violation_probs.values, grid,
            sw.mean_snr_db, out / "sweep_sse.png",
        )
        print(f"wrote {out / 'sweep_sse.png'}")


def _sweep_service_region(scenario: Scenario, out: Path, render: bool) -> None:
    sw = scenario.sweep.service_region
    B = scenario.system.total_bandwidth_hz
    by_id = {u.user_id: u for u in scenario.users}
    u1, u2 = by_id[sw.user_ids[0]], by_id[sw.user_ids[1]]
    snr_grid = np.linspace(sw.snr_min_db, sw.snr_max_db, sw.n_points)

    def servable(spec: UserSpec, snr_db: float) -> bool:
        try:
            derived = derive_qos(spec.target, Rayleigh(10.0 ** (snr_db / 10.0)))
        except QosInfeasibleError:
            return False
        return derived.sse * B >= spec.curve.min_rate_bps

    serv1 = [servable(u1, s) for s in snr_grid]
    serv2 = [servable(u2, s) for s in snr_grid]
    rows = []
    codes = np.zeros((sw.n_points, sw.n_points), dtype=int)
    for i, s1 in enumerate(snr_grid):
        for j, s2 in enumerate(snr_grid):
            code = (1 if serv1[i] else 0) + (2 if serv2[j] else 0)
            codes[i, j] = code
            rows.append({"snr1_db": s1, "snr2_db": s2, "region": code})
    _write_csv(out / "sweep_service_region.csv", ["snr1_db", "snr2_db", "region"], rows)

    bounds = {}
    for name, spec in (("user1", u1), ("user2", u2)):
        try:
            bounds[name] = service_boundary_snr(
                spec.target, spec.curve.min_rate_bps, B,
                snr_min_db=sw.snr_min_db, snr_max_db=sw.snr_max_db,
            )
        except BoundaryNotInGridError:
            bounds[name] = None
    _write_csv(out / "sweep_service_boundaries.csv",
               ["user_id", "boundary_snr_db"],
               [{"user_id": u1.user_id, "boundary_snr_db":
                 bounds["user1"] if bounds["user1"] is not None else "outside grid"},
                {"user_id": u2.user_id, "boundary_snr_db":
                 bounds["user2"] if bounds["user2"] is not None else "outside grid"}])
    print(f"wrote {out / 'sweep_service_region.csv'}, {out / 'sweep_service_boundaries.csv'}")
    if render:
        figures.render_service_region(
            snr_grid, snr_grid, codes, bounds["user1"], bounds["user2"],
            (u1.user_id, u2.user_id), out / "sweep_service_region.png",
        )
        print(f"wrote {out / 'sweep_service_region.png'}")


def _sweep_density(scenario: Scenario, out: Path, render: bool, seed: int | None) -> None:
    sw = scenario.sweep.density
    base_cell = scenario.cell
    master_seed = seed if seed is not None else base_cell.rng_seed
    T = scenario.system.coherence_time_s
    summary_rows = []
    users_by_method = {m: [] for m in METHODS}
    last_report = None
    for di, density in enumerate(sw.densities_per_m2):
        counts = {m: [] for m in METHODS}
        qstd = {m: [] for m in METHODS}
        dstd = {m: [] for m in METHODS}
        for r in range(sw.realizations):
            child = np.random.SeedSequence((master_seed, di, r))
            rng = np.random.default_rng(child)
            cell = replace_density(base_cell, density)
            placed = draw_users(cell, rng)
            report = run_comparison(placed, cell.total_bandwidth_hz,
                                    coherence_time_s=T, dmos=scenario.dmos)
            last_report = report
            for m in METHODS:
                counts[m].append(report.methods[m].users_supported)
                qstd[m].append(report.methods[m].quality_stddev)
                dstd[m].append(report.methods[m].quality_stddev_dmos)
        for m in METHODS:
            summary_rows.append({
                "method": m,
                "density_per_m2": density,
                "realizations": sw.realizations,
                "users_supported_mean": float(np.mean(counts[m])),
                "users_supported_std": float(np.std(counts[m])),
                "quality_stddev_mean": float(np.mean(qstd[m])),
                "quality_stddev_dmos_mean": float(np.mean(dstd[m])),
            })
            users_by_method[m].append(float(np.mean(counts[m])))
    write_summary_csv(summary_rows, out / "sweep_density_summary.csv")
    if last_report is not None:
        write_users_csv(last_report, out / "sweep_density_last_drop.csv")
    print(f"wrote {out / 'sweep_density_summary.csv'}, {out / 'sweep_density_last_drop.csv'}")
    if render:
        figures.render_density_sweep(list(sw.densities_per_m2), users_by_method,
                                     out / "sweep_density.png")
        if last_report is not None:
            figures.render_cell_map(last_report, "maxsub_sumq", out / "sweep_density_map.png")
        print(f"wrote {out / 'sweep_density.png'}, {out / 'sweep_density_map.png'}")


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args, scenario)
    if scenario.sweep is None:
        raise ScenarioError("scenario has no [sweep] section", "sweep")
    render = scenario.output.figures
    if scenario.sweep.sse is not None:
        _sweep_sse(scenario, out, render)
    if scenario.sweep.service_region is not None:
        _sweep_service_region(scenario, out, render)
    if scenario.sweep.density is not None:
        _sweep_density(scenario, out, render, args.seed)
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args, scenario)
    profiles, failures = _solve_users(scenario.users)
    if not profiles:
        print("no feasible users to validate")
        return EXIT_INFEASIBLE
    policy = args.policy or scenario.validate.policy
    B = scenario.system.total_bandwidth_hz
    T = scenario.system.coherence_time_s
    try:
        sched, chosen, alloc = _schedule_and_allocate(profiles, policy, B, T)
    except AllocationError as exc:
        print(f"allocation failed: {exc}")
        return EXIT_INFEASIBLE
    if alloc is None:
        print("no users scheduled; nothing to validate")
        return EXIT_OK
    seed = args.seed if args.seed is not None else scenario.validate.seed
    trace_dir = None
    if args.trace:
        trace_dir = out / "traces"
        trace_dir.mkdir(parents=True, exist_ok=True)
    results = validate_allocation(
        alloc, chosen, coherence_time_s=T, n_blocks=scenario.validate.n_blocks,
        base_seed=seed, margin=scenario.validate.margin, trace_dir=trace_dir,
    )
    rows = []
    print(f"{'user':<12} {'rate [bps]':>14} {'B [Hz]':>12} {'target':>9} "
          f"{'measured':>10} {'halfwidth':>10} verdict")
    for r in results:
        rows.append({
            "user_id": r.user_id, "rate_bps": r.rate_bps, "bandwidth_hz": r.bandwidth_hz,
            "target_violation": r.target_violation, "measured_violation": r.measured_violation,
            "half_width_95": r.half_width_95, "unstable": int(r.unstable),
            "passed": int(r.passed),
        })
        print(f"{r.user_id:<12} {r.rate_bps:>14.6g} {r.bandwidth_hz:>12.5g} "
              f"{r.target_violation:>9.3g} {r.measured_violation:>10.4g} "
              f"{r.half_width_95:>10.2g} {'PASS' if r.passed else 'FAIL'}")
    _write_csv(out / "validate.csv",
               ["user_id", "rate_bps", "bandwidth_hz", "target_violation",
                "measured_violation", "half_width_95", "unstable", "passed"], rows)
    print(f"wrote {out / 'validate.csv'}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def _write_csv(path: Path, cols: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vidqos",
        description="Delay-QoS-aware bandwidth allocation, scheduling and validation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_text in (
        ("qos", cmd_qos, "per-user QoS constants (moment target, exponent product, SSE)"),
        ("allocate", cmd_allocate, "schedule a maximal subset and allocate bandwidth"),
        ("admit", cmd_admit, "test admission of the scenario's new user"),
        ("sweep", cmd_sweep, "run configured sweeps and export figure data"),
        ("validate", cmd_validate, "Monte-Carlo queue check of the delay guarantees"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", required=True, help="scenario file (.toml or .json)")
        p.add_argument("--out", default=None, help="output directory (default: scenario's)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--policy", choices=("sum", "fair"), default=None,
                       help="allocation policy (default: sum or scenario's)")
        p.add_argument("--trace", action="store_true",
                       help="dump per-block queue traces (validate only)")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.policy is None and args.command == "allocate":
        args.policy = "sum"
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except InfeasibleAllocationError as exc:
        print(f"infeasible: {exc} (deficit {exc.deficit_hz:g} Hz)", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (QosInfeasibleError, AllocationError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except VidqosError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
