"""Command-line surface: solve, gen, experiment, sweep-raan, oracle.

External files speak kilometers and degrees; results are written
atomically (CSV plus a JSON summary mirror).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .framework import SolveConfig, SolveReport, alternate, kmeans_init, placement_distance
from .instances import (
    InstanceFormatError,
    atomic_write_text,
    generate_instance,
    gps18_path,
    initial_placement,
    instance_to_dict,
    load_instance,
    save_instance,
)
from .locate import total_emleo
from .model import DepotPlacement, Instance, route_mass_profile
from .oracle import enumerate_optimal
from .routing import build_milp, dump_model
from .astro import CircularOrbit

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_NO_INCUMBENT = 2


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InstanceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depotopt",
        description=(
            "Optimize orbital depot placement and satellite servicing routes."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the alternating solver on an instance")
    p.add_argument("instance", help="instance JSON path, or 'gps18' for the bundled set")
    p.add_argument("--seed", type=int, default=0, help="clustering seed when no initial depots are given")
    p.add_argument("--time-limit", type=float, default=100.0, help="wall-clock seconds per routing solve")
    p.add_argument("--max-iter", type=int, default=20, help="outer iterations; 0 prices the initial placement only")
    p.add_argument("--tol", type=float, default=1e-6, help="placement convergence tolerance (canonical norm)")
    p.add_argument("--dump-model", action="store_true", help="write the routing model listing next to the results")
    p.add_argument("--out", default="./results", help="output directory")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gen", help="generate random instances")
    p.add_argument("--n-d", type=int, required=True)
    p.add_argument("--n-t", type=int, required=True)
    p.add_argument("--n-v", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", default="./instances")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("experiment", help="run a reproducible solve grid and aggregate results")
    p.add_argument("--n-d-list", type=int, nargs="+", required=True)
    p.add_argument("--n-t-list", type=int, nargs="+", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--time-limit", type=float, default=100.0)
    p.add_argument("--max-iter", type=int, default=20)
    p.add_argument("--out", default="./results")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser(
        "sweep-raan",
        help=(
            "shift one depot's node line and re-price the fixed routes; both "
            "depot-adjacent legs of every route are re-evaluated at each offset"
        ),
    )
    p.add_argument("instance")
    p.add_argument("result", help="summary.json of a solved run")
    p.add_argument("--depot", type=int, required=True, help="depot index (0-based)")
    p.add_argument("--span-deg", type=float, default=360.0)
    p.add_argument("--steps", type=int, default=73)
    p.add_argument("--out", default="./results")
    p.set_defaults(func=cmd_sweep_raan)

    p = sub.add_parser("oracle", help="exhaustive optimum for tiny instances (cross-check)")
    p.add_argument("instance")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)
    return parser


def _resolve_instance_path(arg: str) -> Path:
    if arg == "gps18":
        return gps18_path()
    return Path(arg)


def _load(args) -> Instance:
    return load_instance(_resolve_instance_path(args.instance))


def _choose_initial(inst: Instance, seed: int) -> DepotPlacement:
    given = initial_placement(inst)
    if given is not None:
        return given
    return kmeans_init(inst, seed=seed)


def cmd_solve(args) -> int:
    inst = _load(args)
    placement = _choose_initial(inst, args.seed)
    cfg = SolveConfig(
        max_outer_iter=args.max_iter,
        placement_tol=args.tol,
        milp_time_limit_s=args.time_limit,
        seed=args.seed,
    )
    out = Path(args.out)
    if args.dump_model:
        model = build_milp(inst, placement)
        atomic_write_text(out / "model.txt", dump_model(model))
    report = alternate(inst, placement, cfg)
    if args.verbose:
        for rec in report.iterations:
            print(
                f"iter {rec.index}: routing {rec.milp_objective:.3f} kg "
                f"({rec.milp_status}), placement "
                f"{'-' if rec.nlp_objective is None else f'{rec.nlp_objective:.3f}'} kg "
                f"({rec.nlp_exit or '-'}), {rec.wall_s:.1f} s"
            )
    if report.outcome == "no_incumbent":
        print(f"no feasible routing from the initial placement: {report.failure_reason}", file=sys.stderr)
        write_result_files(out, inst, report)
        return EXIT_NO_INCUMBENT
    write_result_files(out, inst, report)
    print(
        f"{report.outcome}: total EMLEO {report.final_emleo:.3f} kg "
        f"(initial {report.initial_emleo:.3f} kg, "
        f"reduction {report.reduction_pct:.3f}%), "
        f"{report.reported_iterations} iterations, {report.wall_s:.1f} s"
    )
    return EXIT_OK


def write_result_files(out_dir: Path, inst: Instance, report: SolveReport) -> None:
    """One CSV with record-typed rows plus a JSON summary mirror."""
    out_dir = Path(out_dir)
    sc = inst.scale
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        [
            "record", "iter", "total_emleo_kg", "milp_status", "nlp_exit",
            "wall_s", "depot", "route_ordinal", "satellites", "propellant_kg",
            "a_km", "i_deg", "raan_deg",
        ]
    )
    for rec in report.iterations:
        total = rec.nlp_objective if rec.nlp_objective is not None else rec.milp_objective
        writer.writerow(
            [
                "iteration", rec.index, f"{total:.9f}", rec.milp_status,
                rec.nlp_exit or "", f"{rec.wall_s:.3f}", "", "", "", "", "", "", "",
            ]
        )
    summary: dict = {
        "outcome": report.outcome,
        "converged": report.converged,
        "reported_iterations": report.reported_iterations,
        "initial_emleo_kg": report.initial_emleo,
        "final_emleo_kg": report.final_emleo,
        "reduction_pct": report.reduction_pct,
        "wall_s": report.wall_s,
        "failure_reason": report.failure_reason,
        "iterations": [
            {
                "iter": rec.index,
                "milp_objective_kg": rec.milp_objective,
                "nlp_objective_kg": rec.nlp_objective,
                "milp_status": rec.milp_status,
                "nlp_exit": rec.nlp_exit,
                "wall_s": rec.wall_s,
            }
            for rec in report.iterations
        ],
        "depots": [],
        "routes": [],
    }
    if report.final_placement is not None:
        for k, orbit in enumerate(report.final_placement):
            a_km = sc.to_km(orbit.a)
            i_deg = math.degrees(orbit.i)
            raan_deg = math.degrees(orbit.raan)
            writer.writerow(
                ["depot", "", "", "", "", "", k, "", "", "",
                 f"{a_km:.6f}", f"{i_deg:.6f}", f"{raan_deg:.6f}"]
            )
            summary["depots"].append(
                {
                    "depot": k,
                    "a_km": a_km,
                    "i_deg": i_deg,
                    "raan_deg": raan_deg,
                    # canonical-unit mirror so downstream tools can rebuild
                    # the placement bit-exactly
                    "a_du": orbit.a,
                    "i_rad": orbit.i,
                    "raan_rad": orbit.raan,
                }
            )
    if report.final_routing is not None and report.final_placement is not None:
        ordinal: dict[int, int] = {}
        for route in report.final_routing.routes:
            n = ordinal.get(route.depot, 0)
            ordinal[route.depot] = n + 1
            _, propellant = route_mass_profile(route, report.final_placement, inst)
            writer.writerow(
                ["route", "", "", "", "", "", route.depot, n,
                 " ".join(str(j) for j in route.satellites),
                 f"{propellant:.9f}", "", "", ""]
            )
            summary["routes"].append(
                {
                    "depot": route.depot,
                    "ordinal": n,
                    "satellites": list(route.satellites),
                    "propellant_kg": propellant,
                }
            )
    atomic_write_text(out_dir / "result.csv", buf.getvalue())
    atomic_write_text(out_dir / "summary.json", json.dumps(summary, indent=2) + "\n")


def cmd_gen(args) -> int:
    if args.n_d < 1 or args.n_t < 1 or args.count < 1:
        print("error: --n-d, --n-t and --count must be positive", file=sys.stderr)
        return EXIT_BAD_INPUT
    out = Path(args.out)
    for k in range(args.count):
        inst = generate_instance(args.n_d, args.n_t, seed=args.seed + k, n_v=args.n_v)
        path = out / f"instance_nd{args.n_d}_nt{args.n_t}_seed{args.seed + k}.json"
        save_instance(inst, path)
        print(path)
    return EXIT_OK


def _experiment_cell(task: tuple) -> dict:
    n_d, n_t, seed, time_limit, max_iter = task
    row: dict = {"n_d": n_d, "n_t": n_t, "seed": seed, "solved": False}
    t0 = time.monotonic()
    try:
        inst = generate_instance(n_d, n_t, seed=seed)
        placement = kmeans_init(inst, seed=seed)
        cfg = SolveConfig(
            max_outer_iter=max_iter, milp_time_limit_s=time_limit, seed=seed
        )
        report = alternate(inst, placement, cfg)
        row["wall_s"] = time.monotonic() - t0
        if report.outcome in ("converged", "max_iterations"):
            row.update(
                solved=True,
                initial_emleo_kg=report.initial_emleo,
                final_emleo_kg=report.final_emleo,
                reduction_pct=report.reduction_pct,
                iterations=report.reported_iterations,
                outcome=report.outcome,
            )
        else:
            row["outcome"] = report.outcome
    except Exception as exc:  # an instance failure never aborts the grid
        row["wall_s"] = time.monotonic() - t0
        row["outcome"] = f"error: {exc}"
    return row


def cmd_experiment(args) -> int:
    tasks = [
        (n_d, n_t, args.seed + k, args.time_limit, args.max_iter)
        for n_d in args.n_d_list
        for n_t in args.n_t_list
        for k in range(args.count)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_experiment_cell, tasks))
    else:
        rows = [_experiment_cell(t) for t in tasks]

    out = Path(args.out)
    raw_buf = io.StringIO()
    raw = csv.writer(raw_buf)
    raw.writerow(
        ["n_d", "n_t", "seed", "solved", "outcome", "initial_emleo_kg",
         "final_emleo_kg", "reduction_pct", "iterations", "wall_s"]
    )
    for row in rows:
        raw.writerow(
            [row["n_d"], row["n_t"], row["seed"], int(row["solved"]),
             row.get("outcome", ""),
             _fmt(row.get("initial_emleo_kg")), _fmt(row.get("final_emleo_kg")),
             _fmt(row.get("reduction_pct")), row.get("iterations", ""),
             f"{row['wall_s']:.3f}"]
        )
    atomic_write_text(out / "experiment_raw.csv", raw_buf.getvalue())

    agg_buf = io.StringIO()
    agg = csv.writer(agg_buf)
    agg.writerow(
        ["n_d", "n_t", "count",
         "reduction_min_pct", "reduction_max_pct", "reduction_mean_pct",
         "iterations_min", "iterations_max", "iterations_mean",
         "time_min_s", "time_max_s", "time_mean_s", "success_rate_pct"]
    )
    for n_d in args.n_d_list:
        for n_t in args.n_t_list:
            cell = [r for r in rows if r["n_d"] == n_d and r["n_t"] == n_t]
            solved = [r for r in cell if r["solved"]]
            rate = 100.0 * len(solved) / len(cell) if cell else 0.0
            if solved:
                reds = [r["reduction_pct"] for r in solved]
                iters = [r["iterations"] for r in solved]
                times = [r["wall_s"] for r in solved]
                agg.writerow(
                    [n_d, n_t, len(cell),
                     f"{min(reds):.3f}", f"{max(reds):.3f}",
                     f"{sum(reds)/len(reds):.3f}",
                     min(iters), max(iters),
                     f"{sum(iters)/len(iters):.3f}",
                     f"{min(times):.3f}", f"{max(times):.3f}",
                     f"{sum(times)/len(times):.3f}", f"{rate:.1f}"]
                )
            else:
                agg.writerow(
                    [n_d, n_t, len(cell), "", "", "", "", "", "", "", "", "",
                     f"{rate:.1f}"]
                )
    atomic_write_text(out / "experiment_summary.csv", agg_buf.getvalue())
    print(out / "experiment_summary.csv")
    return EXIT_OK


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"


def cmd_sweep_raan(args) -> int:
    inst = _load(args)
    with open(args.result, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    if not summary.get("depots") or not summary.get("routes"):
        print("error: result file carries no solved placement/routes", file=sys.stderr)
        return EXIT_BAD_INPUT
    if not 0 <= args.depot < len(summary["depots"]):
        print(f"error: depot index {args.depot} out of range", file=sys.stderr)
        return EXIT_BAD_INPUT
    from .model import Route, RoutingSolution

    orbits = tuple(
        CircularOrbit(d["a_du"], d["i_rad"], d["raan_rad"])
        if "a_du" in d
        else CircularOrbit(
            inst.scale.to_du(d["a_km"]),
            math.radians(d["i_deg"]),
            math.radians(d["raan_deg"]),
        )
        for d in summary["depots"]
    )
    placement = DepotPlacement(orbits)
    routes = tuple(
        Route(r["depot"], tuple(r["satellites"])) for r in summary["routes"]
    )
    routing = RoutingSolution(routes, {}, summary.get("final_emleo_kg", 0.0))

    offsets = _sweep_offsets(args.span_deg, args.steps)
    rows = []
    for off_deg in offsets:
        if off_deg == 0.0:
            shifted = placement
        else:
            mod = list(orbits)
            base = mod[args.depot]
            mod[args.depot] = CircularOrbit(
                base.a, base.i, base.raan + math.radians(off_deg)
            )
            shifted = DepotPlacement(tuple(mod))
        rows.append((off_deg, total_emleo(shifted, routing, inst)))

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["raan_offset_deg", "total_emleo_kg"])
    for off_deg, total in rows:
        writer.writerow([repr(off_deg), repr(total)])
    out = Path(args.out) / f"sweep_raan_depot{args.depot}.csv"
    atomic_write_text(out, buf.getvalue())
    print(out)
    return EXIT_OK


def _sweep_offsets(span_deg: float, steps: int) -> list[float]:
    if steps < 1:
        return [0.0]
    half = span_deg / 2.0
    offsets = [-half + span_deg * k / (steps - 1) for k in range(steps)] if steps > 1 else [0.0]
    if not any(off == 0.0 for off in offsets):
        offsets.append(0.0)
        offsets.sort()
    return offsets


def cmd_oracle(args) -> int:
    inst = _load(args)
    placement = _choose_initial(inst, args.seed)
    try:
        result = enumerate_optimal(inst, placement)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if result.infeasible:
        print(f"infeasible ({result.candidates} candidates enumerated)")
        return EXIT_NO_INCUMBENT
    print(f"optimum {result.objective:.9f} kg ({result.candidates} candidates)")
    for route in result.routing.routes:
        print(f"  depot {route.depot}: {' '.join(str(j) for j in route.satellites)}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
