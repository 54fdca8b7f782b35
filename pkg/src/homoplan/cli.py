"""Command-line harness: single runs, seeded batches, generation, reports.

Exit codes: 0 on success (a scenario whose agents fail to arrive is still a
successful run, the outcome is recorded), 1 on argument or input validation
errors, 2 on runtime failures.
"""

import argparse
import csv
import glob
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .runtime import CSV_FIELDS, run_scenario
from .world import PRESETS, Scenario, ScenarioError, load_scenario, make_preset, save_scenario

PLANNER_VARIANTS = ("homotopy", "homotopy-no-time", "astar-baseline")


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors instead of exiting with code 2."""

    def error(self, message):
        raise CliError(message)


def apply_variant(scenario: Scenario, planner: str, replan=None) -> Scenario:
    """Set planner weights and the replan switch for one benchmark arm."""
    if planner not in PLANNER_VARIANTS:
        raise CliError(f"unknown planner '{planner}', available: {', '.join(PLANNER_VARIANTS)}")
    if planner == "homotopy-no-time":
        scenario.params.planner.lambda_h = 0.0
    elif planner == "astar-baseline":
        scenario.params.planner.lambda_p = 0.0
        scenario.params.planner.lambda_h = 0.0
    if replan is not None:
        scenario.params.replan.enabled = bool(replan)
    return scenario


def _load_scenario_file(path: str) -> Scenario:
    try:
        with open(path) as fh:
            return load_scenario(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read scenario: {exc}") from exc
    except (ScenarioError, ValueError) as exc:
        raise CliError(f"{path}: {exc}") from exc


def _cmd_run(args) -> int:
    scenario = _load_scenario_file(args.scenario)
    replan = None if args.replan is None else args.replan == "on"
    apply_variant(scenario, args.planner, replan)
    res = run_scenario(scenario, mode=args.mode, trace_path=args.trace)
    reached = sum(1 for a in res.agents if a.reached)
    print(f"scenario {res.scenario}: {reached}/{res.n_agents} agents reached"
          + (f", makespan {res.makespan:.1f} s" if res.makespan is not None else ""))
    print(f"replans {res.n_replans}, min pair {res.min_agent_distance:.3f} m, "
          f"safety {'ok' if res.safety_ok else 'VIOLATED'}, wall {res.wall_time:.1f} s")
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(res.to_json() + "\n")
    return 0


def _parse_batch_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read batch config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise CliError("batch config must be a JSON object")
    arms = cfg.get("arms")
    if not isinstance(arms, list) or not arms:
        raise CliError("batch config needs a non-empty 'arms' list")
    names = []
    for arm in arms:
        if not isinstance(arm, dict) or "name" not in arm:
            raise CliError("every arm needs a 'name'")
        if arm.get("planner", "homotopy") not in PLANNER_VARIANTS:
            raise CliError(f"arm '{arm['name']}': unknown planner '{arm.get('planner')}'")
        names.append(arm["name"])
    if len(set(names)) != len(names):
        raise CliError("arm names must be distinct")
    has_preset = "preset" in cfg
    has_files = "scenarios" in cfg
    if has_preset == has_files:
        raise CliError("batch config needs exactly one of 'preset' or 'scenarios'")
    if has_preset:
        if cfg["preset"] not in PRESETS:
            raise CliError(f"unknown preset '{cfg['preset']}'")
        seeds = cfg.get("seeds")
        if not isinstance(seeds, list) or not seeds:
            raise CliError("preset batches need a non-empty 'seeds' list")
        if len(set(seeds)) != len(seeds):
            raise CliError("seeds must be distinct")
    else:
        if not isinstance(cfg["scenarios"], list) or not cfg["scenarios"]:
            raise CliError("'scenarios' must be a non-empty list of files")
    reps = cfg.get("repetitions", 1)
    if not isinstance(reps, int) or reps < 1:
        raise CliError("'repetitions' must be a positive integer")
    if "out_dir" not in cfg:
        raise CliError("batch config needs 'out_dir'")
    return cfg


def _batch_job(job: dict) -> dict:
    """One (arm, scenario) run; module level so worker processes can load it."""
    if job.get("preset"):
        scenario = make_preset(job["preset"], job["seed"])
    else:
        with open(job["file"]) as fh:
            scenario = load_scenario(fh.read())
    apply_variant(scenario, job["planner"], job["replan"])
    trace = None
    if job.get("trace_dir"):
        trace = os.path.join(job["trace_dir"], f"{job['arm']}_{job['label']}.jsonl")
    res = run_scenario(scenario, mode=job["mode"], trace_path=trace)
    row = res.to_row()
    row["arm"] = job["arm"]
    row["seed"] = job["seed"] if job["seed"] is not None else ""
    return row


def _batch_workers(n_jobs: int) -> int:
    cap = os.environ.get("HOMOPLAN_THREADS", "")
    try:
        cap = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        raise CliError(f"HOMOPLAN_THREADS must be an integer, got '{cap}'")
    return max(1, min(cap, n_jobs))


def _cmd_batch(args) -> int:
    cfg = _parse_batch_config(args.config)
    os.makedirs(cfg["out_dir"], exist_ok=True)
    mode = cfg.get("mode", "lockstep")
    trace_dir = None
    if cfg.get("traces"):
        trace_dir = os.path.join(cfg["out_dir"], "traces")
        os.makedirs(trace_dir, exist_ok=True)
    jobs = []
    for arm in cfg["arms"]:
        for rep in range(cfg.get("repetitions", 1)):
            if "preset" in cfg:
                for seed in cfg["seeds"]:
                    jobs.append({
                        "arm": arm["name"], "planner": arm.get("planner", "homotopy"),
                        "replan": arm.get("replan"), "preset": cfg["preset"],
                        "seed": seed, "mode": mode, "label": f"s{seed}r{rep}",
                        "trace_dir": trace_dir,
                    })
            else:
                for path in cfg["scenarios"]:
                    jobs.append({
                        "arm": arm["name"], "planner": arm.get("planner", "homotopy"),
                        "replan": arm.get("replan"), "file": path, "preset": None,
                        "seed": None, "mode": mode, "trace_dir": trace_dir,
                        "label": f"{os.path.splitext(os.path.basename(path))[0]}r{rep}",
                    })
    workers = _batch_workers(len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_batch_job, jobs))
    else:
        rows = [_batch_job(job) for job in jobs]
    rows.sort(key=lambda r: (r["arm"], str(r["seed"]), r["scenario"]))
    out_csv = os.path.join(cfg["out_dir"], "results.csv")
    with open(out_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    with open(os.path.join(cfg["out_dir"], "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"{len(rows)} runs -> {out_csv}")
    for line in _format_report(aggregate(rows)):
        print(line)
    return 0


def _cmd_gen(args) -> int:
    try:
        scenario = make_preset(args.preset, args.seed)
    except ScenarioError as exc:
        raise CliError(str(exc)) from exc
    out = args.out or f"{args.preset}_s{args.seed}.json"
    with open(out, "w") as fh:
        fh.write(save_scenario(scenario) + "\n")
    print(out)
    return 0


def aggregate(rows: list) -> dict:
    """Per-arm benchmark metrics from run rows.

    Scenario success rate is the fraction of runs where every agent reached
    its target; swarm success rate averages the per-run reached fraction;
    length and makespan average over fully successful runs only and are
    absent (None) when there were none.
    """
    arms: dict = {}
    for row in rows:
        arms.setdefault(str(row.get("arm", "")), []).append(row)
    out = {}
    for arm, group in sorted(arms.items()):
        n = len(group)
        full = [r for r in group if int(r["all_reached"])]
        swarm = sum(float(r["swarm_rate"]) for r in group) / n
        metrics = {
            "runs": n,
            "scenario_success_rate": len(full) / n,
            "swarm_success_rate": swarm,
            "avg_total_length": sum(float(r["total_length"]) for r in full) / len(full) if full else None,
            "avg_makespan": sum(float(r["makespan"]) for r in full) / len(full) if full else None,
        }
        out[arm] = metrics
    return out


def _format_report(metrics: dict) -> list:
    lines = [f"{'arm':14s} {'runs':>4s} {'scenario%':>9s} {'swarm%':>7s} {'length':>8s} {'makespan':>8s}"]
    for arm, m in metrics.items():
        length = f"{m['avg_total_length']:.2f}" if m["avg_total_length"] is not None else "-"
        mks = f"{m['avg_makespan']:.1f}" if m["avg_makespan"] is not None else "-"
        lines.append(f"{arm:14s} {m['runs']:4d} {100 * m['scenario_success_rate']:9.1f} "
                     f"{100 * m['swarm_success_rate']:7.1f} {length:>8s} {mks:>8s}")
    return lines


def _cmd_report(args) -> int:
    paths = sorted(glob.glob(os.path.join(args.dir, "*.csv")))
    if not paths:
        raise CliError(f"no CSV files in {args.dir}")
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            rows.extend(csv.DictReader(fh))
    if not rows:
        raise CliError("CSV files contain no runs")
    metrics = aggregate(rows)
    for line in _format_report(metrics):
        print(line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(metrics, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="homoplan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--planner", default="homotopy", choices=PLANNER_VARIANTS)
    p_run.add_argument("--replan", choices=("on", "off"), default=None)
    p_run.add_argument("--mode", default="lockstep", choices=("lockstep", "concurrent"))
    p_run.add_argument("--trace", default=None, help="write a JSON-lines trace")
    p_run.add_argument("--json", default=None, help="write the full RunResult")
    p_run.set_defaults(func=_cmd_run)

    p_batch = sub.add_parser("batch", help="run all arms x seeds from a config")
    p_batch.add_argument("config")
    p_batch.set_defaults(func=_cmd_batch)

    p_gen = sub.add_parser("gen", help="write a preset scenario file")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--preset", required=True, choices=sorted(PRESETS))
    p_gen.add_argument("--out", default=None)
    p_gen.set_defaults(func=_cmd_gen)

    p_rep = sub.add_parser("report", help="aggregate batch CSVs into arm metrics")
    p_rep.add_argument("dir")
    p_rep.add_argument("--json", default=None)
    p_rep.set_defaults(func=_cmd_report)
    return parser


def execute(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - contract maps crashes to exit 2
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(execute())


if __name__ == "__main__":
    main()
