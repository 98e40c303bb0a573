"""Command-line harness.

Subcommands: run, sweep, gen-traces, analyze-security, report. Exit code is
zero only when the run's invariant checks pass.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys

from . import harness, security, tracegen
from .config import ConfigError, load_config, resolve
from .cores import write_trace
from .engine import SimulationError


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.raw["seeds"]["mitigation"] = args.seed
    if args.check_protocol:
        cfg.raw["sim"]["collect_command_log"] = True
    try:
        report, result = harness.run_experiment(cfg)
    except SimulationError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return 3
    if args.check_protocol:
        from .protocol_check import replay
        violations = replay(result.command_log, cfg.geometry, cfg.timing)
        report.checks["protocol_replay"] = not violations
        for v in violations[:20]:
            print(f"protocol: {v}", file=sys.stderr)
    json_path, text_path = harness.write_report(report, args.out, args.name)
    if args.dump_command_log and result.command_log is not None:
        harness.dump_command_log(result, os.path.join(args.out, f"{args.name}.cmds.gz"))
    print(f"wrote {json_path} and {text_path}")
    print(f"weighted_speedup={report.weighted_speedup} "
          f"actions={sum(report.action_counts.values())} "
          f"suspects={report.suspects_marked}")
    ok = harness.checks_pass(report)
    if not ok:
        failed = [k for k, v in report.checks.items() if not v]
        print(f"invariant checks FAILED: {failed}", file=sys.stderr)
    return 0 if ok else 1


def _cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    template = copy.deepcopy(cfg.raw)
    mixes = None
    if args.mixes:
        runs = tracegen.read_mix_manifest(args.mixes)
        base = os.path.dirname(os.path.abspath(args.mixes))
        mixes = {}
        for i, paths in enumerate(runs):
            resolved = [p if os.path.isabs(p) else os.path.join(base, p) for p in paths]
            mixes[f"mix{i}"] = resolved
    else:
        # resolve template trace paths relative to the config file
        from .config import trace_paths
        template["workload"]["traces"] = trace_paths(cfg)
    rows = harness.sweep(template, args.nrh, args.mechanisms, mixes, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "sweep.csv")
    harness.write_sweep_csv(rows, out_csv)
    failures = [r for r in rows if r["status"] != "ok"]
    print(f"wrote {out_csv} ({len(rows)} rows, {len(failures)} failed)")
    for r in failures:
        print(f"  {r['mechanism']}@{r['nrh']}/{r['mix']}: {r['status']}", file=sys.stderr)
    return 0


def _cmd_gen_traces(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    sim_cfg = {}
    if args.config:
        # resolve without requiring workload traces to exist yet
        import yaml
        with open(args.config) as fh:
            data = yaml.safe_load(fh) or {}
        data.setdefault("workload", {})["traces"] = []
        sim_cfg = resolve(data, args.config).raw
    written = []
    for spec in args.benign:
        klass, _, seed = spec.partition(":")
        seed = int(seed) if seed else 1
        target = tracegen.CLASS_TARGETS.get(klass.upper())
        if target is None:
            print(f"unknown intensity class {klass!r} (use H/M/L)", file=sys.stderr)
            return 2
        profile = tracegen.BenignProfile(target_rbmpki=target, seed=seed)
        entries = tracegen.gen_benign(profile, args.length, sim_config=copy.deepcopy(sim_cfg) or None)
        path = os.path.join(args.out, f"benign_{klass.upper()}_{seed}.trace")
        write_trace(path, entries)
        written.append(path)
    for spec in args.attacker:
        rows, _, seed = spec.partition(":")
        seed = int(seed) if seed else 1
        profile = tracegen.AttackerProfile(num_aggressor_rows=int(rows),
                                           same_bank=not args.multi_bank, seed=seed,
                                           stagger_span=args.stagger)
        entries = tracegen.gen_attacker(profile, args.length,
                                        sim_config=copy.deepcopy(sim_cfg) or None)
        path = os.path.join(args.out, f"attacker_{rows}r_{seed}.trace")
        write_trace(path, entries)
        written.append(path)
    if args.manifest and written:
        tracegen.write_mix_manifest(os.path.join(args.out, "mix.manifest"), [written])
    for path in written:
        print(path)
    return 0


def _cmd_analyze_security(args) -> int:
    if args.f_atk is not None:
        q = security.BoundQuery(args.f_atk, args.th_outlier[0])
        ratio = security.max_attack_ratio(q)
        print("inf" if ratio == security.UNBOUNDED else f"{ratio:.6f}")
        return 0
    steps = args.grid_steps
    f_grid = [i / steps for i in range(steps)]
    security.write_sweep_csv(args.out, args.th_outlier, f_grid)
    print(f"wrote {args.out}")
    return 0


def _cmd_report(args) -> int:
    print(harness.render_report_text(args.stats), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hammersim",
                                description="Cycle-level DRAM read-disturbance and throttling simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one experiment (solo baselines + shared run)")
    run.add_argument("-c", "--config", required=True)
    run.add_argument("-o", "--out", default="out")
    run.add_argument("--name", default="stats")
    run.add_argument("--seed", type=int, default=None, help="override seeds.mitigation")
    run.add_argument("--check-protocol", action="store_true",
                     help="replay the command log through the independent checker")
    run.add_argument("--dump-command-log", action="store_true")
    run.set_defaults(func=_cmd_run)

    sw = sub.add_parser("sweep", help="grid of runs over mechanisms and disturbance thresholds")
    sw.add_argument("-c", "--config", required=True, help="template config")
    sw.add_argument("-o", "--out", default="out")
    sw.add_argument("--nrh", type=int, nargs="+", default=[4096, 1024, 256])
    sw.add_argument("--mechanisms", nargs="+", default=["graphene"])
    sw.add_argument("--mixes", help="mix manifest: one comma-separated trace list per line")
    sw.add_argument("-j", "--jobs", type=int, default=1,
                    help="parallel worker processes for sweep rows")
    sw.set_defaults(func=_cmd_sweep)

    gen = sub.add_parser("gen-traces", help="generate synthetic benign/attacker traces")
    gen.add_argument("-o", "--out", default="traces")
    gen.add_argument("--length", type=int, default=1_000_000, help="instructions per trace")
    gen.add_argument("--benign", nargs="*", default=[],
                     help="intensity class specs like H:1 M:2 L:3")
    gen.add_argument("--attacker", nargs="*", default=[],
                     help="attacker specs as <aggressor_rows>[:seed]")
    gen.add_argument("--multi-bank", action="store_true",
                     help="spread aggressor rows over all banks")
    gen.add_argument("--stagger", type=int, default=0,
                     help="attacker phase-stagger span in activations")
    gen.add_argument("--config", help="config supplying geometry/timing for calibration")
    gen.add_argument("--manifest", action="store_true", help="also write a mix manifest")
    gen.set_defaults(func=_cmd_gen_traces)

    an = sub.add_parser("analyze-security", help="closed-form multi-thread attack bound")
    an.add_argument("--th-outlier", type=float, nargs="+", default=[0.05, 0.2, 0.65, 1.0])
    an.add_argument("--f-atk", type=float, default=None,
                    help="single query instead of a CSV sweep")
    an.add_argument("--grid-steps", type=int, default=100)
    an.add_argument("-o", "--out", default="security_bound.csv")
    an.set_defaults(func=_cmd_analyze_security)

    rep = sub.add_parser("report", help="summarize saved stats reports")
    rep.add_argument("stats", nargs="+", help="stats.json paths")
    rep.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
