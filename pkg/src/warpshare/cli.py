"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 simulator invariant
violation.  Every command that writes a file also writes
``<out>.manifest.json`` next to it.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .asmreorder import parse, reorder, reorder_report, serialize
from .config import SCHEDULERS, SmConfig
from .engine import PlanMode, Trace, run
from .engine.metrics import SCHEMA_VERSION
from .errors import (ProtocolViolation, SimulatorInvariantViolation, ValidationError)
from .occupancy import (ResourceBudget, SmLimits, compute_occupancy, hw_cost,
                        threshold_from_pct)
from .workload import Profile, generate, load_kernel, save_kernel

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3

SWEEP_FIELDS = ("sharing_pct", "blocks_resident", "ipc", "stall_cycles", "idle_cycles",
                "l1_miss_rate")


class UsageError(Exception):
    pass


class InputError(Exception):
    """Bad input tied to the flag that supplied it."""

    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _pct_list(text: str) -> list[float]:
    try:
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("at least one percentage is required")
    bad = [v for v in values if not 0 <= v < 100]
    if bad:
        raise argparse.ArgumentTypeError(f"percentages must be in [0, 100), got {bad[0]:g}")
    return values


def _pct_label(p: float) -> str:
    return f"{p:g}"


def _seed(args) -> int:
    env = os.environ.get("WARPSHARE_SEED")
    if env is None or env == "":
        return args.seed
    try:
        seed = int(env)
    except ValueError:
        raise UsageError(f"WARPSHARE_SEED must be an integer, got {env!r}")
    if seed < 0:
        raise UsageError("WARPSHARE_SEED must be >= 0")
    return seed


def _manifest(out: Path, command: str, argv, config: dict | None, workload_hash: str | None,
              seed: int | None):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "argv": list(argv),
        "config": config,
        "workload_hash": workload_hash,
        "seed": seed,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = out.with_name(out.name + ".manifest.json")
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# occupancy / hwcost

def cmd_occupancy(args, argv) -> int:
    if (args.regs_per_thread is None) == (args.spm_per_block is None):
        raise UsageError("give exactly one of --regs-per-thread or --spm-per-block")
    limits = SmLimits(args.max_threads, args.max_blocks)
    if args.regs_per_thread is not None:
        budget = ResourceBudget.registers(args.registers, args.threads_per_block,
                                          args.regs_per_thread)
    else:
        budget = ResourceBudget.scratchpad(args.scratchpad, args.spm_per_block)
    flag = "--regs-per-thread" if args.regs_per_thread is not None else "--spm-per-block"
    rows = []
    for p in args.sharing_pct:
        try:
            plan = compute_occupancy(budget, limits, args.threads_per_block,
                                     threshold_from_pct(p))
        except ValidationError as exc:
            raise InputError(flag, str(exc))
        rows.append((_pct_label(p), plan.unshared_blocks, plan.shared_pairs,
                     plan.total_blocks, plan.limited_by))
    _emit(_write_csv(rows, ("sharing_pct", "U", "S", "M", "limited_by")), args.out)
    if args.out:
        _manifest(Path(args.out), "occupancy", argv, None, None, None)
    return EXIT_OK


def cmd_hwcost(args, argv) -> int:
    r = hw_cost(args.blocks, args.warps, args.sms)
    text = (f"register_sharing_bits,{r.register_sharing_bits}\n"
            f"scratchpad_sharing_bits,{r.scratchpad_sharing_bits}\n")
    _emit(text, args.out)
    if args.out:
        _manifest(Path(args.out), "hwcost", argv, None, None, None)
    return EXIT_OK


# gen / reorder

def cmd_gen(args, argv) -> int:
    seed = _seed(args)
    k = generate(Profile.parse(args.profile), seed)
    out = Path(args.out)
    save_kernel(k, out)
    _manifest(out, "gen", argv, None, k.digest(), seed)
    return EXIT_OK


def _read(path: str, flag: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(flag, f"cannot read {path}: {exc.strerror}")


def cmd_reorder(args, argv) -> int:
    text = _read(args.input, "--in")
    try:
        before = parse(text)
    except ValidationError as exc:
        raise InputError("--in", str(exc))
    after = reorder(before)
    out = Path(args.out)
    out.write_text(serialize(after))
    if args.report:
        rows = reorder_report(before, after, args.threshold)
        sys.stdout.write(_write_csv(rows, ("name", "seq_before", "seq_after", "class")))
    _manifest(out, "reorder", argv, {"threshold": args.threshold},
              hashlib.sha256(text.encode()).hexdigest(), None)
    return EXIT_OK


# simulate / sweep

def _load_inputs(args) -> tuple[SmConfig, object]:
    cfg = SmConfig()
    if args.config:
        try:
            cfg = SmConfig.load(args.config)
        except OSError as exc:
            raise InputError("--config", f"cannot read {args.config}: {exc.strerror}")
        except ValidationError as exc:
            raise InputError("--config", str(exc))
    try:
        kernel = load_kernel(args.workload)
    except OSError as exc:
        raise InputError("--workload", f"cannot read {args.workload}: {exc.strerror}")
    except ValidationError as exc:
        raise InputError("--workload", str(exc))
    updates = {}
    seed = _seed(args)
    if seed is not None:
        updates["rng_seed"] = seed
    if args.scheduler:
        updates["scheduler"] = args.scheduler
    if args.dyn:
        updates["dyn_exec.enabled"] = True
    if updates:
        try:
            cfg = cfg.replace(**updates)
        except ValidationError as exc:
            raise InputError("--seed" if "rng_seed" in updates else "--config", str(exc))
    return cfg, kernel


def _simulate_one(cfg: SmConfig, kernel, mode, reorder_enabled: bool, trace=None):
    try:
        return run(cfg, kernel, mode, reorder_enabled, trace)
    except ValidationError as exc:
        raise InputError("--workload", str(exc))


def cmd_simulate(args, argv) -> int:
    cfg, kernel = _load_inputs(args)
    trace = Trace(locks=True) if args.trace_locks else None
    report = _simulate_one(cfg, kernel, PlanMode.parse(args.mode), args.reorder, trace)
    out = Path(args.out)
    out.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    _manifest(out, "simulate", argv, cfg.to_dict(), kernel.digest(), cfg.rng_seed)
    if trace is not None:
        # One line per event: cycle,sm,event,holder,requester.
        csv.writer(sys.stdout, lineterminator="\n").writerows(trace.locks)
    return EXIT_OK


def _sweep_point(job):
    cfg, kernel, reorder_enabled, pct = job
    point = cfg.replace(sharing_threshold=float(threshold_from_pct(pct)))
    r = run(point, kernel, PlanMode.SHARING, reorder_enabled)
    return (_pct_label(pct), r.blocks_resident, repr(r.ipc), r.stall_cycles, r.idle_cycles,
            repr(r.l1_miss_rate))


def cmd_sweep(args, argv) -> int:
    cfg, kernel = _load_inputs(args)
    jobs = [(cfg, kernel, args.reorder, p) for p in args.sharing_pct]
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                rows = list(pool.map(_sweep_point, jobs))  # map keeps input order
        else:
            rows = [_sweep_point(j) for j in jobs]
    except ValidationError as exc:
        raise InputError("--workload", str(exc))
    out = Path(args.out)
    out.write_text(_write_csv(rows, SWEEP_FIELDS))
    _manifest(out, "sweep", argv, cfg.to_dict(), kernel.digest(), cfg.rng_seed)
    return EXIT_OK


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _threshold(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {v:g}")
    return v


def _sim_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="SmConfig JSON file (defaults apply when omitted)")
    p.add_argument("--workload", required=True, help="workload JSON file")
    p.add_argument("--scheduler", choices=SCHEDULERS, help="override the config's scheduler")
    p.add_argument("--dyn", action="store_true", help="enable dynamic warp throttling")
    p.add_argument("--reorder", action="store_true",
                   help="renumber workload registers by first use before running")
    p.add_argument("--seed", type=_nonneg, default=None,
                   help="RNG seed for the throttle (WARPSHARE_SEED overrides)")
    p.add_argument("--out", required=True, help="output file")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="warpshare", description="Register and scratchpad sharing between "
                 "GPU thread block pairs: occupancy, reordering and simulation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("occupancy", help="resident blocks per SM for each sharing percentage")
    p.add_argument("--registers", type=_positive, default=32768, help="registers per SM")
    p.add_argument("--scratchpad", type=_positive, default=16384, help="scratchpad bytes per SM")
    p.add_argument("--regs-per-thread", type=_positive, help="registers per thread")
    p.add_argument("--spm-per-block", type=_positive, help="scratchpad bytes per block")
    p.add_argument("--threads-per-block", type=_positive, required=True, help="threads per block")
    p.add_argument("--max-threads", type=_positive, default=1536, help="thread cap per SM")
    p.add_argument("--max-blocks", type=_positive, default=8, help="block cap per SM")
    p.add_argument("--sharing-pct", type=_pct_list, default=[0.0],
                   help="comma-separated sharing percentages, e.g. 0,10,30,50,70,90")
    p.add_argument("--out", help="CSV file (stdout when omitted)")
    p.set_defaults(fn=cmd_occupancy)

    p = sub.add_parser("hwcost", help="storage bits needed for sharing support")
    p.add_argument("--blocks", type=_positive, required=True, help="max blocks per SM (T)")
    p.add_argument("--warps", type=_positive, required=True, help="max warps per SM (W)")
    p.add_argument("--sms", type=_positive, required=True, help="number of SMs (N)")
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.set_defaults(fn=cmd_hwcost)

    p = sub.add_parser("gen", help="generate a synthetic workload")
    p.add_argument("--profile", required=True, choices=[x.value for x in Profile],
                   help="kernel family")
    p.add_argument("--seed", type=_nonneg, default=0, help="generator seed "
                   "(WARPSHARE_SEED overrides)")
    p.add_argument("--out", required=True, help="workload JSON file")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("reorder", help="renumber assembly register declarations by first use")
    p.add_argument("--in", dest="input", required=True, help="input assembly file")
    p.add_argument("--out", required=True, help="output assembly file")
    p.add_argument("--threshold", type=_threshold, default=0.1,
                   help="private fraction used to classify registers in the report")
    p.add_argument("--report", action="store_true",
                   help="print name,seq_before,seq_after,class CSV to stdout")
    p.set_defaults(fn=cmd_reorder)

    p = sub.add_parser("simulate", help="run one kernel and write metrics JSON")
    _sim_flags(p)
    p.add_argument("--mode", choices=[m.value for m in PlanMode], default="sharing",
                   help="block allocation (default: sharing)")
    p.add_argument("--trace-locks", action="store_true",
                   help="print cycle,sm,event,holder,requester for every lock event")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", help="simulate across sharing percentages and write CSV")
    _sim_flags(p)
    p.add_argument("--sharing-pct", type=_pct_list, default=[0, 10, 30, 50, 70, 90],
                   help="comma-separated sharing percentages")
    p.add_argument("--jobs", type=_positive, default=1, help="worker processes")
    p.set_defaults(fn=cmd_sweep)
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args, argv)
    except UsageError as exc:
        print(f"warpshare: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"warpshare: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SimulatorInvariantViolation, ProtocolViolation) as exc:
        print(f"warpshare: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValidationError as exc:
        print(f"warpshare: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        # Reader went away (e.g. piped into head); stay quiet at exit.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
