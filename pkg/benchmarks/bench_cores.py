"""Time the reference and compiled simulation cores on the same programs.

    python benchmarks/bench_cores.py [--repeat N] [--grid G]

Both cores must agree on every counter; the script checks that before
printing timings.
"""

from __future__ import annotations

import argparse
import dataclasses
import statistics
import time

from warpshare.config import DynExec, SmConfig
from warpshare.engine import PlanMode, available_backends, build_program, core
from warpshare.workload import Profile, generate


def _cases(grid: int):
    for profile in Profile:
        k = dataclasses.replace(generate(profile, 1), grid_blocks=grid)
        for scheduler, dyn in (("lrr", False), ("owf", True)):
            cfg = SmConfig(num_sms=4, scheduler=scheduler, dyn_exec=DynExec(enabled=dyn))
            yield f"{profile.value}/{scheduler}{'+dyn' if dyn else ''}", cfg, k


def _time(prog, backend: str, repeat: int):
    samples = []
    raw = None
    for _ in range(repeat):
        start = time.perf_counter()
        raw = core.simulate(prog, None, backend)
        samples.append(time.perf_counter() - start)
    return statistics.median(samples), raw


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--grid", type=int, default=16, help="blocks per kernel")
    args = ap.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled core not built; run: python setup.py build_ext --inplace")
        return 1
    print(f"{'case':<24}{'cycles':>9}{'python s':>11}{'cython s':>11}{'speedup':>9}")
    for name, cfg, k in _cases(args.grid):
        prog, _, _ = build_program(cfg, k, PlanMode.SHARING)
        t_py, raw_py = _time(prog, "python", args.repeat)
        t_c, raw_c = _time(prog, "cython", args.repeat)
        if raw_py != raw_c:
            print(f"{name}: cores disagree")
            return 2
        print(f"{name:<24}{raw_c.cycles:>9}{t_py:>11.3f}{t_c:>11.4f}{t_py / t_c:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
