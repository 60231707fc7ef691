"""Wall-clock comparison of the compiled and pure-Python simulation kernels.

    python3 benchmarks/bench_engine.py --repeat 3 --seeds 1,2
"""

import argparse
import statistics
import time

from flcqm.engine import available_backends
from flcqm.scenario import build_paper_scenario
from flcqm.simulator import Simulation


def time_run(scheme, seed, backend):
    spec = build_paper_scenario(scheme, seed)
    t0 = time.perf_counter()
    log = Simulation(spec, backend=backend).run_until(spec.end_time)
    return time.perf_counter() - t0, log.events


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seeds", default="1,2")
    args = p.parse_args(argv)
    seeds = [int(s) for s in args.seeds.split(",")]
    backends = available_backends()

    print(f"{'scheme':<7}{'backend':<9}{'events':>10}{'median s':>11}{'Mevents/s':>11}")
    medians = {}
    for scheme in ("fixed", "flc"):
        for backend in backends:
            times, events = [], 0
            for _ in range(args.repeat):
                for seed in seeds:
                    dt, events = time_run(scheme, seed, backend)
                    times.append(dt)
            med = statistics.median(times)
            medians[(scheme, backend)] = med
            print(f"{scheme:<7}{backend:<9}{events:>10}{med:>11.4f}{events / med / 1e6:>11.2f}")
    if "cython" in backends:
        for scheme in ("fixed", "flc"):
            speedup = medians[(scheme, "python")] / medians[(scheme, "cython")]
            print(f"{scheme}: compiled kernel {speedup:.1f}x faster")
    else:
        print("compiled kernel not built; only the Python fallback was timed")


if __name__ == "__main__":
    main()
