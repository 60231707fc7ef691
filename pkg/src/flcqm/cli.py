"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import paper_scenario_path, parse_config
from .errors import FuzzyConfigError, InvalidConfig, ParseError, ValidationError
from .metrics import (
    fmt,
    summarize,
    write_dmr_csv,
    write_plot_script,
    write_summary_csv,
    write_surface_csv,
)
from .scenario import build_controller, compare, run_scheme
from .simulator import Simulation

log = logging.getLogger("flcqm")

OUT_ENV = "FLCQM_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _grid(text: str) -> tuple[int, int]:
    vals = _int_list(text)
    if len(vals) != 2 or min(vals) < 2:
        raise argparse.ArgumentTypeError("grid must be E_N,DE_N with both >= 2")
    return vals[0], vals[1]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flcqm", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", type=Path, default=None,
                        help="scenario file (default: bundled paper.scenario)")
        sp.add_argument("--out", type=Path, default=None,
                        help=f"output directory (default: ${OUT_ENV} or ./results)")
        sp.add_argument("--backend", choices=("auto", "cython", "python"), default=None)
        sp.add_argument("--defuzz-resolution", type=int, default=None)

    r = sub.add_parser("run", help="simulate one scheme (or both) for one seed")
    common(r)
    r.add_argument("--scheme", choices=("fixed", "flc", "both"), default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--trace", action="store_true", help="write trace_<scheme>.log, one line per event")
    r.add_argument("--feedback", choices=("outofband", "inband"), default=None)

    c = sub.add_parser("compare", help="run both schemes over several seeds")
    common(c)
    c.add_argument("--seeds", type=_int_list, required=True)
    c.add_argument("--workers", type=int, default=None)

    s = sub.add_parser("surface", help="sample the controller's input-output surface")
    common(s)
    s.add_argument("--grid", type=_grid, default=(31, 41))
    return p


def _load(args):
    spec = parse_config(args.config or paper_scenario_path())
    if args.defuzz_resolution is not None:
        spec = replace(spec, controller=replace(spec.controller,
                                                defuzz_resolution=args.defuzz_resolution))
    return spec


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ENV) or "results")
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise InvalidConfig(f"output directory {out} is not writable")
    return out


def _write_run(out: Path, spec, trace_path: Path | None, backend) -> None:
    if trace_path is not None:
        with open(trace_path, "w") as fh:
            mlog = Simulation(spec, backend=backend, trace=fh).run_until(spec.end_time)
        summary = summarize(mlog, spec.segment_bounds())
    else:
        mlog, summary = run_scheme(spec, backend)
    write_dmr_csv(mlog, out / f"dmr_{spec.scheme}.csv")
    write_summary_csv(summary, mlog, out / f"summary_{spec.scheme}.csv")
    print(f"[{spec.scheme}] seed {spec.seed} ({mlog.backend} kernel)")
    for src, avg in summary.average.items():
        segs = "  ".join("-" if x != x else f"{x:.4f}" for x in summary.segments[src])
        print(f"  {src}: average DMR {avg:.4f}   segments: {segs}")


def cmd_run(args) -> int:
    spec = _load(args)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.feedback is not None:
        spec = replace(spec, feedback=args.feedback)
    schemes = [spec.scheme] if args.scheme is None else (
        ["fixed", "flc"] if args.scheme == "both" else [args.scheme])
    out = _out_dir(args)
    for scheme in schemes:
        s = replace(spec, scheme=scheme)
        trace = out / f"trace_{scheme}.log" if args.trace else None
        _write_run(out, s, trace, args.backend)
    write_plot_script(out, schemes, spec.sources)
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = _load(args)
    if not args.seeds:
        raise InvalidConfig("--seeds needs at least one seed")
    out = _out_dir(args)
    report = compare(args.seeds, spec, workers=args.workers, backend=args.backend)
    for (scheme, seed), (mlog, summary) in sorted(report.runs.items()):
        d = out / f"seed_{seed}"
        d.mkdir(exist_ok=True)
        write_dmr_csv(mlog, d / f"dmr_{scheme}.csv")
        write_summary_csv(summary, mlog, d / f"summary_{scheme}.csv")
    seg_names = [f"{a:g}_{b:g}" for a, b in report.segments]
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "fixed_mean", "fixed_std", "flc_mean", "flc_std", "flc_over_fixed",
                    *(f"fixed_{s}" for s in seg_names), *(f"flc_{s}" for s in seg_names)])
        for r in report.rows:
            w.writerow([r.source, *map(fmt, (r.fixed_mean, r.fixed_std, r.flc_mean, r.flc_std,
                                               r.ratio)),
                        *map(fmt, r.fixed_segments), *map(fmt, r.flc_segments)])
    print(report.format())
    return EXIT_OK


def cmd_surface(args) -> int:
    from .fuzzy import surface_sample

    spec = _load(args)
    out = _out_dir(args)
    e_n, de_n = args.grid
    table = surface_sample(build_controller(spec.controller), e_n, de_n)
    write_surface_csv(table, out / "surface.csv")
    write_plot_script(out, [], [], surface_n=max(e_n, de_n))
    print(f"wrote {len(table)} rows to {out / 'surface.csv'}; "
          f"dh range [{table[:, 2].min():.4f}, {table[:, 2].max():.4f}] ms")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "surface": cmd_surface}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ValidationError, InvalidConfig, FuzzyConfigError,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
