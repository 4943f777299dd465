"""Command-line interface.

    velaid simulate <scenario> [--seed N] [--out DIR] [--no-noise] [--csv] [--plots] [--sweep N]
    velaid validate <scenario>
    velaid analyze <csv>
    velaid selftest

``<scenario>`` is a config file path or the preset name ``paper-fig8``.
Exit codes: 0 success, 1 configuration error, 2 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from velaid.errors import NumericalAbort, VelaidError
from velaid.harness.output import emit_csv, emit_plots, emit_report, read_csv
from velaid.harness.scenario import load_scenario
from velaid.harness.simulate import _fit_windows, run

log = logging.getLogger("velaid")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _simulate_one(scenario, out_dir: Path, csv: bool, plots: bool) -> dict:
    result = run(scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    if csv or plots:
        emit_csv(result.record, out_dir / "run.csv")
    if plots:
        emit_plots(result.record, out_dir, "run.csv")
    emit_report(result.summary, out_dir / "report.json")
    return result.summary


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    if args.no_noise:
        scenario = scenario.without_noise()
    out = Path(args.out or scenario.out_dir)
    csv = args.csv or scenario.write_csv
    plots = args.plots or scenario.write_plots
    if args.sweep:
        seeds = [scenario.rng_seed + i for i in range(args.sweep)]
        jobs = [(scenario.with_seed(sd), out / f"seed_{sd}") for sd in seeds]
        with ProcessPoolExecutor() as pool:
            futures = [pool.submit(_simulate_one, sc, d, csv, plots) for sc, d in jobs]
            summaries = [f.result() for f in futures]
        for sd, sm in zip(seeds, summaries):
            print(f"seed {sd}: max attitude error {sm['max_attitude_error_deg']}")
        return EXIT_OK
    summary = _simulate_one(scenario, out, csv, plots)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    s = load_scenario(args.scenario)
    print(f"{s.name}: ok ({s.n_ticks} ticks at {s.rate:g} Hz, gains {s.gains_spec}, "
          f"{len(s.events)} reinit event(s), disturbance "
          f"{'on' if s.disturbance else 'off'})")
    return EXIT_OK


def analyze_table(header: list[str], data: np.ndarray, jump: float = 10.0) -> dict:
    """Decay-rate fits and a Lyapunov audit from a run CSV.

    Segment boundaries (reinitializations) are the ticks where V grows by
    more than a factor ``jump``. Inside a segment V should be strictly
    decreasing while above 1e-18; other increases count as violations (only
    meaningful for ideal-sensor runs).
    """
    col = {h: i for i, h in enumerate(header)}
    t = data[:, col["t"]]
    V = data[:, col["V"]]
    if len(t) < 2:
        return {"segments": [], "decay_rates": {}, "lyapunov_violations": 0}
    events = np.flatnonzero(V[1:] > jump * V[:-1] + 1e-18) + 1
    bounds = [float(t[0])] + [float(t[k]) for k in events]
    t_end = float(t[-1] + (t[1] - t[0]))
    rates = {name: _fit_windows(t, data[:, col[c]], bounds, t_end)
             for name, c in (("v", "ev"), ("gamma", "eg"), ("beta", "eb"))}
    bad = (V[1:] >= V[:-1]) & (V[:-1] > 1e-18)
    bad[events - 1] = False
    return {"segments": bounds, "decay_rates": rates, "lyapunov_violations": int(bad.sum())}


def cmd_analyze(args) -> int:
    header, data = read_csv(args.csv)
    print(json.dumps(analyze_table(header, data), indent=2))
    return EXIT_OK


def cmd_selftest(args) -> int:
    from velaid.selftest import run_selftest

    return EXIT_OK if run_selftest() else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="velaid", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run a scenario")
    sp.add_argument("scenario")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--no-noise", action="store_true", help="ideal sensors (no bias, no noise)")
    sp.add_argument("--csv", action="store_true")
    sp.add_argument("--plots", action="store_true")
    sp.add_argument("--sweep", type=int, default=0, metavar="N",
                    help="run N consecutive seeds in parallel")
    sp.set_defaults(func=cmd_simulate)

    vp = sub.add_parser("validate", help="check a scenario file")
    vp.add_argument("scenario")
    vp.set_defaults(func=cmd_validate)

    ap = sub.add_parser("analyze", help="rate fits and Lyapunov audit of a run CSV")
    ap.add_argument("csv")
    ap.set_defaults(func=cmd_analyze)

    tp = sub.add_parser("selftest", help="run the invariant checks")
    tp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (VelaidError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
