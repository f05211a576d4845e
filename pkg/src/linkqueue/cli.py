"""Command-line front end.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 integration blow-up.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from linkqueue.analysis import (
    MarginalStabilityWarning,
    closed_form_single_link,
    dm2_network_stationary_state,
    dm2_stability,
    kw_single_link_fluxes,
)
from linkqueue.experiments import (
    bench,
    compare_engines,
    float_format,
    jsonable,
    ring_mfd,
    run_scenario,
    write_jsonl,
)
from linkqueue.lqm import CflError, IntegrationBlowup
from linkqueue.network import NetworkError
from linkqueue.scenario import ScenarioSyntaxError, ScenarioValidationError, load_scenario

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_BLOWUP = 0, 2, 3, 4

log = logging.getLogger("linkqueue")


def _dump(obj) -> None:
    print(json.dumps(jsonable(obj), indent=2, sort_keys=True))


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    report = run_scenario(sc, args.output, record_cells=args.cells)
    for rec in report["records"]:
        if rec["record"] == "run":
            log.info("%s: %d samples, conservation error %.3g", rec["engine"], rec["samples"],
                     rec["conservation_error"])
    print(f"wrote outputs for {sc.name} to {args.output}")
    return EXIT_OK


def cmd_compare(args) -> int:
    sc = load_scenario(args.scenario)
    report = compare_engines(sc, parallel=args.parallel)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl([report], out / f"{sc.name}_compare.jsonl")
    _dump(report)
    return EXIT_OK


def cmd_mfd(args) -> int:
    sc = load_scenario(args.scenario)
    if sc.experiment is None or sc.experiment.kind != "ring-mfd":
        raise ScenarioValidationError("scenario has no ring-mfd experiment", 1)
    result = ring_mfd(sc)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    spec = float_format()
    with open(out / f"{sc.name}_mfd.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["engine", "k", "cycle_minutes", "flux", "link_queue_mfd"])
        for p in result["points"]:
            w.writerow([p["engine"], format(p["k"], spec), format(p["cycle_minutes"], spec),
                        format(p["flux"], spec), format(p["link_queue_mfd"], spec)])
    _dump(result)
    return EXIT_OK


def cmd_stability(args) -> int:
    report = dm2_stability(args.xi, args.l1, args.l2).to_dict()
    k1, k2 = dm2_network_stationary_state(args.xi)
    report["network_stationary_state"] = {"k1": k1, "k2": k2}
    _dump(report)
    return EXIT_OK


def cmd_bench(args) -> int:
    sc = load_scenario(args.scenario)
    _dump(bench(sc, args.repetitions))
    return EXIT_OK


def cmd_oracle(args) -> int:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    spec = float_format()
    times = np.arange(0, int(round(args.horizon / args.dt)) + 1) * args.dt
    with open(out / "single_link_oracle.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "k_link_queue", "f_kinematic_wave", "g_kinematic_wave"])
        for t in times:
            f, g = kw_single_link_fluxes(t)
            w.writerow([format(t, spec), format(closed_form_single_link(t), spec), format(f, spec), format(g, spec)])
    print(f"wrote {len(times)} rows to {out / 'single_link_oracle.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linkqueue", description="Link queue and cell transmission simulations")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the engines of a scenario and write CSV outputs")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--cells", action="store_true", help="also write CTM cell densities")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare link queue and CTM runs")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--parallel", action="store_true", help="run the two engines concurrently")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("mfd", help="ring-road MFD sweep")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_mfd)

    p = sub.add_parser("stability", help="DM2 stationary state and eigenvalues")
    p.add_argument("--xi", type=float, required=True)
    p.add_argument("--l1", type=float, default=1.0, help="length of link 1 for the scaled Jacobian")
    p.add_argument("--l2", type=float, default=1.0, help="length of link 2 for the scaled Jacobian")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("bench", help="time both engines on a scenario")
    p.add_argument("scenario")
    p.add_argument("-n", "--repetitions", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="tabulate closed-form solutions")
    p.add_argument("case", choices=["single-link"])
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--horizon", type=float, default=0.5)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    warnings.simplefilter("always", MarginalStabilityWarning)
    try:
        return args.func(args)
    except ScenarioSyntaxError as exc:
        print(f"{args.scenario if hasattr(args, 'scenario') else ''}: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except IntegrationBlowup as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (ScenarioValidationError, NetworkError, CflError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
