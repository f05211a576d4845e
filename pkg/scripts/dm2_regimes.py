"""Diverge-merge network: oscillation regimes of both engines over the route split."""

import argparse
from pathlib import Path

import numpy as np

from linkqueue.analysis import detect_oscillation
from linkqueue.ctm import CtmConfig, ctm_simulate
from linkqueue.experiments import write_trajectory_csv
from linkqueue.lqm import SimConfig, simulate
from linkqueue.network import HalfSine
from linkqueue.networks import dm2_boundary, dm2_network

DT, T, DX = 1.75e-4, 1.05, 0.0125


def run(xi, demand=None):
    net, bc = dm2_network(), dm2_boundary(xi, demand)
    lq = simulate(net, None, bc, SimConfig(DT, T))
    ctm, _ = ctm_simulate(net, None, bc, CtmConfig(dx=DX, dt=DT, horizon=T))
    return lq, ctm


def describe(traj):
    rep = detect_oscillation(np.column_stack([traj.series(1), traj.series(2)]), DT)
    period = f", period {rep.period:.3f} h" if rep.period else ""
    k = ", ".join(f"{x:.1f}" for x in rep.terminal_mean)
    return f"{rep.classification.value:24s} terminal (k1, k2) ~ ({k}){period}"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-o", "--output", default="results/dm2")
    ap.add_argument("--xi", type=float, nargs="+", default=[0.3, 0.45, 0.7])
    ap.add_argument("--varying", action="store_true", help="also run the half-sine origin demand")
    args = ap.parse_args()
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)

    for xi in args.xi:
        lq, ctm = run(xi)
        print(f"xi={xi:.2f}  LQ : {describe(lq)}")
        print(f"          CTM: {describe(ctm)}")
        write_trajectory_csv(lq, out / f"dm2_xi{xi:g}_lq.csv")
        write_trajectory_csv(ctm, out / f"dm2_xi{xi:g}_ctm.csv")
    if args.varying:
        lq, ctm = run(0.45, HalfSine(7020.0, T))
        print(f"half-sine demand, xi=0.45  LQ : {describe(lq)}")
        print(f"                           CTM: {describe(ctm)}")
        write_trajectory_csv(lq, out / "dm2_varying_lq.csv")
        write_trajectory_csv(ctm, out / "dm2_varying_ctm.csv")


if __name__ == "__main__":
    main()
