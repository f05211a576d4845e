"""Stationary states and eigenvalues of the reduced diverge-merge system.

Contrasts the free/congested state of the reduced two-link system with the
state the full junction rules actually hold, and sweeps the eigenvalues.
"""

import argparse

import numpy as np

from linkqueue.analysis import (
    dm2_full_state,
    dm2_jacobian_eigen,
    dm2_network_stationary_state,
    dm2_stationary_state,
    stationarity_residual,
)
from linkqueue.lqm import SimConfig, simulate
from linkqueue.networks import dm2_boundary, dm2_network


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--xi", type=float, nargs="+", default=[0.35, 0.4, 0.45, 0.49])
    ap.add_argument("--horizon", type=float, default=10.0)
    args = ap.parse_args()
    net = dm2_network()
    for xi in args.xi:
        bc = dm2_boundary(xi)
        rep = dm2_stationary_state(xi)
        k1n, k2n = dm2_network_stationary_state(xi)
        r_reduced = stationarity_residual(net, dm2_full_state(xi, rep.k1, rep.k2, net), bc)
        r_network = stationarity_residual(net, dm2_full_state(xi, k1n, k2n, net), bc)
        traj = simulate(net, None, bc, SimConfig(1.75e-4, args.horizon, record_every=100))
        lam = ", ".join(f"{z.real:.3f}{z.imag:+.3f}j" for z in rep.eigenvalues)
        print(f"xi={xi:.2f}")
        print(f"  reduced system state  ({rep.k1:7.2f}, {rep.k2:7.2f})  residual {r_reduced:9.3g}  eigenvalues {lam}")
        print(f"  junction-rule state   ({k1n:7.2f}, {k2n:7.2f})  residual {r_network:9.3g}")
        print(f"  LQ after {args.horizon:g} h       ({traj.series(1)[-1]:7.2f}, {traj.series(2)[-1]:7.2f})")
    a, b = 65.0, -16.25
    xis = np.linspace(0.01, 0.99, 99)
    worst = max(max(z.real for z in dm2_jacobian_eigen(x, a, b)) for x in xis)
    print(f"largest real part over xi in [0.01, 0.99] with a={a}, b={b}: {worst:.4f}")


if __name__ == "__main__":
    main()
