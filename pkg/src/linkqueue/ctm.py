"""Commodity-based cell transmission model used as a kinematic wave reference.

Links are cut into equal cells.  Interfaces inside a link pass
min(demand upstream, supply downstream); junctions are resolved by the same
:class:`~linkqueue.lqm.JunctionKernel` as the link queue model, fed with the
demand of each link's last cell and the supply of its first cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from linkqueue.lqm import (
    CflError,
    IntegrationBlowup,
    JunctionKernel,
    Trajectory,
    _Recorder,
    sample_count,
    boundary_crossings,
)
from linkqueue.fd import CLAMP_TOL
from linkqueue.network import BoundaryConditions, LinkKind, Network, NetworkState, validate_state


@dataclass
class CtmConfig:
    """Cell size ``dx`` (miles) or explicit per-link cell counts, and the time step.

    ``dt=None`` picks the largest step allowed by the CFL condition.
    """

    dx: float | None = None
    dt: float | None = None
    horizon: float = 1.0
    record_every: int = 1
    cells: dict[int, int] | None = None

    def __post_init__(self):
        if self.dx is None and self.cells is None:
            raise ValueError("give a cell size or per-link cell counts")
        if self.dx is not None and not self.dx > 0:
            raise ValueError("cell size must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")

    @classmethod
    def one_cell_per_link(cls, network: Network, dt: float, horizon: float, record_every: int = 1):
        return cls(dt=dt, horizon=horizon, record_every=record_every,
                   cells={l.id: 1 for l in network.normal_links})


def cell_counts(network: Network, config: CtmConfig) -> dict[int, int]:
    counts = {}
    for link in network.normal_links:
        if config.cells is not None and link.id in config.cells:
            n = int(config.cells[link.id])
        elif config.dx is not None:
            n = max(1, int(round(link.length / config.dx)))
        else:
            raise ValueError(f"no cell count for link {link.id}")
        if n < 1:
            raise ValueError(f"link {link.id}: at least one cell required")
        counts[link.id] = n
    return counts


def max_stable_dt(network: Network, config: CtmConfig) -> float:
    counts = cell_counts(network, config)
    return min(l.length / counts[l.id] / l.fd.v_free for l in network.normal_links)


@dataclass
class CellGrid:
    """Cell densities of every normal link; ``commodity[lid]`` has one column per commodity."""

    density: dict[int, np.ndarray]
    commodity: dict[int, np.ndarray]
    cell_length: dict[int, float]
    queue: dict[int, float] = field(default_factory=dict)
    commodity_queue: dict[int, list[float]] = field(default_factory=dict)

    @classmethod
    def from_state(cls, network: Network, state: NetworkState, counts: dict[int, int]) -> "CellGrid":
        """Spread each link density uniformly over its cells."""
        density, commodity, lengths = {}, {}, {}
        for link in network.normal_links:
            n = counts[link.id]
            density[link.id] = np.full(n, float(state.density[link.id]))
            ws = network.link_commodities[link.id]
            row = [state.commodity_density[link.id][w] for w in ws] if network.routed else []
            commodity[link.id] = np.tile(np.array(row, dtype=float), (n, 1)).reshape(n, len(ws))
            lengths[link.id] = link.length / n
        queue = dict(state.queue)
        cq = {}
        for lid in queue:
            ws = network.link_commodities[lid]
            cq[lid] = [state.commodity_queue[lid][w] for w in ws] if network.routed else []
        return cls(density, commodity, lengths, queue, cq)

    def link_state(self, network: Network) -> NetworkState:
        """Cell-averaged link state."""
        out = NetworkState.empty(network)
        for lid, rho in self.density.items():
            out.density[lid] = float(rho.mean())
            if network.routed:
                avg = self.commodity[lid].mean(axis=0)
                out.commodity_density[lid] = dict(zip(network.link_commodities[lid], map(float, avg)))
        for lid, K in self.queue.items():
            out.queue[lid] = K
            if network.routed:
                out.commodity_queue[lid] = dict(zip(network.link_commodities[lid], self.commodity_queue[lid]))
        return out


@dataclass
class CellTrajectory:
    times: np.ndarray
    # link id -> (samples, cells)
    density: dict[int, np.ndarray]
    cell_length: dict[int, float]


class CellTransmissionEngine:
    def __init__(self, network: Network, bc: BoundaryConditions, grid: CellGrid, dt: float):
        self.network = network
        self.kernel = JunctionKernel(network, bc)
        self.grid = grid
        self.dt = dt
        links = network.links
        self.normal = [i for i, l in enumerate(links) if l.kind is LinkKind.NORMAL]
        self.queued = [i for i, l in enumerate(links) if l.kind is LinkKind.ORIGIN and l.point_queue]
        for i in self.normal:
            link = links[i]
            cfl = link.fd.v_free * dt / grid.cell_length[link.id]
            if cfl > 1 + 1e-12:
                raise CflError(f"link {link.id}: CFL number {cfl:.4g} exceeds 1")
        n = len(links)
        self.queue = [0.0] * n
        self.queue_w = [[] for _ in range(n)]
        for i in self.queued:
            lid = links[i].id
            self.queue[i] = grid.queue[lid]
            self.queue_w[i] = list(grid.commodity_queue[lid])

    def fluxes(self, t):
        kernel = self.kernel
        n = kernel.n_links
        d = [0.0] * n
        s = [0.0] * n
        comp = [None] * n
        links = self.network.links
        routed = kernel.routed
        grid = self.grid
        for i in self.normal:
            lid = links[i].id
            fd = links[i].fd
            rho = grid.density[lid]
            last = rho[-1]
            d[i] = min(fd.v_free * last, fd.capacity)
            s[i] = min(fd.w_back * (fd.k_jam - rho[0]), fd.capacity)
            if routed and last > 0:
                comp[i] = [x / last for x in grid.commodity[lid][-1]]
        return kernel.resolve(t, self.dt, d, s, comp, self.queue, self.queue_w)

    def advance(self, t, f, g, fw, gw):
        dt = self.dt
        links = self.network.links
        grid = self.grid
        routed = self.kernel.routed
        for i in self.normal:
            link = links[i]
            lid = link.id
            fd = link.fd
            rho = grid.density[lid]
            inflow = np.empty_like(rho)
            outflow = np.empty_like(rho)
            inflow[0] = f[i]
            outflow[-1] = g[i]
            if rho.size > 1:
                q = np.minimum(fd.demand_array(rho[:-1]), fd.supply_array(rho[1:]))
                inflow[1:] = q
                outflow[:-1] = q
            r = dt / grid.cell_length[lid]
            new = rho + r * (inflow - outflow)
            lo, hi = new.min(), new.max()
            band = CLAMP_TOL * fd.k_jam
            if lo < -band or hi > fd.k_jam + band:
                bad = lo if lo < -band else hi
                raise IntegrationBlowup(lid, t + dt, float(bad), fd.k_jam)
            if lo < 0 or hi > fd.k_jam:
                new = np.clip(new, 0.0, fd.k_jam)
            if routed:
                rw = grid.commodity[lid]
                win = np.empty_like(rw)
                wout = np.empty_like(rw)
                win[0] = fw[i]
                wout[-1] = gw[i]
                if rho.size > 1:
                    up = rho[:-1]
                    share = np.divide(rw[:-1], up[:, None], out=np.zeros_like(rw[:-1]), where=up[:, None] > 0)
                    qw = q[:, None] * share
                    win[1:] = qw
                    wout[:-1] = qw
                grid.commodity[lid] = np.maximum(rw + r * (win - wout), 0.0)
            grid.density[lid] = new
        for i in self.queued:
            lid = links[i].id
            K = self.queue[i] + (f[i] - g[i]) * dt
            if K < -CLAMP_TOL * max(1.0, self.queue[i]):
                raise IntegrationBlowup(lid, t + dt, K, math.inf)
            self.queue[i] = max(K, 0.0)
            if routed:
                self.queue_w[i] = [max(x + (a - b) * dt, 0.0) for x, a, b in zip(self.queue_w[i], fw[i], gw[i])]
            grid.queue[lid] = self.queue[i]
            grid.commodity_queue[lid] = list(self.queue_w[i])

    def link_row(self):
        """Per-link densities (cell averages, or queue lengths) in kernel order."""
        links = self.network.links
        k = [math.nan] * len(links)
        kw = [[0.0] * len(self.network.link_commodities[l.id]) for l in links]
        for i in self.normal:
            lid = links[i].id
            k[i] = float(self.grid.density[lid].mean())
            if self.kernel.routed:
                kw[i] = [float(x) for x in self.grid.commodity[lid].mean(axis=0)]
        for i in self.queued:
            k[i] = self.queue[i]
            kw[i] = list(self.queue_w[i])
        return k, kw


def ctm_step(network: Network, grid: CellGrid, bc: BoundaryConditions, t: float, dt: float) -> CellGrid:
    """Advance ``grid`` by one Godunov step; returns a new grid."""
    copy = CellGrid(
        {k: v.copy() for k, v in grid.density.items()},
        {k: v.copy() for k, v in grid.commodity.items()},
        dict(grid.cell_length),
        dict(grid.queue),
        {k: list(v) for k, v in grid.commodity_queue.items()},
    )
    engine = CellTransmissionEngine(network, bc, copy, dt)
    f, g, fw, gw, _ = engine.fluxes(t)
    engine.advance(t, f, g, fw, gw)
    return copy


def ctm_simulate(
    network: Network,
    initial: NetworkState | None,
    bc: BoundaryConditions,
    config: CtmConfig,
    record_cells: bool = False,
) -> tuple[Trajectory, CellTrajectory | None]:
    """Run the CTM; link densities in the trajectory are cell averages."""
    state = initial if initial is not None else NetworkState.empty(network)
    problems = validate_state(network, state)
    if problems:
        raise ValueError("invalid initial state: " + "; ".join(problems))
    counts = cell_counts(network, config)
    dt = config.dt if config.dt is not None else max_stable_dt(network, config)
    grid = CellGrid.from_state(network, state, counts)
    engine = CellTransmissionEngine(network, bc, grid, dt)
    n_steps = math.ceil(config.horizon / dt - 1e-9)
    every = config.record_every
    rec = _Recorder(network, engine.kernel, sample_count(n_steps, every))
    cell_times, cell_rows = [], {lid: [] for lid in grid.density}
    entered = left = 0.0
    for i in range(n_steps + 1):
        t = i * dt
        f, g, fw, gw, theta = engine.fluxes(t)
        if i % every == 0 or i == n_steps:
            k, kw = engine.link_row()
            rec.add(t, k, f, g, kw, fw, gw, theta, entered, left)
            if record_cells:
                cell_times.append(t)
                for lid, rho in grid.density.items():
                    cell_rows[lid].append(rho.copy())
        if i == n_steps:
            break
        e, l_ = boundary_crossings(engine.kernel, f, g, dt)
        entered += e
        left += l_
        engine.advance(t, f, g, fw, gw)
    meta = {"dt": dt, "horizon": config.horizon, "cells": counts}
    traj = rec.build("ctm", meta)
    cells = None
    if record_cells:
        cells = CellTrajectory(
            np.array(cell_times), {lid: np.array(rows) for lid, rows in cell_rows.items()}, dict(grid.cell_length)
        )
    return traj, cells
