"""Builders for the reference networks used by the experiments and tests."""

from __future__ import annotations

from dataclasses import dataclass

from linkqueue.fd import TriangularFD
from linkqueue.network import (
    BoundaryConditions,
    Commodity,
    FairMerge,
    FifoDiverge,
    Junction,
    Link,
    LinkKind,
    Network,
    SignalProgram,
    build_network,
    constant,
)

V_FREE = 65.0
W_BACK = 16.25
K_JAM_PER_LANE = 180.0


def standard_fd(lanes: int = 1) -> TriangularFD:
    """V = 65 mph, W = 16.25 mph, 180 vpmpl."""
    return TriangularFD(V_FREE, W_BACK, K_JAM_PER_LANE, lanes)


def single_link_network(length: float = 1.0, lanes: int = 1) -> Network:
    """Origin 0 -> link 1 -> destination 2."""
    links = [
        Link(0, LinkKind.ORIGIN),
        Link(1, LinkKind.NORMAL, length, standard_fd(lanes)),
        Link(2, LinkKind.DESTINATION),
    ]
    return build_network(links, [Junction(0, (0,), (1,)), Junction(1, (1,), (2,))])


def single_link_boundary(demand: float = 2340.0, supply: float = 1170.0) -> BoundaryConditions:
    return BoundaryConditions(demand={0: constant(demand)}, supply={2: constant(supply)})


@dataclass(frozen=True)
class RingConfig:
    """Closed one-link ring with a signal at its only junction.

    The signal is green for the first ``green_ratio`` of every cycle.
    Times are in hours; ``cells`` sets the CTM resolution.
    """

    length: float = 65.0 / 60.0
    lanes: int = 1
    green_ratio: float = 0.5
    cells: int = 100
    horizon: float = 0.5
    average_cycles: int = 4

    def __post_init__(self):
        if not 0.0 < self.green_ratio <= 1.0:
            raise ValueError("green_ratio must lie in (0, 1]")
        if self.cells < 1 or self.average_cycles < 1:
            raise ValueError("cells and average_cycles must be positive")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.cells

    @property
    def dt(self) -> float:
        # CFL number one, so a cycle that is a whole number of cells' travel
        # time is a whole number of steps
        return self.dx / V_FREE


def ring_network(config: RingConfig, cycle: float | None) -> Network:
    """``cycle=None`` builds the unsignalized ring."""
    signal = None
    if cycle is not None:
        if config.green_ratio < 1.0:
            signal = SignalProgram(cycle, ((0.0, config.green_ratio * cycle),))
    links = [Link(0, LinkKind.NORMAL, config.length, standard_fd(config.lanes))]
    return build_network(links, [Junction(0, (0,), (0,), signal=signal)])


#: Lengths and lane counts of links 0..3 in the diverge-merge network.
DM2_LENGTHS = (1.0, 1.0, 2.0, 1.0)
DM2_LANES = (3, 1, 2, 2)
DM2_ORIGIN, DM2_DESTINATION = 4, 5


def dm2_network() -> Network:
    """Diverge-merge network: 4 -> 0 -> {1, 2} -> 3 -> 5, two routes."""
    links = [
        Link(i, LinkKind.NORMAL, length, standard_fd(lanes))
        for i, (length, lanes) in enumerate(zip(DM2_LENGTHS, DM2_LANES))
    ]
    links += [Link(DM2_ORIGIN, LinkKind.ORIGIN), Link(DM2_DESTINATION, LinkKind.DESTINATION)]
    junctions = [
        Junction(0, (DM2_ORIGIN,), (0,)),
        Junction(1, (0,), (1, 2), FifoDiverge()),
        Junction(2, (1, 2), (3,), FairMerge()),
        Junction(3, (3,), (DM2_DESTINATION,)),
    ]
    commodities = [
        Commodity(1, (DM2_ORIGIN, 0, 1, 3, DM2_DESTINATION)),
        Commodity(2, (DM2_ORIGIN, 0, 2, 3, DM2_DESTINATION)),
    ]
    return build_network(links, junctions, commodities)


def dm2_boundary(xi: float, demand=None, supply: float = 4680.0) -> BoundaryConditions:
    """``xi`` is the share of commodity 1 (routed over link 1) at the origin."""
    if not 0.0 <= xi <= 1.0:
        raise ValueError("xi must lie in [0, 1]")
    rate = demand if callable(demand) else constant(7020.0 if demand is None else demand)
    return BoundaryConditions(
        demand={DM2_ORIGIN: rate},
        split={DM2_ORIGIN: {1: xi, 2: 1.0 - xi}},
        supply={DM2_DESTINATION: constant(supply)},
    )
