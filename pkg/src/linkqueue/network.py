"""Network topology, commodity routing and simulation state containers."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence, Union

from linkqueue.fd import UNBOUNDED, FundamentalDiagram

LinkId = int
JunctionId = int
CommodityId = int

STATE_RTOL = 1e-9


class NetworkError(ValueError):
    """Raised for topologies that cannot be built."""


class LinkKind(str, Enum):
    NORMAL = "normal"
    ORIGIN = "origin"
    DESTINATION = "destination"


@dataclass(frozen=True)
class Link:
    id: LinkId
    kind: LinkKind
    length: float | None = None
    fd: FundamentalDiagram | None = None
    # origins only: keep a point queue fed by arrival rates, or take demands directly
    point_queue: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", LinkKind(self.kind))
        if self.kind is LinkKind.NORMAL:
            if self.length is None or not self.length > 0:
                raise NetworkError(f"normal link {self.id} needs a positive length")
            if self.fd is None:
                raise NetworkError(f"normal link {self.id} needs a fundamental diagram")
            if self.point_queue:
                raise NetworkError(f"only origins carry point queues (link {self.id})")
        else:
            if self.length is not None or self.fd is not None:
                raise NetworkError(f"{self.kind.value} link {self.id} carries no length or fd")
            if self.point_queue and self.kind is LinkKind.DESTINATION:
                raise NetworkError(f"only origins carry point queues (link {self.id})")


# --- junction rules ------------------------------------------------------


@dataclass(frozen=True)
class Linear:
    arity = (1, 1)


@dataclass(frozen=True)
class FairMerge:
    arity = (2, 1)


@dataclass(frozen=True)
class PriorityMerge:
    alpha: float
    arity = (2, 1)

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise NetworkError(f"merge priority must lie in (0, 1), got {self.alpha!r}")


@dataclass(frozen=True)
class FifoDiverge:
    arity = (1, 2)


@dataclass(frozen=True)
class EvacuationDiverge:
    beta: float
    arity = (1, 2)

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise NetworkError(f"evacuation priority must lie in (0, 1), got {self.beta!r}")


@dataclass(frozen=True)
class UnifiedFairFifo:
    arity = None


FluxRule = Union[Linear, FairMerge, PriorityMerge, FifoDiverge, EvacuationDiverge, UnifiedFairFifo]


@dataclass(frozen=True)
class SignalProgram:
    """Periodic on/off gate. ``green`` holds [start, end) intervals within one cycle."""

    cycle: float
    green: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "green", tuple(tuple(map(float, iv)) for iv in self.green))
        if not self.cycle > 0:
            raise NetworkError("signal cycle must be positive")
        prev_end = 0.0
        for start, end in sorted(self.green):
            if not (0 <= start < end <= self.cycle):
                raise NetworkError(f"green interval {(start, end)} not inside [0, {self.cycle})")
            if start < prev_end:
                raise NetworkError("green intervals overlap")
            prev_end = end

    def __call__(self, t: float) -> float:
        # nudge by a relative epsilon so that switch times that are float
        # multiples of dt land on the intended side
        phase = math.fmod(t + 1e-9 * self.cycle, self.cycle)
        if phase < 0:
            phase += self.cycle
        for start, end in self.green:
            if start <= phase < end:
                return 1.0
        return 0.0

    @property
    def green_ratio(self) -> float:
        return sum(end - start for start, end in self.green) / self.cycle


@dataclass(frozen=True)
class Junction:
    id: JunctionId
    upstream: tuple[LinkId, ...]
    downstream: tuple[LinkId, ...]
    rule: FluxRule = field(default_factory=Linear)
    signal: SignalProgram | None = None

    def __post_init__(self):
        object.__setattr__(self, "upstream", tuple(self.upstream))
        object.__setattr__(self, "downstream", tuple(self.downstream))


@dataclass(frozen=True)
class Commodity:
    id: CommodityId
    path: tuple[LinkId, ...]

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))


# --- network -------------------------------------------------------------


@dataclass(frozen=True)
class Network:
    """Validated, immutable network. Build it with :func:`build_network`."""

    links: tuple[Link, ...]
    junctions: tuple[Junction, ...]
    commodities: tuple[Commodity, ...]
    link_index: Mapping[LinkId, int]
    junction_index: Mapping[JunctionId, int]
    upstream_junction: Mapping[LinkId, JunctionId]
    downstream_junction: Mapping[LinkId, JunctionId]
    # commodities using each link, in commodity declaration order
    link_commodities: Mapping[LinkId, tuple[CommodityId, ...]]
    # next link of a commodity after a given link
    successor: Mapping[tuple[LinkId, CommodityId], LinkId]

    def link(self, link_id: LinkId) -> Link:
        return self.links[self.link_index[link_id]]

    def junction(self, junction_id: JunctionId) -> Junction:
        return self.junctions[self.junction_index[junction_id]]

    @property
    def normal_links(self) -> list[Link]:
        return [l for l in self.links if l.kind is LinkKind.NORMAL]

    @property
    def origins(self) -> list[Link]:
        return [l for l in self.links if l.kind is LinkKind.ORIGIN]

    @property
    def destinations(self) -> list[Link]:
        return [l for l in self.links if l.kind is LinkKind.DESTINATION]

    @property
    def routed(self) -> bool:
        """True when vehicles are tracked by commodity."""
        return bool(self.commodities)


def build_network(
    links: Sequence[Link], junctions: Sequence[Junction], commodities: Sequence[Commodity] = ()
) -> Network:
    """Validate a topology and derive its adjacency.

    A network either routes every vehicle through commodity paths or has no
    commodities at all; rules that need turning proportions (FIFO diverge,
    unified with several downstream links) require the former, and the
    evacuation diverge requires the latter.
    """
    link_index: dict[LinkId, int] = {}
    for i, link in enumerate(links):
        if link.id in link_index:
            raise NetworkError(f"duplicate link id {link.id}")
        link_index[link.id] = i
    junction_index: dict[JunctionId, int] = {}
    upstream_junction: dict[LinkId, JunctionId] = {}
    downstream_junction: dict[LinkId, JunctionId] = {}

    for i, j in enumerate(junctions):
        if j.id in junction_index:
            raise NetworkError(f"duplicate junction id {j.id}")
        junction_index[j.id] = i
        if not j.upstream or not j.downstream:
            raise NetworkError(f"junction {j.id} needs upstream and downstream links")
        for lid in j.upstream + j.downstream:
            if lid not in link_index:
                raise NetworkError(f"junction {j.id} references unknown link {lid}")
        if len(set(j.upstream)) != len(j.upstream) or len(set(j.downstream)) != len(j.downstream):
            raise NetworkError(f"junction {j.id} lists a link twice")
        shared = set(j.upstream) & set(j.downstream)
        # a single link closing on itself (ring road) is the only admitted overlap
        if shared and not (len(j.upstream) == len(j.downstream) == 1):
            raise NetworkError(f"junction {j.id}: upstream and downstream sets overlap")
        arity = j.rule.arity
        if arity is not None and (len(j.upstream), len(j.downstream)) != arity:
            raise NetworkError(
                f"junction {j.id}: rule {type(j.rule).__name__} needs {arity[0]} upstream "
                f"and {arity[1]} downstream links, got {len(j.upstream)}x{len(j.downstream)}"
            )
        for lid in j.upstream:
            if lid in downstream_junction:
                raise NetworkError(f"link {lid} is upstream of two junctions")
            if links[link_index[lid]].kind is LinkKind.DESTINATION:
                raise NetworkError(f"destination link {lid} cannot feed junction {j.id}")
            downstream_junction[lid] = j.id
        for lid in j.downstream:
            if lid in upstream_junction:
                raise NetworkError(f"link {lid} is downstream of two junctions")
            if links[link_index[lid]].kind is LinkKind.ORIGIN:
                raise NetworkError(f"origin link {lid} cannot leave junction {j.id}")
            upstream_junction[lid] = j.id

    for link in links:
        if link.kind is not LinkKind.DESTINATION and link.id not in downstream_junction:
            raise NetworkError(f"link {link.id} has no downstream junction")
        if link.kind is not LinkKind.ORIGIN and link.id not in upstream_junction:
            raise NetworkError(f"link {link.id} has no upstream junction")

    link_commodities: dict[LinkId, list[CommodityId]] = {l.id: [] for l in links}
    successor: dict[tuple[LinkId, CommodityId], LinkId] = {}
    seen_commodities = set()
    for c in commodities:
        if c.id in seen_commodities:
            raise NetworkError(f"duplicate commodity id {c.id}")
        seen_commodities.add(c.id)
        path = c.path
        if len(path) < 2:
            raise NetworkError(f"commodity {c.id}: path too short")
        for lid in path:
            if lid not in link_index:
                raise NetworkError(f"commodity {c.id} references unknown link {lid}")
        if len(set(path)) != len(path):
            raise NetworkError(f"commodity {c.id}: path visits a link twice")
        if links[link_index[path[0]]].kind is not LinkKind.ORIGIN:
            raise NetworkError(f"commodity {c.id}: path must start at an origin")
        if links[link_index[path[-1]]].kind is not LinkKind.DESTINATION:
            raise NetworkError(f"commodity {c.id}: path must end at a destination")
        for a, b in zip(path, path[1:]):
            if downstream_junction.get(a) is None or downstream_junction.get(a) != upstream_junction.get(b):
                raise NetworkError(f"commodity {c.id}: links {a} and {b} do not share a junction")
            successor[(a, c.id)] = b
        for lid in path:
            link_commodities[lid].append(c.id)

    routed = bool(commodities)
    if routed:
        for link in links:
            if not link_commodities[link.id]:
                raise NetworkError(f"link {link.id} is not on any commodity path")
    for j in junctions:
        rule = j.rule
        if routed and isinstance(rule, EvacuationDiverge):
            raise NetworkError(
                f"junction {j.id}: evacuation diverge has no route choice and cannot "
                "carry commodities with fixed paths"
            )
        needs_turning = isinstance(rule, FifoDiverge) or (
            isinstance(rule, UnifiedFairFifo) and len(j.downstream) > 1
        )
        if needs_turning and not routed:
            raise NetworkError(f"junction {j.id}: rule needs commodity paths for turning proportions")

    return Network(
        links=tuple(links),
        junctions=tuple(junctions),
        commodities=tuple(commodities),
        link_index=link_index,
        junction_index=junction_index,
        upstream_junction=upstream_junction,
        downstream_junction=downstream_junction,
        link_commodities={k: tuple(v) for k, v in link_commodities.items()},
        successor=successor,
    )


# --- state ---------------------------------------------------------------


@dataclass
class NetworkState:
    """Densities of normal links (veh/mile) and queue lengths of origins (veh).

    Commodity maps are keyed by link and then commodity id; they are empty
    for networks without commodities.  Origins without a point queue carry
    no state.
    """

    density: dict[LinkId, float]
    commodity_density: dict[LinkId, dict[CommodityId, float]] = field(default_factory=dict)
    queue: dict[LinkId, float] = field(default_factory=dict)
    commodity_queue: dict[LinkId, dict[CommodityId, float]] = field(default_factory=dict)

    @classmethod
    def empty(cls, network: Network) -> "NetworkState":
        density = {l.id: 0.0 for l in network.normal_links}
        queue = {l.id: 0.0 for l in network.origins if l.point_queue}
        cd, cq = {}, {}
        if network.routed:
            cd = {lid: {w: 0.0 for w in network.link_commodities[lid]} for lid in density}
            cq = {lid: {w: 0.0 for w in network.link_commodities[lid]} for lid in queue}
        return cls(density, cd, queue, cq)

    @classmethod
    def uniform(cls, network: Network, densities: Mapping[LinkId, float]) -> "NetworkState":
        """State with given link densities, split evenly over each link's commodities."""
        state = cls.empty(network)
        for lid, k in densities.items():
            state.density[lid] = float(k)
            ws = state.commodity_density.get(lid, {})
            for w in ws:
                ws[w] = float(k) / len(ws)
        return state

    def copy(self) -> "NetworkState":
        return NetworkState(
            dict(self.density),
            {k: dict(v) for k, v in self.commodity_density.items()},
            dict(self.queue),
            {k: dict(v) for k, v in self.commodity_queue.items()},
        )

    def total_vehicles(self, network: Network) -> float:
        return sum(network.link(lid).length * k for lid, k in self.density.items()) + sum(
            self.queue.values()
        )


def _consistent(total, parts):
    return abs(sum(parts) - total) <= STATE_RTOL * max(abs(total), 1.0)


def validate_state(network: Network, state: NetworkState) -> list[str]:
    """Return the invariant violations of ``state`` (empty when valid)."""
    problems = []
    normal = {l.id for l in network.normal_links}
    queued = {l.id for l in network.origins if l.point_queue}
    if set(state.density) != normal:
        problems.append(f"density keys {sorted(state.density)} != normal links {sorted(normal)}")
    if set(state.queue) != queued:
        problems.append(f"queue keys {sorted(state.queue)} != point-queue origins {sorted(queued)}")
    for lid, k in state.density.items():
        if lid not in normal:
            continue
        k_jam = network.link(lid).fd.k_jam
        if not 0 <= k <= k_jam:
            problems.append(f"link {lid}: density {k} outside [0, {k_jam}]")
    for lid, K in state.queue.items():
        if not K >= 0:
            problems.append(f"origin {lid}: negative queue {K}")
    if network.routed:
        for totals, parts, what in (
            (state.density, state.commodity_density, "link"),
            (state.queue, state.commodity_queue, "origin"),
        ):
            for lid, total in totals.items():
                ws = parts.get(lid)
                expected = set(network.link_commodities.get(lid, ()))
                if ws is None or set(ws) != expected:
                    problems.append(f"{what} {lid}: commodity keys do not match its commodities")
                    continue
                if any(not v >= 0 for v in ws.values()):
                    problems.append(f"{what} {lid}: negative commodity amount {ws}")
                if not _consistent(total, ws.values()):
                    problems.append(
                        f"{what} {lid}: commodity sum {sum(ws.values())} != total {total}"
                    )
    return problems


# --- boundary conditions ---------------------------------------------------

RateFn = Callable[[float], float]


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t: float) -> float:
        return self.value


@dataclass(frozen=True)
class HalfSine:
    """0.5 * peak * (sin(4 pi t / period) + 1)."""

    peak: float
    period: float

    def __post_init__(self):
        if not (self.peak >= 0 and self.period > 0):
            raise ValueError("half-sine needs a nonnegative peak and a positive period")

    def __call__(self, t: float) -> float:
        return 0.5 * self.peak * (math.sin(4.0 * math.pi * t / self.period) + 1.0)


@dataclass(frozen=True)
class Piecewise:
    """Piecewise-constant rate: ``values[i]`` on [times[i], times[i+1])."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(map(float, self.times)))
        object.__setattr__(self, "values", tuple(map(float, self.values)))
        if not self.times or len(self.times) != len(self.values):
            raise ValueError("piecewise rate needs matching, nonempty breakpoints and values")
        if self.times[0] != 0.0:
            raise ValueError("piecewise rate must start at t = 0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("piecewise breakpoints must increase strictly")

    def __call__(self, t: float) -> float:
        return self.values[max(bisect.bisect_right(self.times, t) - 1, 0)]


def constant(value: float) -> RateFn:
    return Constant(float(value))


@dataclass
class BoundaryConditions:
    """Time-dependent rates at the network boundary (all in vph).

    ``arrival`` feeds point-queue origins, ``demand`` queueless origins;
    ``split[o][w]`` gives the commodity proportions at origin ``o`` either as
    numbers or as functions of time.  Missing destination supplies are
    unbounded.
    """

    arrival: dict[LinkId, RateFn] = field(default_factory=dict)
    demand: dict[LinkId, RateFn] = field(default_factory=dict)
    split: dict[LinkId, dict[CommodityId, Union[float, RateFn]]] = field(default_factory=dict)
    supply: dict[LinkId, RateFn] = field(default_factory=dict)

    def origin_rate(self, link: Link, t: float) -> float:
        table = self.arrival if link.point_queue else self.demand
        fn = table.get(link.id)
        if fn is None:
            return 0.0
        value = fn(t)
        if not value >= 0:
            raise ValueError(f"origin {link.id}: negative rate {value!r} at t={t}")
        return value

    def origin_split(self, network: Network, origin: LinkId, t: float) -> list[float]:
        commodities = network.link_commodities[origin]
        given = self.split.get(origin)
        if given is None:
            if len(commodities) == 1:
                return [1.0]
            raise ValueError(f"origin {origin}: commodity split missing")
        xs = [given[w](t) if callable(given[w]) else float(given[w]) for w in commodities]
        if any(x < 0 for x in xs) or abs(sum(xs) - 1.0) > 1e-9:
            raise ValueError(f"origin {origin}: split {xs} must be nonnegative and sum to 1")
        return xs

    def destination_supply(self, dest: LinkId, t: float) -> float:
        fn = self.supply.get(dest)
        if fn is None:
            return UNBOUNDED
        value = fn(t)
        if not value >= 0:
            raise ValueError(f"destination {dest}: negative supply {value!r} at t={t}")
        return value

    def validate(self, network: Network) -> None:
        for lid in list(self.arrival) + list(self.demand) + list(self.split):
            if lid not in network.link_index or network.link(lid).kind is not LinkKind.ORIGIN:
                raise ValueError(f"boundary condition for non-origin link {lid}")
        for lid in self.arrival:
            if not network.link(lid).point_queue:
                raise ValueError(f"origin {lid} has no point queue; give a demand instead")
        for lid in self.demand:
            if network.link(lid).point_queue:
                raise ValueError(f"origin {lid} has a point queue; give an arrival rate instead")
        for lid in self.supply:
            if lid not in network.link_index or network.link(lid).kind is not LinkKind.DESTINATION:
                raise ValueError(f"supply given for non-destination link {lid}")
        for lid, ws in self.split.items():
            if set(ws) != set(network.link_commodities[lid]):
                raise ValueError(f"origin {lid}: split keys must be its commodities")
