"""Link queue model: explicit Euler integration of the link density ODEs.

The :class:`JunctionKernel` turns boundary demands and supplies into
junction fluxes.  It is shared with the cell transmission engine so that
both models resolve junctions identically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from linkqueue import flux as fx
from linkqueue.fd import UNBOUNDED, CLAMP_TOL
from linkqueue.network import (
    BoundaryConditions,
    EvacuationDiverge,
    FairMerge,
    FifoDiverge,
    Linear,
    LinkKind,
    Network,
    NetworkState,
    PriorityMerge,
    UnifiedFairFifo,
    validate_state,
)

_LINEAR, _MERGE, _FIFO, _EVAC, _UNIFIED = range(5)


class CflError(ValueError):
    pass


class IntegrationBlowup(RuntimeError):
    def __init__(self, link, t, value, bound):
        super().__init__(f"link {link}: density {value!r} left [0, {bound}] at t={t!r}")
        self.link = link
        self.t = t


@dataclass(frozen=True)
class CflViolation:
    link: int
    bound: float
    dt: float


def check_cfl(network: Network, dt: float) -> CflViolation | None:
    """``None`` when dt <= min L_a / V_a over normal links, else the binding link."""
    worst = None
    for link in network.normal_links:
        bound = link.length / link.fd.v_free
        if worst is None or bound < worst[1]:
            worst = (link.id, bound)
    if worst is None or dt <= worst[1] * (1 + 1e-12):
        return None
    return CflViolation(worst[0], worst[1], dt)


@dataclass
class _CompiledJunction:
    id: int
    code: int
    ups: tuple
    downs: tuple
    caps: tuple
    share: float
    signal: object
    # routes[p] = ((w_local, b_pos, w_local_in_b), ...) for upstream position p
    routes: tuple
    used: tuple


class JunctionKernel:
    """Resolves all junction fluxes of a network from link boundary data.

    Link arrays are indexed by position in ``network.links``.  Engines fill
    ``d``/``s`` for normal links and ``comp`` with commodity proportions
    (``None`` for an empty link); the kernel fills in origins and
    destinations from the boundary conditions.
    """

    def __init__(self, network: Network, bc: BoundaryConditions):
        bc.validate(network)
        self.network = network
        self.bc = bc
        self.routed = network.routed
        links = network.links
        idx = network.link_index
        self.n_links = len(links)
        self.commodities = [network.link_commodities[l.id] for l in links]
        self._no_commodities = [[] for _ in links]
        self.origins = [(i, l) for i, l in enumerate(links) if l.kind is LinkKind.ORIGIN]
        self.destinations = [(i, l) for i, l in enumerate(links) if l.kind is LinkKind.DESTINATION]
        self._const_split = {}
        for i, l in self.origins:
            if self.routed:
                given = bc.split.get(l.id, {})
                if not any(callable(v) for v in given.values()):
                    self._const_split[i] = bc.origin_split(network, l.id, 0.0)

        self.junctions = []
        for j in network.junctions:
            ups = tuple(idx[a] for a in j.upstream)
            downs = tuple(idx[b] for b in j.downstream)
            caps = tuple(self._capacity(a, j) for a in j.upstream)
            rule = j.rule
            share = math.nan
            if isinstance(rule, Linear):
                code = _LINEAR
            elif isinstance(rule, FairMerge):
                code = _MERGE
                share = caps[0] / (caps[0] + caps[1])
            elif isinstance(rule, PriorityMerge):
                code, share = _MERGE, rule.alpha
            elif isinstance(rule, FifoDiverge):
                code = _FIFO
            elif isinstance(rule, EvacuationDiverge):
                code, share = _EVAC, rule.beta
            elif isinstance(rule, UnifiedFairFifo):
                code = _UNIFIED
            else:
                raise TypeError(f"unknown flux rule {rule!r}")
            if code in (_MERGE, _UNIFIED) and not all(math.isfinite(c) for c in caps):
                raise ValueError(
                    f"junction {j.id}: an origin feeding a destination directly has no "
                    "finite capacity for this rule"
                )
            routes, used = [], []
            if self.routed:
                for a_id in j.upstream:
                    r = []
                    for wl, w in enumerate(network.link_commodities[a_id]):
                        b_id = network.successor[(a_id, w)]
                        r.append((wl, j.downstream.index(b_id), network.link_commodities[b_id].index(w)))
                    routes.append(tuple(r))
                    used.append(tuple(sorted({bp for _, bp, _ in r})))
            self.junctions.append(
                _CompiledJunction(j.id, code, ups, downs, caps, share, j.signal, tuple(routes), tuple(used))
            )

    def _capacity(self, link_id, junction):
        link = self.network.link(link_id)
        if link.kind is LinkKind.NORMAL:
            return link.fd.capacity
        # origins: the most the junction can ever pass on
        total = 0.0
        for b in junction.downstream:
            lb = self.network.link(b)
            total += lb.fd.capacity if lb.kind is LinkKind.NORMAL else UNBOUNDED
        return total

    def origin_split(self, i, link, t):
        split = self._const_split.get(i)
        if split is None:
            split = self.bc.origin_split(self.network, link.id, t)
        return split

    def resolve(self, t, dt, d, s, comp, queue=None, queue_w=None):
        """Fill origin/destination data, then compute all junction fluxes.

        Returns ``(f, g, fw, gw, theta)``: per-link in- and out-fluxes, their
        commodity parts and the critical demand level per junction (nan for
        rules other than the unified one).  With ``dt=None`` a nonempty point
        queue has unbounded demand.
        """
        n = self.n_links
        routed = self.routed
        bc = self.bc
        f = [0.0] * n
        g = [0.0] * n
        if routed:
            fw = [[0.0] * len(ws) for ws in self.commodities]
            gw = [[0.0] * len(ws) for ws in self.commodities]
        else:
            # nothing writes into these without commodities
            fw = gw = self._no_commodities
        theta = [math.nan] * len(self.junctions)

        for i, link in self.origins:
            rate = bc.origin_rate(link, t)
            split = self.origin_split(i, link, t) if routed else None
            if link.point_queue:
                K = queue[i]
                if dt is None:
                    d[i] = UNBOUNDED if K > 0 else rate
                else:
                    d[i] = K / dt + rate
                f[i] = rate
                if routed:
                    fw[i] = [rate * x for x in split]
                    if K > 0 and dt is None:
                        comp[i] = [kw / K for kw in queue_w[i]]
                    elif K > 0:
                        comp[i] = [(kw / dt + rate * x) / d[i] for kw, x in zip(queue_w[i], split)]
                    else:
                        comp[i] = split
            else:
                d[i] = rate
                comp[i] = split
        for i, link in self.destinations:
            s[i] = bc.destination_supply(link.id, t)

        for jn, jc in enumerate(self.junctions):
            ups, downs = jc.ups, jc.downs
            code = jc.code
            if code == _LINEAR:
                x = min(d[ups[0]], s[downs[0]])
                gs, fs = [x], [x]
            elif code == _MERGE:
                g1, g2, f3 = fx._merge(d[ups[0]], d[ups[1]], jc.share, s[downs[0]])
                gs, fs = [g1, g2], [f3]
            elif code == _FIFO:
                xi = self._turning(comp[ups[0]], jc.routes[0], jc.used[0], 2)
                g0 = min(d[ups[0]], fx._ratio(s[downs[0]], xi[0]), fx._ratio(s[downs[1]], xi[1]))
                gs, fs = [g0], [xi[0] * g0, xi[1] * g0]
            elif code == _EVAC:
                g0, f1, f2 = fx.evacuation_diverge_flux(d[ups[0]], s[downs[0]], s[downs[1]], jc.share)
                gs, fs = [g0], [f1, f2]
            else:
                nd = len(downs)
                dd = [min(d[a], c) for a, c in zip(ups, jc.caps)]
                if routed:
                    xi = [
                        self._turning(comp[a], jc.routes[p], jc.used[p], nd) for p, a in enumerate(ups)
                    ]
                else:
                    xi = [[1.0]] * len(ups)
                th = fx._theta(dd, jc.caps, [s[b] for b in downs], xi)
                theta[jn] = th
                gs = [min(da, th * c) for da, c in zip(dd, jc.caps)]
                fs = [sum(gs[p] * xi[p][q] for p in range(len(ups))) for q in range(nd)]
            if jc.signal is not None:
                pi = jc.signal(t)
                if pi != 1.0:
                    gs = [pi * x for x in gs]
                    fs = [pi * x for x in fs]
            for p, a in enumerate(ups):
                ga = gs[p]
                if ga == UNBOUNDED:
                    raise ValueError(f"junction {jc.id}: unbounded flux (unbounded demand and supply)")
                g[a] = ga
                if routed and ga > 0:
                    ca = comp[a]
                    gwa = gw[a]
                    for wl, bp, wb in jc.routes[p]:
                        v = ga * ca[wl]
                        gwa[wl] = v
                        fw[downs[bp]][wb] += v
            for q, b in enumerate(downs):
                f[b] = fs[q]

        for i, _ in self.destinations:
            g[i] = f[i]
            if routed:
                gw[i] = list(fw[i])
        for i, link in self.origins:
            if not link.point_queue:
                f[i] = g[i]
                if routed:
                    fw[i] = list(gw[i])
        return f, g, fw, gw, theta

    @staticmethod
    def _turning(ca, routes, used, nd):
        xi = [0.0] * nd
        if ca is None:
            for bp in used:
                xi[bp] = 1.0 / len(used)
            return xi
        for wl, bp, _ in routes:
            xi[bp] += ca[wl]
        return xi


# --- trajectory ------------------------------------------------------------


@dataclass
class SimConfig:
    dt: float
    horizon: float
    record_every: int = 1
    cfl_override: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ValueError("horizon must be at least one time step")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")

    @property
    def n_steps(self) -> int:
        return math.ceil(self.horizon / self.dt - 1e-9)


@dataclass
class Trajectory:
    """Recorded samples of a simulation.

    Per-link columns follow ``network.links``.  ``density`` holds link
    densities of normal links and queue lengths of point-queue origins (nan
    otherwise).  Fluxes at a sample are those applied over the step that
    starts there.  ``entered``/``left`` count vehicles that crossed the
    network boundary up to each sample.
    """

    network: Network
    times: np.ndarray
    density: np.ndarray
    inflow: np.ndarray
    outflow: np.ndarray
    pairs: list[tuple[int, int]]
    commodity_density: np.ndarray
    commodity_inflow: np.ndarray
    commodity_outflow: np.ndarray
    theta: np.ndarray
    entered: np.ndarray
    left: np.ndarray
    engine: str = "lq"
    meta: dict = field(default_factory=dict)

    def column(self, link_id) -> int:
        return self.network.link_index[link_id]

    def series(self, link_id, what="k") -> np.ndarray:
        table = {"k": self.density, "f": self.inflow, "g": self.outflow}[what]
        return table[:, self.column(link_id)]

    def stored_vehicles(self) -> np.ndarray:
        total = np.zeros(len(self.times))
        for i, link in enumerate(self.network.links):
            if link.kind is LinkKind.NORMAL:
                total += link.length * self.density[:, i]
            elif link.kind is LinkKind.ORIGIN and link.point_queue:
                total += self.density[:, i]
        return total

    def conservation_error(self) -> float:
        """Relative mismatch between stored vehicles and boundary crossings."""
        stored = self.stored_vehicles()
        balance = (stored - stored[0]) - (self.entered - self.left)
        scale = max(np.max(np.abs(stored)), np.max(self.entered), np.max(self.left), 1.0)
        return float(np.max(np.abs(balance)) / scale)

    def state(self, i: int) -> NetworkState:
        net = self.network
        state = NetworkState.empty(net)
        for lid in state.density:
            state.density[lid] = float(self.density[i, self.column(lid)])
        for lid in state.queue:
            state.queue[lid] = float(self.density[i, self.column(lid)])
        for p, (lid, w) in enumerate(self.pairs):
            target = state.commodity_density if lid in state.density else state.commodity_queue
            if lid in target:
                target[lid][w] = float(self.commodity_density[i, p])
        return state


class _Recorder:
    """Preallocated sample buffers; ``samples`` is the number of rows to be added."""

    def __init__(self, network, kernel, samples):
        self.network = network
        self.kernel = kernel
        self.pairs = [(l.id, w) for l in network.links for w in network.link_commodities[l.id]]
        n, npairs = kernel.n_links, len(self.pairs)
        self.row = 0
        self.t = np.empty(samples)
        self.k = np.empty((samples, n))
        self.f = np.empty((samples, n))
        self.g = np.empty((samples, n))
        self.kw = np.empty((samples, npairs))
        self.fw = np.empty((samples, npairs))
        self.gw = np.empty((samples, npairs))
        self.theta = np.empty((samples, len(kernel.junctions)))
        self.entered = np.empty(samples)
        self.left = np.empty(samples)

    def add(self, t, k, f, g, kw, fw, gw, theta, entered, left):
        r = self.row
        self.t[r] = t
        self.k[r] = k
        self.f[r] = f
        self.g[r] = g
        if self.pairs:
            self.kw[r] = [x for ws in kw for x in ws]
            self.fw[r] = [x for ws in fw for x in ws]
            self.gw[r] = [x for ws in gw for x in ws]
        self.theta[r] = theta
        self.entered[r] = entered
        self.left[r] = left
        self.row = r + 1

    def build(self, engine, meta=None):
        n = self.row
        return Trajectory(
            network=self.network,
            times=self.t[:n],
            density=self.k[:n],
            inflow=self.f[:n],
            outflow=self.g[:n],
            pairs=self.pairs,
            commodity_density=self.kw[:n],
            commodity_inflow=self.fw[:n],
            commodity_outflow=self.gw[:n],
            theta=self.theta[:n],
            entered=self.entered[:n],
            left=self.left[:n],
            engine=engine,
            meta=meta or {},
        )


def sample_count(n_steps: int, every: int) -> int:
    """Rows recorded for steps 0..n_steps when sampling every ``every`` steps plus the last."""
    return n_steps // every + 1 + (1 if n_steps % every else 0)


def boundary_crossings(kernel, f, g, dt):
    """Vehicles entering and leaving the network during one step."""
    entered = 0.0
    for i, link in kernel.origins:
        entered += (f[i] if link.point_queue else g[i]) * dt
    left = 0.0
    for i, _ in kernel.destinations:
        left += f[i] * dt
    return entered, left


def _clamp(value, upper, link_id, t):
    if 0.0 <= value <= upper:
        return value
    band = CLAMP_TOL * upper
    if -band <= value < 0.0:
        return 0.0
    if upper < value <= upper + band:
        return upper
    raise IntegrationBlowup(link_id, t, value, upper)


# --- link queue engine -----------------------------------------------------


class LinkQueueEngine:
    """Explicit Euler integrator over flat per-link lists."""

    def __init__(self, network: Network, bc: BoundaryConditions, state: NetworkState):
        problems = validate_state(network, state)
        if problems:
            raise ValueError("invalid initial state: " + "; ".join(problems))
        self.network = network
        self.kernel = JunctionKernel(network, bc)
        links = network.links
        n = len(links)
        self.normal = [i for i, l in enumerate(links) if l.kind is LinkKind.NORMAL]
        self.queued = [i for i, l in enumerate(links) if l.kind is LinkKind.ORIGIN and l.point_queue]
        self.params = {
            i: (links[i].length, links[i].fd.v_free, links[i].fd.w_back, links[i].fd.k_jam, links[i].fd.capacity)
            for i in self.normal
        }
        self.k = [math.nan] * n
        self.kw = [[0.0] * len(network.link_commodities[l.id]) for l in links]
        for i in self.normal:
            lid = links[i].id
            self.k[i] = float(state.density[lid])
            if network.routed:
                self.kw[i] = [float(state.commodity_density[lid][w]) for w in network.link_commodities[lid]]
        for i in self.queued:
            lid = links[i].id
            self.k[i] = float(state.queue[lid])
            if network.routed:
                self.kw[i] = [float(state.commodity_queue[lid][w]) for w in network.link_commodities[lid]]

    def fluxes(self, t, dt):
        n = self.kernel.n_links
        d = [0.0] * n
        s = [0.0] * n
        comp = [None] * n
        routed = self.kernel.routed
        k, kw = self.k, self.kw
        for i in self.normal:
            _, v, w, kj, c = self.params[i]
            ki = k[i]
            d[i] = min(v * ki, c)
            s[i] = min(w * (kj - ki), c)
            if routed and ki > 0:
                comp[i] = [x / ki for x in kw[i]]
        return self.kernel.resolve(t, dt, d, s, comp, k, kw)

    def advance(self, t, dt, f, g, fw, gw):
        k, kw = self.k, self.kw
        links = self.network.links
        routed = self.kernel.routed
        for i in self.normal:
            length, _, _, kj, _ = self.params[i]
            r = dt / length
            k[i] = _clamp(k[i] + r * (f[i] - g[i]), kj, links[i].id, t + dt)
            if routed:
                kw[i] = [max(x + r * (a - b), 0.0) for x, a, b in zip(kw[i], fw[i], gw[i])]
        for i in self.queued:
            K = k[i] + (f[i] - g[i]) * dt
            if K < -CLAMP_TOL * max(1.0, k[i]):
                raise IntegrationBlowup(links[i].id, t + dt, K, math.inf)
            k[i] = max(K, 0.0)
            if routed:
                kw[i] = [max(x + (a - b) * dt, 0.0) for x, a, b in zip(kw[i], fw[i], gw[i])]

    def state(self) -> NetworkState:
        net = self.network
        out = NetworkState.empty(net)
        for i in self.normal:
            lid = net.links[i].id
            out.density[lid] = self.k[i]
            if net.routed:
                out.commodity_density[lid] = dict(zip(net.link_commodities[lid], self.kw[i]))
        for i in self.queued:
            lid = net.links[i].id
            out.queue[lid] = self.k[i]
            if net.routed:
                out.commodity_queue[lid] = dict(zip(net.link_commodities[lid], self.kw[i]))
        return out


def compute_junction_fluxes(
    network: Network, state: NetworkState, bc: BoundaryConditions, t: float, dt: float | None = None
) -> dict[int, fx.FluxSolution]:
    """Junction fluxes at time ``t`` for the given state, keyed by junction id.

    Point-queue origins use the discrete demand K/dt + f when ``dt`` is
    given and the unbounded continuous demand otherwise.
    """
    engine = LinkQueueEngine(network, bc, state)
    f, g, fw, gw, theta = engine.fluxes(t, dt)
    idx = network.link_index
    out = {}
    for jn, j in enumerate(network.junctions):
        out[j.id] = fx.FluxSolution(
            out_flux=[g[idx[a]] for a in j.upstream],
            in_flux=[f[idx[b]] for b in j.downstream],
            theta=None if math.isnan(theta[jn]) else theta[jn],
            commodity_flux=[list(gw[idx[a]]) for a in j.upstream] if network.routed else None,
        )
    return out


def turning_proportions(network: Network, state: NetworkState, link_id: int, junction_id: int) -> dict[int, float]:
    """Turning proportions of ``link_id`` at its downstream junction, keyed by downstream link."""
    j = network.junction(junction_id)
    if link_id not in j.upstream:
        raise ValueError(f"link {link_id} is not upstream of junction {junction_id}")
    ws = network.link_commodities[link_id]
    link = network.link(link_id)
    if link.kind is LinkKind.NORMAL:
        amounts = [state.commodity_density[link_id][w] for w in ws]
    elif link.point_queue:
        amounts = [state.commodity_queue[link_id][w] for w in ws]
    else:
        raise ValueError("queueless origins take their proportions from the boundary conditions")
    successors = [j.downstream.index(network.successor[(link_id, w)]) for w in ws]
    xi = fx.turning_proportions(amounts, successors, len(j.downstream))
    return dict(zip(j.downstream, xi))


def step(network: Network, state: NetworkState, bc: BoundaryConditions, t: float, dt: float) -> NetworkState:
    """One explicit Euler step from ``t`` to ``t + dt``."""
    engine = LinkQueueEngine(network, bc, state)
    f, g, fw, gw, _ = engine.fluxes(t, dt)
    engine.advance(t, dt, f, g, fw, gw)
    return engine.state()


def _check_config(network, dt, override):
    violation = check_cfl(network, dt)
    if violation is not None:
        msg = (
            f"dt={dt} violates the CFL bound {violation.bound:.6g} h set by link {violation.link}"
        )
        if not override:
            raise CflError(msg)
        warnings.warn(msg, stacklevel=3)


def simulate(
    network: Network,
    initial: NetworkState | None,
    bc: BoundaryConditions,
    config: SimConfig,
) -> Trajectory:
    """Integrate the link queue model over [0, horizon]."""
    _check_config(network, config.dt, config.cfl_override)
    state = initial if initial is not None else NetworkState.empty(network)
    engine = LinkQueueEngine(network, bc, state)
    dt = config.dt
    n_steps = config.n_steps
    every = config.record_every
    rec = _Recorder(network, engine.kernel, sample_count(n_steps, every))
    entered = left = 0.0
    for i in range(n_steps + 1):
        t = i * dt
        f, g, fw, gw, theta = engine.fluxes(t, dt)
        if i % every == 0 or i == n_steps:
            rec.add(t, engine.k, f, g, engine.kw, fw, gw, theta, entered, left)
        if i == n_steps:
            break
        e, l_ = boundary_crossings(engine.kernel, f, g, dt)
        entered += e
        left += l_
        engine.advance(t, dt, f, g, fw, gw)
    return rec.build("lq", {"dt": dt, "horizon": config.horizon})
