"""Closed-form oracles and diagnostics for the reference experiments."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from linkqueue.ctm import CtmConfig, ctm_simulate
from linkqueue.fd import FundamentalDiagram, TriangularFD
from linkqueue.lqm import LinkQueueEngine, SimConfig, simulate
from linkqueue.network import BoundaryConditions, Network, NetworkState
from linkqueue.networks import RingConfig, dm2_network, ring_network, standard_fd

# --- single link -------------------------------------------------------------

LN2 = math.log(2.0)
SINGLE_LINK_T1 = LN2 / 65.0
SINGLE_LINK_T2 = (LN2 + 1.0) / 65.0
# wave arrival times of the kinematic wave solution (hours)
KW_FIRST_EXIT = 1.0 / 65.0
KW_SHOCK_AT_ENTRY = 1.0 / 65.0 + 1.0 / 16.25


def closed_form_single_link(t: float) -> float:
    """Link queue density of the one-mile, one-lane link with d = 2340, s = 1170.

    Three phases: free loading, linear growth at the supply limit once the
    link holds 18 vpm, and relaxation towards 108 vpm after it passes 36 vpm.
    """
    if not t >= 0:
        raise ValueError(f"t must be nonnegative, got {t!r}")
    if t < SINGLE_LINK_T1:
        return 36.0 * -math.expm1(-65.0 * t)
    if t < SINGLE_LINK_T2:
        return 18.0 + 1170.0 * (t - SINGLE_LINK_T1)
    return 108.0 - 72.0 * math.exp((LN2 + 1.0) / 4.0 - 16.25 * t)


def kw_single_link_fluxes(t: float) -> tuple[float, float]:
    """Kinematic wave in- and out-flux (vph) of the same link at time ``t`` (hours)."""
    if not t >= 0:
        raise ValueError(f"t must be nonnegative, got {t!r}")
    f = 2340.0 if t < KW_SHOCK_AT_ENTRY else 1170.0
    g = 0.0 if t < KW_FIRST_EXIT else 1170.0
    return f, g


# --- macroscopic fundamental diagram ----------------------------------------


def mfd_link_queue(fd: FundamentalDiagram, green_ratio: float, k: float) -> float:
    """Cycle-averaged flux of a signalized ring in the link queue model."""
    if not 0.0 <= green_ratio <= 1.0:
        raise ValueError(f"green ratio must lie in [0, 1], got {green_ratio!r}")
    if not 0.0 <= k <= fd.k_jam:
        raise ValueError(f"density {k!r} outside [0, {fd.k_jam}]")
    return green_ratio * fd.flow(k)


@dataclass(frozen=True)
class MfdPoint:
    k: float
    cycle: float  # hours
    flux: float
    engine: str


def simulated_mfd(
    ring: RingConfig, densities: Sequence[float], cycles: Sequence[float], engine: str = "ctm"
) -> list[MfdPoint]:
    """Cycle-averaged junction flux over the last ``ring.average_cycles`` cycles.

    Cycles are in hours and must be whole multiples of ``ring.dt``.
    """
    if engine not in ("lq", "ctm"):
        raise ValueError(f"unknown engine {engine!r}")
    dt = ring.dt
    points = []
    for cycle in cycles:
        per_cycle = cycle / dt
        steps = round(per_cycle)
        if steps < 1 or abs(per_cycle - steps) > 1e-6 * per_cycle:
            raise ValueError(f"cycle {cycle} h is not a multiple of dt = {dt} h")
        window = ring.average_cycles * steps
        n_steps = math.ceil(ring.horizon / dt - 1e-9)
        if n_steps < window + steps:
            raise ValueError(
                f"horizon {ring.horizon} h too short for one warm-up cycle and "
                f"{ring.average_cycles} averaging cycles of {cycle} h"
            )
        net = ring_network(ring, cycle)
        bc = BoundaryConditions()
        for k in densities:
            state = NetworkState.uniform(net, {0: k})
            if engine == "lq":
                traj = simulate(net, state, bc, SimConfig(dt, n_steps * dt))
            else:
                cfg = CtmConfig(dt=dt, horizon=n_steps * dt, cells={0: ring.cells})
                traj, _ = ctm_simulate(net, state, bc, cfg)
            g = traj.series(0, "g")
            # the last sample holds fluxes that are never applied
            flux = float(np.mean(g[-window - 1 : -1]))
            points.append(MfdPoint(float(k), float(cycle), flux, engine))
    return points


def mfd_ctm(ring: RingConfig, densities: Sequence[float], cycles: Sequence[float]) -> list[MfdPoint]:
    return simulated_mfd(ring, densities, cycles, "ctm")


# --- diverge-merge network: stationary states and stability -----------------


@dataclass
class StabilityReport:
    xi: float
    k1: float | None
    k2: float | None
    a: float
    b: float
    eigenvalues: tuple[complex, complex]

    @property
    def stable(self) -> bool:
        return all(ev.real < 0 for ev in self.eigenvalues)

    @property
    def marginal(self) -> bool:
        return _is_marginal(self.eigenvalues)

    def to_dict(self) -> dict:
        return {
            "xi": self.xi,
            "k1": self.k1,
            "k2": self.k2,
            "a": self.a,
            "b": self.b,
            "eigenvalues": [[ev.real, ev.imag] for ev in self.eigenvalues],
            "stable": self.stable,
            "marginal": self.marginal,
        }


class MarginalStabilityWarning(UserWarning):
    pass


def _dm2_defaults(C3, fd1, fd2):
    C3 = standard_fd(2).capacity if C3 is None else C3
    fd1 = standard_fd(1) if fd1 is None else fd1
    fd2 = standard_fd(2) if fd2 is None else fd2
    return C3, fd1, fd2


def dm2_stationary_state(
    xi: float, C3: float | None = None, fd1: TriangularFD | None = None, fd2: TriangularFD | None = None
) -> StabilityReport:
    """Stationary state of the reduced two-link system with link 1 free and link 2 congested.

    The reduced system assumes the merge passes all of link 1's demand
    (g1 = d1, g2 = C3 - d1) and the diverge is limited by link 2's supply.
    Stationarity then gives d1 = xi C3 and s2 = C3 - d1.
    """
    C3, fd1, fd2 = _dm2_defaults(C3, fd1, fd2)
    if not 1.0 / 3.0 < xi < 0.5:
        raise ValueError(f"xi={xi!r} outside (1/3, 1/2), where link 1 is free and link 2 congested")
    d1 = xi * C3
    if d1 > fd1.capacity:
        raise ValueError(f"d1 = {d1} exceeds the capacity of link 1")
    k1 = d1 / fd1.v_free
    s2 = C3 - d1
    k2 = fd2.inverse_supply(s2)
    if k1 > fd1.k_crit:
        raise ValueError(f"k1 = {k1} is congested; free-flow branch assumption violated")
    if k2 < fd2.k_crit:
        raise ValueError(f"k2 = {k2} is free-flowing; congested branch assumption violated")
    a, b = fd1.v_free, -fd2.w_back
    return StabilityReport(xi, k1, k2, a, b, dm2_jacobian_eigen(xi, a, b))


def dm2_network_stationary_state(
    xi: float, C3: float | None = None, fd1: TriangularFD | None = None, fd2: TriangularFD | None = None
) -> tuple[float, float]:
    """(k1, k2) of the stationary state the full junction rules settle into.

    For xi in (1/3, 1/2) the fair merge cannot pass d1 = xi C3 from link 1
    while link 2 discharges at capacity, so the roles swap: link 1 is
    congested with s1 = xi C3 and link 2 is free with d2 = (1 - xi) C3.
    """
    C3, fd1, fd2 = _dm2_defaults(C3, fd1, fd2)
    if not 1.0 / 3.0 < xi < 0.5:
        raise ValueError(f"xi={xi!r} outside (1/3, 1/2)")
    k1 = fd1.inverse_supply(xi * C3)
    d2 = (1.0 - xi) * C3
    if d2 > fd2.capacity:
        raise ValueError(f"d2 = {d2} exceeds the capacity of link 2")
    return k1, d2 / fd2.v_free


def dm2_full_state(xi: float, k1: float, k2: float, network: Network | None = None) -> NetworkState:
    """Complete a (k1, k2) pair to a DM2 state with the merge at its output capacity.

    Link 0 sits on the congested branch with supply C3 and link 3 at
    critical density; commodity 1 uses link 1 and commodity 2 link 2.
    """
    net = dm2_network() if network is None else network
    C3 = net.link(3).fd.capacity
    k0 = net.link(0).fd.inverse_supply(C3)
    k3 = C3 / net.link(3).fd.v_free
    state = NetworkState.uniform(net, {0: k0, 1: k1, 2: k2, 3: k3})
    state.commodity_density[0] = {1: xi * k0, 2: (1.0 - xi) * k0}
    state.commodity_density[1] = {1: k1}
    state.commodity_density[2] = {2: k2}
    state.commodity_density[3] = {1: xi * k3, 2: (1.0 - xi) * k3}
    return state


def stationarity_residual(network: Network, state: NetworkState, bc: BoundaryConditions, t: float = 0.0) -> float:
    """max over normal links and their commodities of |dk/dt| = |f - g| / L (vpm per hour)."""
    engine = LinkQueueEngine(network, bc, state)
    f, g, fw, gw, _ = engine.fluxes(t, None)
    worst = 0.0
    for i in engine.normal:
        length = network.links[i].length
        worst = max(worst, abs(f[i] - g[i]) / length)
        for a, b in zip(fw[i], gw[i]):
            worst = max(worst, abs(a - b) / length)
    return worst


def dm2_jacobian(xi: float, a: float, b: float, L1: float = 1.0, L2: float = 1.0) -> np.ndarray:
    if not (a > 0 and b < 0):
        raise ValueError(f"need a > 0 and b < 0, got a={a!r}, b={b!r}")
    if not 0.0 < xi < 1.0:
        raise ValueError(f"xi must lie in (0, 1), got {xi!r}")
    if not (L1 > 0 and L2 > 0):
        raise ValueError("link lengths must be positive")
    return np.array([[-a / L1, xi / (1.0 - xi) * b / L1], [a / L2, b / L2]])


def _is_marginal(eigs, rtol=1e-6) -> bool:
    mags = sorted(abs(ev) for ev in eigs)
    return mags[0] <= rtol * mags[1]


def dm2_jacobian_eigen(
    xi: float, a: float, b: float, L1: float = 1.0, L2: float = 1.0
) -> tuple[complex, complex]:
    """Eigenvalues of the linearised reduced system, ordered by imaginary then real part.

    With unit lengths they solve lambda^2 + (a - b) lambda - ab/(1 - xi) = 0.
    A root within a relative 1e-6 of zero triggers a MarginalStabilityWarning.
    """
    jac = dm2_jacobian(xi, a, b, L1, L2)
    tr = jac[0, 0] + jac[1, 1]
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    disc = complex(tr * tr - 4.0 * det)
    root = np.sqrt(disc)
    # the smaller-magnitude root from Vieta avoids cancellation
    big = (tr - root) / 2.0 if tr.real < 0 else (tr + root) / 2.0
    small = det / big if big != 0 else 0j
    eigs = sorted((complex(big), complex(small)), key=lambda z: (z.imag, z.real))
    if _is_marginal(eigs):
        warnings.warn(f"marginal stability: eigenvalues {eigs}", MarginalStabilityWarning, stacklevel=2)
    return eigs[0], eigs[1]


def dm2_stability(xi: float, L1: float = 1.0, L2: float = 1.0) -> StabilityReport:
    """Stationary state and eigenvalues for the standard DM2 fundamental diagrams."""
    report = dm2_stationary_state(xi)
    if (L1, L2) != (1.0, 1.0):
        report.eigenvalues = dm2_jacobian_eigen(xi, report.a, report.b, L1, L2)
    return report


# --- oscillation classification -------------------------------------------


class Regime(str, Enum):
    CONVERGED = "converged"
    DAMPED = "damped-oscillatory"
    PERSISTENT = "persistent-oscillatory"


# ordering used to combine several series into one verdict
_RANK = {Regime.CONVERGED: 0, Regime.DAMPED: 1, Regime.PERSISTENT: 2}

AMPLITUDE_THRESHOLD = 0.05
DECAY_THRESHOLD = 0.8
# smallest swing, relative to the mean, counted as a turning point
SWING_THRESHOLD = 0.01
# turning points needed to call a series oscillatory (two full reversals)
MIN_TURNING_POINTS = 4
MIN_SAMPLES = 32


@dataclass
class OscillationReport:
    classification: Regime
    period: float | None
    terminal_mean: list[float]
    amplitude: list[float]  # last-quarter peak-to-peak
    per_series: list[Regime] = field(default_factory=list)
    amplitude_threshold: float = AMPLITUDE_THRESHOLD
    decay_threshold: float = DECAY_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "classification": self.classification.value,
            "period": self.period,
            "terminal_mean": self.terminal_mean,
            "amplitude": self.amplitude,
            "per_series": [r.value for r in self.per_series],
            "amplitude_threshold": self.amplitude_threshold,
            "decay_threshold": self.decay_threshold,
        }


def _classify(y: np.ndarray, dt: float):
    n = y.size
    q = n // 4
    last, prev = y[3 * q :], y[2 * q : 3 * q]
    mean = float(last.mean())
    peak = float(np.max(np.abs(y)))
    amp = float(np.ptp(last))
    if peak == 0.0:
        return Regime.CONVERGED, None, mean, amp
    scale = max(abs(mean), 1e-12 * peak)
    prev_amp = float(np.ptp(prev))
    if prev_amp > 0:
        ratio = amp / prev_amp
    else:
        ratio = math.inf if amp > 0 else 0.0
    swing = SWING_THRESHOLD * scale
    half = y[n // 2 :]
    late_peaks, _ = find_peaks(half, prominence=swing)
    period = float(np.mean(np.diff(late_peaks)) * dt) if late_peaks.size >= 2 else None

    if amp > AMPLITUDE_THRESHOLD * scale and ratio > DECAY_THRESHOLD and period is not None:
        return Regime.PERSISTENT, period, mean, amp
    peaks, _ = find_peaks(y, prominence=swing)
    troughs, _ = find_peaks(-y, prominence=swing)
    if peaks.size + troughs.size >= MIN_TURNING_POINTS:
        return Regime.DAMPED, period, mean, amp
    return Regime.CONVERGED, None, mean, amp


def detect_oscillation(series, dt: float) -> OscillationReport:
    """Classify one series, or the columns of a (samples, series) array.

    Persistent: the last-quarter peak-to-peak amplitude exceeds 5% of the
    terminal mean, has not shrunk below 0.8 of the previous quarter's, and
    the last half contains at least two peaks.  Damped: not persistent, but
    the series turns at least four times by more than 1% of the mean.
    Converged otherwise.  The combined verdict is the most oscillatory one;
    the period is the mean peak spacing in the last half, averaged over the
    series that share that verdict.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[1] == 0:
        raise ValueError("series must be one- or two-dimensional")
    if y.shape[0] < MIN_SAMPLES:
        raise ValueError(f"series too short: {y.shape[0]} samples, need at least {MIN_SAMPLES}")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    if not dt > 0:
        raise ValueError("dt must be positive")
    results = [_classify(y[:, j], dt) for j in range(y.shape[1])]
    regimes = [r[0] for r in results]
    overall = max(regimes, key=_RANK.__getitem__)
    periods = [r[1] for r in results if r[0] is overall and r[1] is not None]
    period = float(np.mean(periods)) if periods and overall is not Regime.CONVERGED else None
    return OscillationReport(
        classification=overall,
        period=period,
        terminal_mean=[r[2] for r in results],
        amplitude=[r[3] for r in results],
        per_series=regimes,
    )
