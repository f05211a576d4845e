"""Fundamental diagrams and the demand/supply functions derived from them.

Units are fixed throughout the package: miles, hours, mph, vehicles/mile
and vehicles/hour.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

#: The unbounded rate. ``min(UNBOUNDED, x) == x`` for every finite ``x``.
UNBOUNDED = math.inf

# relative clamp band around [0, k_jam]
CLAMP_TOL = 1e-9


class FundamentalDiagram(ABC):
    """Unimodal flow-density relation of a homogeneous link."""

    k_jam: float
    k_crit: float
    capacity: float

    @abstractmethod
    def flow(self, k: float) -> float:
        """Flow Q(k) in vph."""

    def check_density(self, k: float) -> float:
        """Return ``k`` clamped into [0, k_jam], or raise if it is too far out."""
        if 0.0 <= k <= self.k_jam:
            return k
        band = CLAMP_TOL * self.k_jam
        if -band <= k < 0.0:
            return 0.0
        if self.k_jam < k <= self.k_jam + band:
            return self.k_jam
        raise ValueError(f"density {k!r} outside [0, {self.k_jam}]")

    def demand(self, k: float) -> float:
        """Sending flow Q(min(k, k_crit))."""
        k = self.check_density(k)
        return self.flow(min(k, self.k_crit))

    def supply(self, k: float) -> float:
        """Receiving flow Q(max(k, k_crit))."""
        k = self.check_density(k)
        return self.flow(max(k, self.k_crit))

    @abstractmethod
    def inverse_supply(self, s: float) -> float:
        """Congested-branch density with ``supply(k) == s``."""

    @abstractmethod
    def demand_array(self, k: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def supply_array(self, k: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class TriangularFD(FundamentalDiagram):
    """Q(k) = min(V k, W (n k_j - k)).

    >>> fd = TriangularFD(65.0, 16.25, 180.0, lanes=1)
    >>> fd.k_crit, fd.capacity
    (36.0, 2340.0)
    """

    v_free: float
    w_back: float
    k_jam_per_lane: float
    lanes: int = 1
    k_jam: float = field(init=False, repr=False)
    k_crit: float = field(init=False, repr=False)
    capacity: float = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.v_free > 0 and self.w_back > 0 and self.k_jam_per_lane > 0):
            raise ValueError("v_free, w_back and k_jam_per_lane must be positive")
        if int(self.lanes) != self.lanes or self.lanes < 1:
            raise ValueError(f"lanes must be a positive integer, got {self.lanes!r}")
        k_jam = self.lanes * self.k_jam_per_lane
        k_crit = self.w_back * k_jam / (self.v_free + self.w_back)
        object.__setattr__(self, "k_jam", k_jam)
        object.__setattr__(self, "k_crit", k_crit)
        object.__setattr__(self, "capacity", self.v_free * k_crit)

    def flow(self, k: float) -> float:
        k = self.check_density(k)
        return min(self.v_free * k, self.w_back * (self.k_jam - k))

    # the two branches below are exact min() forms of the generic definitions
    def demand(self, k: float) -> float:
        k = self.check_density(k)
        return min(self.v_free * k, self.capacity)

    def supply(self, k: float) -> float:
        k = self.check_density(k)
        return min(self.w_back * (self.k_jam - k), self.capacity)

    def inverse_supply(self, s: float) -> float:
        if not 0.0 <= s <= self.capacity:
            raise ValueError(f"supply {s!r} outside [0, {self.capacity}]")
        if s == self.capacity:
            return self.k_crit
        return self.k_jam - s / self.w_back

    def demand_array(self, k: np.ndarray) -> np.ndarray:
        return np.minimum(self.v_free * k, self.capacity)

    def supply_array(self, k: np.ndarray) -> np.ndarray:
        return np.minimum(self.w_back * (self.k_jam - k), self.capacity)


def origin_demand_continuous(queue: float, arrival_rate: float) -> float:
    """Point-queue demand: unbounded while vehicles wait, else the arrival rate."""
    if queue < 0 or arrival_rate < 0:
        raise ValueError("queue and arrival rate must be nonnegative")
    return UNBOUNDED if queue > 0 else arrival_rate


def origin_demand_discrete(queue: float, arrival_rate: float, dt: float) -> float:
    """Finite surrogate K/dt + f of the point-queue demand for a time step dt."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if queue < 0 or arrival_rate < 0:
        raise ValueError("queue and arrival rate must be nonnegative")
    return queue / dt + arrival_rate
