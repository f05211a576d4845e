"""Junction flux functions.

Every function maps upstream demands and downstream supplies to out-fluxes
``g`` of the upstream links and in-fluxes ``f`` of the downstream links.
Rates may be ``UNBOUNDED`` (``math.inf``) where noted.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from linkqueue.fd import UNBOUNDED

#: Largest number of upstream links for which the critical demand level is
#: solved by subset enumeration.
MAX_UPSTREAM = 12


class UnsupportedJunctionSize(ValueError):
    pass


def _check_rate(name, value):
    if not value >= 0:  # also rejects nan
        raise ValueError(f"{name} must be nonnegative, got {value!r}")


def _check_fraction(name, value):
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {value!r}")


def linear_flux(d1: float, s2: float) -> tuple[float, float]:
    _check_rate("d1", d1)
    _check_rate("s2", s2)
    g1 = min(d1, s2)
    return g1, g1


def priority_merge_flux(d1: float, d2: float, alpha: float, s3: float):
    """Merge in which link 1 is guaranteed the share ``alpha`` of the supply."""
    _check_fraction("alpha", alpha)
    return _merge(d1, d2, alpha, s3)


def fair_merge_flux(d1: float, d2: float, c1: float, c2: float, s3: float):
    """Merge with supply shared in proportion to upstream capacities."""
    if not (c1 > 0 and c2 > 0):
        raise ValueError("capacities must be positive")
    return _merge(d1, d2, c1 / (c1 + c2), s3)


def _merge(d1, d2, share1, s3):
    for name, v in (("d1", d1), ("d2", d2), ("s3", s3)):
        _check_rate(name, v)
    f3 = min(d1 + d2, s3)
    if f3 == UNBOUNDED:
        raise ValueError("merge with unbounded demand and unbounded supply")
    # max(s3 - d2, .) with d2 unbounded collapses to the share term
    g1 = min(d1, max(s3 - d2, share1 * s3))
    g2 = f3 - g1
    return g1, g2, f3


def fifo_diverge_flux(d0: float, xi1: float, xi2: float, s1: float, s2: float):
    """FIFO diverge: the out-flux splits exactly by the turning proportions."""
    for name, v in (("d0", d0), ("xi1", xi1), ("xi2", xi2), ("s1", s1), ("s2", s2)):
        _check_rate(name, v)
    if not math.isclose(xi1 + xi2, 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError(f"turning proportions must sum to 1, got {xi1 + xi2!r}")
    g0 = min(d0, _ratio(s1, xi1), _ratio(s2, xi2))
    if g0 == UNBOUNDED:
        raise ValueError("diverge with unbounded demand and unbounded supplies")
    return g0, xi1 * g0, xi2 * g0


def _ratio(s, xi):
    return UNBOUNDED if xi == 0 else s / xi


def evacuation_diverge_flux(d0: float, s1: float, s2: float, beta: float):
    """Diverge without route choice; link 1 is guaranteed the share ``beta``."""
    _check_fraction("beta", beta)
    for name, v in (("d0", d0), ("s1", s1), ("s2", s2)):
        _check_rate(name, v)
    g0 = min(d0, s1 + s2)
    if g0 == UNBOUNDED:
        raise ValueError("diverge with unbounded demand and unbounded supplies")
    f1 = min(s1, max(d0 - s2, beta * d0))
    return g0, f1, g0 - f1


@dataclass
class JunctionInput:
    """Inputs of the unified fair-merge / FIFO-diverge junction.

    ``turning[a][b]`` is the proportion of link ``a``'s traffic heading to
    downstream link ``b``; rows sum to one.  ``commodity_shares[a]`` holds
    the commodity proportions of upstream link ``a`` (optional).
    """

    demands: Sequence[float]
    capacities: Sequence[float]
    supplies: Sequence[float]
    turning: Sequence[Sequence[float]]
    commodity_shares: Sequence[Sequence[float]] | None = None

    def __post_init__(self):
        m, n = len(self.demands), len(self.supplies)
        if m < 1 or n < 1:
            raise ValueError("a junction needs at least one upstream and one downstream link")
        if len(self.capacities) != m:
            raise ValueError("one capacity per upstream link required")
        xi = np.asarray(self.turning, dtype=float)
        if xi.shape != (m, n):
            raise ValueError(f"turning proportions must have shape {(m, n)}, got {xi.shape}")
        if np.any(xi < 0) or np.any(np.abs(xi.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("turning proportions must be nonnegative with unit row sums")
        for d, c in zip(self.demands, self.capacities):
            _check_rate("demand", d)
            if not (c > 0 and math.isfinite(c)):
                raise ValueError(f"capacity must be positive and finite, got {c!r}")
            if d > c * (1 + 1e-12):
                raise ValueError(f"demand {d!r} exceeds capacity {c!r}")
        for s in self.supplies:
            _check_rate("supply", s)


@dataclass
class FluxSolution:
    out_flux: list[float]
    in_flux: list[float]
    theta: float | None = None
    # commodity_flux[a][w] = g_{a,w} = f_{b,w} for the downstream link b of w
    commodity_flux: list[list[float]] | None = field(default=None)


@lru_cache(maxsize=None)
def _subset_matrix(m: int) -> np.ndarray:
    """Indicator rows of the 2^m - 1 nonempty subsets, in declaration order."""
    rows = []
    for size in range(1, m + 1):
        for combo in itertools.combinations(range(m), size):
            row = np.zeros(m)
            row[list(combo)] = 1.0
            rows.append(row)
    return np.array(rows)


def solve_critical_demand_level(inp: JunctionInput, max_upstream: int = MAX_UPSTREAM) -> float:
    """Critical demand level theta in [0, 1] of the unified junction rule.

    theta = min(max_a d_a/C_a,
                min_b max_{A1} (s_b - sum_{a not in A1} d_a xi_ab) / sum_{a in A1} C_a xi_ab)

    Subsets with a zero denominator are excluded from the inner max; a
    downstream link with no admissible subset does not constrain theta.
    """
    m = len(inp.demands)
    if m > max_upstream:
        raise UnsupportedJunctionSize(
            f"{m} upstream links exceed the subset-enumeration limit {max_upstream}"
        )
    return _theta(inp.demands, inp.capacities, inp.supplies, inp.turning)


def _theta(demands, capacities, supplies, turning) -> float:
    d = np.asarray(demands, dtype=float)
    c = np.asarray(capacities, dtype=float)
    s = np.asarray(supplies, dtype=float)
    xi = np.asarray(turning, dtype=float)
    demand_level = float(np.max(d / c))
    subsets = _subset_matrix(d.size)
    sent = d[:, None] * xi
    den = subsets @ (c[:, None] * xi)
    num = s[None, :] - (1.0 - subsets) @ sent
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        cand = np.where(den > 0, num / np.where(den > 0, den, 1.0), -np.inf)
    per_branch = cand.max(axis=0)
    per_branch[np.isneginf(per_branch)] = np.inf
    theta = min(demand_level, float(per_branch.min()))
    # round-off can push theta a hair outside [0, 1]
    return min(max(theta, 0.0), 1.0)


def unified_junction_flux(inp: JunctionInput, max_upstream: int = MAX_UPSTREAM) -> FluxSolution:
    theta = solve_critical_demand_level(inp, max_upstream)
    g = [min(d, theta * c) for d, c in zip(inp.demands, inp.capacities)]
    n = len(inp.supplies)
    f = [sum(g[a] * inp.turning[a][b] for a in range(len(g))) for b in range(n)]
    commodity = None
    if inp.commodity_shares is not None:
        commodity = [[g[a] * x for x in shares] for a, shares in enumerate(inp.commodity_shares)]
    return FluxSolution(out_flux=g, in_flux=f, theta=theta, commodity_flux=commodity)


def turning_proportions(
    densities: Sequence[float], successors: Sequence[int], n_downstream: int
) -> list[float]:
    """Turning proportions of one upstream link from its commodity densities.

    ``successors[w]`` is the downstream position taken by commodity ``w``.
    An empty link splits uniformly over the branches its commodities use.
    """
    xi = [0.0] * n_downstream
    total = sum(densities)
    if total > 0:
        for k_w, b in zip(densities, successors):
            xi[b] += k_w / total
        return xi
    used = sorted(set(successors))
    for b in used:
        xi[b] = 1.0 / len(used)
    return xi
