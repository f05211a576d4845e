import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from linkqueue.fd import UNBOUNDED
from linkqueue.flux import (
    JunctionInput,
    UnsupportedJunctionSize,
    evacuation_diverge_flux,
    fair_merge_flux,
    fifo_diverge_flux,
    linear_flux,
    priority_merge_flux,
    solve_critical_demand_level,
    turning_proportions,
    unified_junction_flux,
)


def test_linear():
    assert linear_flux(2340, 1170) == (1170, 1170)
    assert linear_flux(0, 5000) == (0, 0)
    assert linear_flux(UNBOUNDED, 800) == (800, 800)
    with pytest.raises(ValueError):
        linear_flux(-1, 0)


def test_fair_merge():
    assert fair_merge_flux(2000, 2340, 2340, 2340, 3000) == (1500, 1500, 3000)
    assert fair_merge_flux(2340, 2340, 2340, 2340, 4680) == (2340, 2340, 4680)
    assert fair_merge_flux(0, 2340, 2340, 2340, 1000) == (0, 1000, 1000)
    with pytest.raises(ValueError):
        fair_merge_flux(1, 1, 0, 1, 1)


def test_priority_merge():
    g1, g2, f3 = priority_merge_flux(2340, 2340, 0.8, 2340)
    assert g1 == pytest.approx(1872)
    assert g2 == pytest.approx(468)
    assert f3 == 2340
    assert priority_merge_flux(1500, 0, 0.3, 1000)[0] == 1000
    assert priority_merge_flux(1, 2, 2340 / 7020, 2.5) == fair_merge_flux(1, 2, 2340, 4680, 2.5)
    for alpha in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            priority_merge_flux(1, 1, alpha, 1)


def test_fifo_diverge():
    g0, f1, f2 = fifo_diverge_flux(7020, 0.45, 0.55, 2340, 4680)
    assert g0 == pytest.approx(5200)
    assert f1 == pytest.approx(2340)
    assert f2 == pytest.approx(2860)
    assert fifo_diverge_flux(1000, 0.5, 0.5, 0, 5000) == (0, 0, 0)
    assert fifo_diverge_flux(1000, 0.0, 1.0, 0, 600) == (600, 0, 600)
    with pytest.raises(ValueError):
        fifo_diverge_flux(1, 0.5, 0.6, 1, 1)


def test_evacuation_diverge():
    assert evacuation_diverge_flux(1000, 2000, 2000, 0.5) == (1000, 500, 500)
    assert evacuation_diverge_flux(5000, 1000, 2000, 0.5) == (3000, 1000, 2000)
    assert evacuation_diverge_flux(0, 1000, 2000, 0.5) == (0, 0, 0)
    with pytest.raises(ValueError):
        evacuation_diverge_flux(1, 1, 1, 1.0)


def test_theta_merge_example():
    inp = JunctionInput([2340, 2340], [2340, 2340], [3000], [[1.0], [1.0]])
    theta = solve_critical_demand_level(inp)
    assert theta == pytest.approx(1500 / 2340, abs=1e-12)
    sol = unified_junction_flux(inp)
    assert sol.out_flux == pytest.approx([1500, 1500])
    assert sol.in_flux == pytest.approx([3000])


def test_theta_free_flow_and_zero():
    inp = JunctionInput([1000, 500], [2340, 2340], [4680, 4680], [[0.5, 0.5], [0.2, 0.8]])
    assert solve_critical_demand_level(inp) == pytest.approx(1000 / 2340)
    assert unified_junction_flux(inp).out_flux == [1000, 500]
    zero = JunctionInput([0, 0], [2340, 2340], [100], [[1.0], [1.0]])
    assert solve_critical_demand_level(zero) == 0.0


def test_theta_size_limit():
    m = 13
    inp = JunctionInput([1.0] * m, [10.0] * m, [1.0], [[1.0]] * m)
    with pytest.raises(UnsupportedJunctionSize):
        solve_critical_demand_level(inp)
    assert 0 <= solve_critical_demand_level(inp, max_upstream=13) <= 1


def test_junction_input_validation():
    with pytest.raises(ValueError):
        JunctionInput([1], [1, 2], [1], [[1.0]])
    with pytest.raises(ValueError):
        JunctionInput([1], [1], [1], [[0.5]])
    with pytest.raises(ValueError):
        JunctionInput([2], [1], [1], [[1.0]])
    with pytest.raises(ValueError):
        JunctionInput([1], [0], [1], [[1.0]])


def test_commodity_fluxes():
    inp = JunctionInput([1000], [2340], [600, UNBOUNDED], [[0.6, 0.4]], [[0.6, 0.4]])
    sol = unified_junction_flux(inp)
    assert sol.out_flux == pytest.approx([1000])
    assert sol.commodity_flux == [pytest.approx([600, 400])]


def test_turning_proportions():
    assert turning_proportions([7, 3], [0, 1], 2) == pytest.approx([0.7, 0.3])
    assert turning_proportions([5], [1], 2) == [0.0, 1.0]
    assert turning_proportions([0, 0], [0, 1], 2) == [0.5, 0.5]
    assert turning_proportions([0, 0, 0], [0, 0, 2], 3) == [0.5, 0.0, 0.5]


# --- properties ----------------------------------------------------------

rates = st.floats(0, 5000)
caps = st.floats(100, 5000)


@st.composite
def junction_inputs(draw, max_m=4, max_n=4):
    m = draw(st.integers(1, max_m))
    n = draw(st.integers(1, max_n))
    c = [draw(caps) for _ in range(m)]
    d = [draw(st.floats(0, 1)) * ci for ci in c]
    s = [draw(st.one_of(rates, st.just(UNBOUNDED))) for _ in range(n)]
    xi = []
    for _ in range(m):
        w = np.array([draw(st.floats(0, 1)) for _ in range(n)])
        if w.sum() == 0:
            w[draw(st.integers(0, n - 1))] = 1.0
        xi.append(list(w / w.sum()))
    return JunctionInput(d, c, s, xi)


def _check_solution(inp, sol):
    g, f = sol.out_flux, sol.in_flux
    assert 0 <= sol.theta <= 1
    assert math.isclose(sum(g), sum(f), rel_tol=1e-9, abs_tol=1e-9)
    for ga, da in zip(g, inp.demands):
        assert -1e-12 <= ga <= da * (1 + 1e-12) + 1e-12
    for fb, sb in zip(f, inp.supplies):
        assert -1e-12 <= fb <= sb * (1 + 1e-9) + 1e-9


@given(junction_inputs())
def test_unified_lemmas(inp):
    _check_solution(inp, unified_junction_flux(inp))


@given(junction_inputs())
def test_zero_demand_zero_outflux(inp):
    inp.demands = [0.0] + list(inp.demands[1:])
    sol = unified_junction_flux(inp)
    assert sol.out_flux[0] == 0.0


@given(junction_inputs())
def test_zero_supply_zero_influx(inp):
    inp.supplies = [0.0] + list(inp.supplies[1:])
    sol = unified_junction_flux(inp)
    assert sol.in_flux[0] <= 1e-9


@given(caps, st.floats(0, 1), st.one_of(rates, st.just(UNBOUNDED)))
def test_unified_linear(c, u, s):
    d = u * c
    sol = unified_junction_flux(JunctionInput([d], [c], [s], [[1.0]]))
    assert sol.out_flux[0] == pytest.approx(linear_flux(d, s)[0], rel=1e-9, abs=1e-9)


@given(caps, caps, st.floats(0, 1), st.floats(0, 1), rates)
def test_unified_fair_merge(c1, c2, u1, u2, s):
    d1, d2 = u1 * c1, u2 * c2
    sol = unified_junction_flux(JunctionInput([d1, d2], [c1, c2], [s], [[1.0], [1.0]]))
    g1, g2, f3 = fair_merge_flux(d1, d2, c1, c2, s)
    np.testing.assert_allclose(sol.out_flux, [g1, g2], rtol=1e-9, atol=1e-9)
    assert sol.in_flux[0] == pytest.approx(f3, rel=1e-9, abs=1e-9)


@given(caps, st.floats(0, 1), st.floats(0, 1), rates, rates)
def test_unified_fifo_diverge(c, u, xi1, s1, s2):
    d = u * c
    sol = unified_junction_flux(JunctionInput([d], [c], [s1, s2], [[xi1, 1 - xi1]]))
    g0, f1, f2 = fifo_diverge_flux(d, xi1, 1 - xi1, s1, s2)
    assert sol.out_flux[0] == pytest.approx(g0, rel=1e-9, abs=1e-9)
    np.testing.assert_allclose(sol.in_flux, [f1, f2], rtol=1e-9, atol=1e-9)


@given(junction_inputs(max_m=3, max_n=3), st.integers(0, 2))
def test_outflux_slopes_in_zero_one(inp, a):
    """g_a(d_a) is piecewise linear with slopes 0 or 1."""
    a = a % len(inp.demands)
    grid = np.linspace(0, inp.capacities[a], 41)
    g = []
    for da in grid:
        d = list(inp.demands)
        d[a] = float(da)
        g.append(unified_junction_flux(JunctionInput(d, inp.capacities, inp.supplies, inp.turning)).out_flux[a])
    slopes = np.diff(g) / np.diff(grid)
    assert np.all(slopes >= -1e-9) and np.all(slopes <= 1 + 1e-9)
    # a chord can average a kink but cannot leave [0, 1]; away from kinks it is 0 or 1
    near = np.minimum(np.abs(slopes), np.abs(slopes - 1)) < 1e-7
    assert near.sum() >= len(slopes) - 3 * len(inp.supplies) - 2


@given(junction_inputs(), st.floats(-1, 1))
def test_theta_continuity(inp, eps):
    """Perturbing one supply by |h| moves theta by at most |h| / min capacity share."""
    theta = solve_critical_demand_level(inp)
    h = eps * 10.0
    s = [x + h if math.isfinite(x) and x + h >= 0 else x for x in inp.supplies]
    theta2 = solve_critical_demand_level(JunctionInput(inp.demands, inp.capacities, s, inp.turning))
    xi = np.asarray(inp.turning)
    c = np.asarray(inp.capacities)
    weights = (c[:, None] * xi)
    smallest = weights[weights > 0].min()
    assert abs(theta2 - theta) <= abs(h) / smallest + 1e-9
