import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linkqueue.analysis import KW_FIRST_EXIT, KW_SHOCK_AT_ENTRY
from linkqueue.ctm import (
    CellGrid,
    CtmConfig,
    cell_counts,
    ctm_simulate,
    ctm_step,
    max_stable_dt,
)
from linkqueue.lqm import CflError, SimConfig, simulate
from linkqueue.network import BoundaryConditions, NetworkState
from linkqueue.networks import (
    RingConfig,
    dm2_boundary,
    dm2_network,
    ring_network,
    single_link_boundary,
    single_link_network,
)


def test_cell_counts_and_dt():
    net = dm2_network()
    cfg = CtmConfig(dx=0.0125, horizon=1.0)
    assert cell_counts(net, cfg) == {0: 80, 1: 80, 2: 160, 3: 80}
    assert max_stable_dt(net, cfg) == pytest.approx(0.0125 / 65)
    # lengths that are not a multiple of dx round to the nearest count
    assert cell_counts(single_link_network(length=1.0), CtmConfig(dx=0.3)) == {1: 3}
    assert cell_counts(single_link_network(length=0.1), CtmConfig(dx=0.3)) == {1: 1}


def test_config_validation():
    with pytest.raises(ValueError):
        CtmConfig()
    with pytest.raises(ValueError):
        CtmConfig(dx=-1.0)
    with pytest.raises(CflError):
        ctm_simulate(single_link_network(), None, single_link_boundary(), CtmConfig(dx=0.1, dt=0.01, horizon=0.1))


def test_pure_advection_on_ring():
    cfg = RingConfig(cells=50)
    net = ring_network(cfg, cycle=None)
    counts = {0: cfg.cells}
    grid = CellGrid.from_state(net, NetworkState.uniform(net, {0: 0.0}), counts)
    profile = 10.0 + 20.0 * np.sin(np.linspace(0, 2 * np.pi, cfg.cells, endpoint=False)) ** 2
    grid.density[0] = profile.copy()
    total = profile.sum()
    for i in range(7):
        grid = ctm_step(net, grid, BoundaryConditions(), i * cfg.dt, cfg.dt)
    # CFL number one: every free-flow cell moves exactly one cell per step
    np.testing.assert_allclose(grid.density[0], np.roll(profile, 7), rtol=1e-12)
    assert grid.density[0].sum() == pytest.approx(total, rel=1e-12)


def test_zero_trajectory():
    traj, _ = ctm_simulate(dm2_network(), None, dm2_boundary(0.5, demand=0.0), CtmConfig(dx=0.1, horizon=0.05))
    assert np.all(traj.inflow == 0) and np.all(traj.outflow == 0)
    assert np.nansum(traj.density) == 0


def test_single_link_wave_timing_coarse():
    dx = 0.05
    traj, cells = ctm_simulate(single_link_network(), None, single_link_boundary(),
                               CtmConfig(dx=dx, horizon=0.2), record_cells=True)
    dt = traj.meta["dt"]
    t, g, f = traj.times, traj.series(1, "g"), traj.series(1, "f")
    first_out = t[np.argmax(g > 0)]
    assert abs(first_out - KW_FIRST_EXIT) <= dt + dx / 65
    drop = t[np.argmax(f <= 1755)]
    assert abs(drop - KW_SHOCK_AT_ENTRY) <= 3 * (dt + dx / 16.25)
    assert cells.density[1].shape == (len(t), 20)
    # the link density is the mean of the cell densities
    np.testing.assert_allclose(cells.density[1].mean(axis=1), traj.series(1), rtol=1e-12)


@settings(max_examples=15)
@given(st.floats(0.05, 0.95), st.floats(1000, 7020), st.floats(0, 1))
def test_bridge_one_cell_per_link(xi, demand, start):
    """One cell per link reproduces the link queue model step for step."""
    net = dm2_network()
    bc = dm2_boundary(xi, demand=demand)
    init = NetworkState.uniform(net, {l.id: start * l.fd.k_crit for l in net.normal_links})
    dt, horizon = 1.75e-4, 0.05
    lq = simulate(net, init, bc, SimConfig(dt, horizon))
    ctm, _ = ctm_simulate(net, init, bc, CtmConfig.one_cell_per_link(net, dt, horizon))
    np.testing.assert_array_equal(lq.times, ctm.times)
    for a, b in ((lq.density, ctm.density), (lq.inflow, ctm.inflow), (lq.outflow, ctm.outflow),
                 (lq.commodity_density, ctm.commodity_density)):
        scale = np.nanmax(np.abs(a)) or 1.0
        assert np.nanmax(np.abs(a - b)) <= 1e-12 * scale


def test_ctm_conserves_on_dm2():
    traj, _ = ctm_simulate(dm2_network(), None, dm2_boundary(0.45), CtmConfig(dx=0.05, horizon=0.3))
    assert traj.conservation_error() < 1e-9
    net = traj.network
    for link in net.normal_links:
        k = traj.series(link.id)
        assert np.all((k >= 0) & (k <= link.fd.k_jam))
