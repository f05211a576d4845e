import math
import warnings

import numpy as np
import pytest

from linkqueue.analysis import closed_form_single_link
from linkqueue.lqm import (
    CflError,
    IntegrationBlowup,
    SimConfig,
    check_cfl,
    compute_junction_fluxes,
    simulate,
    step,
    turning_proportions,
)
from linkqueue.network import (
    BoundaryConditions,
    Junction,
    Link,
    LinkKind,
    NetworkState,
    build_network,
    constant,
    validate_state,
)
from linkqueue.networks import (
    RingConfig,
    dm2_boundary,
    dm2_network,
    ring_network,
    single_link_boundary,
    single_link_network,
    standard_fd,
)


def test_cfl():
    dm2 = dm2_network()
    assert check_cfl(dm2, 1.75e-4) is None
    v = check_cfl(dm2, 0.02)
    assert v is not None and v.link in (0, 1, 3)
    assert v.bound == pytest.approx(1 / 65)
    assert check_cfl(single_link_network(), 1 / 65) is None


def test_simulate_rejects_cfl_violation():
    with pytest.raises(CflError, match="0.0153846"):
        simulate(single_link_network(), None, single_link_boundary(), SimConfig(0.02, 0.1))


def test_initial_fluxes_single_link():
    sol = compute_junction_fluxes(single_link_network(), NetworkState.empty(single_link_network()),
                                  single_link_boundary(), 0.0)
    assert sol[0].in_flux == [2340.0]
    assert sol[1].out_flux == [0.0]


def test_ring_signal_gate():
    cfg = RingConfig()
    net = ring_network(cfg, cycle=1 / 60)
    state = NetworkState.uniform(net, {0: 18.0})
    green = compute_junction_fluxes(net, state, BoundaryConditions(), 0.0)
    red = compute_junction_fluxes(net, state, BoundaryConditions(), 0.75 / 60)
    assert green[0].out_flux == [pytest.approx(1170.0)]
    assert red[0].out_flux == [0.0] and red[0].in_flux == [0.0]


def test_euler_step():
    net = single_link_network()
    new = step(net, NetworkState.empty(net), single_link_boundary(), 0.0, 1e-3)
    assert new.density[1] == pytest.approx(2.34)


def test_point_queue_step_keeps_empty_queue():
    links = [Link(0, LinkKind.ORIGIN, point_queue=True), Link(1, "normal", 1.0, standard_fd()),
             Link(2, "destination")]
    net = build_network(links, [Junction(0, (0,), (1,)), Junction(1, (1,), (2,))])
    bc = BoundaryConditions(arrival={0: constant(1000.0)})
    new = step(net, NetworkState.empty(net), bc, 0.0, 1e-3)
    assert new.queue[0] == 0.0
    assert new.density[1] == pytest.approx(1.0)


def test_point_queue_grows_under_overload():
    links = [Link(0, LinkKind.ORIGIN, point_queue=True), Link(1, "normal", 1.0, standard_fd()),
             Link(2, "destination")]
    net = build_network(links, [Junction(0, (0,), (1,)), Junction(1, (1,), (2,))])
    bc = BoundaryConditions(arrival={0: constant(3000.0)})
    traj = simulate(net, None, bc, SimConfig(1e-4, 0.5, record_every=10))
    queue = traj.series(0, "k")
    assert queue[-1] > 0
    # at steady state the queue grows by arrival minus capacity
    growth = (queue[-1] - queue[-101]) / (traj.times[-1] - traj.times[-101])
    assert growth == pytest.approx(3000 - 2340, rel=1e-6)
    assert traj.conservation_error() < 1e-9


def test_turning_proportions_from_state():
    net = dm2_network()
    state = NetworkState.empty(net)
    state.density[0] = 10.0
    state.commodity_density[0] = {1: 7.0, 2: 3.0}
    assert turning_proportions(net, state, 0, 1) == pytest.approx({1: 0.7, 2: 0.3})
    state = NetworkState.empty(net)
    assert turning_proportions(net, state, 0, 1) == {1: 0.5, 2: 0.5}
    assert turning_proportions(net, state, 1, 2) == {3: 1.0}


def test_single_link_matches_closed_form():
    traj = simulate(single_link_network(), None, single_link_boundary(), SimConfig(1e-5, 0.5, 10))
    exact = np.array([closed_form_single_link(t) for t in traj.times])
    k = traj.series(1)
    mask = exact > 0
    assert np.max(np.abs(k[mask] - exact[mask]) / exact[mask]) < 1e-3
    assert k[-1] == pytest.approx(108, abs=0.1)


def test_first_order_convergence():
    errors = []
    for dt in (1e-3, 5e-4, 2.5e-4):
        traj = simulate(single_link_network(), None, single_link_boundary(), SimConfig(dt, 0.2))
        exact = np.array([closed_form_single_link(t) for t in traj.times])
        errors.append(np.max(np.abs(traj.series(1) - exact)))
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert np.all((ratios > 1.7) & (ratios < 2.3)), ratios


def test_blowup_with_override():
    cfg = SimConfig(0.1, 0.5, cfl_override=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(IntegrationBlowup) as err:
            simulate(single_link_network(), None, single_link_boundary(), cfg)
    assert err.value.link == 1


def test_zero_arrivals_give_zero_trajectory():
    net = dm2_network()
    traj = simulate(net, None, dm2_boundary(0.5, demand=0.0), SimConfig(1e-3, 0.1))
    normal = [traj.column(l.id) for l in net.normal_links]
    assert np.all(traj.density[:, normal] == 0)
    assert np.all(traj.inflow == 0) and np.all(traj.outflow == 0)


@pytest.fixture(scope="module")
def dm2_xi70():
    return simulate(dm2_network(), None, dm2_boundary(0.7), SimConfig(1.75e-4, 1.05))


def test_dm2_xi70_stationary(dm2_xi70):
    for lid in (1, 2):
        f, g = dm2_xi70.series(lid, "f")[-1], dm2_xi70.series(lid, "g")[-1]
        assert f == pytest.approx(g, rel=1e-6)


def test_dm2_invariants(dm2_xi70):
    traj = dm2_xi70
    net = traj.network
    assert traj.conservation_error() < 1e-9
    assert np.all(np.diff(traj.times) > 0)
    dt = traj.meta["dt"]
    for link in net.normal_links:
        k = traj.series(link.id)
        assert np.all((k >= 0) & (k <= link.fd.k_jam))
        assert np.max(np.abs(np.diff(k))) <= dt / link.length * link.fd.capacity * (1 + 1e-9)
    for i in range(0, len(traj.times), 500):
        assert validate_state(net, traj.state(i)) == []
    # junction conservation and bounds at every sample
    idx = net.link_index
    for j in net.junctions:
        g = traj.outflow[:, [idx[a] for a in j.upstream]].sum(axis=1)
        f = traj.inflow[:, [idx[b] for b in j.downstream]].sum(axis=1)
        np.testing.assert_allclose(g, f, rtol=1e-9, atol=1e-9)


def test_deterministic():
    cfg = SimConfig(1.75e-4, 0.1)
    a = simulate(dm2_network(), None, dm2_boundary(0.45), cfg)
    b = simulate(dm2_network(), None, dm2_boundary(0.45), cfg)
    np.testing.assert_array_equal(a.density, b.density)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        SimConfig(1.0, 0.5)
    with pytest.raises(ValueError):
        SimConfig(0.1, 1.0, record_every=0)
    assert SimConfig(0.1, 1.0).n_steps == 10
    assert math.isclose(SimConfig(1.75e-4, 1.05).n_steps, 6000)
