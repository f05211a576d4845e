import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from linkqueue.analysis import (
    KW_FIRST_EXIT,
    KW_SHOCK_AT_ENTRY,
    SINGLE_LINK_T1,
    SINGLE_LINK_T2,
    MarginalStabilityWarning,
    Regime,
    closed_form_single_link,
    detect_oscillation,
    dm2_full_state,
    dm2_jacobian,
    dm2_jacobian_eigen,
    dm2_network_stationary_state,
    dm2_stability,
    dm2_stationary_state,
    kw_single_link_fluxes,
    mfd_link_queue,
    simulated_mfd,
    stationarity_residual,
)
from linkqueue.networks import RingConfig, dm2_boundary, dm2_network, standard_fd


def test_closed_form_breakpoints():
    assert closed_form_single_link(0.0) == 0.0
    assert closed_form_single_link(SINGLE_LINK_T1) == pytest.approx(18.0, abs=1e-12)
    assert closed_form_single_link(SINGLE_LINK_T2) == pytest.approx(36.0, abs=1e-12)
    assert closed_form_single_link(10.0) == pytest.approx(108.0)
    # continuous at both breakpoints
    for t in (SINGLE_LINK_T1, SINGLE_LINK_T2):
        assert closed_form_single_link(t - 1e-12) == pytest.approx(closed_form_single_link(t), abs=1e-8)
    with pytest.raises(ValueError):
        closed_form_single_link(-1.0)


def test_closed_form_solves_ode():
    """dk/dt = min(2340, supply) - min(demand, 1170) on each branch."""
    fd = standard_fd(1)
    for t in np.linspace(0.001, 0.4, 50):
        h = 1e-7
        k = closed_form_single_link(t)
        rate = (closed_form_single_link(t + h) - closed_form_single_link(t - h)) / (2 * h)
        assert rate == pytest.approx(min(2340, fd.supply(k)) - min(fd.demand(k), 1170), rel=1e-4, abs=1e-3)


def test_kw_fluxes():
    assert kw_single_link_fluxes(100 / 3600) == (2340, 1170)
    assert kw_single_link_fluxes(30 / 3600) == (2340, 0)
    assert kw_single_link_fluxes(400 / 3600) == (1170, 1170)
    assert KW_FIRST_EXIT * 3600 == pytest.approx(55.38, abs=0.01)
    assert KW_SHOCK_AT_ENTRY * 3600 == pytest.approx(276.92, abs=0.01)


def test_mfd_formula():
    fd = standard_fd(1)
    assert mfd_link_queue(fd, 0.5, 18) == 585
    assert mfd_link_queue(fd, 1.0, 90) == fd.flow(90)
    assert mfd_link_queue(fd, 0.5, 0) == 0
    with pytest.raises(ValueError):
        mfd_link_queue(fd, 1.5, 10)
    with pytest.raises(ValueError):
        mfd_link_queue(fd, 0.5, 200)


@given(st.floats(0, 180))
def test_mfd_full_green_is_fd(k):
    fd = standard_fd(1)
    assert mfd_link_queue(fd, 1.0, k) == fd.flow(k)


def test_simulated_mfd_link_queue():
    ring = RingConfig(cells=20, horizon=0.15, average_cycles=2)
    pts = simulated_mfd(ring, [18.0, 100.0], [1 / 60, 2 / 60], engine="lq")
    fd = standard_fd(1)
    for p in pts:
        assert p.flux == pytest.approx(mfd_link_queue(fd, 0.5, p.k), rel=1e-2)


def test_simulated_mfd_errors():
    ring = RingConfig(cells=20, horizon=0.05)
    with pytest.raises(ValueError, match="multiple of dt"):
        simulated_mfd(ring, [18.0], [ring.dt * 10.5])
    with pytest.raises(ValueError, match="too short"):
        simulated_mfd(ring, [18.0], [2 / 60])
    with pytest.raises(ValueError):
        simulated_mfd(ring, [18.0], [1 / 60], engine="ltm")


def test_dm2_stationary_formula():
    rep = dm2_stationary_state(0.45)
    assert rep.k1 == pytest.approx(32.4, abs=1e-12)
    assert rep.k2 == pytest.approx(201.6, abs=1e-12)
    assert rep.a == 65 and rep.b == -16.25
    near = dm2_stationary_state(1 / 3 + 1e-12)
    assert near.k1 * 65 == pytest.approx(1560, rel=1e-9)
    for xi in (0.3, 0.5, 0.7):
        with pytest.raises(ValueError):
            dm2_stationary_state(xi)


def test_dm2_network_stationary_state_is_fixed_point():
    """The state the full junction rules hold still has link 1 congested and link 2 free."""
    xi = 0.45
    k1, k2 = dm2_network_stationary_state(xi)
    assert (k1, k2) == (pytest.approx(50.4), pytest.approx(39.6))
    net = dm2_network()
    state = dm2_full_state(xi, k1, k2, net)
    assert stationarity_residual(net, state, dm2_boundary(xi)) <= 1e-9


def test_reduced_system_state_is_not_network_fixed_point():
    net = dm2_network()
    rep = dm2_stationary_state(0.45)
    state = dm2_full_state(0.45, rep.k1, rep.k2, net)
    # the fair merge holds link 1 back to 1560 vph while 2106 vph enter it
    assert stationarity_residual(net, state, dm2_boundary(0.45)) == pytest.approx(546.0)


def test_eigenvalues_example():
    lo, hi = dm2_jacobian_eigen(0.45, 65.0, -16.25)
    assert lo.real == pytest.approx(-40.625, abs=1e-6)
    assert hi.real == pytest.approx(-40.625, abs=1e-6)
    assert hi.imag == pytest.approx(16.43, abs=5e-3)
    assert lo.imag == pytest.approx(-hi.imag, abs=1e-12)
    # characteristic polynomial of the unit-length system
    for lam in (lo, hi):
        assert abs(lam**2 + (65 + 16.25) * lam + 65 * 16.25 / 0.55) < 1e-9 * 1e4


def test_eigenvalues_match_numpy():
    for xi, a, b, L1, L2 in [(0.45, 65, -16.25, 1, 1), (0.2, 10, -3, 2, 0.5), (0.9, 1, -100, 1, 3)]:
        ours = sorted(dm2_jacobian_eigen(xi, a, b, L1, L2), key=lambda z: (z.imag, z.real))
        ref = sorted(np.linalg.eigvals(dm2_jacobian(xi, a, b, L1, L2)), key=lambda z: (z.imag, z.real))
        np.testing.assert_allclose(ours, ref, rtol=1e-9)


def test_marginal_case_warns():
    with pytest.warns(MarginalStabilityWarning):
        lo, hi = dm2_jacobian_eigen(0.45, 65.0, -1e-12)
    assert sorted([lo.real, hi.real]) == [pytest.approx(-65.0), pytest.approx(0.0, abs=1e-9)]


def test_eigen_preconditions():
    for args in [(0.45, -1, -1), (0.45, 1, 1), (0.0, 1, -1), (1.0, 1, -1)]:
        with pytest.raises(ValueError):
            dm2_jacobian_eigen(*args)


@given(
    st.floats(0.01, 0.99),
    st.floats(1e-3, 1e3),
    st.floats(1e-3, 1e3),
    st.floats(0.1, 10),
    st.floats(0.1, 10),
)
def test_eigenvalues_stable(xi, a, mb, L1, L2):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MarginalStabilityWarning)
        eigs = dm2_jacobian_eigen(xi, a, -mb, L1, L2)
    assert all(z.real < 0 for z in eigs)


def test_slopes_by_finite_difference():
    """a = dd1/dk1 on the free branch and b = ds2/dk2 on the congested branch."""
    rep = dm2_stationary_state(0.45)
    fd1, fd2 = standard_fd(1), standard_fd(2)
    h = 1e-6
    a = (fd1.demand(rep.k1 + h) - fd1.demand(rep.k1 - h)) / (2 * h)
    b = (fd2.supply(rep.k2 + h) - fd2.supply(rep.k2 - h)) / (2 * h)
    assert a == pytest.approx(rep.a, rel=1e-6)
    assert b == pytest.approx(rep.b, rel=1e-6)


def test_stability_report():
    rep = dm2_stability(0.45)
    assert rep.stable and not rep.marginal
    d = rep.to_dict()
    assert d["k1"] == pytest.approx(32.4)
    scaled = dm2_stability(0.45, L1=1.0, L2=2.0)
    assert scaled.eigenvalues != rep.eigenvalues
    assert scaled.stable


# --- oscillation classification --------------------------------------------

DT = 1e-3
T = np.arange(0, 1.05, DT)


def test_constant_converged():
    rep = detect_oscillation(np.full(200, 40.0), DT)
    assert rep.classification is Regime.CONVERGED
    assert rep.period is None
    assert rep.amplitude == [0.0]


def test_sinusoid_persistent():
    rep = detect_oscillation(40 + 10 * np.sin(2 * np.pi * T / 0.2), DT)
    assert rep.classification is Regime.PERSISTENT
    assert rep.period == pytest.approx(0.2, abs=2 * DT)


def test_decaying_sinusoid_damped():
    y = np.exp(-10 * T) * np.sin(2 * np.pi * T / 0.2)
    assert detect_oscillation(y, DT).classification is Regime.DAMPED
    y = 1 + np.exp(-10 * T) * np.sin(2 * np.pi * T / 0.2)
    assert detect_oscillation(y, DT).classification is Regime.DAMPED


def test_monotone_relaxation_converged():
    y = 108 - 72 * np.exp(-16.25 * T)
    assert detect_oscillation(y, DT).classification is Regime.CONVERGED


def test_columns_combine_to_worst():
    y = np.column_stack([np.full(T.size, 5.0), 40 + 10 * np.sin(2 * np.pi * T / 0.2)])
    rep = detect_oscillation(y, DT)
    assert rep.classification is Regime.PERSISTENT
    assert rep.per_series == [Regime.CONVERGED, Regime.PERSISTENT]
    assert rep.to_dict()["classification"] == "persistent-oscillatory"


def test_oscillation_errors():
    with pytest.raises(ValueError, match="too short"):
        detect_oscillation(np.ones(31), DT)
    with pytest.raises(ValueError):
        detect_oscillation(np.r_[np.ones(40), np.nan], DT)
    with pytest.raises(ValueError):
        detect_oscillation(np.ones(40), 0.0)


@given(st.floats(0.05, 0.3), st.floats(0.1, 100), st.floats(0.2, 1))
def test_sinusoid_period_recovered(period, mean, rel_amp):
    y = mean * (1 + rel_amp * np.sin(2 * np.pi * T / period))
    rep = detect_oscillation(y, DT)
    assert rep.classification is Regime.PERSISTENT
    assert rep.period == pytest.approx(period, abs=2 * DT)
    assert all(a >= 0 for a in rep.amplitude)
