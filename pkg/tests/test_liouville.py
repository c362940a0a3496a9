import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from slowlight.liouville import (
    SteadyStateError,
    build_hamiltonian,
    check_invariants,
    evolve,
    lindblad_rhs,
    liouvillian,
    steady_state,
)
from slowlight.model import (
    GAUSSIAN,
    RECTANGULAR,
    ModelError,
    Pulse,
    RelaxationSpec,
    ScenarioConfig,
    build_pr_yso_scheme,
    khz_to_rad_per_us,
    pr_yso_relaxation,
)

OMEGA = khz_to_rad_per_us(100.0)


def _drive(two_level, rabi, detuning=0.0, duration=50.0, relax=None, pops=None):
    p = Pulse(("g", "e"), RECTANGULAR, start=0.0, duration=duration, rabi_peak=rabi,
              detuning=detuning, label="d")
    return ScenarioConfig(two_level, relax or RelaxationSpec(), (p,), pops or {"g": 1.0})


def test_resonant_rabi_flopping_matches_closed_form(two_level):
    s = evolve(_drive(two_level, OMEGA))
    err = np.abs(s.population("e") - np.sin(OMEGA * s.t / 2) ** 2).max()
    assert err <= 1e-6


@pytest.mark.parametrize("delta_khz", [-150.0, 40.0, 300.0])
def test_detuned_rabi_amplitude_and_frequency(two_level, delta_khz):
    d = khz_to_rad_per_us(delta_khz)
    s = evolve(_drive(two_level, OMEGA, d, duration=30.0))
    w = math.hypot(OMEGA, d)
    expect = (OMEGA / w) ** 2 * np.sin(w * s.t / 2) ** 2
    assert np.abs(s.population("e") - expect).max() <= 1e-6


def _two_level_relax(G, gamma):
    return RelaxationSpec({("e", "g"): G}, {("g", "e"): gamma})


def _ss_excited(rabi, delta, G, gamma):
    # closed-form optical Bloch steady state with T1 = 1/G and T2 = 1/gamma
    return (rabi ** 2 * gamma / (2 * G)) / (gamma ** 2 + delta ** 2 + rabi ** 2 * gamma / G)


@pytest.mark.parametrize("rabi,delta,G,gamma", [
    (0.3, 0.0, 0.2, 0.1),
    (0.3, 0.25, 0.2, 0.5),
    (1.0, -0.7, 0.05, 0.4),
])
def test_steady_state_matches_bloch_closed_form(two_level, rabi, delta, G, gamma):
    p = Pulse(("g", "e"), RECTANGULAR, start=0, duration=1, rabi_peak=rabi, detuning=delta)
    H = build_hamiltonian(two_level, (p,), 0.5)
    rho = steady_state(H, _two_level_relax(G, gamma), two_level)
    assert rho[1, 1].real == pytest.approx(_ss_excited(rabi, delta, G, gamma), rel=1e-9)
    # absorption shows up as a positive Im rho[g, e]
    assert rho[0, 1].imag > 0


def test_long_evolution_reaches_steady_state(two_level):
    cfg = _drive(two_level, 0.3, 0.1, duration=200.0, relax=_two_level_relax(0.2, 0.15))
    s = evolve(cfg)
    assert s.population("e")[-1] == pytest.approx(_ss_excited(0.3, 0.1, 0.2, 0.15), rel=1e-6)


def test_weak_probe_coherence_is_omega_over_two_gamma(two_level):
    rabi, gamma = 1e-4, 0.05
    p = Pulse(("g", "e"), RECTANGULAR, start=0, duration=1, rabi_peak=rabi)
    rho = steady_state(build_hamiltonian(two_level, (p,), 0.5), _two_level_relax(0.002, gamma),
                       two_level)
    assert rho[0, 1].imag == pytest.approx(rabi / (2 * gamma), rel=1e-3)


def test_free_decay_of_excited_population_and_coherence():
    scheme = build_pr_yso_scheme()
    relax = pr_yso_relaxation(G_khz=20.0, g_khz=50.0)
    rho0 = np.zeros((4, 4), complex)
    rho0[3, 3] = 0.6
    rho0[1, 1] = 0.4
    rho0[1, 3] = rho0[3, 1] = 0.3
    cfg = ScenarioConfig(scheme, relax, (), {"2": 1.0})
    s = evolve(cfg, (0.0, 40.0), rho0=rho0)
    G, g = 0.02, 0.05
    np.testing.assert_allclose(s.population("5"), 0.6 * np.exp(-2 * G * s.t), atol=1e-8)
    np.testing.assert_allclose(s.population("3"), 0.3 * (1 - np.exp(-2 * G * s.t)), atol=1e-8)
    np.testing.assert_allclose(s.coherence("2", "5").real, 0.3 * np.exp(-g * s.t), atol=1e-8)


def test_lambda_dark_state_stays_dark():
    scheme = build_pr_yso_scheme()
    wp, wa = 0.2, 0.5
    pulses = (Pulse(("2", "5"), RECTANGULAR, 0, 40, wp, label="P"),
              Pulse(("3", "5"), RECTANGULAR, 0, 40, wa, label="A"))
    psi = np.array([0, wa, -wp, 0]) / math.hypot(wa, wp)
    cfg = ScenarioConfig(scheme, pr_yso_relaxation(), pulses, {"2": 1.0})
    s = evolve(cfg, (0, 40), rho0=np.outer(psi, psi))
    assert s.population("5").max() < 1e-9


def test_liouvillian_matches_rhs_and_propagator(two_level):
    relax = _two_level_relax(0.3, 0.4)
    p = Pulse(("g", "e"), RECTANGULAR, 0, 1, 0.8, detuning=0.2)
    H = build_hamiltonian(two_level, (p,), 0.5)
    L = liouvillian(H, relax, two_level)
    rng = np.random.default_rng(1)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    np.testing.assert_allclose(L @ rho.ravel(), lindblad_rhs(rho, H, relax, two_level).ravel(),
                               atol=1e-14)
    cfg = ScenarioConfig(two_level, relax, (p,), {"g": 1.0}, rtol=1e-10, atol=1e-12)
    s = evolve(cfg, (0.0, 1.0), rho0=rho)
    np.testing.assert_allclose(s.rho[-1].ravel(), expm(L) @ rho.ravel(), atol=1e-8)


def test_degenerate_steady_state_needs_rho0():
    scheme = build_pr_yso_scheme()
    a = Pulse(("3", "5"), RECTANGULAR, 0, 1, 0.5)
    H = build_hamiltonian(scheme, (a,), 0.5)
    relax = pr_yso_relaxation()
    with pytest.raises(SteadyStateError, match="degenerate"):
        steady_state(H, relax, scheme)
    rho0 = np.diag([0, 1, 0, 0]).astype(complex)
    np.testing.assert_allclose(steady_state(H, relax, scheme, rho0=rho0), rho0, atol=1e-9)


def test_overlapping_pulses_with_different_detunings_rejected():
    scheme = build_pr_yso_scheme()
    pulses = (Pulse(("2", "5"), RECTANGULAR, 0, 10, 0.1, detuning=0.0, label="a"),
              Pulse(("2", "5"), RECTANGULAR, 5, 10, 0.1, detuning=1.0, label="b"))
    cfg = ScenarioConfig(scheme, pr_yso_relaxation(), pulses, {"2": 1.0})
    with pytest.raises(ModelError, match="overlap"):
        evolve(cfg)


def test_sequential_detunings_switch_frames(two_level):
    # two back-to-back pi/2 pulses; a detuning change between them leaves populations continuous
    area = math.pi / 2
    p1 = Pulse(("g", "e"), RECTANGULAR, 0, 1, area, detuning=0.0, label="a")
    p2 = Pulse(("g", "e"), RECTANGULAR, 1, 1, area, detuning=0.0, label="b")
    p2b = Pulse(("g", "e"), RECTANGULAR, 1, 1, area, detuning=1e-9, label="b")
    s = evolve(ScenarioConfig(two_level, RelaxationSpec(), (p1, p2), {"g": 1.0}))
    sb = evolve(ScenarioConfig(two_level, RelaxationSpec(), (p1, p2b), {"g": 1.0}))
    assert s.population("e")[-1] == pytest.approx(1.0, abs=1e-7)
    assert sb.population("e")[-1] == pytest.approx(1.0, abs=1e-6)


def test_scenario_envelopes_are_recorded():
    scheme = build_pr_yso_scheme()
    p = Pulse(("2", "5"), GAUSSIAN, 0, 10, 0.06, label="P")
    s = evolve(ScenarioConfig(scheme, pr_yso_relaxation(), (p,), {"2": 1.0}), (-30, 30))
    assert s.envelopes["P"].max() == pytest.approx(0.06)
    assert s.t[1] - s.t[0] == pytest.approx(0.05)


pulse_st = st.builds(
    lambda tr, shape, start, dur, khz, det: Pulse(tr, shape, start, dur, khz_to_rad_per_us(khz),
                                                  khz_to_rad_per_us(det)),
    st.sampled_from([("2", "5"), ("3", "5"), ("1", "5")]),
    st.sampled_from([RECTANGULAR, GAUSSIAN]),
    st.floats(0, 10), st.floats(0.5, 8), st.floats(0, 200), st.sampled_from([0.0, 30.0, -80.0]),
)


@settings(max_examples=25, deadline=None)
@given(st.lists(pulse_st, min_size=1, max_size=3), st.floats(0, 20), st.floats(1, 100))
def test_invariants_hold_for_random_drives(pulses, G, g):
    scheme = build_pr_yso_scheme()
    # keep one detuning per transition so overlapping pulses stay valid
    seen = {}
    pulses = [replace(p, detuning=seen.setdefault(p.transition, p.detuning)) for p in pulses]
    cfg = ScenarioConfig(scheme, pr_yso_relaxation(G, g), tuple(pulses),
                         {"1": 0.2, "2": 0.5, "3": 0.3}, sample_step=0.1)
    s = evolve(cfg, (-1.0, 12.0))
    rep = check_invariants(s)
    assert rep["trace_error"] <= 1e-9
    assert rep["hermiticity_drift"] <= 1e-12
    assert rep["min_eigenvalue"] >= -1e-7


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0, 2), st.floats(0, 1), st.floats(0, 1))
def test_liouvillian_preserves_trace(delta, rabi, G, gamma):
    scheme = build_pr_yso_scheme()
    p = Pulse(("2", "5"), RECTANGULAR, 0, 1, rabi, detuning=delta)
    L = liouvillian(build_hamiltonian(scheme, (p,), 0.5), pr_yso_relaxation(G * 1e3, gamma * 1e3),
                    scheme)
    tr = np.eye(4).ravel()
    assert np.abs(tr @ L).max() <= 1e-12 * max(1.0, np.abs(L).max())


def test_hamiltonian_examples(two_level):
    scheme = build_pr_yso_scheme()
    res = Pulse(("3", "5"), RECTANGULAR, 0, 10, OMEGA)
    np.testing.assert_array_equal(build_hamiltonian(scheme, (res,), 20.0), np.zeros((4, 4)))
    # after a detuned pulse the frame keeps its detuning: no coupling, diagonal only
    a = Pulse(("3", "5"), RECTANGULAR, 0, 10, OMEGA, detuning=1.0)
    np.testing.assert_array_equal(build_hamiltonian(scheme, (a,), 20.0), np.diag([0, 0, 0, -1.0]))
    H = build_hamiltonian(scheme, (a,), 5.0)
    assert abs(H[3, 2]) == pytest.approx(0.5 * 2 * math.pi * 0.1)
    np.testing.assert_allclose(H, H.conj().T)
    g = Pulse(("g", "e"), GAUSSIAN, 2.0, 4.0, 1.0)
    H = build_hamiltonian(two_level, (g,), 2.0 + 2.0)
    assert abs(H[1, 0]) == pytest.approx(0.5 * 2.0 ** (-1.0))


def test_decay_rate_equation():
    scheme = build_pr_yso_scheme()
    relax = RelaxationSpec({("5", "3"): 0.7})
    rho = np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex)
    d = lindblad_rhs(rho, np.zeros((4, 4)), relax, scheme)
    assert d[3, 3] == pytest.approx(-0.7 * 0.4)
    assert d[2, 2] == pytest.approx(0.7 * 0.4)
    assert abs(np.trace(d)) < 1e-14


def test_no_pulses_no_relaxation_is_static():
    scheme = build_pr_yso_scheme()
    cfg = ScenarioConfig(scheme, RelaxationSpec(), (), {"1": 0.25, "2": 0.75})
    s = evolve(cfg, (0, 10))
    np.testing.assert_array_equal(s.rho, np.broadcast_to(cfg.rho0(), s.rho.shape))


@pytest.mark.parametrize("delta_khz", [0.0, 50.0, 200.0])
def test_generalized_rabi_frequency_and_transfer(two_level, delta_khz):
    from slowlight.analysis import extract_oscillation_frequency

    d = khz_to_rad_per_us(delta_khz)
    s = evolve(_drive(two_level, OMEGA, d, duration=50.0))
    w = math.hypot(OMEGA, d)
    est = extract_oscillation_frequency(s.t, s.population("e"), (0, 50))
    assert est.frequency == pytest.approx(w / (2 * math.pi), rel=0.01)
    assert s.population("e").max() == pytest.approx((OMEGA / w) ** 2, rel=0.01)


def test_halving_tolerances_converges():
    scheme = build_pr_yso_scheme()
    pulses = (Pulse(("2", "5"), GAUSSIAN, 0, 10, khz_to_rad_per_us(10), label="P"),
              Pulse(("3", "5"), RECTANGULAR, 0, 50, OMEGA, label="A"))
    cfg = ScenarioConfig(scheme, pr_yso_relaxation(), pulses, {"2": 1.0})
    a = evolve(cfg, (-40, 60))
    b = evolve(replace(cfg, rtol=cfg.rtol / 2, atol=cfg.atol / 2), (-40, 60))
    assert np.abs(a.populations - b.populations).max() <= 1e-7


def test_steady_state_agrees_with_long_evolution(two_level):
    G, gamma = 0.5, 0.4
    relax = _two_level_relax(G, gamma)
    cfg = _drive(two_level, 1.2, 0.3, duration=20 / G + 1, relax=relax)
    s = evolve(cfg, (0, 20 / G))
    H = build_hamiltonian(two_level, cfg.pulses, 1.0)
    np.testing.assert_allclose(s.rho[-1], steady_state(H, relax, two_level), atol=1e-6)


def test_weak_drive_coherence_closed_form(two_level):
    gamma, G = 0.05, 0.002
    rabi = gamma / 100
    p = Pulse(("g", "e"), RECTANGULAR, 0, 1, rabi)
    rho = steady_state(build_hamiltonian(two_level, (p,), 0.5), _two_level_relax(G, gamma),
                       two_level)
    exact = 0.5 * rabi * gamma / (gamma ** 2 + rabi ** 2 * gamma / G)
    assert rho[0, 1].imag == pytest.approx(exact, rel=1e-9)
    assert rho[0, 1].imag == pytest.approx(rabi / (2 * gamma), rel=5e-3)
    rhs = lindblad_rhs(rho, build_hamiltonian(two_level, (p,), 0.5), _two_level_relax(G, gamma),
                      two_level)
    assert np.abs(rhs).max() <= 1e-10


def test_undriven_decay_relaxes_to_ground():
    scheme = build_pr_yso_scheme()
    H = np.zeros((4, 4))
    relax = RelaxationSpec({("5", "2"): 1.0, ("5", "3"): 1.0})
    rho0 = np.diag([0, 0, 0, 1.0]).astype(complex)
    rho = steady_state(H, relax, scheme, rho0=rho0)
    np.testing.assert_allclose(np.diag(rho).real, [0, 0.5, 0.5, 0], atol=1e-9)
