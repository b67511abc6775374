import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyntunnel.core import DerivedParams, ModeEnsemble, PumpDrive, steady_state_exact
from dyntunnel.spectrum import secular_roots
from dyntunnel.transient import (
    CONSTANT_R,
    CORRECTED_R,
    energy_balance_report,
    free_decay_rate,
    integrate_envelopes,
    integrate_rate_equations,
    rate_equation_closed_form,
)
from dyntunnel.core import intensities

from helpers import random_ensemble


@pytest.fixture
def n1():
    return ModeEnsemble.from_arrays(1.0, [100.0], [5.0], [1.0])


def test_relaxes_to_steady_state(n1):
    traj = integrate_envelopes(n1, PumpDrive(), 20.0)
    end = traj[-1]
    assert abs(end.E_r - 0.04) < 1e-6
    assert abs(end.E_n[0] - 0.008) < 1e-6
    assert all(b.t >= a.t for a, b in zip(traj, traj[1:]))
    assert traj[0].I_r == 0.0


def test_pure_decay():
    e = ModeEnsemble.from_arrays(2.0, [100.0], [0.0])
    traj = integrate_envelopes(e, PumpDrive(E0=0.0), 0.5, initial=[1.0, 0.0], t_eval=[0.5])
    assert traj[-1].E_r == pytest.approx(math.exp(-1.0), rel=1e-8)


def test_free_decay_rate_single_mode(n1):
    rate = free_decay_rate(n1)
    assert rate == pytest.approx(1.25, rel=0.01)
    assert rate == pytest.approx(secular_roots(n1).lambda_regular_exact, rel=1e-6)


def test_initial_condition_shape(n1):
    with pytest.raises(ValueError):
        integrate_envelopes(n1, PumpDrive(), 1.0, initial=[1.0])
    with pytest.raises(ValueError):
        integrate_envelopes(n1, PumpDrive(), 0.0)


def test_pump_work_matches_balance_at_late_time(n1):
    end = integrate_envelopes(n1, PumpDrive(), 40.0)[-1]
    assert end.pump_work == pytest.approx(0.016, rel=1e-6)


def test_detuned_relaxation():
    e = ModeEnsemble.from_arrays(1.0, [80.0, 300.0], [4.0, -9.0], [1.0, 0.5j])
    d = PumpDrive(delta=2.0)
    end = integrate_envelopes(e, d, 20.0 / (1 + e.G))[-1]
    ref = steady_state_exact(e, d)
    assert np.max(np.abs(np.concatenate([[end.E_r], end.E_n]) - ref.vector)) / np.max(np.abs(ref.vector)) < 1e-6


# rate equations


def test_rate_constant_pump_values():
    s = rate_equation_closed_form(100.0, 1.0, 5.0, 200.0, CONSTANT_R)
    assert s.I_c == pytest.approx(1.25 / 1.5, rel=1e-14)
    assert s.I_r == pytest.approx(100 * 0.25 / 1.5, rel=1e-14)
    n = integrate_rate_equations(100.0, 1.0, 5.0, 200.0, CONSTANT_R)
    assert n.I_c == pytest.approx(s.I_c, rel=1e-8)
    assert n.I_r == pytest.approx(s.I_r, rel=1e-8)


def test_rate_corrected_pump_values():
    s = rate_equation_closed_form(100.0, 1.0, 5.0, 200.0, CORRECTED_R)
    assert s.I_c == pytest.approx(1 / 1.5, rel=1e-14)
    assert s.I_r == pytest.approx(100 * 0.25 / (1.25 * 1.5), rel=1e-14)
    assert s.pump_mode_rate == pytest.approx(160.0)
    n = integrate_rate_equations(100.0, 1.0, 5.0, 200.0, CORRECTED_R)
    assert n.I_c == pytest.approx(s.I_c, rel=1e-8)
    assert n.I_r == pytest.approx(s.I_r, rel=1e-8)


def test_rate_uncoupled():
    for model in (CONSTANT_R, CORRECTED_R):
        s = integrate_rate_equations(100.0, 1.0, 0.0, 200.0, model)
        assert s.I_c == pytest.approx(1.0, rel=1e-9)
        assert s.I_r == 0.0


def test_rate_unknown_model():
    with pytest.raises(ValueError):
        rate_equation_closed_form(1.0, 1.0, 0.1, 1.0, "other")
    with pytest.raises(ValueError):
        integrate_rate_equations(1.0, 1.0, 0.1, 1.0, "other")


@given(st.floats(10, 1e4), st.floats(0.0, 2.0), st.floats(0.1, 100))
def test_constant_pump_balance(gamma_c, G, R):
    g = math.sqrt(G * gamma_c)
    s = rate_equation_closed_form(gamma_c, 1.0, g, R, CONSTANT_R)
    assert 2 * gamma_c * s.I_c + 2 * s.I_r == pytest.approx(R, rel=1e-12)
    assert s.I_c >= 0 and s.I_r >= 0


def test_corrected_pump_chaotic_intensity_second_order():
    # relative gap in I_c is G^2/(1+2G)
    for G in (1e-4, 1e-3, 1e-2):
        gamma_c = 100.0
        g = math.sqrt(G * gamma_c)
        rs = rate_equation_closed_form(gamma_c, 1.0, g, 2 * gamma_c, CORRECTED_R)
        _, I_p = intensities(DerivedParams.from_effective(1.0, G, gamma_c), 0.0)
        assert abs(rs.I_c - I_p) / I_p == pytest.approx(G**2 / (1 + 2 * G), rel=1e-6)


def test_corrected_pump_regular_intensity_first_order():
    # relative gap in I_r is G/(1+2G): leading order only
    for G in (1e-4, 1e-3, 1e-2):
        gamma_c = 100.0
        g = math.sqrt(G * gamma_c)
        rs = rate_equation_closed_form(gamma_c, 1.0, g, 2 * gamma_c, CORRECTED_R)
        I_r, _ = intensities(DerivedParams.from_effective(1.0, G, gamma_c), 0.0)
        assert abs(rs.I_r - I_r) / I_r == pytest.approx(G / (1 + 2 * G), rel=1e-6)


# energy balance


def test_energy_balance_single_mode(n1):
    r = energy_balance_report(n1)
    assert r.pumping == pytest.approx(0.016, rel=1e-13)
    assert r.loss == pytest.approx(0.016, rel=1e-13)
    assert r.two_mode_prediction == pytest.approx(0.016, rel=1e-13)


def test_energy_balance_uncoupled():
    e = ModeEnsemble.from_arrays(1.0, [100.0], [0.0])
    assert energy_balance_report(e).pumping == pytest.approx(2 * 100 * 1e-4, rel=1e-14)


def test_energy_balance_requires_resonance(n1):
    with pytest.raises(ValueError):
        energy_balance_report(n1, PumpDrive(delta=0.1))


@given(st.integers(0, 2**32 - 1))
def test_energy_balance_random(seed):
    e = random_ensemble(np.random.default_rng(seed), n_max=10)
    assert energy_balance_report(e).relative_mismatch < 1e-10
