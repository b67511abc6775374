import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyntunnel.core import ModeEnsemble, PumpDrive, steady_state_approx, steady_state_exact
from dyntunnel.errors import DivergentSeries, OverdampedWarning
from dyntunnel.series import interference_rounds, series_resummation_check

from helpers import ensemble_with_G


@pytest.fixture
def n1():
    return ModeEnsemble.from_arrays(1.0, [100.0], [5.0], [1.0])


def test_single_mode_rounds(n1):
    r = interference_rounds(n1, k_max=40)
    assert r.E_r_rounds[0] == pytest.approx(0.05, rel=1e-14)
    assert r.E_r_rounds[1] == pytest.approx(-0.0125, rel=1e-14)
    assert abs(r.partial_sums()[-1] - 0.04) < 1e-17
    rep = series_resummation_check(n1, k_max=40)
    assert rep.E_r_error < 1e-17
    assert rep.converged


def test_uncoupled_rounds_vanish():
    e = ModeEnsemble.from_arrays(1.0, [100.0, 50.0], [0.0, 0.0])
    r = interference_rounds(e, k_max=5)
    assert np.all(r.E_r_rounds == 0) and np.all(r.E_n_rounds == 0)
    rep = series_resummation_check(e)
    assert rep.k_max == 1 and rep.first_round == 0


def test_remainder_formula(n1):
    # partial-sum error after k rounds is G^k/(1+G) |E_r^(1)| exactly
    r = interference_rounds(n1, k_max=30)
    exact = steady_state_exact(n1).E_r
    err = np.abs(r.partial_sums() - exact)
    k = np.arange(1, 31)
    np.testing.assert_allclose(err, 0.25**k / 1.25 * 0.05, rtol=1e-9, atol=1e-17)


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 0.95))
def test_ratio_is_minus_G(seed, G):
    e = ensemble_with_G(np.random.default_rng(seed), G, n_max=10)
    r = interference_rounds(e, k_max=12)
    np.testing.assert_array_equal(r.E_r_rounds[1:], -e.G * r.E_r_rounds[:-1])
    np.testing.assert_allclose(r.E_r_rounds[1:] / r.E_r_rounds[:-1], -e.G, rtol=4e-16)
    np.testing.assert_array_equal(r.E_n_rounds, -(e.g_n / e.gamma_n)[None, :] * r.E_r_rounds[:, None])


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.39))
def test_three_mode_convergence(seed, G):
    # G^30 < 1e-12 requires G < 0.398
    rng = np.random.default_rng(seed)
    e = ensemble_with_G(rng, G, n_max=3)
    r = interference_rounds(e, k_max=30)
    exact = steady_state_exact(e)
    assert abs(r.partial_sums()[-1] - exact.E_r) < 1e-12 * abs(exact.E_r) + 1e-18
    np.testing.assert_allclose(r.chaotic_totals(), exact.E_n, rtol=1e-12, atol=1e-12 * np.max(np.abs(r.E_n0)))


def test_chaotic_totals_differ_from_approx_only_by_bracket():
    e = ModeEnsemble.from_arrays(1.0, [100.0, 200.0], [5.0, 5.0], [1.0, 2.0])
    tot = interference_rounds(e, k_max=60).chaotic_totals()
    approx = steady_state_approx(e)
    np.testing.assert_allclose(np.abs(tot - approx.E_n), approx.bracket / (1 + e.G), rtol=1e-10)


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.89))
def test_resummation_bound_and_first_round(seed, G):
    e = ensemble_with_G(np.random.default_rng(seed), G, n_max=20)
    rep = series_resummation_check(e, k_max=25)
    assert rep.E_r_error <= rep.remainder_bound + 1e-14 * abs(rep.E_r_exact)
    assert abs(rep.first_round - rep.first_round_from_pump_mode) <= 1e-12 * abs(rep.first_round)


def test_divergent_series():
    with pytest.warns(OverdampedWarning):
        e = ModeEnsemble.single_pump_mode(1.0, 1.5, 100.0)
    with pytest.raises(DivergentSeries):
        interference_rounds(e, k_max=10)
    with pytest.raises(DivergentSeries):
        series_resummation_check(e)
    r = interference_rounds(e, k_max=10, allow_divergent=True)
    assert r.divergent
    assert abs(r.E_r_rounds[-1]) > abs(r.E_r_rounds[0])
    assert interference_rounds(e, k_max=1).k_max == 1


def test_requires_resonance(n1):
    with pytest.raises(ValueError):
        interference_rounds(n1, PumpDrive(delta=0.5))
    with pytest.raises(ValueError):
        interference_rounds(n1, k_max=0)
