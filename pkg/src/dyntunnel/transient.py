"""Time-domain integration of the envelope equations and of the two-mode rate equations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .core import ModeEnsemble, PumpDrive, nonresonant_amplitudes, steady_state_exact
from .errors import StiffnessFailure

CONSTANT_R = "constant-R"
CORRECTED_R = "corrected-R"


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    E_r: complex
    E_n: np.ndarray
    I_r: float
    I_c_total: float
    pump_work: float


@dataclass(frozen=True)
class RateState:
    I_c: float
    I_r: float
    pump_mode_rate: float
    pump_model: str
    t: float = math.inf


def _realify(mat: np.ndarray) -> np.ndarray:
    # x + iy with d(x+iy)/dt = M (x+iy)  ->  block form on (x, y)
    re, im = mat.real, mat.imag
    return np.block([[re, -im], [im, re]])


def integrate_envelopes(
    ensemble: ModeEnsemble,
    drive: PumpDrive,
    t_end: float,
    *,
    initial: Optional[Sequence[complex]] = None,
    t_eval: Optional[Sequence[float]] = None,
    rtol: float = 1e-9,
    atol: float = 1e-12,
) -> list[TrajectoryPoint]:
    """
    Integrate dE/dt = -Gamma E + E0 A with an implicit Runge-Kutta (Radau IIA) scheme.

    Parameters
    ----------
    initial : sequence of complex, optional
        (E_r, E_1, ..., E_N) at t = 0. Defaults to a dark cavity.
    t_eval : sequence of float, optional
        Output times. Defaults to the integrator's own accepted steps.
    """
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    n = ensemble.N + 1
    jac = _realify(-ensemble.gamma_matrix(drive.delta).astype(complex))
    b = np.concatenate([[0.0], ensemble.a_n * drive.E0])
    forcing = np.concatenate([b.real, b.imag])
    y0 = np.zeros(2 * n)
    if initial is not None:
        init = np.asarray(initial, dtype=complex)
        if init.shape != (n,):
            raise ValueError(f"initial must have {n} entries, got {init.shape}")
        y0 = np.concatenate([init.real, init.imag])

    sol = solve_ivp(
        lambda t, y: jac @ y + forcing,
        (0.0, t_end),
        y0,
        method="Radau",
        jac=jac,
        t_eval=t_eval,
        rtol=rtol,
        atol=atol,
    )
    if sol.status < 0:
        raise StiffnessFailure(sol.message)

    a_E0 = ensemble.a_n * drive.E0
    out = []
    for k, t in enumerate(sol.t):
        z = sol.y[:n, k] + 1j * sol.y[n:, k]
        E_n = z[1:]
        out.append(
            TrajectoryPoint(
                t=float(t),
                E_r=complex(z[0]),
                E_n=E_n,
                I_r=float(abs(z[0]) ** 2),
                I_c_total=float(np.sum(np.abs(E_n) ** 2)),
                pump_work=float(2.0 * np.sum(a_E0 * np.conj(E_n)).real),
            )
        )
    return out


def fit_decay_rate(trajectory: Sequence[TrajectoryPoint], t_lo: float, t_hi: float) -> float:
    """Least-squares slope of -log|E_r(t)| over t in [t_lo, t_hi]."""
    t = np.array([p.t for p in trajectory])
    amp = np.array([abs(p.E_r) for p in trajectory])
    sel = (t >= t_lo) & (t <= t_hi) & (amp > 0)
    if sel.sum() < 2:
        raise ValueError("fewer than two samples in the fit window")
    slope, _ = np.polyfit(t[sel], np.log(amp[sel]), 1)
    return float(-slope)


def free_decay_rate(ensemble: ModeEnsemble, window: tuple[float, float] = (5.0, 20.0), samples: int = 400) -> float:
    """
    Decay rate of the regular mode from a free-decay run (E0 = 0, E_r(0) = 1).

    The fit uses the tail ``window`` in units of 1/gamma'_r, after the fast
    chaotic transients have died out.
    """
    unit = 1.0 / (ensemble.gamma_r * (1.0 + ensemble.G))
    t_lo, t_hi = window[0] * unit, window[1] * unit
    init = np.zeros(ensemble.N + 1, dtype=complex)
    init[0] = 1.0
    traj = integrate_envelopes(
        ensemble, PumpDrive(E0=0.0), t_hi, initial=init, t_eval=np.linspace(t_lo, t_hi, samples), atol=1e-15
    )
    return fit_decay_rate(traj, t_lo, t_hi)


def rate_equation_closed_form(gamma_c: float, gamma_r: float, g: float, R: float, pump_model: str = CONSTANT_R) -> RateState:
    """Steady state of the two-mode intensity rate equations in closed form."""
    G = g * g / (gamma_c * gamma_r)
    I_c0 = R / (2.0 * gamma_c)
    if pump_model == CONSTANT_R:
        I_c = I_c0 * (1 + G) / (1 + 2 * G)
        I_r = I_c0 * (gamma_c / gamma_r) * G / (1 + 2 * G)
        rate = R
    elif pump_model == CORRECTED_R:
        I_c = I_c0 / (1 + 2 * G)
        I_r = I_c0 * (gamma_c / gamma_r) * G / ((1 + G) * (1 + 2 * G))
        rate = R / (1 + G)
    else:
        raise ValueError(f"unknown pump model {pump_model!r}")
    return RateState(I_c=I_c, I_r=I_r, pump_mode_rate=rate, pump_model=pump_model)


def _rate_matrix(gamma_c: float, gamma_r: float, g: float) -> np.ndarray:
    G = g * g / (gamma_c * gamma_r)
    return np.array(
        [
            [-2 * gamma_c * (1 + G), 2 * gamma_r * G],
            [2 * gamma_c * G, -2 * gamma_r * (1 + G)],
        ]
    )


def integrate_rate_equations(
    gamma_c: float,
    gamma_r: float,
    g: float,
    R: float,
    pump_model: str = CONSTANT_R,
    t_end: Optional[float] = None,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-14,
) -> RateState:
    """
    Integrate the intensity rate equations from zero intensity up to ``t_end``.

    With ``corrected-R`` the constant pumping rate is replaced by
    2 gamma_c I_c0 / (1 + G), the value the field model actually delivers.
    """
    if pump_model not in (CONSTANT_R, CORRECTED_R):
        raise ValueError(f"unknown pump model {pump_model!r}")
    G = g * g / (gamma_c * gamma_r)
    rate = R if pump_model == CONSTANT_R else R / (1 + G)
    if t_end is None:
        t_end = 30.0 / min(gamma_c, gamma_r)
    jac = _rate_matrix(gamma_c, gamma_r, g)
    forcing = np.array([rate, 0.0])
    sol = solve_ivp(
        lambda t, y: jac @ y + forcing,
        (0.0, t_end),
        np.zeros(2),
        method="Radau",
        jac=jac,
        rtol=rtol,
        atol=atol,
    )
    if sol.status < 0:
        raise StiffnessFailure(sol.message)
    I_c, I_r = sol.y[:, -1]
    return RateState(I_c=float(I_c), I_r=float(I_r), pump_mode_rate=rate, pump_model=pump_model, t=float(sol.t[-1]))


@dataclass(frozen=True)
class EnergyBalance:
    pumping: float
    loss: float
    relative_mismatch: float
    two_mode_prediction: Optional[float]


def energy_balance_report(ensemble: ModeEnsemble, drive: PumpDrive = PumpDrive()) -> EnergyBalance:
    """
    Compare the interference pumping term with total dissipation at steady state.

    For a single chaotic mode the pumping term is also checked against
    2 gamma_c I_c0 / (1 + G).
    """
    if drive.delta != 0:
        raise ValueError("energy balance report is defined on resonance (delta = 0)")
    st = steady_state_exact(ensemble, drive)
    pumping = float(2.0 * np.sum(ensemble.a_n * drive.E0 * np.conj(st.E_n)).real)
    loss = float(2.0 * np.sum(ensemble.gamma_n * np.abs(st.E_n) ** 2) + 2.0 * ensemble.gamma_r * st.I_r)
    mismatch = abs(pumping - loss) / abs(pumping) if pumping else abs(loss)
    prediction = None
    if ensemble.N == 1:
        I_c0 = float(np.abs(nonresonant_amplitudes(ensemble, drive)[0]) ** 2)
        prediction = 2.0 * ensemble.gamma_n[0] * I_c0 / (1.0 + ensemble.G)
    return EnergyBalance(pumping, loss, mismatch, prediction)
