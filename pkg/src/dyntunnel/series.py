"""
Multiple-interference picture of the on-resonance steady state.

Amplitude tunnels from the pumped chaotic modes into the regular mode, back
into every chaotic mode, and so on.  Each round multiplies the regular-mode
contribution by -G, so the partial sums form an alternating geometric series
whose limit is the closed-form steady state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ModeEnsemble, PumpDrive, nonresonant_amplitudes, steady_state_exact
from .errors import DivergentSeries


@dataclass(frozen=True)
class RoundContributions:
    """Per-round amplitudes; row k-1 holds round k."""

    E_r_rounds: np.ndarray  # (k_max,)
    E_n_rounds: np.ndarray  # (k_max, N)
    k_max: int
    G: float
    E_n0: np.ndarray

    @property
    def divergent(self) -> bool:
        return self.G >= 1.0

    def partial_sums(self) -> np.ndarray:
        """Compensated running sums of the regular-mode rounds."""
        return _running_sum(self.E_r_rounds)

    def chaotic_totals(self) -> np.ndarray:
        """E_n0 plus all computed chaotic-mode rounds, per mode."""
        return self.E_n0 + np.array([_running_sum(col)[-1] for col in self.E_n_rounds.T])


def _running_sum(terms: np.ndarray) -> np.ndarray:
    # Neumaier summation applied to real and imaginary parts separately
    out = np.empty(len(terms), dtype=complex)
    parts = []
    for comp in (terms.real, terms.imag):
        s = c = 0.0
        acc = np.empty(len(terms))
        for k, x in enumerate(comp):
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
            acc[k] = s + c
        parts.append(acc)
    out.real, out.imag = parts
    return out


def interference_rounds(
    ensemble: ModeEnsemble, drive: PumpDrive = PumpDrive(), k_max: int = 40, *, allow_divergent: bool = False
) -> RoundContributions:
    """
    Round-by-round tunneling amplitudes on resonance.

    Raises
    ------
    DivergentSeries
        If G >= 1 and more than one round is requested, unless
        ``allow_divergent`` is set (the rounds are then returned unsummed).
    """
    if drive.delta != 0:
        raise ValueError("the interference series is defined on resonance (delta = 0)")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    G = ensemble.G
    if G >= 1.0 and k_max > 1 and not allow_divergent:
        raise DivergentSeries(f"G = {G:.4g} >= 1: partial sums do not converge")
    E_n0 = nonresonant_amplitudes(ensemble, drive)
    g, gam = ensemble.g_n, ensemble.gamma_n
    E_r = np.empty(k_max, dtype=complex)
    E_r[0] = np.sum(g * E_n0) / ensemble.gamma_r
    for k in range(1, k_max):
        E_r[k] = -G * E_r[k - 1]
    E_n = -(g / gam)[None, :] * E_r[:, None]
    return RoundContributions(E_r, E_n, k_max, G, E_n0)


@dataclass(frozen=True)
class ResummationReport:
    k_max: int
    G: float
    E_r_series: complex
    E_r_exact: complex
    E_r_error: float
    E_n_error: float
    remainder_bound: float
    first_round: complex
    first_round_from_pump_mode: complex

    @property
    def converged(self) -> bool:
        return self.E_r_error <= self.remainder_bound + 1e-14


def series_resummation_check(
    ensemble: ModeEnsemble, drive: PumpDrive = PumpDrive(), k_max: int | None = None
) -> ResummationReport:
    """Sum the rounds and compare with the closed-form steady state."""
    G = ensemble.G
    if G >= 1.0:
        raise DivergentSeries(f"G = {G:.4g} >= 1: partial sums do not converge")
    if k_max is None:
        k_max = 1 if G == 0 else min(4000, max(1, math.ceil(math.log(1e-18) / math.log(G))))
    rounds = interference_rounds(ensemble, drive, k_max)
    exact = steady_state_exact(ensemble, drive)
    series = rounds.partial_sums()[-1]
    E1 = rounds.E_r_rounds[0]
    E_n0 = rounds.E_n0
    I_p0 = float(np.sum(np.abs(E_n0) ** 2))
    from_pump = 0j
    if I_p0 > 0:
        E_p0 = math.sqrt(I_p0)
        g_bar = np.sum(ensemble.g_n * E_n0) / E_p0
        from_pump = complex(g_bar / ensemble.gamma_r * E_p0)
    return ResummationReport(
        k_max=k_max,
        G=G,
        E_r_series=complex(series),
        E_r_exact=exact.E_r,
        E_r_error=float(abs(series - exact.E_r)),
        E_n_error=float(np.max(np.abs(rounds.chaotic_totals() - exact.E_n))),
        remainder_bound=float(abs(E1) * G**k_max / (1.0 - G)),
        first_round=complex(E1),
        first_round_from_pump_mode=from_pump,
    )
