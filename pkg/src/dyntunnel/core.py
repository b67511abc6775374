"""
Steady-state coupled-mode model of resonant pumping through dynamical tunneling.

One high-Q regular mode (field decay rate gamma_r) is coupled with real
constants g_n to N lossy chaotic modes (decay rates gamma_n) that are driven
by an external pump with coupling coefficients a_n:

    dE_n/dt = a_n E0 - gamma_n E_n - g_n E_r
    dE_r/dt = -(gamma_r + i Delta) E_r + sum_n g_n E_n

All decay rates are field (amplitude) rates in 1/s.  Detuning is carried as
the dimensionless delta = Delta / gamma_r.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import InvalidOverlap, OverdampedWarning, SingularMatrix, ZeroCoupling, ZeroPump

OVERDAMPED_LIMIT = 0.1

EXACT = "exact-closed-form"
APPROX = "approximate"
LINEAR_SOLVE = "linear-solve-oracle"


@dataclass(frozen=True)
class ChaoticMode:
    """
    One uncoupled low-Q chaotic mode.

    Parameters
    ----------
    gamma_n : float
        Field decay rate [1/s].
    g_n : float
        Real tunneling coupling to the regular mode [1/s].
    a_n : complex
        Pump coupling coefficient (dimensionless).
    """

    gamma_n: float
    g_n: float
    a_n: complex = 1.0

    def __post_init__(self) -> None:
        if not self.gamma_n > 0:
            raise ValueError(f"gamma_n must be positive, got {self.gamma_n}")
        if not np.isfinite(self.g_n):
            raise ValueError(f"g_n must be finite, got {self.g_n}")
        if abs(self.g_n) / self.gamma_n > OVERDAMPED_LIMIT:
            warnings.warn(
                f"|g_n|/gamma_n = {self.overdamping_ratio:.3g} > {OVERDAMPED_LIMIT}",
                OverdampedWarning,
                stacklevel=3,
            )

    @property
    def overdamping_ratio(self) -> float:
        return abs(self.g_n) / self.gamma_n


@dataclass(frozen=True)
class ModeEnsemble:
    """
    Regular mode plus an ordered list of chaotic modes.

    ``omega_r`` is kept for bookkeeping only; every formula works with the
    detuning.
    """

    gamma_r: float
    modes: tuple[ChaoticMode, ...]
    omega_r: float = 0.0

    def __post_init__(self) -> None:
        if not self.gamma_r > 0:
            raise ValueError(f"gamma_r must be positive, got {self.gamma_r}")
        object.__setattr__(self, "modes", tuple(self.modes))
        if len(self.modes) < 1:
            raise ValueError("modes: at least one chaotic mode is required")

    @classmethod
    def from_arrays(
        cls,
        gamma_r: float,
        gamma_n: Sequence[float],
        g_n: Sequence[float],
        a_n: Optional[Sequence[complex]] = None,
        omega_r: float = 0.0,
    ) -> "ModeEnsemble":
        gamma_n = np.atleast_1d(np.asarray(gamma_n, dtype=float))
        g_n = np.broadcast_to(np.asarray(g_n, dtype=float), gamma_n.shape)
        a_n = np.ones_like(gamma_n) if a_n is None else np.broadcast_to(np.asarray(a_n), gamma_n.shape)
        modes = tuple(
            ChaoticMode(float(gm), float(gg), complex(aa) if np.iscomplexobj(aa) else float(aa))
            for gm, gg, aa in zip(gamma_n, g_n, a_n)
        )
        return cls(float(gamma_r), modes, omega_r)

    @classmethod
    def single_pump_mode(cls, gamma_r: float, G: float, gamma_p: float) -> "ModeEnsemble":
        """Two-mode reduction: one chaotic mode that *is* the pump mode."""
        g = math.sqrt(G * gamma_r * gamma_p)
        return cls(gamma_r, (ChaoticMode(gamma_p, g, 1.0),))

    @property
    def N(self) -> int:
        return len(self.modes)

    @property
    def gamma_n(self) -> np.ndarray:
        return np.array([m.gamma_n for m in self.modes], dtype=float)

    @property
    def g_n(self) -> np.ndarray:
        return np.array([m.g_n for m in self.modes], dtype=float)

    @property
    def a_n(self) -> np.ndarray:
        return np.array([m.a_n for m in self.modes], dtype=complex)

    @property
    def G(self) -> float:
        """Enhancement factor sum_n g_n^2 / (gamma_n gamma_r)."""
        return float(np.sum(self.g_n**2 / self.gamma_n) / self.gamma_r)

    def gamma_matrix(self, delta: float = 0.0) -> np.ndarray:
        """Coupling matrix with E = (E_r, E_1..E_N) so that dE/dt = -Gamma E + E0 A."""
        n = self.N
        gam = np.zeros((n + 1, n + 1), dtype=complex if delta else float)
        gam[0, 0] = self.gamma_r * (1.0 + 1j * delta) if delta else self.gamma_r
        gam[0, 1:] = -self.g_n
        gam[1:, 0] = self.g_n
        gam[np.arange(1, n + 1), np.arange(1, n + 1)] = self.gamma_n
        return gam


@dataclass(frozen=True)
class PumpDrive:
    """External drive: amplitude E0, normalized detuning delta, laser linewidth gamma_L [1/s]."""

    E0: complex = 1.0
    delta: float = 0.0
    gamma_L: float = 0.0

    def __post_init__(self) -> None:
        if not self.gamma_L >= 0:
            raise ValueError(f"gamma_L must be >= 0, got {self.gamma_L}")


@dataclass(frozen=True)
class DerivedParams:
    """
    Pump-mode quantities derived from an ensemble.

    ``gamma_p`` is None when the effective coupling vanishes (G = 0 or a
    pump mode orthogonal to the coupling vector).
    """

    E_p0: float
    I_p0: float
    g_bar: complex
    gamma_p: Optional[float]
    G: float
    gamma_r: float
    gamma_r_prime: float
    alpha: float
    alpha_prime: float

    @classmethod
    def from_effective(cls, gamma_r: float, G: float, gamma_p: float, I_p0: float = 1.0) -> "DerivedParams":
        """Build parameters directly from the pump-mode reduction (gamma_r, G, gamma_p)."""
        return cls(
            E_p0=math.sqrt(I_p0),
            I_p0=I_p0,
            g_bar=math.sqrt(gamma_p * gamma_r * G),
            gamma_p=gamma_p if G > 0 else None,
            G=G,
            gamma_r=gamma_r,
            gamma_r_prime=gamma_r * (1.0 + G),
            alpha=coupling_efficiency(G),
            alpha_prime=transfer_efficiency(G),
        )

    def require_gamma_p(self) -> float:
        if self.gamma_p is None:
            raise ZeroCoupling("gamma_p is undefined when the effective coupling is zero")
        return self.gamma_p


@dataclass(frozen=True)
class SteadyState:
    E_r: complex
    E_n: np.ndarray
    E_p: complex
    I_r: float
    I_p: float
    mode: str
    bracket: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([[self.E_r], self.E_n])


def coupling_efficiency(G):
    return G * (2.0 + G) / (1.0 + G) ** 2


def transfer_efficiency(G):
    return G / (1.0 + G)


def nonresonant_amplitudes(ensemble: ModeEnsemble, drive: PumpDrive) -> np.ndarray:
    """Chaotic-mode amplitudes a_n E0 / gamma_n with all couplings switched off."""
    return ensemble.a_n * drive.E0 / ensemble.gamma_n


def derive_params(ensemble: ModeEnsemble, drive: PumpDrive = PumpDrive()) -> DerivedParams:
    E_n0 = nonresonant_amplitudes(ensemble, drive)
    I_p0 = float(np.sum(np.abs(E_n0) ** 2))
    if I_p0 == 0.0:
        raise ZeroPump("all a_n E0 are zero; the pump mode is undefined")
    E_p0 = math.sqrt(I_p0)
    g, gam = ensemble.g_n, ensemble.gamma_n
    g_bar = complex(np.sum(g * E_n0) / E_p0)
    tunnel_rate = float(np.sum(g**2 / gam))  # = gamma_r G = |g_bar|^2 / gamma_p
    G = tunnel_rate / ensemble.gamma_r
    gamma_p = None
    if tunnel_rate > 0 and g_bar != 0:
        gamma_p = abs(g_bar) ** 2 / tunnel_rate
    return DerivedParams(
        E_p0=E_p0,
        I_p0=I_p0,
        g_bar=g_bar,
        gamma_p=gamma_p,
        G=G,
        gamma_r=ensemble.gamma_r,
        gamma_r_prime=ensemble.gamma_r * (1.0 + G),
        alpha=coupling_efficiency(G),
        alpha_prime=transfer_efficiency(G),
    )


def _pump_projection(E_n: np.ndarray, E_n0: np.ndarray) -> complex:
    norm = math.sqrt(float(np.sum(np.abs(E_n0) ** 2)))
    if norm == 0.0:
        return 0j
    return complex(np.sum(E_n * np.conj(E_n0)) / norm)


def _regular_amplitude(ensemble: ModeEnsemble, drive: PumpDrive, E_n0: np.ndarray) -> complex:
    # (gamma_r + i Delta) E_r = sum g E_n0 - E_r sum g^2/gamma, written without dividing by E_p0
    g, gam = ensemble.g_n, ensemble.gamma_n
    denom = ensemble.gamma_r * (1.0 + 1j * drive.delta) + np.sum(g**2 / gam)
    return complex(np.sum(g * E_n0) / denom)


def _state(E_r, E_n, E_p, mode, bracket=None) -> SteadyState:
    return SteadyState(
        E_r=complex(E_r),
        E_n=np.asarray(E_n, dtype=complex),
        E_p=complex(E_p),
        I_r=abs(E_r) ** 2,
        I_p=abs(E_p) ** 2,
        mode=mode,
        bracket=bracket,
    )


def steady_state_exact(ensemble: ModeEnsemble, drive: PumpDrive = PumpDrive()) -> SteadyState:
    """Closed-form steady state: E_r from the pump-mode formula, E_n = E_n0 - (g_n/gamma_n) E_r."""
    E_n0 = nonresonant_amplitudes(ensemble, drive)
    E_r = _regular_amplitude(ensemble, drive, E_n0)
    E_n = E_n0 - (ensemble.g_n / ensemble.gamma_n) * E_r
    return _state(E_r, E_n, _pump_projection(E_n, E_n0), EXACT)


def steady_state_approx(ensemble: ModeEnsemble, drive: PumpDrive = PumpDrive()) -> SteadyState:
    """
    Approximate steady state with every chaotic amplitude scaled by 1/(1 + G_c).

    G_c = gamma_r G / (gamma_r + i Delta) is the complex enhancement factor.
    The neglected per-mode term |E_n0 G_c - E_p0 G_n| is attached as
    ``bracket``; it vanishes identically for a single chaotic mode.
    """
    E_n0 = nonresonant_amplitudes(ensemble, drive)
    E_p0 = math.sqrt(float(np.sum(np.abs(E_n0) ** 2)))
    g, gam = ensemble.g_n, ensemble.gamma_n
    lorentz = ensemble.gamma_r * (1.0 + 1j * drive.delta)
    Gc = np.sum(g**2 / gam) / lorentz
    if E_p0 > 0:
        g_bar = np.sum(g * E_n0) / E_p0
        Gn = g * g_bar / (gam * lorentz)
        bracket = np.abs(E_n0 * Gc - E_p0 * Gn)
    else:
        bracket = np.zeros(ensemble.N)
    E_r = _regular_amplitude(ensemble, drive, E_n0)
    return _state(E_r, E_n0 / (1.0 + Gc), E_p0 / (1.0 + Gc), APPROX, bracket)


def steady_state_linear_solve(ensemble: ModeEnsemble, drive: PumpDrive = PumpDrive()) -> SteadyState:
    """Solve Gamma E = E0 A directly; the oracle for both closed forms."""
    gam = ensemble.gamma_matrix(drive.delta)
    rhs = np.concatenate([[0.0], ensemble.a_n * drive.E0])
    try:
        sol = np.linalg.solve(gam, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularMatrix("non-finite solution of the coupled linear system")
    E_n0 = nonresonant_amplitudes(ensemble, drive)
    return _state(sol[0], sol[1:], _pump_projection(sol[1:], E_n0), LINEAR_SOLVE)


def steady_residual(ensemble: ModeEnsemble, drive: PumpDrive, state: SteadyState) -> float:
    """Max residual of the time-independent equations, relative to max |a_n E0|."""
    gam = ensemble.gamma_matrix(drive.delta)
    rhs = np.concatenate([[0.0], ensemble.a_n * drive.E0])
    scale = np.max(np.abs(rhs))
    res = np.max(np.abs(gam @ state.vector - rhs))
    return float(res / scale) if scale > 0 else float(res)


def intensities(params: DerivedParams, delta):
    """Regular- and pump-mode intensities (I_r, I_p) at normalized detuning ``delta``."""
    G = params.G
    d2 = np.square(delta)
    denom = (1.0 + G) ** 2 + d2
    if G == 0:
        I_r = np.zeros_like(denom)
    else:
        I_r = params.I_p0 * (params.require_gamma_p() / params.gamma_r) * G / denom
    I_p = params.I_p0 * (1.0 + d2) / denom
    return I_r, I_p


def lorentzian_lineshape(G, delta):
    w = (1.0 + G) ** 2
    return w / (np.square(delta) + w)


def lineshape(params: DerivedParams, delta):
    """Unity-peak lineshape (1+G)^2 / (delta^2 + (1+G)^2)."""
    return lorentzian_lineshape(params.G, delta)


def convolved_lineshape(G, delta, width_ratio):
    """
    Lineshape averaged over a Lorentzian pump spectrum of HWHM ``width_ratio`` (gamma_L/gamma_r).

    The convolution of two Lorentzians is a Lorentzian with the summed width,
    so the average is (1+G) W / (delta^2 + W^2) with W = (1+G) + width_ratio.
    """
    if np.any(np.asarray(width_ratio) < 0):
        raise ValueError("gamma_L / gamma_r must be >= 0")
    a = 1.0 + G
    w = a + width_ratio
    return a * w / (np.square(delta) + w * w)


def lineshape_convolved(params: DerivedParams, delta, gamma_L_over_gamma_r):
    return convolved_lineshape(params.G, delta, gamma_L_over_gamma_r)


def convolved_lineshape_quad(G: float, delta: float, width_ratio: float, rtol: float = 1e-9) -> float:
    """Same average by adaptive quadrature of the convolution integral (test path)."""
    a = 1.0 + G
    if width_ratio == 0:
        return float(lorentzian_lineshape(G, delta))
    b = width_ratio

    def integrand(x):
        return (a / math.pi) / (x * x + a * a) * (b / math.pi) / ((x - delta) ** 2 + b * b)

    lo, hi = sorted((0.0, float(delta)))
    pieces = [(-np.inf, lo), (lo, hi), (hi, np.inf)] if hi > lo else [(-np.inf, lo), (lo, np.inf)]
    total = 0.0
    for x0, x1 in pieces:
        val, _ = integrate.quad(integrand, x0, x1, epsrel=rtol, epsabs=0.0, limit=200)
        total += val
    return math.pi * a * total


def _build_up(params: DerivedParams, beta_p: float, beta_r: float) -> float:
    if not beta_p > 0:
        raise InvalidOverlap(f"beta_p must be positive, got {beta_p}")
    if beta_r < 0:
        raise ValueError(f"beta_r must be >= 0, got {beta_r}")
    if params.G == 0:
        return 0.0
    return params.require_gamma_p() * beta_r / (params.gamma_r_prime * beta_p)


def efficiency(params: DerivedParams, delta, beta_p: float, beta_r: float, gamma_L: float = 0.0):
    """
    Pumping efficiency relative to non-resonant pumping.

    Uses the linewidth-averaged lineshape, so a monochromatic pump
    (gamma_L = 0) and a broad pump are limits of the same expression.
    """
    K = _build_up(params, beta_p, beta_r)
    L = convolved_lineshape(params.G, delta, gamma_L / params.gamma_r)
    return 1.0 - params.alpha * L + K * params.alpha_prime * L


def efficiency_from_intensities(params: DerivedParams, delta, beta_p: float, beta_r: float):
    """Monochromatic efficiency from the mode intensities and overlap factors."""
    _build_up(params, beta_p, beta_r)
    I_r, I_p = intensities(params, delta)
    return (I_p * beta_p + I_r * beta_r) / (params.I_p0 * beta_p)
