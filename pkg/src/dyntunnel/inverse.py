"""
Extraction of tunneling parameters from on-resonance pumping efficiencies.

Inputs per regular mode: the measured efficiency eps(0), the observed
linewidth gamma'_r, the pump-mode decay rate gamma_p, the overlap factors and
the pump linewidth.  With gamma_r = gamma'_r / (1 + G) the forward efficiency
becomes a function of G alone, which is root-found on [0, G_MAX].
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import DerivedParams, coupling_efficiency, efficiency, transfer_efficiency
from .errors import AmbiguousRoot, InvalidOverlap, NoRoot

G_MAX = 100.0


class Quantity(NamedTuple):
    value: float
    sigma: float = 0.0


def _q(x) -> Quantity:
    if isinstance(x, Quantity):
        return x
    if isinstance(x, (tuple, list)):
        return Quantity(float(x[0]), float(x[1]) if len(x) > 1 else 0.0)
    return Quantity(float(x))


@dataclass(frozen=True)
class Measurement:
    """One measured regular mode. Rates in 1/s; quantities are (value, sigma)."""

    epsilon0: Quantity
    gamma_r_prime_meas: Quantity
    beta_r: Quantity
    beta_p: Quantity
    gamma_p: Quantity
    gamma_L: float = 0.0
    mode_label: str = ""

    def __post_init__(self) -> None:
        for name in ("epsilon0", "gamma_r_prime_meas", "beta_r", "beta_p", "gamma_p"):
            object.__setattr__(self, name, _q(getattr(self, name)))
        if not self.epsilon0.value > 0:
            raise ValueError(f"epsilon0 must be positive, got {self.epsilon0.value}")
        if not self.gamma_r_prime_meas.value > 0:
            raise ValueError(f"gamma_r_prime_meas must be positive, got {self.gamma_r_prime_meas.value}")
        if not self.beta_p.value > 0:
            raise InvalidOverlap(f"beta_p must be positive, got {self.beta_p.value}")
        if not self.gamma_p.value > 0:
            raise ValueError(f"gamma_p must be positive, got {self.gamma_p.value}")
        if self.gamma_L < 0:
            raise ValueError(f"gamma_L must be >= 0, got {self.gamma_L}")


@dataclass(frozen=True)
class ExtractedParams:
    gamma_r: Quantity
    G: Quantity
    g_bar: Quantity
    alpha: Quantity
    alpha_prime: Quantity
    gamma_rG: Quantity
    gamma_r_prime: float
    mode_label: str = ""
    alternatives: tuple[float, ...] = ()
    rejection_fraction: float = 0.0
    n_samples: int = 0

    @property
    def ambiguous(self) -> bool:
        return bool(self.alternatives)


def derived_columns(gamma_r: float, G: float, gamma_p: float) -> tuple[float, float, float, float, float]:
    """(gamma'_r, alpha, alpha', gamma_r G, g_bar) from gamma_r, G and gamma_p."""
    if G < 0:
        raise ValueError(f"G must be >= 0, got {G}")
    return (
        gamma_r * (1.0 + G),
        coupling_efficiency(G),
        transfer_efficiency(G),
        gamma_r * G,
        math.sqrt(gamma_p * gamma_r * G),
    )


def forward_efficiency(G: float, gamma_r_prime: float, gamma_p: float, beta_p: float, beta_r: float, gamma_L: float) -> float:
    """On-resonance efficiency for a given G at fixed observed linewidth gamma'_r."""
    params = DerivedParams.from_effective(gamma_r_prime / (1.0 + G), G, gamma_p)
    return float(efficiency(params, 0.0, beta_p, beta_r, gamma_L))


def _turning_point(meas: Measurement) -> Optional[float]:
    # eps(0) - 1 = L0 * (u^2 + (K - 2) u) with u = G/(1+G), L0 independent of G
    K = meas.gamma_p.value * meas.beta_r.value / (meas.gamma_r_prime_meas.value * meas.beta_p.value)
    if 0.0 < K < 2.0:
        u = 1.0 - K / 2.0
        return u / (1.0 - u)
    return None


def solve_G(meas: Measurement, g_max: float = G_MAX) -> list[float]:
    """All admissible G in [0, g_max], each from a bracket with a verified sign change."""
    args = (
        meas.gamma_r_prime_meas.value,
        meas.gamma_p.value,
        meas.beta_p.value,
        meas.beta_r.value,
        meas.gamma_L,
    )
    target = meas.epsilon0.value

    def residual(G):
        return forward_efficiency(G, *args) - target

    edges = [0.0, g_max]
    turn = _turning_point(meas)
    if turn is not None and turn < g_max:
        edges.insert(1, turn)
    roots = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        r_lo, r_hi = residual(lo), residual(hi)
        if r_lo == 0.0:
            roots.append(lo)
        elif r_hi == 0.0:
            roots.append(hi)
        elif r_lo * r_hi < 0:
            roots.append(brentq(residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))
    return sorted(set(roots))


def extract(meas: Measurement) -> ExtractedParams:
    """
    Solve for G and gamma_r from a single measurement (central values).

    Raises
    ------
    NoRoot
        The efficiency lies outside the range reachable for G in [0, G_MAX].

    Two admissible roots (possible only when gamma_p beta_r / (gamma'_r beta_p) < 2)
    emit an ``AmbiguousRoot`` warning; the smaller G is reported and the other
    is kept in ``alternatives``.
    """
    roots = solve_G(meas)
    if not roots:
        raise NoRoot(f"no G in [0, {G_MAX}] reproduces eps(0) = {meas.epsilon0.value}")
    if len(roots) > 1:
        warnings.warn(f"mode {meas.mode_label!r}: admissible G values {roots}", AmbiguousRoot, stacklevel=2)
    G = roots[0]
    gamma_r = meas.gamma_r_prime_meas.value / (1.0 + G)
    _, alpha, alpha_p, gamma_rG, g_bar = derived_columns(gamma_r, G, meas.gamma_p.value)
    return ExtractedParams(
        gamma_r=Quantity(gamma_r),
        G=Quantity(G),
        g_bar=Quantity(g_bar),
        alpha=Quantity(alpha),
        alpha_prime=Quantity(alpha_p),
        gamma_rG=Quantity(gamma_rG),
        gamma_r_prime=meas.gamma_r_prime_meas.value,
        mode_label=meas.mode_label,
        alternatives=tuple(roots[1:]),
    )


def _truncated_normal(rng: np.random.Generator, q: Quantity, lower: float) -> float:
    if q.sigma == 0:
        return q.value
    for _ in range(10_000):
        x = rng.normal(q.value, q.sigma)
        if x > lower:
            return float(x)
    raise ValueError(f"cannot sample {q} above {lower}")


def sample_measurement(meas: Measurement, rng: np.random.Generator) -> Measurement:
    """One Monte Carlo draw; rates and overlaps truncated at their physical bounds."""
    return replace(
        meas,
        epsilon0=Quantity(_truncated_normal(rng, meas.epsilon0, 0.0)),
        gamma_r_prime_meas=Quantity(_truncated_normal(rng, meas.gamma_r_prime_meas, 0.0)),
        beta_r=Quantity(_truncated_normal(rng, meas.beta_r, 0.0)),
        beta_p=Quantity(_truncated_normal(rng, meas.beta_p, 0.0)),
        gamma_p=Quantity(_truncated_normal(rng, meas.gamma_p, 0.0)),
    )


def monte_carlo(
    sampler: Callable[[np.random.Generator], object],
    fn: Callable[[object], Sequence[float]],
    n_samples: int,
    seed: int,
    rejected: tuple[type[BaseException], ...] = (NoRoot,),
) -> tuple[np.ndarray, int]:
    """
    Evaluate ``fn(sampler(rng_i))`` for independent per-sample generators.

    Each sample gets its own child of ``SeedSequence(seed)``, so the result
    does not depend on evaluation order. Returns (accepted outputs, n_rejected).
    """
    children = np.random.SeedSequence(seed).spawn(n_samples)
    out, n_rej = [], 0
    for child in children:
        rng = np.random.default_rng(child)
        try:
            out.append(np.asarray(fn(sampler(rng)), dtype=float))
        except rejected:
            n_rej += 1
    return (np.array(out) if out else np.empty((0, 0))), n_rej


_COLUMNS = ("gamma_r", "G", "g_bar", "alpha", "alpha_prime", "gamma_rG")


def _sample_std(samples: np.ndarray) -> np.ndarray:
    # shifting by the first sample keeps constant columns at exactly zero
    if len(samples) < 2:
        return np.zeros(len(_COLUMNS))
    return (samples - samples[0]).std(axis=0, ddof=1)


def _as_row(p: ExtractedParams) -> list[float]:
    return [getattr(p, c).value for c in _COLUMNS]


def propagate_uncertainty(meas: Measurement, n_samples: int = 4000, seed: int = 0) -> ExtractedParams:
    """Central values from ``extract`` with Monte Carlo standard deviations."""
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    central = extract(meas)

    def fn(m):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AmbiguousRoot)
            return _as_row(extract(m))

    samples, n_rej = monte_carlo(lambda rng: sample_measurement(meas, rng), fn, n_samples, seed)
    sig = _sample_std(samples)
    fields = {c: Quantity(getattr(central, c).value, float(s)) for c, s in zip(_COLUMNS, sig)}
    return replace(central, **fields, rejection_fraction=n_rej / n_samples, n_samples=n_samples)


def propagate_given(
    gamma_r: Quantity, G: Quantity, gamma_p: Quantity, n_samples: int = 4000, seed: int = 0, mode_label: str = ""
) -> ExtractedParams:
    """Derived columns with Monte Carlo errors when gamma_r and G are given directly."""
    gamma_r, G, gamma_p = _q(gamma_r), _q(G), _q(gamma_p)

    def sampler(rng):
        return (
            _truncated_normal(rng, gamma_r, 0.0),
            _truncated_normal(rng, G, 0.0) if G.value > 0 else G.value,
            _truncated_normal(rng, gamma_p, 0.0),
        )

    def fn(x):
        gr, g, gp = x
        _, a, ap, grg, gb = derived_columns(gr, g, gp)
        return [gr, g, gb, a, ap, grg]

    samples, _ = monte_carlo(sampler, fn, n_samples, seed, rejected=())
    central = fn((gamma_r.value, G.value, gamma_p.value))
    sig = _sample_std(samples)
    q = {c: Quantity(float(v), float(s)) for c, v, s in zip(_COLUMNS, central, sig)}
    return ExtractedParams(**q, gamma_r_prime=gamma_r.value * (1 + G.value), mode_label=mode_label, n_samples=n_samples)


@dataclass(frozen=True)
class GammaPConsistency:
    values: np.ndarray
    mean: float
    spread: float  # (max - min) / mean

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.values - self.mean)) / self.mean)


def gamma_p_consistency(table: Sequence[tuple[float, float]]) -> GammaPConsistency:
    """Per-mode gamma_p = g_bar^2 / (gamma_r G) from (g_bar, gamma_r G) pairs."""
    if len(table) < 2:
        raise ValueError("at least two modes are required")
    vals = np.array([gb * gb / grg for gb, grg in table], dtype=float)
    mean = float(vals.mean())
    return GammaPConsistency(vals, mean, float((vals.max() - vals.min()) / mean))


def printed_unit(text: str) -> float:
    """Value of one unit in the last printed digit ("0.32" -> 0.01, "260" -> 10)."""
    text = text.strip()
    if "." in text:
        return 10.0 ** -len(text.split(".")[1])
    digits = text.lstrip("-")
    return 10.0 ** (len(digits) - len(digits.rstrip("0"))) if digits.rstrip("0") else 1.0


@dataclass(frozen=True)
class TableRow:
    mode: int
    values: dict = field(default_factory=dict)  # column -> (value in 1/s or dimensionless, sigma)
    units: dict = field(default_factory=dict)  # column -> last printed digit in same units


def load_reference_table() -> tuple[list[TableRow], float]:
    """Bundled reference table: rows in SI units plus the common gamma_p."""
    raw = json.loads(resources.files("dyntunnel").joinpath("data/reference_modes.json").read_text())
    scale = raw["scale"]
    rows = []
    for r in raw["rows"]:
        vals, units = {}, {}
        for key, entry in r.items():
            if key == "mode":
                continue
            s = scale.get(key, 1.0)
            vals[key] = (float(entry[0]) * s, float(entry[1]) * s)
            units[key] = printed_unit(entry[0]) * s
        rows.append(TableRow(int(r["mode"]), vals, units))
    return rows, float(raw["gamma_p"])
