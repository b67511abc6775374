"""
Decay spectrum of the on-resonance coupling matrix.

The eigenvalues of Gamma are the zeros of det(Gamma - lambda I), which factors
into prod_n (gamma_n - lambda) times the secular function

    s(lambda) = (gamma_r - lambda) + sum_n g_n^2 / (gamma_n - lambda).

Root structure used for bracketing (distinct, coupled poles p_1 < ... < p_M):

* on each (p_k, p_k+1), s runs from -inf to +inf, so it has at least one root;
* on (-inf, p_1), s is convex and tends to +inf at both ends, so it has two
  real roots (the regular-mode root and one just below p_1) iff its minimum
  is negative.

In the weak-coupling regime (gamma_n >> gamma_r(1+G)) this accounts for all
M+1 roots. Otherwise the two extra roots may be complex, lie above p_M, or
share an interval with a third root; those cases are detected by the root
count and handed to the dense solver.

Modes with g_n = 0 contribute lambda = gamma_n exactly and no pole.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import ModeEnsemble
from .errors import DegenerateRates

DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class SpectrumResult:
    lambda_exact: np.ndarray
    lambda_dense: np.ndarray
    lambda_regular_exact: float
    lambda_regular_firstorder: float
    psi_r_prime: np.ndarray
    method: str
    max_disagreement: float


def secular_function(ensemble: ModeEnsemble, lam):
    g2 = ensemble.g_n**2
    lam = np.asarray(lam, dtype=float)
    return (ensemble.gamma_r - lam) + np.sum(g2 / (ensemble.gamma_n - lam[..., None]), axis=-1)


def _s(lam: float, gamma_r: float, poles: np.ndarray, w: np.ndarray) -> float:
    return gamma_r - lam + float((w / (poles - lam)).sum())


def _ds(lam: float, poles: np.ndarray, w: np.ndarray) -> float:
    return -1.0 + float((w / (poles - lam) ** 2).sum())


def _solve(f, lo: float, hi: float) -> float:
    scale = max(abs(lo), abs(hi), 1e-300)
    return brentq(f, lo, hi, xtol=scale * 1e-17, rtol=4 * np.finfo(float).eps, maxiter=500)


def _near_pole(f, pole: float, toward: float, want_positive: bool) -> float | None:
    """
    A point between ``pole`` and ``toward`` where f has the required sign.

    Returns None if f still has the wrong sign one ulp from the pole, i.e. the
    root coincides with the pole in floating point.
    """
    gap = toward - pole
    for exponent in range(1, 60):
        x = pole + gap * 10.0 ** (-exponent / 2)
        if x == pole:
            break
        if (f(x) > 0) == want_positive:
            return x
    x = float(np.nextafter(pole, toward))
    return x if (f(x) > 0) == want_positive else None


def _secular_real_roots(gamma_r: float, poles: np.ndarray, w: np.ndarray) -> list[float]:
    """Real roots of s; returns fewer than M+1 values when a complex pair exists."""
    f = lambda x: _s(x, gamma_r, poles, w)  # noqa: E731
    roots = []
    for p_lo, p_hi in zip(poles[:-1], poles[1:]):
        lo = _near_pole(f, p_lo, p_hi, want_positive=False)
        hi = _near_pole(f, p_hi, p_lo, want_positive=True)
        if lo is None:
            roots.append(float(p_lo))
        elif hi is None:
            roots.append(float(p_hi))
        else:
            roots.append(_solve(f, lo, hi))

    p1 = poles[0]
    df = lambda x: _ds(x, poles, w)  # noqa: E731
    left = p1 - 2.0 * math.sqrt(float(np.sum(w))) - abs(p1)
    right = _near_pole(df, p1, left, want_positive=True)
    if right is None:
        # s is decreasing up to one ulp below p_1: the upper root is p_1 itself
        edge = float(np.nextafter(p1, left))
        if f(edge) < 0:
            far = min(gamma_r, edge) - (1.0 + abs(gamma_r) + abs(edge))
            roots.extend([_solve(f, far, edge), float(p1)])
        return sorted(roots)
    lam_min = _solve(df, left, right)
    s_min = f(lam_min)
    if s_min < 0:
        far = min(gamma_r, lam_min) - (1.0 + abs(gamma_r) + abs(lam_min))
        roots.append(_solve(f, far, lam_min))
        upper = _near_pole(f, p1, lam_min, want_positive=True)
        roots.append(float(p1) if upper is None else _solve(f, lam_min, upper))
    elif s_min == 0:
        roots.extend([lam_min, lam_min])
    return sorted(roots)


def dense_eigenvalues(ensemble: ModeEnsemble) -> np.ndarray:
    ev = np.linalg.eigvals(ensemble.gamma_matrix(0.0))
    order = np.lexsort((ev.imag, ev.real))
    ev = ev[order]
    return ev.real if np.all(ev.imag == 0) else ev


def _regular_eigenvector(ensemble: ModeEnsemble, lam: complex) -> np.ndarray:
    vals, vecs = np.linalg.eig(ensemble.gamma_matrix(0.0))
    k = int(np.argmin(np.abs(vals - lam)))
    v = vecs[:, k]
    v = v / v[0]
    return v.real if np.allclose(v.imag, 0, atol=1e-14) else v


def secular_roots(ensemble: ModeEnsemble) -> SpectrumResult:
    """
    All N+1 decay eigenvalues from the secular function, validated by a dense solve.

    Falls back to the dense eigenvalues (``method='dense-fallback'``) when two
    coupled gamma_n coincide, which emits a ``DegenerateRates`` warning, or
    when the regular-mode pair is complex (underdamped coupling).
    """
    gam, g = ensemble.gamma_n, ensemble.g_n
    coupled = g != 0
    dense = dense_eigenvalues(ensemble)
    G = ensemble.G
    first_order = ensemble.gamma_r * (1.0 + G)

    poles = gam[coupled]
    order = np.argsort(poles)
    poles, w = poles[order], (g[coupled] ** 2)[order]
    degenerate = len(poles) > 1 and np.any(np.diff(poles) <= DEGENERACY_RTOL * poles[1:])
    method = "secular"
    if not coupled.any():
        roots = np.sort(np.concatenate([[ensemble.gamma_r], gam]))
    elif degenerate:
        warnings.warn("coincident chaotic decay rates; using the dense eigenvalues", DegenerateRates, stacklevel=2)
        method = "dense-fallback"
        roots = dense
    else:
        real_roots = _secular_real_roots(ensemble.gamma_r, poles, w)
        if len(real_roots) == len(poles) + 1:
            roots = np.sort(np.concatenate([real_roots, gam[~coupled]]))
        else:
            method = "dense-fallback"
            roots = dense

    roots = np.asarray(roots)
    if np.iscomplexobj(roots) or np.iscomplexobj(dense):
        disagreement = 0.0 if method != "secular" else float(np.max(np.abs(np.sort_complex(roots) - np.sort_complex(dense)) / np.abs(dense)))
    else:
        disagreement = float(np.max(np.abs(roots - dense) / np.abs(dense)))
    lam_r = roots[int(np.argmin(np.abs(roots - ensemble.gamma_r)))]
    return SpectrumResult(
        lambda_exact=roots,
        lambda_dense=dense,
        lambda_regular_exact=lam_r.real if np.isreal(lam_r) else lam_r,
        lambda_regular_firstorder=first_order,
        psi_r_prime=_regular_eigenvector(ensemble, lam_r),
        method=method,
        max_disagreement=disagreement,
    )


@dataclass(frozen=True)
class ModifiedRegularMode:
    """Modified regular mode, normalized so the regular component is 1."""

    first_order: np.ndarray
    exact: np.ndarray
    difference: np.ndarray
    eigenvalue: float

    @property
    def max_error(self) -> float:
        return float(np.max(np.abs(self.difference)))


def modified_regular_mode(ensemble: ModeEnsemble) -> ModifiedRegularMode:
    """First-order eigenvector (1, -g_n/gamma_n) against the dense-solve eigenvector."""
    spec = secular_roots(ensemble)
    first = np.concatenate([[1.0], -ensemble.g_n / ensemble.gamma_n])
    exact = spec.psi_r_prime
    return ModifiedRegularMode(first, exact, exact - first, spec.lambda_regular_exact)
