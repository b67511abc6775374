"""
Ray escape from a two-dimensional dielectric cavity.

The boundary is r(theta) = r0 (1 + sum_k eta_k cos(k theta)).  Rays bounce
specularly and leave the cavity at the first bounce whose incidence angle is
below the critical angle, sin(chi) < 1/m.  The mean geometric path length L_p
before escape gives the pump-mode field decay rate gamma_p = c / (2 m L_p).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from .errors import AllConfined, GeometryError, MaxBouncesExceeded

C_LIGHT = 2.99792458e8  # m/s
_GRID = 4096


@dataclass(frozen=True)
class CavityGeometry:
    """
    Parameters
    ----------
    r0 : float
        Mean radius [m].
    deformation : tuple of (k, eta_k)
        Cosine harmonics of the boundary; empty for a circle.
    m : float
        Refractive index (> 1).
    """

    r0: float
    deformation: tuple[tuple[int, float], ...] = ()
    m: float = 1.361

    def __post_init__(self) -> None:
        if not self.r0 > 0:
            raise GeometryError(f"r0 must be positive, got {self.r0}")
        if not self.m > 1:
            raise GeometryError(f"refractive index must exceed 1, got {self.m}")
        deformation = tuple((int(k), float(eta)) for k, eta in self.deformation)
        if any(k < 1 for k, _ in deformation):
            raise GeometryError("harmonic orders must be >= 1")
        object.__setattr__(self, "deformation", deformation)
        theta = np.linspace(0.0, 2 * np.pi, _GRID, endpoint=False)
        if np.min(self.radius_array(theta)) <= 0:
            raise GeometryError("boundary radius must stay positive (star-shaped about the origin)")

    @classmethod
    def quadrupole(cls, r0: float, eta: float, m: float = 1.361) -> "CavityGeometry":
        return cls(r0, ((2, eta),), m)

    def radius_array(self, theta: np.ndarray) -> np.ndarray:
        r = np.ones_like(theta)
        for k, eta in self.deformation:
            r = r + eta * np.cos(k * theta)
        return self.r0 * r

    def radius(self, theta: float) -> float:
        s = 1.0
        for k, eta in self.deformation:
            s += eta * math.cos(k * theta)
        return self.r0 * s

    def radius_derivative(self, theta: float) -> float:
        s = 0.0
        for k, eta in self.deformation:
            s -= k * eta * math.sin(k * theta)
        return self.r0 * s

    @property
    def critical_sin(self) -> float:
        return 1.0 / self.m

    @property
    def r_max(self) -> float:
        return self.r0 * (1.0 + sum(abs(eta) for _, eta in self.deformation))

    def point(self, theta: float) -> tuple[float, float]:
        r = self.radius(theta)
        return r * math.cos(theta), r * math.sin(theta)

    def normal(self, theta: float) -> tuple[float, float]:
        """Outward unit normal at polar angle theta."""
        r, dr = self.radius(theta), self.radius_derivative(theta)
        c, s = math.cos(theta), math.sin(theta)
        tx, ty = dr * c - r * s, dr * s + r * c
        norm = math.hypot(tx, ty)
        return ty / norm, -tx / norm

    def level(self, x: float, y: float) -> float:
        """Signed radial distance to the boundary; negative inside."""
        return math.hypot(x, y) - self.radius(math.atan2(y, x))


@dataclass(frozen=True)
class Bounce:
    x: float
    y: float
    theta: float
    sin_chi: float
    path_length: float  # cumulative up to this bounce


@dataclass(frozen=True)
class RayResult:
    escaped: bool
    path_length: float
    bounces: list[Bounce] = field(repr=False)


def _next_hit(geom: CavityGeometry, px: float, py: float, dx: float, dy: float, cos_chi: float, r_here: float) -> float:
    """Distance along (dx, dy) from boundary point (px, py) to the next boundary crossing."""
    tol = 1e-13 * geom.r0
    r0 = geom.r0

    def h(t: float) -> float:
        return geom.level(px + t * dx, py + t * dy)

    t_max = 2.0 * geom.r_max * (1.0 + 1e-9) + 10 * tol
    est = min(max(2.2 * r_here * abs(cos_chi), 1e-10 * r0), t_max)
    t_hi = est
    h_hi = h(t_hi)
    if h_hi > 0:
        t_lo = t_hi
        while True:
            t_lo *= 0.5
            if t_lo < 1e-15 * r0:
                raise GeometryError("no interior segment found along the ray")
            if h(t_lo) < 0:
                break
            t_hi = t_lo
    else:
        t_lo = t_hi
        step = 0.5 * est
        while True:
            t_hi = t_lo + step
            h_hi = h(t_hi)
            if h_hi > 0:
                break
            if t_hi > t_max:
                raise GeometryError("ray did not reach the boundary; is the boundary star-shaped?")
            t_lo = t_hi
            step = min(step * 1.5, 0.05 * r0)
    return brentq(h, t_lo, t_hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)


def launch_direction(geom: CavityGeometry, theta0: float, chi0: float) -> tuple[float, float, float, float]:
    """Boundary point and inward unit direction at incidence angle chi0 (counterclockwise)."""
    px, py = geom.point(theta0)
    nx, ny = geom.normal(theta0)
    tx, ty = -ny, nx  # counterclockwise tangent
    c, s = math.cos(chi0), math.sin(chi0)
    return px, py, -c * nx + s * tx, -c * ny + s * ty


def trace_from(
    geom: CavityGeometry,
    px: float,
    py: float,
    dx: float,
    dy: float,
    max_bounces: int,
    *,
    escape: bool = True,
) -> RayResult:
    """Follow a ray that starts at boundary point (px, py) heading inward along (dx, dy)."""
    crit = geom.critical_sin
    bounces: list[Bounce] = []
    total = 0.0
    norm = math.hypot(dx, dy)
    dx, dy = dx / norm, dy / norm
    theta = math.atan2(py, px)
    nx, ny = geom.normal(theta)
    cos_chi = -(dx * nx + dy * ny)
    for _ in range(max_bounces):
        t = _next_hit(geom, px, py, dx, dy, cos_chi, geom.radius(theta))
        px, py = px + t * dx, py + t * dy
        total += t
        theta = math.atan2(py, px)
        nx, ny = geom.normal(theta)
        dn = dx * nx + dy * ny
        sin_chi = abs(dx * ny - dy * nx)
        bounces.append(Bounce(px, py, theta, sin_chi, total))
        if escape and sin_chi < crit:
            return RayResult(True, total, bounces)
        dx, dy = dx - 2.0 * dn * nx, dy - 2.0 * dn * ny
        norm = math.hypot(dx, dy)
        dx, dy = dx / norm, dy / norm
        cos_chi = dn
    return RayResult(False, total, bounces)


def trace_ray(
    geometry: CavityGeometry, theta0: float, chi0: float, max_bounces: int = 10_000, *, strict: bool = False
) -> RayResult:
    """
    Trace one ray launched from the boundary at polar angle theta0, incidence chi0.

    The launch point itself is not tested for escape. A ray still inside
    after ``max_bounces`` is returned with ``escaped=False``; pass
    ``strict=True`` to raise ``MaxBouncesExceeded`` instead.
    """
    if not 0.0 < chi0 < math.pi / 2:
        raise ValueError(f"chi0 must lie in (0, pi/2), got {chi0}")
    px, py, dx, dy = launch_direction(geometry, theta0, chi0)
    res = trace_from(geometry, px, py, dx, dy, max_bounces)
    if strict and not res.escaped:
        raise MaxBouncesExceeded(f"ray confined after {max_bounces} bounces")
    return res


@dataclass(frozen=True)
class RayBundle:
    theta0: float
    chi0: float
    sigma_theta: float = 0.0
    sigma_chi: float = 0.0
    count: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.sigma_theta < 0 or self.sigma_chi < 0:
            raise ValueError("spreads must be >= 0")
        if not 0.0 < self.chi0 < math.pi / 2:
            raise ValueError(f"chi0 must lie in (0, pi/2), got {self.chi0}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def ray_launch(bundle: RayBundle, index: int) -> tuple[float, float]:
    """
    Launch angles of ray ``index``.

    Each ray owns a Philox stream keyed by the bundle seed with the ray index
    in the high counter word, so draws never overlap and do not depend on the
    order in which rays are traced.
    """
    rng = np.random.Generator(np.random.Philox(key=bundle.seed, counter=[0, 0, 0, index]))
    theta = bundle.theta0 + bundle.sigma_theta * float(rng.standard_normal()) if bundle.sigma_theta else bundle.theta0
    if not bundle.sigma_chi:
        return theta, bundle.chi0
    while True:
        chi = bundle.chi0 + bundle.sigma_chi * float(rng.standard_normal())
        if 0.0 < chi < math.pi / 2:
            return theta, chi


@dataclass(frozen=True)
class EscapeStats:
    L_p: float
    gamma_p: float
    m: float
    n_escaped: int
    n_confined: int
    sem: float  # standard error of L_p
    path_lengths: np.ndarray = field(repr=False)
    survival_curve: tuple[np.ndarray, np.ndarray] = field(repr=False)
    birkhoff_trace: list[tuple[float, float]] = field(repr=False)


def decay_rate_from_length(L_p: float, m: float) -> float:
    return C_LIGHT / (2.0 * m * L_p)


class ArclengthTable:
    """Cumulative boundary arclength s(theta), tabulated for Birkhoff coordinates."""

    def __init__(self, geom: CavityGeometry, n: int = 1 << 15) -> None:
        theta = np.linspace(0.0, 2 * np.pi, n + 1)
        r = geom.radius_array(theta)
        dr = np.zeros_like(theta)
        for k, eta in geom.deformation:
            dr -= geom.r0 * k * eta * np.sin(k * theta)
        self.theta = theta
        self.s = cumulative_trapezoid(np.hypot(r, dr), theta, initial=0.0)

    @property
    def perimeter(self) -> float:
        return float(self.s[-1])

    def __call__(self, theta):
        return np.interp(np.mod(theta, 2 * np.pi), self.theta, self.s)


def _trace_chunk(args) -> list[tuple[bool, float, list[tuple[float, float]]]]:
    geom, bundle, indices, max_bounces = args
    out = []
    for i in indices:
        theta, chi = ray_launch(bundle, i)
        res = trace_ray(geom, theta, chi, max_bounces)
        out.append((res.escaped, res.path_length, [(b.theta, b.sin_chi) for b in res.bounces]))
    return out


def bundle_stats(
    geometry: CavityGeometry,
    bundle: RayBundle,
    max_bounces: int = 2000,
    *,
    threads: int = 1,
    trace_limit: int = 20_000,
) -> EscapeStats:
    """
    Escape statistics of a ray bundle.

    L_p averages escaped rays only; confined rays are counted in
    ``n_confined``. Results are bit-identical for any ``threads`` value
    because rays are seeded individually and reduced in index order.
    """
    indices = list(range(bundle.count))
    if threads > 1:
        n_chunks = threads * 4
        chunks = [indices[k::n_chunks] for k in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_trace_chunk, [(geometry, bundle, c, max_bounces) for c in chunks]))
        results: list = [None] * bundle.count
        for chunk, part in zip(chunks, parts):
            for i, r in zip(chunk, part):
                results[i] = r
    else:
        results = _trace_chunk((geometry, bundle, indices, max_bounces))

    lengths = np.array([r[1] for r in results if r[0]])
    n_conf = sum(1 for r in results if not r[0])
    if len(lengths) == 0:
        raise AllConfined(f"none of {bundle.count} rays escaped within {max_bounces} bounces")
    L_p = math.fsum(lengths) / len(lengths)
    sem = float(lengths.std(ddof=1) / math.sqrt(len(lengths))) if len(lengths) > 1 else 0.0

    ordered = np.sort(lengths)
    survival = 1.0 - np.arange(1, len(ordered) + 1) / bundle.count

    arclength = ArclengthTable(geometry)
    trace: list[tuple[float, float]] = []
    for r in results:
        for theta, sin_chi in r[2]:
            if len(trace) >= trace_limit:
                break
            trace.append((float(arclength(theta)), sin_chi))

    return EscapeStats(
        L_p=L_p,
        gamma_p=decay_rate_from_length(L_p, geometry.m),
        m=geometry.m,
        n_escaped=len(lengths),
        n_confined=n_conf,
        sem=sem,
        path_lengths=lengths,
        survival_curve=(ordered, survival),
        birkhoff_trace=trace,
    )


def length_for_decay_rate(gamma_p: float, m: float) -> float:
    """Mean escape length that yields a given gamma_p."""
    return C_LIGHT / (2.0 * m * gamma_p)


def scale_to_decay_rate(geometry: CavityGeometry, L_p_over_r0: float, gamma_p: float) -> CavityGeometry:
    """Same shape, rescaled so that a bundle with mean length L_p_over_r0 * r0 gives gamma_p."""
    r0 = length_for_decay_rate(gamma_p, geometry.m) / L_p_over_r0
    return CavityGeometry(r0, geometry.deformation, geometry.m)
