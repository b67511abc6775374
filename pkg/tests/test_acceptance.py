"""
Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import json
import math
import subprocess
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import ensemble_with_G, random_ensemble  # noqa: E402

from dyntunnel.core import (  # noqa: E402
    DerivedParams,
    ModeEnsemble,
    PumpDrive,
    convolved_lineshape,
    convolved_lineshape_quad,
    derive_params,
    intensities,
    lorentzian_lineshape,
    steady_state_exact,
    steady_state_linear_solve,
)
from dyntunnel.inverse import Measurement, derived_columns, extract, forward_efficiency, gamma_p_consistency, load_reference_table  # noqa: E402
from dyntunnel.rays import C_LIGHT, CavityGeometry, RayBundle, bundle_stats, trace_ray  # noqa: E402
from dyntunnel.series import interference_rounds  # noqa: E402
from dyntunnel.spectrum import secular_roots  # noqa: E402
from dyntunnel.transient import (  # noqa: E402
    CONSTANT_R,
    CORRECTED_R,
    free_decay_rate,
    integrate_envelopes,
    integrate_rate_equations,
    rate_equation_closed_form,
)

ROOT = Path(__file__).resolve().parents[1]
RESULTS: dict[int, str] = {}


def record(n: int, title: str, ok: bool, detail: str, elapsed: float, limit: float) -> bool:
    ok = bool(ok) and elapsed < limit
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail} [{elapsed:.2f} s / {limit:g} s]"
    RESULTS[n] = line
    print(line)
    return ok


def test_criterion_01_table_columns():
    t0 = time.perf_counter()
    rows, gamma_p = load_reference_table()
    worst, misses = 0.0, []
    names = ("gamma_r_prime", "alpha", "alpha_prime", "gamma_rG", "g_bar")
    for row in rows:
        got = derived_columns(row.values["gamma_r"][0], row.values["G"][0], gamma_p)
        for name, val in zip(names, got):
            dev = abs(val - row.values[name][0]) / row.units[name]
            worst = max(worst, dev)
            if dev > 1 + 1e-9:
                misses.append(f"row {row.mode} {name}")
    ok = not misses and len(rows) == 5
    detail = f"5 rows x 5 columns, worst deviation {worst:.3f} printed units" + (f"; misses {misses}" if misses else "")
    assert record(1, "reference-table derived columns", ok, detail, time.perf_counter() - t0, 1.0), detail


def test_criterion_02_gamma_p_consistency():
    t0 = time.perf_counter()
    rows, gamma_p = load_reference_table()
    c = gamma_p_consistency([(r.values["g_bar"][0], r.values["gamma_rG"][0]) for r in rows])
    about = float(np.max(np.abs(c.values - gamma_p)) / gamma_p)
    ok = c.spread < 0.03 and about < 0.03
    detail = f"gamma_p = {np.round(c.values / 1e12, 3).tolist()} e12/s, spread {c.spread:.4f}, max offset from 1.7e12 {about:.4f}"
    assert record(2, "gamma_p consistency", ok, detail, time.perf_counter() - t0, 1.0), detail


def test_criterion_03_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240603)
    worst = 0.0
    for _ in range(1000):
        e = random_ensemble(rng, n_max=50, ratio=(50.0, 1e4), max_coupling=0.1)
        d = PumpDrive(E0=complex(rng.normal(), rng.normal()), delta=float(rng.uniform(-1e3, 1e3) * rng.choice([0.0, 1e-3, 1.0])))
        a, b = steady_state_exact(e, d), steady_state_linear_solve(e, d)
        worst = max(worst, float(np.max(np.abs(a.vector - b.vector)) / np.max(np.abs(b.vector))))
    detail = f"1000 ensembles, worst relative difference {worst:.2e} (tol 1e-10)"
    assert record(3, "closed form vs linear solve", worst < 1e-10, detail, time.perf_counter() - t0, 30.0), detail


def test_criterion_04_series_resummation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst_exact, worst_ratio, bound_ok, n = 0.0, 0.0, True, 0
    for G in np.linspace(0.05, 0.89, 15):
        for _ in range(10):
            e = ensemble_with_G(rng, G, n_max=20)
            r = interference_rounds(e, k_max=60)
            exact = steady_state_exact(e).E_r
            E1 = abs(r.E_r_rounds[0])
            k = np.arange(1, 61)
            err = np.abs(r.partial_sums() - exact)
            worst_exact = max(worst_exact, float(np.max(np.abs(err - e.G**k / (1 + e.G) * E1))))
            bound_ok &= bool(np.all(err <= e.G**k / (1 - e.G) * E1 + 1e-14 * E1))
            same = np.array_equal(r.E_r_rounds[1:], -e.G * r.E_r_rounds[:-1])
            worst_ratio = max(worst_ratio, 0.0 if same else 1.0)
            n += 1
    ok = worst_exact < 1e-12 and worst_ratio == 0.0 and bound_ok
    detail = (
        f"{n} ensembles, G up to 0.89: ratio -G exact, |remainder - G^k|E1|/(1+G)| <= {worst_exact:.1e}, "
        f"G^k|E1|/(1-G) bound {'holds' if bound_ok else 'violated'}"
    )
    assert record(4, "series resummation", ok, detail, time.perf_counter() - t0, 5.0), detail


def test_criterion_05_first_order_eigenvalue():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        e = ensemble_with_G(rng, float(rng.uniform(0.01, 0.8)), n_max=50, ratio=(50.0, 1e4))
        lam = secular_roots(e).lambda_regular_exact
        scale = e.G * np.max(e.gamma_r / e.gamma_n)
        worst = max(worst, abs(lam - e.gamma_r * (1 + e.G)) / e.gamma_r / scale)
    n1 = secular_roots(ModeEnsemble.from_arrays(1.0, [100.0], [5.0])).lambda_regular_exact
    ref = (101 - math.sqrt(9701)) / 2
    n1_err = abs(n1 - ref) / ref
    ok = worst < 2 and n1_err < 1e-12
    detail = f"worst C = {worst:.3f} (< 2) over 1000 ensembles; N=1 root {float(n1)!r}, rel. error {n1_err:.1e}"
    assert record(5, "first-order eigenvalue", ok, detail, time.perf_counter() - t0, 10.0), detail


def test_criterion_06_transient_relaxation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    ensembles = [ModeEnsemble.from_arrays(1.0, [100.0], [5.0])]
    ensembles += [ensemble_with_G(rng, G, n_max=10, ratio=(50.0, 1e3)) for G in (0.05, 0.3, 0.8)]
    worst_ss, worst_rate = 0.0, 0.0
    for e in ensembles:
        t_end = 20.0 / (e.gamma_r * (1 + e.G))
        end = integrate_envelopes(e, PumpDrive(), t_end, t_eval=[t_end])[-1]
        ref = steady_state_exact(e).vector
        worst_ss = max(worst_ss, float(np.max(np.abs(np.concatenate([[end.E_r], end.E_n]) - ref)) / np.max(np.abs(ref))))
        lam = secular_roots(e).lambda_regular_exact
        worst_rate = max(worst_rate, abs(free_decay_rate(e) - lam) / lam)
    ok = worst_ss < 1e-6 and worst_rate < 0.01
    detail = f"{len(ensembles)} ensembles: steady-state error at 20/gamma'_r {worst_ss:.1e}, decay-rate error {worst_rate:.1e}"
    assert record(6, "transient relaxation", ok, detail, time.perf_counter() - t0, 30.0), detail


def test_criterion_07_rate_equations():
    t0 = time.perf_counter()
    gamma_c, gamma_r, R = 100.0, 1.0, 200.0
    const_err, gap_c, gap_r = 0.0, 0.0, 0.0
    for G in (1e-4, 1e-3, 3e-3, 1e-2):
        g = math.sqrt(G * gamma_c * gamma_r)
        I_c0 = R / (2 * gamma_c)
        c = integrate_rate_equations(gamma_c, gamma_r, g, R, CONSTANT_R)
        const_err = max(
            const_err,
            abs(c.I_c - I_c0 * (1 + G) / (1 + 2 * G)) / c.I_c,
            abs(c.I_r - I_c0 * (gamma_c / gamma_r) * G / (1 + 2 * G)) / c.I_r,
        )
        k = integrate_rate_equations(gamma_c, gamma_r, g, R, CORRECTED_R)
        I_r_cm, I_p_cm = intensities(DerivedParams.from_effective(gamma_r, G, gamma_c, I_p0=I_c0), 0.0)
        gap_c = max(gap_c, abs(k.I_c - I_p_cm) / I_p_cm / (10 * G**2))
        gap_r = max(gap_r, abs(k.I_r - I_r_cm) / I_r_cm / (10 * G**2))
    ok = const_err < 1e-9 and gap_c < 1 and gap_r < 1
    detail = (
        f"constant-R vs closed form {const_err:.1e}; corrected-R gap / 10G^2: I_c {gap_c:.3f}, I_r {gap_r:.1f} "
        "(I_r gap is G/(1+2G), first order in G)"
    )
    assert record(7, "rate-equation reconciliation", ok, detail, time.perf_counter() - t0, 5.0), detail


def test_criterion_08_linewidth_limits():
    t0 = time.perf_counter()
    deltas = np.linspace(-50, 50, 201)
    zero, broad, quad = 0.0, 0.0, 0.0
    for G in (0.0, 0.19, 0.75, 2.0):
        a = 1 + G
        zero = max(zero, float(np.max(np.abs(convolved_lineshape(G, deltas, 0.0) / lorentzian_lineshape(G, deltas) - 1))))
        b = 100 * a
        wide = np.linspace(-20 * b, 20 * b, 401)
        limit = (a / b) * b**2 / (wide**2 + b**2)
        broad = max(broad, float(np.max(np.abs(convolved_lineshape(G, wide, b) / limit - 1))))
        for width in (0.01, 1.0, 30.0, b):
            for d in (0.0, 0.7, 5.0, 80.0):
                q = convolved_lineshape_quad(G, d, width)
                quad = max(quad, abs(float(convolved_lineshape(G, d, width)) - q) / q)
    ok = zero < 1e-12 and broad < 0.02 and quad < 1e-8
    detail = f"gamma_L=0 rel. error {zero:.1e}; broad-pump limit {broad:.4f} (< 0.02); quadrature {quad:.1e}"
    assert record(8, "linewidth limits", ok, detail, time.perf_counter() - t0, 5.0), detail


def test_criterion_09_inverse_round_trip():
    t0 = time.perf_counter()
    gamma_r, gamma_p = 1.7e9, 1.7e12
    worst, n = 0.0, 0
    for G in (0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9):
        grp = gamma_r * (1 + G)
        for gamma_L in (0.0, 100 * grp):
            for ratio in (0.02, 0.2, 1.0):
                eps = forward_efficiency(G, grp, gamma_p, 1.0, ratio, gamma_L)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    got = extract(Measurement(eps, grp, ratio, 1.0, gamma_p, gamma_L))
                worst = max(worst, abs(got.G.value - G) / G, abs(got.gamma_r.value - gamma_r) / gamma_r)
                n += 1
    detail = f"{n} cases (12 G values x 2 linewidth regimes x 3 overlap ratios), worst relative error {worst:.1e}"
    assert record(9, "inverse round trip", worst < 1e-9, detail, time.perf_counter() - t0, 10.0), detail


def test_criterion_10_ray_escape():
    t0 = time.perf_counter()
    m, r0, chi = 1.361, 1e-5, 0.4
    stats = bundle_stats(CavityGeometry(r0, m=m), RayBundle(0.3, chi, count=100_000, seed=1), max_bounces=10)
    L_err = abs(stats.L_p - 2 * r0 * math.cos(chi)) / (2 * r0 * math.cos(chi))
    g_ref = C_LIGHT / (4 * m * r0 * math.cos(chi))
    g_err = abs(stats.gamma_p - g_ref) / g_ref
    t_bundle = time.perf_counter() - t0

    res = trace_ray(CavityGeometry(1.0, m=m), 0.0, 1.2, max_bounces=100_000)
    drift = max(abs(b.sin_chi - math.sin(1.2)) for b in res.bounces)

    cfg = json.loads((ROOT / "configs" / "raysim_quadrupole.json").read_text())
    cfg["bundle"]["count"] = 2000
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "cfg.json"
        path.write_text(json.dumps(cfg))
        for k, threads in enumerate(("1", "1", "2")):
            out = Path(tmp) / f"run{k}"
            proc = subprocess.run(
                [sys.executable, "-m", "dyntunnel", "--config", str(path), "--out", str(out), "--seed", "7", "--threads", threads],
                capture_output=True,
            )
            assert proc.returncode == 0, proc.stderr
            blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    identical = blobs[0] == blobs[1] == blobs[2]
    ok = L_err < 1e-12 and g_err < 1e-12 and not res.escaped and len(res.bounces) == 100_000 and drift < 1e-12 and identical
    detail = (
        f"1e5-ray circle bundle in {t_bundle:.1f} s: L_p error {L_err:.1e}, gamma_p error {g_err:.1e}; "
        f"sin chi drift over 1e5 bounces {drift:.1e}; repeated runs byte-identical: {identical}; "
        f"all checks {time.perf_counter() - t0:.1f} s"
    )
    assert record(10, "ray escape", ok, detail, t_bundle, 60.0), detail


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
