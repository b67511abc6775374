"""
Command-line entry point.

    dyntunnel --config run.json --out results/ [--seed N] [--format csv|json] [--threads N]

The config is a JSON object whose "command" key selects one of
steady, scan, invert, raysim, transient, series, spectrum.
Exit codes: 0 success, 2 configuration error, 3 computation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import core, inverse, rays, series, spectrum, transient
from .errors import AmbiguousRoot, DynTunnelError, InvalidOverlap, NoRoot

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 2, 3


class ConfigError(Exception):
    pass


# -- schema -----------------------------------------------------------------

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_cplx = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]}
_pm = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 1, "maxItems": 2}]}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_ENSEMBLE = _obj(
    {
        "gamma_r": _pos,
        "omega_r": _num,
        "modes": {
            "type": "array",
            "minItems": 1,
            "items": _obj({"gamma_n": _pos, "g_n": _num, "a_n": _cplx}, ["gamma_n", "g_n"]),
        },
    },
    ["gamma_r", "modes"],
)
_DRIVE = _obj({"E0": _cplx, "delta": _num, "gamma_L": _nonneg})
_COMMON = {"command": {"type": "string"}, "seed": {"type": "integer", "minimum": 0}}

SCHEMAS = {
    "steady": _obj({**_COMMON, "ensemble": _ENSEMBLE, "drive": _DRIVE}, ["command", "ensemble"]),
    "scan": _obj(
        {
            **_COMMON,
            "ensemble": _ENSEMBLE,
            "drive": _DRIVE,
            "delta_grid": {
                "oneOf": [
                    {"type": "array", "items": _num, "minItems": 1},
                    _obj({"start": _num, "stop": _num, "step": _pos}, ["start", "stop", "step"]),
                ]
            },
            "beta_p": _num,
            "beta_r": _num,
        },
        ["command", "ensemble", "delta_grid"],
    ),
    "invert": _obj(
        {
            **_COMMON,
            "n_samples": {"type": "integer", "minimum": 1000},
            "gamma_p": _pm,
            "rows": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "oneOf": [
                        _obj(
                            {
                                "mode": {"type": ["string", "integer"]},
                                "epsilon0": _pm,
                                "gamma_r_prime": _pm,
                                "beta_r": _pm,
                                "beta_p": _pm,
                                "gamma_p": _pm,
                                "gamma_L": _nonneg,
                            },
                            ["epsilon0", "gamma_r_prime", "beta_r", "beta_p"],
                        ),
                        _obj(
                            {"mode": {"type": ["string", "integer"]}, "gamma_r": _pm, "G": _pm, "gamma_p": _pm},
                            ["gamma_r", "G"],
                        ),
                    ]
                },
            },
        },
        ["command", "rows"],
    ),
    "raysim": _obj(
        {
            **_COMMON,
            "geometry": _obj(
                {
                    "r0": _num,
                    "m": _num,
                    "deformation": {
                        "type": "array",
                        "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                    },
                },
                ["r0"],
            ),
            "bundle": _obj(
                {
                    "theta0": _num,
                    "chi0": _num,
                    "sigma_theta": _nonneg,
                    "sigma_chi": _nonneg,
                    "count": {"type": "integer", "minimum": 1},
                },
                ["theta0", "chi0"],
            ),
            "max_bounces": {"type": "integer", "minimum": 1},
            "trace_limit": {"type": "integer", "minimum": 0},
        },
        ["command", "geometry", "bundle"],
    ),
    "transient": _obj(
        {
            **_COMMON,
            "ensemble": _ENSEMBLE,
            "drive": _DRIVE,
            "t_end": _pos,
            "samples": {"type": "integer", "minimum": 2},
            "initial": {"type": "array", "items": _cplx},
        },
        ["command", "ensemble", "t_end"],
    ),
    "series": _obj(
        {**_COMMON, "ensemble": _ENSEMBLE, "drive": _DRIVE, "k_max": {"type": "integer", "minimum": 1}},
        ["command", "ensemble"],
    ),
    "spectrum": _obj({**_COMMON, "ensemble": _ENSEMBLE}, ["command", "ensemble"]),
}


def validate(cfg) -> None:
    if not isinstance(cfg, dict) or "command" not in cfg:
        raise ConfigError("config must be a JSON object with a 'command' key")
    schema = SCHEMAS.get(cfg["command"])
    if schema is None:
        raise ConfigError(f"command: unknown command {cfg['command']!r}; expected one of {sorted(SCHEMAS)}")
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {err.message}")


# -- serialization ----------------------------------------------------------


def fmt(x) -> str:
    """Round-trip-safe float text with 17 significant digits."""
    x = float(x)
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj, indent: int = 0) -> str:
    obj = _plain(obj)
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(_plain(v), (dict, list, tuple, complex)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cell(v) -> str:
    v = _plain(v)
    if isinstance(v, float):
        return fmt(v)
    return "" if v is None else str(v)


def write_table(path_stem: Path, columns: list[str], rows: list[list], fmt_: str) -> Path:
    if fmt_ == "json":
        path = path_stem.with_suffix(".json")
        path.write_text(dumps([dict(zip(columns, r)) for r in rows]) + "\n")
    else:
        path = path_stem.with_suffix(".csv")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(v) for v in r])
        path.write_text(buf.getvalue())
    return path


def write_json(path: Path, obj) -> Path:
    path.write_text(dumps(obj) + "\n")
    return path


# -- config -> objects ------------------------------------------------------


def _complex(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, list) else v


def _pmq(v) -> inverse.Quantity:
    if isinstance(v, list):
        return inverse.Quantity(float(v[0]), float(v[1]) if len(v) > 1 else 0.0)
    return inverse.Quantity(float(v))


def build_ensemble(c: dict) -> core.ModeEnsemble:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        modes = tuple(core.ChaoticMode(m["gamma_n"], m["g_n"], _complex(m.get("a_n", 1.0))) for m in c["modes"])
    return core.ModeEnsemble(c["gamma_r"], modes, c.get("omega_r", 0.0))


def build_drive(c: dict | None) -> core.PumpDrive:
    c = c or {}
    return core.PumpDrive(_complex(c.get("E0", 1.0)), c.get("delta", 0.0), c.get("gamma_L", 0.0))


def _params_dict(p: core.DerivedParams) -> dict:
    return {
        "E_p0": p.E_p0,
        "I_p0": p.I_p0,
        "g_bar": p.g_bar,
        "gamma_p": p.gamma_p,
        "G": p.G,
        "gamma_r": p.gamma_r,
        "gamma_r_prime": p.gamma_r_prime,
        "alpha": p.alpha,
        "alpha_prime": p.alpha_prime,
    }


def _state_dict(s: core.SteadyState) -> dict:
    d = {"mode": s.mode, "E_r": s.E_r, "E_n": [[z.real, z.imag] for z in s.E_n], "E_p": s.E_p, "I_r": s.I_r, "I_p": s.I_p}
    if s.bracket is not None:
        d["bracket"] = s.bracket
    return d


# -- commands ---------------------------------------------------------------


def cmd_steady(cfg: dict, out: Path, fmt_: str, seed: int, threads: int) -> list[Path]:
    ens, drive = build_ensemble(cfg["ensemble"]), build_drive(cfg.get("drive"))
    params = core.derive_params(ens, drive)
    states = [
        core.steady_state_exact(ens, drive),
        core.steady_state_approx(ens, drive),
        core.steady_state_linear_solve(ens, drive),
    ]
    paths = [write_json(out / "steady.json", {"params": _params_dict(params), "states": [_state_dict(s) for s in states]})]
    if fmt_ == "csv":
        rows = []
        for s in states:
            for name, z in zip(["r"] + [str(i + 1) for i in range(ens.N)], s.vector):
                rows.append([s.mode, name, z.real, z.imag, abs(z) ** 2])
            rows.append([s.mode, "p", s.E_p.real, s.E_p.imag, s.I_p])
        paths.append(write_table(out / "steady", ["solver", "component", "re", "im", "intensity"], rows, "csv"))
    return paths


def _grid(spec) -> np.ndarray:
    if isinstance(spec, list):
        grid = np.asarray(spec, dtype=float)
    else:
        n = int(math.floor((spec["stop"] - spec["start"]) / spec["step"] + 1e-9)) + 1
        if n < 1:
            raise ConfigError("delta_grid: stop must not be below start")
        grid = spec["start"] + spec["step"] * np.arange(n)
    if len(grid) > 1 and not (np.all(np.diff(grid) > 0) or np.all(np.diff(grid) < 0)):
        raise ConfigError("delta_grid: grid must be strictly monotone")
    return grid


def cmd_scan(cfg: dict, out: Path, fmt_: str, seed: int, threads: int) -> list[Path]:
    ens, drive = build_ensemble(cfg["ensemble"]), build_drive(cfg.get("drive"))
    grid = _grid(cfg["delta_grid"])
    beta_p, beta_r = cfg.get("beta_p", 1.0), cfg.get("beta_r", 1.0)
    if not beta_p > 0:
        raise ConfigError("beta_p: must be positive")
    params = core.derive_params(ens, drive)
    I_r, I_p = core.intensities(params, grid)
    L = core.lineshape_convolved(params, grid, drive.gamma_L / ens.gamma_r)
    eps = core.efficiency(params, grid, beta_p, beta_r, drive.gamma_L)
    rows = [list(r) for r in zip(grid, I_r, I_p, L, eps)]
    return [write_table(out / "scan", ["delta", "I_r", "I_p", "lineshape", "efficiency"], rows, fmt_)]


_REPORT_COLUMNS = ["mode", "status", "gamma_r", "gamma_r_sigma", "G", "G_sigma", "g_bar", "g_bar_sigma",
                   "alpha", "alpha_sigma", "alpha_prime", "alpha_prime_sigma", "gamma_rG", "gamma_rG_sigma",
                   "gamma_r_prime", "rejection_fraction", "alternatives"]  # fmt: skip


def cmd_invert(cfg: dict, out: Path, fmt_: str, seed: int, threads: int) -> list[Path]:
    n_samples = cfg.get("n_samples", 4000)
    default_gp = cfg.get("gamma_p")
    rows, pairs = [], []
    for i, row in enumerate(cfg["rows"]):
        label = str(row.get("mode", i + 1))
        gp = row.get("gamma_p", default_gp)
        try:
            if gp is None:
                raise ConfigError(f"rows.{i}.gamma_p: required (per row or top level)")
            if "epsilon0" in row:
                meas = inverse.Measurement(
                    _pmq(row["epsilon0"]),
                    _pmq(row["gamma_r_prime"]),
                    _pmq(row["beta_r"]),
                    _pmq(row["beta_p"]),
                    _pmq(gp),
                    row.get("gamma_L", 0.0),
                    label,
                )
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", AmbiguousRoot)
                    res = inverse.propagate_uncertainty(meas, n_samples, seed + i)
                status = "ambiguous" if res.ambiguous else "ok"
            else:
                res = inverse.propagate_given(_pmq(row["gamma_r"]), _pmq(row["G"]), _pmq(gp), n_samples, seed + i, label)
                status = "ok"
        except InvalidOverlap:
            rows.append([label, "InvalidOverlap"] + [None] * (len(_REPORT_COLUMNS) - 2))
            continue
        except NoRoot:
            rows.append([label, "NoRoot"] + [None] * (len(_REPORT_COLUMNS) - 2))
            continue
        vals = []
        for c in ("gamma_r", "G", "g_bar", "alpha", "alpha_prime", "gamma_rG"):
            q = getattr(res, c)
            vals += [q.value, q.sigma]
        alts = " ".join(fmt(a) for a in res.alternatives)
        rows.append([label, status, *vals, res.gamma_r_prime, res.rejection_fraction, alts])
        if res.G.value > 0:
            pairs.append((res.g_bar.value, res.gamma_rG.value))
    paths = [write_table(out / "report", _REPORT_COLUMNS, rows, fmt_)]
    summary: dict = {"n_rows": len(rows), "n_failed": sum(1 for r in rows if r[1] not in ("ok", "ambiguous"))}
    if len(pairs) >= 2:
        cons = inverse.gamma_p_consistency(pairs)
        summary.update({"gamma_p_values": cons.values, "gamma_p_mean": cons.mean, "gamma_p_spread": cons.spread})
    paths.append(write_json(out / "consistency.json", summary))
    if summary["n_failed"] == len(rows):
        raise NoRoot("every measurement row failed")
    return paths


def cmd_raysim(cfg: dict, out: Path, fmt_: str, seed: int, threads: int) -> list[Path]:
    g = cfg["geometry"]
    geom = rays.CavityGeometry(g["r0"], tuple((int(k), eta) for k, eta in g.get("deformation", [])), g.get("m", 1.361))
    b = cfg["bundle"]
    bundle = rays.RayBundle(
        b["theta0"], b["chi0"], b.get("sigma_theta", 0.0), b.get("sigma_chi", 0.0), b.get("count", 1000), seed
    )
    stats = rays.bundle_stats(
        geom, bundle, cfg.get("max_bounces", 2000), threads=threads, trace_limit=cfg.get("trace_limit", 20_000)
    )
    summary = {
        "L_p": stats.L_p,
        "L_p_sem": stats.sem,
        "gamma_p": stats.gamma_p,
        "m": stats.m,
        "r0": geom.r0,
        "n_escaped": stats.n_escaped,
        "n_confined": stats.n_confined,
        "seed": seed,
    }
    lengths, surv = stats.survival_curve
    return [
        write_json(out / "escape_stats.json", summary),
        write_table(out / "birkhoff", ["s", "sin_chi"], [list(r) for r in stats.birkhoff_trace], fmt_),
        write_table(out / "survival", ["path_length", "fraction_remaining"], [list(r) for r in zip(lengths, surv)], fmt_),
    ]


def cmd_transient(cfg: dict, out: Path, fmt_: str, seed: int, threads: int) -> list[Path]:
    ens, drive = build_ensemble(cfg["ensemble"]), build_drive(cfg.get("drive"))
    t_end = cfg["t_end"]
    initial = [_complex(v) for v in cfg["initial"]] if "initial" in cfg else None
    t_eval = np.linspace(0.0, t_end, cfg.get("samples", 201))
    traj = transient.integrate_envelopes(ens, drive, t_end, initial=initial, t_eval=t_eval)
    cols = ["t", "E_r_re", "E_r_im"]
    for i in range(ens.N):
        cols += [f"E_{i + 1}_re", f"E_{i + 1}_im"]
    cols += ["I_r", "I_c_total", "pump_work"]
    rows = []
    for p in traj:
        r = [p.t, p.E_r.real, p.E_r.imag]
        for z in p.E_n:
            r += [z.real, z.imag]
        rows.append(r + [p.I_r, p.I_c_total, p.pump_work])
    return [write_table(out / "trajectory", cols, rows, fmt_)]


def cmd_series(cfg: dict, out: Path, fmt_: str, seed: int, threads: int) -> list[Path]:
    ens, drive = build_ensemble(cfg["ensemble"]), build_drive(cfg.get("drive"))
    k_max = cfg.get("k_max", 40)
    rounds = series.interference_rounds(ens, drive, k_max)
    partial = rounds.partial_sums()
    cols = ["k", "E_r_k_re", "E_r_k_im", "partial_re", "partial_im"]
    for i in range(ens.N):
        cols += [f"E_{i + 1}_k_re", f"E_{i + 1}_k_im"]
    rows = []
    for k in range(k_max):
        r = [k + 1, rounds.E_r_rounds[k].real, rounds.E_r_rounds[k].imag, partial[k].real, partial[k].imag]
        for z in rounds.E_n_rounds[k]:
            r += [z.real, z.imag]
        rows.append(r)
    rep = series.series_resummation_check(ens, drive, k_max)
    summary = {
        "G": rep.G,
        "k_max": rep.k_max,
        "E_r_series": rep.E_r_series,
        "E_r_exact": rep.E_r_exact,
        "E_r_error": rep.E_r_error,
        "E_n_error": rep.E_n_error,
        "remainder_bound": rep.remainder_bound,
    }
    return [write_table(out / "rounds", cols, rows, fmt_), write_json(out / "resummation.json", summary)]


def cmd_spectrum(cfg: dict, out: Path, fmt_: str, seed: int, threads: int) -> list[Path]:
    ens = build_ensemble(cfg["ensemble"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = spectrum.secular_roots(ens)
    rows = []
    for lam_s, lam_d in zip(res.lambda_exact, res.lambda_dense):
        rows.append([np.real(lam_s), np.imag(lam_s), np.real(lam_d), np.imag(lam_d)])
    paths = [write_table(out / "spectrum", ["secular_re", "secular_im", "dense_re", "dense_im"], rows, fmt_)]
    paths.append(
        write_json(
            out / "spectrum_summary.json",
            {
                "method": res.method,
                "lambda_regular_exact": res.lambda_regular_exact,
                "lambda_regular_firstorder": res.lambda_regular_firstorder,
                "max_disagreement": res.max_disagreement,
                "psi_r_prime": [complex(z) for z in res.psi_r_prime],
            },
        )
    )
    return paths


COMMANDS = {
    "steady": cmd_steady,
    "scan": cmd_scan,
    "invert": cmd_invert,
    "raysim": cmd_raysim,
    "transient": cmd_transient,
    "series": cmd_series,
    "spectrum": cmd_spectrum,
}


def _seed(arg, cfg: dict) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("CAVITY_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"CAVITY_SEED: not an integer: {env!r}") from exc
    return int(cfg.get("seed", 0))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="dyntunnel", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="RNG seed (falls back to $CAVITY_SEED)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)

    try:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: {exc}") from exc
        validate(cfg)
        seed = _seed(args.seed, cfg)
        if seed < 0 or seed >= 2**64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("threads: must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        paths = COMMANDS[cfg["command"]](cfg, out, args.fmt, seed, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DynTunnelError as exc:
        # ValueError subclasses (bad geometry, zero pump) are configuration problems
        print(f"{'config' if isinstance(exc, ValueError) else 'computation'} error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, ValueError) else EXIT_COMPUTE
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
