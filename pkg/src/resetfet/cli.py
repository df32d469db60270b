"""Command-line front end.

``resetfet <quantity> [flags]`` evaluates a closed form on a grid and writes
CSV; ``resetfet mc`` runs the simulator; ``resetfet sweep --figure N``
writes the series behind a figure; ``resetfet verify <suite>`` runs an
invariant suite and prints a JSON report.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import analytic, laplace
from . import montecarlo as mc
from . import verification
from .core import ResettingParams
from .errors import DomainError, HorizonExceeded, NumericalError, VerificationFailed

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


# --------------------------------------------------------------- formatting


def fmt(v) -> str:
    return f"{float(v):.11e}"


def write_csv(path, header: dict, columns: list, rows) -> str:
    """CSV text with a ``# key=value`` parameter line and a column header."""
    lines = ["# " + " ".join(f"{k}={v}" for k, v in header.items()), ",".join(columns)]
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) else str(v)
                              for v in row))
    text = "\n".join(lines) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
    return text


def parse_grid(spec: str) -> np.ndarray:
    """``start:stop:count`` (inclusive) or a comma-separated list."""
    try:
        if ":" in spec:
            start, stop, count = spec.split(":")
            count = int(count)
            if count < 1:
                raise ValueError
            return np.linspace(float(start), float(stop), count)
        return np.array([float(v) for v in spec.split(",")])
    except ValueError:
        raise ConfigError(f"bad grid {spec!r}; expected start:stop:count or v1,v2,...") from None


# ------------------------------------------------------------------ config

PARAM_KEYS = ("a", "b", "mu", "r", "xr")
VALUE_KEYS = ("x", "z", "lam", "t")
GRID_KEYS = tuple(f"{k}_grid" for k in VALUE_KEYS)
OTHER_KEYS = ("order", "method", "output", "format", "n_paths", "seed", "dt", "no_bridge", "threads", "figure",
              "output_dir", "n", "t_cap_factor")
CONFIG_KEYS = set(PARAM_KEYS + VALUE_KEYS + GRID_KEYS + OTHER_KEYS)
DEFAULTS = {"a": 0.0, "b": 1.0, "mu": 0.0, "r": 0.0, "xr": None, "method": "contour", "format": "csv",
            "n_paths": 100_000, "seed": 0, "dt": None, "no_bridge": False, "order": 3, "output_dir": ".",
            "n": None, "t_cap_factor": 1e4}


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return data


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
    return cfg


def make_params(cfg: dict) -> ResettingParams:
    a, b = float(cfg["a"]), float(cfg["b"])
    xr = cfg.get("xr")
    xr = 0.5 * (a + b) if xr is None else float(xr)
    return ResettingParams(float(cfg["mu"]), float(cfg["r"]), xr, a=a, b=b)


def grid_of(cfg: dict, name: str, required=True):
    g = cfg.get(f"{name}_grid")
    if g is not None:
        return parse_grid(str(g)) if isinstance(g, str) else np.asarray(g, dtype=float)
    v = cfg.get(name)
    if v is not None:
        return np.atleast_1d(np.asarray(v, dtype=float))
    if required:
        raise ConfigError(f"--{name} or --{name.replace('_', '-')}-grid is required")
    return None


def header_of(command: str, p: ResettingParams, **extra) -> dict:
    h = {"command": command, "a": p.a, "b": p.b, "mu": p.mu, "r": p.r, "xr": p.x_reset}
    h.update(extra)
    return h


def sim_config(cfg: dict) -> mc.SimConfig:
    return mc.SimConfig(dt=cfg["dt"], n_paths=int(cfg["n_paths"]), seed=int(cfg["seed"]),
                        bridge_correction=not cfg["no_bridge"], t_cap_factor=float(cfg["t_cap_factor"]))


# --------------------------------------------------------------- quantities

# name -> (function(params, cfg, value_on_grid), grid variable, extra required scalars)
def _x_only(fn):
    return lambda p, c, x: fn(p, x)


QUANTITIES = {
    "exit-prob": (_x_only(analytic.exit_prob_left), "x", ()),
    "exit-prob-right": (_x_only(analytic.exit_prob_right), "x", ()),
    "fet-mean": (_x_only(analytic.fet_mean), "x", ()),
    "fet-second-moment": (_x_only(analytic.fet_second_moment), "x", ()),
    "fet-moment": (lambda p, c, x: analytic.fet_moment_numeric(p, x, int(c["order"])), "x", ()),
    "fea-mean": (_x_only(analytic.fea_mean_undrifted), "x", ()),
    "fea-second-moment": (_x_only(analytic.fea_second_moment_undrifted), "x", ()),
    "tau-area": (_x_only(analytic.joint_moment_tau_area_undrifted), "x", ()),
    "cov-tau-area": (_x_only(analytic.cov_tau_area_undrifted), "x", ()),
    "fet-lt": (lambda p, c, lam: analytic.fet_lt(p, float(c["x"]), lam), "lam", ("x",)),
    "survival-lt": (lambda p, c, lam: analytic.survival_lt(p, float(c["x"]), lam), "lam", ("x",)),
    "fet-cdf": (lambda p, c, t: laplace.fet_cdf_time_domain(p, float(c["x"]), t, c["method"]), "t", ("x",)),
    "fet-density": (lambda p, c, t: laplace.fet_density_time_domain(p, float(c["x"]), t, c["method"]), "t", ("x",)),
    "max-joint-cdf": (lambda p, c, z: analytic.max_exit_joint_cdf(p, float(c["x"]), z), "z", ("x",)),
    "max-cdf": (lambda p, c, z: analytic.max_conditional_cdf(p, float(c["x"]), z), "z", ("x",)),
    "max-density": (lambda p, c, z: analytic.max_conditional_density_at_reset(p, z), "z", ()),
    "min-joint-survival": (lambda p, c, z: analytic.min_exit_joint_survival(p, float(c["x"]), z), "z", ("x",)),
    "min-survival": (lambda p, c, z: analytic.min_conditional_survival(p, float(c["x"]), z), "z", ("x",)),
}


def _evaluate(fn, p, cfg, grid):
    """Vectorised call, falling back to a loop for scalar-only functions."""
    try:
        vals = np.asarray(fn(p, cfg, grid), dtype=float)
    except (DomainError, NumericalError):
        raise
    except (TypeError, ValueError):
        vals = None
    if vals is None or vals.shape != grid.shape:
        vals = np.array([float(fn(p, cfg, float(v))) for v in grid])
    return vals


def cmd_compute(name: str, cfg: dict) -> int:
    fn, var, needs = QUANTITIES[name]
    for key in needs:
        if cfg.get(key) is None:
            raise ConfigError(f"{name} requires --{key}")
    p = make_params(cfg)
    grid = grid_of(cfg, var)
    vals = _evaluate(fn, p, cfg, grid)
    extra = {k: cfg[k] for k in needs}
    if name == "fet-moment":
        extra["order"] = int(cfg["order"])
    if cfg["format"] == "json":
        out = {"header": header_of(name, p, **extra), "rows": [{var: float(g), "value": float(v)}
                                                                for g, v in zip(grid, vals)]}
        _emit_json(out, cfg.get("output"))
    else:
        write_csv(cfg.get("output"), header_of(name, p, **extra), [var, "value"], zip(grid, vals))
    return EXIT_OK


def cmd_mc(cfg: dict) -> int:
    p = make_params(cfg)
    if cfg.get("x") is None:
        raise ConfigError("mc requires --x")
    x = float(cfg["x"])
    sc = sim_config(cfg)
    est = mc.estimate_statistics(p, x, sc)
    names = ["pi_left", "pi_right", "tau_mean", "tau_second", "area_mean", "area_second", "tau_area",
             "cov_tau_area", "reset_mean"]
    rows = []
    for nm in names:
        e = getattr(est, nm)
        rows.append((nm, e.mean, e.std_err, e.n))
    hdr = header_of("mc", p, x=x, n_paths=sc.n_paths, seed=sc.seed, dt=est.meta["dt"],
                    bridge=sc.bridge_correction, horizon_count=est.horizon_count)
    if cfg["format"] == "json":
        _emit_json({"header": hdr, "rows": [dict(zip(("statistic", "value", "std_err", "n"), r)) for r in rows]},
                   cfg.get("output"))
    else:
        write_csv(cfg.get("output"), hdr, ["statistic", "value", "std_err", "n"], rows)
    return EXIT_OK


def _emit_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ------------------------------------------------------------------ sweeps

_CURVES = {
    1: [dict(mu=1.0, r=1.0, xr=0.25), dict(mu=1.0, r=0.0, xr=0.25), dict(mu=0.0, r=0.0, xr=0.25),
        dict(mu=1.0, r=5.0, xr=0.25), dict(mu=1.0, r=50.0, xr=0.25)],
    2: [dict(mu=1.0, r=0.0, xr=0.25), dict(mu=1.0, r=1.0, xr=0.25), dict(mu=1.0, r=5.0, xr=0.25),
        dict(mu=0.0, r=0.0, xr=0.25)],
    6: [dict(mu=0.0, r=0.0, xr=0.125), dict(mu=0.0, r=0.5, xr=0.125), dict(mu=0.0, r=5.0, xr=0.125)],
}
_CURVES[3] = _CURVES[2]
_SINGLE = {
    4: dict(mu=1.0, r=1.0, xr=0.25, x=0.3),
    5: dict(mu=1.0, r=1.0, xr=0.3, x=0.3),
    7: dict(mu=0.0, r=0.5),
    8: dict(mu=1.0, r=1.0, xr=0.25, x=0.3),
}
FIGURES = {
    1: "exit probability pi_0(x)",
    2: "mean exit time E[tau(x)]",
    3: "second moment E[tau(x)^2]",
    4: "conditional law P[max <= z | exit at 0], x = 0.3",
    5: "conditional density of the maximum, x = x_R = 0.3",
    6: "exit-area moments E[A(x)] and E[A(x)^2]",
    7: "E[tau A] and Cov(tau, A) against the reset point x = x_R",
    8: "joint survival P[min > z, exit at b], x = 0.3",
}


def _override(base: dict, flags: dict) -> dict:
    """Figure defaults (positions given for b = 1, scaled with b) overridden by explicit flags."""
    out = dict(base)
    out["b"] = float(flags["b"]) if flags.get("b") is not None else 1.0
    for key in ("xr", "x"):
        if key in out:
            out[key] *= out["b"]
    for key in ("mu", "r", "xr", "x"):
        if flags.get(key) is not None:
            out[key] = float(flags[key])
    return out


def _label(c: dict) -> str:
    return f"mu={c['mu']:g};r={c['r']:g};xr={c['xr']:g}"


def cmd_sweep(cfg: dict, flags: dict) -> int:
    fig = cfg.get("figure")
    if fig not in FIGURES:
        raise ConfigError(f"--figure must be one of {sorted(FIGURES)}")
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    def pts(default):
        g = cfg.get("x_grid") or cfg.get("z_grid")
        return parse_grid(str(g)) if g is not None else default

    if fig in (1, 2, 3, 6):
        curves = [_override(c, flags) for c in _CURVES[fig]]
        b = curves[0]["b"]
        xs = pts(np.linspace(0.0, b, 201))

        def mk(c):
            return ResettingParams(c["mu"], c["r"], c["xr"], b=c["b"])

        if fig in (1, 2, 3):
            f = {1: analytic.exit_prob_left, 2: analytic.fet_mean, 3: analytic.fet_second_moment}[fig]
            cols = [np.asarray(f(mk(c), xs), dtype=float) for c in curves]
            path = outdir / f"figure{fig}.csv"
            write_csv(path, {"figure": fig, "b": b, "quantity": ("pi_left", "tau_mean", "tau_second")[fig - 1]},
                      ["x"] + [_label(c) for c in curves], zip(xs, *cols))
            written.append(path)
        else:
            for part, f in (("area_mean", analytic.fea_mean_undrifted),
                            ("area_second", analytic.fea_second_moment_undrifted)):
                cols = [np.asarray(f(mk(c), xs), dtype=float) for c in curves]
                path = outdir / f"figure6_{part}.csv"
                write_csv(path, {"figure": 6, "b": b, "quantity": part}, ["x"] + [_label(c) for c in curves],
                          zip(xs, *cols))
                written.append(path)
    else:
        c = _override(_SINGLE[fig], flags)
        b = c["b"]
        if fig == 7:
            xr = pts(np.linspace(b / 100, b - b / 100, 99))
            tau_area = [float(analytic.joint_moment_tau_area_undrifted(ResettingParams(0.0, c["r"], v, b=b), v))
                        for v in xr]
            cov = [float(analytic.cov_tau_area_undrifted(ResettingParams(0.0, c["r"], v, b=b), v)) for v in xr]
            hdr = {"figure": 7, "b": b, "mu": 0.0, "r": c["r"]}
            for part, vals in (("tau_area", tau_area), ("cov_tau_area", cov)):
                path = outdir / f"figure7_{part}.csv"
                write_csv(path, dict(hdr, quantity=part), ["xr", "value"], zip(xr, vals))
                written.append(path)
        else:
            p = ResettingParams(c["mu"], c["r"], c["xr"], b=b)
            x = c["x"]
            hdr = {"figure": fig, "b": b, "mu": p.mu, "r": p.r, "xr": p.x_reset, "x": x}
            if fig == 4:
                zs = pts(np.linspace(x, b, 141))
                joint = np.array([float(analytic.max_exit_joint_cdf(p, x, z)) for z in zs])
                cond = np.array([float(analytic.max_conditional_cdf(p, x, z)) for z in zs])
                rows, cols = zip(zs, cond, joint), ["z", "conditional_cdf", "joint_cdf"]
            elif fig == 5:
                zs = pts(np.linspace(x, b, 141))
                dens = np.array([float(analytic.max_conditional_density_at_reset(p, z)) for z in zs])
                rows, cols = zip(zs, dens), ["z", "conditional_density"]
            else:
                zs = pts(np.linspace(0.0, x, 121))
                joint = np.array([float(analytic.min_exit_joint_survival(p, x, z)) for z in zs])
                cond = np.array([float(analytic.min_conditional_survival(p, x, z)) for z in zs])
                rows, cols = zip(zs, joint, cond), ["z", "joint_survival", "conditional_survival"]
            path = outdir / f"figure{fig}.csv"
            write_csv(path, hdr, cols, rows)
            written.append(path)
    for path in written:
        print(path)
    return EXIT_OK


# ------------------------------------------------------------------ verify


def cmd_verify(suite: str, cfg: dict) -> int:
    fn = verification.SUITES[suite]
    if suite == "oracle-mc":
        n = int(cfg["n"]) if cfg.get("n") is not None else 100_000
        report = fn(n=n, seed=int(cfg["seed"]))
    elif suite == "oracle-bvp":
        report = fn(n=int(cfg["n"]) if cfg.get("n") is not None else 2000)
    else:
        report = fn()
    _emit_json(report.as_dict(), cfg.get("output"))
    return EXIT_OK if report.passed else EXIT_VERIFY


# -------------------------------------------------------------------- main


def _add_params(p: argparse.ArgumentParser):
    g = p.add_argument_group("process")
    g.add_argument("--a", type=float, help="left end of the interval (default 0)")
    g.add_argument("--b", type=float, help="right end of the interval (default 1)")
    g.add_argument("--mu", type=float, help="drift (default 0)")
    g.add_argument("--r", type=float, help="reset rate (default 0)")
    g.add_argument("--xr", type=float, help="reset position (default midpoint)")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with default settings; flags override it")
    p.add_argument("--output", "-o", help="output file (default stdout)")
    p.add_argument("--threads", type=int, help="Monte Carlo worker threads (fallback RESET_FET_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resetfet", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in QUANTITIES:
        sp = sub.add_parser(name, help=f"evaluate {name} on a grid")
        _add_params(sp)
        _add_common(sp)
        for var in VALUE_KEYS:
            sp.add_argument(f"--{var}", type=float)
            sp.add_argument(f"--{var}-grid", dest=f"{var}_grid", help="start:stop:count or comma list")
        sp.add_argument("--order", type=int, help="moment order for fet-moment")
        sp.add_argument("--method", choices=("contour", "real"), help="Laplace inversion method")
        sp.add_argument("--format", choices=("csv", "json"))
    sp = sub.add_parser("mc", help="Monte Carlo estimates from a fixed start")
    _add_params(sp)
    _add_common(sp)
    sp.add_argument("--x", type=float)
    sp.add_argument("--n-paths", dest="n_paths", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--t-cap-factor", dest="t_cap_factor", type=float)
    sp.add_argument("--no-bridge", dest="no_bridge", action="store_true", default=None)
    sp.add_argument("--format", choices=("csv", "json"))

    sp = sub.add_parser("sweep", help="write the data series behind a figure")
    _add_params(sp)
    _add_common(sp)
    sp.add_argument("--figure", type=int, required=True, choices=sorted(FIGURES),
                    help="; ".join(f"{k}: {v}" for k, v in FIGURES.items()))
    sp.add_argument("--x", type=float, help="start position for figures 4, 5 and 8")
    sp.add_argument("--x-grid", dest="x_grid")
    sp.add_argument("--z-grid", dest="z_grid")
    sp.add_argument("--output-dir", dest="output_dir", help="directory for the CSV files (default .)")

    sp = sub.add_parser("verify", help="run an invariant suite, print a JSON report")
    sp.add_argument("suite", choices=sorted(verification.SUITES))
    _add_common(sp)
    sp.add_argument("--n", type=int, help="paths (oracle-mc) or grid intervals (oracle-bvp)")
    sp.add_argument("--seed", type=int)
    return parser


def main(argv=None) -> int:
    # numba falls back from an outdated TBB on its own; the notice is noise on a terminal
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        threads = getattr(args, "threads", None)
        if threads is not None or os.environ.get("RESET_FET_THREADS"):
            mc.set_threads(threads)
        if args.command == "verify":
            return cmd_verify(args.suite, cfg)
        if args.command == "sweep":
            # figure overrides come from explicit flags only
            flags = {k: getattr(args, k, None) for k in ("b", "mu", "r", "xr", "x")}
            return cmd_sweep(cfg, flags)
        if args.command == "mc":
            return cmd_mc(cfg)
        return cmd_compute(args.command, cfg)
    except (ConfigError, DomainError) as exc:
        print(f"resetfet {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationFailed as exc:
        print(f"resetfet {args.command}: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (NumericalError, HorizonExceeded) as exc:
        print(f"resetfet {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
