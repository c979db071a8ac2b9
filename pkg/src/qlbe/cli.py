"""Command-line front end.

Usage: ``qlbe <command> [--config FILE] [--set key=value ...] [--seed N]
[--workers N] [--out DIR]`` with commands ``coefficients``, ``relax``, ``fp``,
``qlbe`` and ``rates``.  Every run writes ``config.txt`` (the fully resolved
configuration, re-usable with ``--config``) and ``summary.json``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .core import PhysicalParams, derive_scales
from .diffusive import (
    GaussianMoments,
    WignerField,
    coefficients,
    eta_by_quadrature,
    evolve_classical_fp,
    evolve_quantum_fp,
    gaussian_moment_oracle,
    minimality_ratio,
)
from .errors import (
    ConfigurationError,
    DomainError,
    DomainTooSmallError,
    NumericAccuracyError,
    PreconditionError,
    SamplingError,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

#: Every accepted key with its default.  Time and phase-space knobs are
#: dimensionless (see README).
DEFAULTS = {
    "phys.m": 1.0,
    "phys.M": 100.0,
    "phys.T": 1.0,
    "phys.n_gas": 1.0,
    "phys.sigma_tot": 1.0,
    "phys.hbar": 1.0,
    "run.seed": 12345,
    "run.workers": 0,
    "mc.n_traj": 10000,
    "mc.block_size": 1024,
    "mc.initial": "delta",
    "mc.U0": [0.0, 0.0, 2.0],
    "mc.n_times": 64,
    "mc.t_min": 0.01,
    "mc.t_max": 10.0,
    "fp.mode": "both",
    "fp.nx": 128,
    "fp.np": 128,
    "fp.x_half_width": 12.0,
    "fp.p_half_width": 8.0,
    "fp.t_final": 2.0,
    "fp.dt": 0.01,
    "fp.snapshots": 4,
    "fp.free_streaming": True,
    "fp.p_scheme": "spectral",
    "fp.x0": 0.0,
    "fp.p0": 2.0,
    "fp.var_x": 1.0,
    "fp.var_p": 0.25,
    "qlbe.mode": "thermalize",
    "qlbe.N": 21,
    "qlbe.strict": True,
    "qlbe.t_final": 8.0,
    "qlbe.dt": 0.0,
    "qlbe.snapshots": 4,
    "qlbe.initial_mean": [1.5, 0.0, 0.0],
    "qlbe.initial_var": 1.0,
    "qlbe.K_ladder": [0.0, 1.0, 2.0, 5.0, 10.0, 20.0],
    "qlbe.K_direction": [1.0, 2.0, 3.0],
    "rates.n_points": 21,
    "rates.U_max": 5.0,
    "rates.Q_max": 5.0,
}

CHOICES = {
    "mc.initial": ("delta", "thermal"),
    "fp.mode": ("both", "quantum", "classical"),
    "fp.p_scheme": ("spectral", "finite-volume"),
    "qlbe.mode": ("thermalize", "ladder"),
}


def _coerce(key, value):
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, list):
            if not isinstance(value, list):
                raise TypeError
            out = [float(v) for v in value]
            if key.endswith(("U0", "initial_mean", "K_direction")) and len(out) != 3:
                raise TypeError
            return out
        value = str(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key}: invalid value {value!r} (expected {type(default).__name__})")
    if key in CHOICES and value not in CHOICES[key]:
        raise ConfigurationError(f"{key}: {value!r} not one of {CHOICES[key]}")
    return value


def resolve_config(file_values: dict, overrides: dict) -> dict:
    cfg = dict(DEFAULTS)
    for source in (file_values, overrides):
        for key, value in source.items():
            if key not in DEFAULTS:
                raise ConfigurationError(f"unknown config key {key!r}")
            cfg[key] = _coerce(key, value)
    return cfg


def _params(cfg) -> PhysicalParams:
    return PhysicalParams.from_mapping({k.split(".", 1)[1]: v for k, v in cfg.items() if k.startswith("phys.")})


def _workers(cfg) -> int:
    return cfg["run.workers"] or (os.cpu_count() or 1)


class _Run:
    """Collects output files, headline scalars and warnings of one command."""

    def __init__(self, out: Path, cfg: dict):
        self.out = out
        self.cfg = cfg
        self.results: dict = {}
        self.files: list = []
        self.warnings: list = []
        out.mkdir(parents=True, exist_ok=True)

    def csv(self, name, names, data):
        io.write_csv(self.out / name, names, data)
        self.files.append(name)

    def path(self, name) -> Path:
        self.files.append(name)
        return self.out / name

    def finish(self, command):
        (self.out / "config.txt").write_text(io.format_config(self.cfg))
        summary = {"command": command, "config": self.cfg, "results": _jsonable(self.results),
                   "warnings": self.warnings, "files": self.files}
        (self.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def cmd_coefficients(cfg, run: _Run):
    p = _params(cfg)
    c = coefficients(p)
    eta_q = eta_by_quadrature(p)
    ratio = minimality_ratio(c, p.hbar) if c.eta > 0 else float("nan")
    run.results.update(
        eta=c.eta, eta_quadrature=eta_q, D_pp=c.D_pp, D_xx=c.D_xx, minimality_ratio=ratio,
        mass_ratio=p.mass_ratio, diffusive_valid=p.mass_ratio <= 0.1,
    )
    for k in ("eta", "eta_quadrature", "D_pp", "D_xx", "minimality_ratio", "mass_ratio", "diffusive_valid"):
        print(f"{k} = {run.results[k]}")


def _relax_grid(eta, cfg):
    base = np.concatenate([[0.0], np.geomspace(cfg["mc.t_min"], cfg["mc.t_max"], cfg["mc.n_times"])])
    return np.unique(np.concatenate([base, [1.0, 2.0, 3.0]])) / eta


def cmd_relax(cfg, run: _Run):
    from .moments import MomentState, diffusive_solution, integrate_moments
    from .trajectories import MaxwellInitial, ensemble_moments

    p = _params(cfg)
    c = coefficients(p)
    if c.eta == 0:
        raise ConfigurationError("relax needs collisions (phys.n_gas > 0)")
    s = derive_scales(p)
    grid = _relax_grid(c.eta, cfg)
    if cfg["mc.initial"] == "delta":
        P0 = np.array(cfg["mc.U0"]) * p.M * s.v_beta
        spec, init = P0, MomentState(P0, float(P0 @ P0) / (2 * p.M))
    else:
        spec, init = MaxwellInitial(p), MomentState(np.zeros(3), 1.5 * p.T)
    stats = ensemble_moments(spec, cfg["mc.n_traj"], grid, p, cfg["run.seed"],
                             block_size=cfg["mc.block_size"], workers=_workers(cfg))
    closure = integrate_moments(init, grid, p, mode="exact-closure")
    diff = diffusive_solution(init, grid, p)
    run.csv("relax_mc.csv", *stats.table())
    run.csv("relax_closure.csv", *closure.table())
    run.csv("relax_diffusive.csv", *diff.table())
    checks = {}
    for k in (1.0, 2.0, 3.0):
        i = int(np.argmin(np.abs(grid * c.eta - k)))
        checks[f"t={k:g}/eta"] = {
            "mc_Pz": stats.mean_P[i, 2], "se_Pz": stats.se_P[i, 2],
            "exp_Pz": diff.P[i, 2], "closure_Pz": closure.P[i, 2],
            "z_exp": (stats.mean_P[i, 2] - diff.P[i, 2]) / stats.se_P[i, 2],
            "z_closure": (stats.mean_P[i, 2] - closure.P[i, 2]) / stats.se_P[i, 2],
        }
    run.results.update(eta=c.eta, n_events=stats.n_events, momentum_checks=checks,
                       final_E=stats.mean_E[-1], final_E_se=stats.se_E[-1],
                       equipartition_E=1.5 * p.T)


def _fp_initial(cfg, p, c):
    sig_p = math.sqrt(p.M * p.T)
    length = math.sqrt(p.T / p.M) / c.eta
    init = GaussianMoments(cfg["fp.x0"] * length, cfg["fp.p0"] * sig_p, cfg["fp.var_x"] * length**2,
                           0.0, cfg["fp.var_p"] * sig_p**2)
    xr = (-cfg["fp.x_half_width"] * length, cfg["fp.x_half_width"] * length)
    pr = (-cfg["fp.p_half_width"] * sig_p, cfg["fp.p_half_width"] * sig_p)
    return init, WignerField.gaussian(init, xr, pr, cfg["fp.nx"], cfg["fp.np"])


def cmd_fp(cfg, run: _Run):
    p = _params(cfg)
    c = coefficients(p)
    if c.eta == 0:
        raise ConfigurationError("fp needs collisions (phys.n_gas > 0)")
    init, W0 = _fp_initial(cfg, p, c)
    modes = ["quantum", "classical"] if cfg["fp.mode"] == "both" else [cfg["fp.mode"]]
    n_snap = max(1, cfg["fp.snapshots"])
    seg = cfg["fp.t_final"] / c.eta / n_snap
    dt = cfg["fp.dt"] / c.eta
    names = ["t", "mean_x", "mean_p", "var_x", "cov_xp", "var_p", "mass",
             "oracle_mean_x", "oracle_mean_p", "oracle_var_x", "oracle_cov_xp", "oracle_var_p"]
    for mode in modes:
        quantum = mode == "quantum"
        evolve = evolve_quantum_fp if quantum else evolve_classical_fp
        rows, W = [], W0
        worst = 0.0
        for k in range(n_snap + 1):
            if k:
                W = evolve(W, seg, c, p.M, dt=dt, free_streaming=cfg["fp.free_streaming"],
                           p_scheme=cfg["fp.p_scheme"])
            m = W.moments().as_array()
            o = gaussian_moment_oracle(init, W.t, c, p.M, quantum=quantum,
                                       free_streaming=cfg["fp.free_streaming"]).as_array()
            rows.append([W.t, *m, W.mass(), *o])
            if k:
                scale = np.array([math.sqrt(o[2]), math.sqrt(o[4]), o[2], math.sqrt(o[2] * o[4]), o[4]])
                worst = max(worst, float(np.max(np.abs(m - o) / scale)))
            io.write_field_binary(run.path(f"field_{mode}_{k:03d}.bin"), W)
        run.csv(f"fp_{mode}_moments.csv", names, np.array(rows))
        run.results[mode] = {"max_scaled_moment_error": worst, "mass_error": abs(W.mass() - W0.mass()),
                             "min_value": float(W.values.min())}


def cmd_qlbe(cfg, run: _Run):
    from .grid import (CoherenceSlice, GridGenerator, coherence_decay_rate, default_grid,
                       max_stable_dt, propagate_slice, stationarity_residual, thermal_loss_average)

    p = _params(cfg)
    grid = default_grid(p, cfg["qlbe.N"])
    gen = GridGenerator(grid, p, strict=cfg["qlbe.strict"])
    run.results["stationarity_residual"] = stationarity_residual(p, grid, gen)
    s = derive_scales(p)
    if cfg["qlbe.mode"] == "ladder":
        d = np.array(cfg["qlbe.K_direction"])
        if not np.linalg.norm(d) > 0:
            raise ConfigurationError("qlbe.K_direction must be non-zero")
        d = d / np.linalg.norm(d)
        rows = []
        for k in cfg["qlbe.K_ladder"]:
            K = k * s.p_beta * d
            rows.append([k, coherence_decay_rate(K, p, generator=gen), thermal_loss_average(K, p, grid)])
        rows = np.array(rows)
        run.csv("decay_rates.csv", ["K_over_p_beta", "rate", "thermal_loss_average"], rows)
        run.results["rates"] = rows[:, 1]
        run.results["monotone"] = bool(np.all(np.diff(rows[:, 1]) > 0))
        return
    zero = np.zeros(3)
    dt = cfg["qlbe.dt"] or max_stable_dt(gen, zero)
    sl = CoherenceSlice.gaussian(grid, np.array(cfg["qlbe.initial_mean"]) * math.sqrt(p.M * p.T),
                                 cfg["qlbe.initial_var"] * p.M * p.T)
    eq = CoherenceSlice.thermal(grid, p)
    n_snap = max(1, cfg["qlbe.snapshots"])
    seg = cfg["qlbe.t_final"] / n_snap
    rows, t = [], 0.0
    trace0 = sl.trace().real
    for k in range(n_snap + 1):
        if k:
            sl = propagate_slice(sl, seg, min(dt, seg), p, generator=gen)
            t += seg
        l1 = float(np.abs(sl.values - eq.values).sum() / np.abs(eq.values).sum())
        rows.append([t, sl.trace().real - trace0, sl.mean_energy(p.M), l1, float(np.min(sl.values.real))])
        io.write_slice_binary(run.path(f"slice_{k:03d}.bin"), sl)
    rows = np.array(rows)
    run.csv("qlbe_diagnostics.csv", ["t", "trace_change", "E", "l1_distance_to_equilibrium", "min_value"], rows)
    run.results.update(max_trace_change=float(np.max(np.abs(rows[:, 1]))),
                       final_l1_distance=rows[-1, 3], final_E=rows[-1, 2])


def cmd_rates(cfg, run: _Run):
    from .rates import m_in_classical, m_out_classical, m_out_flux

    p = _params(cfg)
    s = derive_scales(p)
    n = cfg["rates.n_points"]
    U = np.linspace(0.0, cfg["rates.U_max"], n)
    P = np.zeros((n, 3))
    P[:, 2] = U * p.M * s.v_beta
    quad = m_out_classical(P, p)
    flux = m_out_flux(P, p)
    run.csv("rates_out.csv", ["U", "Pz", "m_out_quadrature", "m_out_closed_form"],
            np.column_stack([U, P[:, 2], quad, flux]))
    q = np.linspace(cfg["rates.Q_max"] / n, cfg["rates.Q_max"], n) * s.p_beta
    Q = np.zeros((n, 3))
    Q[:, 2] = q
    run.csv("rates_in.csv", ["Qz", "m_in_classical_at_P0"], np.column_stack([q, m_in_classical(np.zeros(3), Q, p)]))
    run.results["max_rel_out_difference"] = float(np.max(np.abs(quad - flux) / np.maximum(flux, 1e-300)))


COMMANDS = {
    "coefficients": cmd_coefficients,
    "relax": cmd_relax,
    "fp": cmd_fp,
    "qlbe": cmd_qlbe,
    "rates": cmd_rates,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qlbe", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="flat key = value config file")
    ap.add_argument("--set", "-D", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config key (repeatable)")
    ap.add_argument("--seed", type=int, help="root seed (run.seed)")
    ap.add_argument("--workers", type=int, help="worker processes (run.workers, 0 = all cores)")
    ap.add_argument("--out", type=Path, default=Path("qlbe_out"), help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_values = {}
        if args.config is not None:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigurationError(f"cannot read config: {exc}")
            file_values = io.parse_config_text(text, str(args.config))
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = io.parse_value(v.strip())
        if args.seed is not None:
            overrides["run.seed"] = args.seed
        if args.workers is not None:
            overrides["run.workers"] = args.workers
        cfg = resolve_config(file_values, overrides)
        run = _Run(args.out, cfg)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            COMMANDS[args.command](cfg, run)
        for w in caught:
            msg = f"{w.category.__name__}: {w.message}"
            if msg not in run.warnings:
                run.warnings.append(msg)
                print(f"warning: {msg}", file=sys.stderr)
        run.finish(args.command)
    except (ConfigurationError, DomainError, PreconditionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericAccuracyError, DomainTooSmallError, SamplingError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
