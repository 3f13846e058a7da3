"""Command-line interface: experiment orchestration and bit-stable outputs.

Fixed output schemas (floats printed with 17 significant digits, LF endings):

* trace.csv        t,E,diss_damping,diss_boundary,mass,ux0,linf
* snapshots.csv    t,x,u        (plus a v column for the coupled model)
* comparison.csv   mechanism,k,energy_ratio,r2
* observability.csv sample,seed,Q
* lengths.csv      length
* carleman.csv     s,ratio

Exit codes: 0 success, 2 configuration/parse error, 3 numerical blowup,
4 diagnostic-domain error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__, profiles
from .config import ExperimentConfig, config_echo, load_config
from .damping import DampingSpec, indicator_profile
from .diagnostics import (
    CarlemanConfig,
    carleman_ratio,
    critical_lengths,
    default_psi_coeffs,
    default_s_grid,
    fit_decay,
    observability_quotient,
    validate_psi,
)
from .errors import (
    BlowupError,
    ConfigurationError,
    FitDomainError,
    KdvDampError,
    UndefinedRatioError,
)
from .timestepper import SimConfig, SimTrace, run

MECHANISMS = ("none", "weak_g", "multiplicative", "h_minus_one")


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _write_csv(path: str, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_trace_csv(path: str, trace: SimTrace) -> None:
    rows = (
        tuple(_fmt(v) for v in (t, e, dd, db, m, ux, li))
        for t, e, dd, db, m, ux, li in zip(
            trace.times, trace.energy, trace.diss_damping, trace.diss_boundary,
            trace.mass, trace.ux0, trace.linf)
    )
    _write_csv(path, "t,E,diss_damping,diss_boundary,mass,ux0,linf", rows)


def write_snapshots_csv(path: str, trace: SimTrace) -> None:
    x = trace.grid.nodes
    coupled = trace.snapshots_v is not None
    header = "t,x,u,v" if coupled else "t,x,u"

    def rows():
        for i, t in enumerate(trace.snapshot_times):
            for j in range(x.size):
                if coupled:
                    yield (_fmt(t), _fmt(x[j]), _fmt(trace.snapshots_u[i, j]),
                           _fmt(trace.snapshots_v[i, j]))
                else:
                    yield (_fmt(t), _fmt(x[j]), _fmt(trace.snapshots_u[i, j]))

    _write_csv(path, header, rows())


def _summary(cfg: ExperimentConfig | None, started: float, extra: dict) -> dict:
    payload = {
        "version": f"kdvdamp-{__version__}",
        "wall_clock_s": round(time.perf_counter() - started, 3),
    }
    if cfg is not None:
        payload["config"] = config_echo(cfg)
        payload["snapped_T"] = cfg.sim.snapped_horizon
    payload.update(extra)
    return payload


def build_initial(cfg: ExperimentConfig, amplitude: float | None = None):
    """Initial profiles from the config's ic section (v field for coupled runs)."""
    amp = cfg.ic_amplitude if amplitude is None else amplitude
    u0 = profiles.from_config(cfg.ic_kind, cfg.grid, amp, cfg.seed,
                              mode=cfg.ic_mode, center=cfg.ic_center, width=cfg.ic_width)
    v0 = None
    if cfg.model.coupled:
        v_amp = amp if cfg.ic_v_amplitude is None else cfg.ic_v_amplitude
        if cfg.ic_kind == "sine":
            v0 = profiles.sine(cfg.grid, v_amp, cfg.ic_v_mode)
        elif cfg.ic_kind == "gaussian":
            v0 = profiles.gaussian(cfg.grid, v_amp, cfg.ic_center, cfg.ic_width)
        else:
            v0 = profiles.random_modes(cfg.grid, cfg.seed, v_amp, index=1)
    return u0, v0


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig, out: str, quiet: bool) -> None:
    started = time.perf_counter()
    amplitudes = cfg.sweep_amplitudes or (None,)
    sweep_results = {}
    for amp in amplitudes:
        sub = out if amp is None else os.path.join(out, f"amp_{amp:g}")
        os.makedirs(sub, exist_ok=True)
        u0, v0 = build_initial(cfg, amp)
        trace = run(cfg.model, cfg.grid, cfg.damping, u0, cfg.sim, initial_v=v0)
        write_trace_csv(os.path.join(sub, "trace.csv"), trace)
        write_snapshots_csv(os.path.join(sub, "snapshots.csv"), trace)
        extra = {"E_final_over_E0": float(trace.energy[-1] / trace.energy[0])
                 if trace.energy[0] > 0 else None}
        if amp is not None:
            try:
                fit = fit_decay(trace, cfg.fit_window)
                sweep_results[f"{amp:g}"] = {"k": fit.rate, "r2": fit.r_squared}
            except (FitDomainError, ConfigurationError):
                sweep_results[f"{amp:g}"] = None
        _write_json(os.path.join(sub, "summary.json"), _summary(cfg, started, extra))
        if not quiet:
            print(f"simulate: wrote {sub}/trace.csv "
                  f"({trace.times.size} rows, T={trace.snapped_horizon:g})")
    if cfg.sweep_amplitudes:
        _write_json(os.path.join(out, "summary.json"),
                    _summary(cfg, started, {"sweep_fits": sweep_results}))


def _mechanism_spec(cfg: ExperimentConfig, mechanism: str) -> DampingSpec:
    if mechanism == "none":
        return DampingSpec("none")
    window = cfg.damping.window
    if window is None:
        raise ConfigurationError("compare needs damping.l1/l2 to place the window")
    if mechanism == "multiplicative":
        a = indicator_profile(cfg.grid, window, cfg.damping.a0)
        return DampingSpec(mechanism, window, a0=cfg.damping.a0, a_values=a)
    return DampingSpec(mechanism, window, a0=cfg.damping.a0)


def _compare_worker(payload):
    cfg, mechanism = payload
    damping = _mechanism_spec(cfg, mechanism)
    u0, v0 = build_initial(cfg)
    trace = run(cfg.model, cfg.grid, damping, u0, cfg.sim, initial_v=v0)
    return mechanism, trace


def cmd_compare(cfg: ExperimentConfig, out: str, workers: int, quiet: bool) -> None:
    started = time.perf_counter()
    os.makedirs(out, exist_ok=True)
    payloads = [(cfg, mech) for mech in MECHANISMS]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(payloads))) as pool:
            results = list(pool.map(_compare_worker, payloads))
    else:
        results = [_compare_worker(p) for p in payloads]
    rows = []
    for mechanism, trace in results:
        write_trace_csv(os.path.join(out, f"trace_{mechanism}.csv"), trace)
        fit = fit_decay(trace, cfg.fit_window)
        ratio = trace.energy[-1] / trace.energy[0]
        rows.append((mechanism, _fmt(fit.rate), _fmt(ratio), _fmt(fit.r_squared)))
        if not quiet:
            print(f"compare[{mechanism}]: k={fit.rate:.4g} E(T)/E0={ratio:.3e}")
    _write_csv(os.path.join(out, "comparison.csv"), "mechanism,k,energy_ratio,r2", rows)
    _write_json(os.path.join(out, "summary.json"), _summary(cfg, started, {}))


@dataclass
class TraceSeries:
    """Minimal stand-in for fit_decay when loading a trace from disk."""
    times: np.ndarray
    energy: np.ndarray


def load_trace_series(path: str) -> TraceSeries:
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot read trace {path}: {exc}") from None
    if data.dtype.names is None or "t" not in data.dtype.names or "E" not in data.dtype.names:
        raise ConfigurationError(f"{path} does not carry the trace.csv schema")
    return TraceSeries(times=np.atleast_1d(data["t"]), energy=np.atleast_1d(data["E"]))


def cmd_decay_fit(args, cfg: ExperimentConfig | None, out: str) -> None:
    started = time.perf_counter()
    series = load_trace_series(args.trace)
    window = None
    if args.t0 is not None and args.t1 is not None:
        window = (args.t0, args.t1)
    elif cfg is not None:
        window = cfg.fit_window
    fit = fit_decay(series, window)
    os.makedirs(out, exist_ok=True)
    _write_json(os.path.join(out, "fit.json"), _summary(cfg, started, {
        "C": fit.amplitude, "k": fit.rate, "r2": fit.r_squared,
        "window": list(fit.window),
    }))


def _observability_worker(payload):
    cfg, index = payload
    u0 = profiles.random_modes(cfg.grid, cfg.seed, amplitude=1.0, index=index)
    q = observability_quotient(
        cfg.model, cfg.grid, cfg.damping, u0, cfg.observability_horizon,
        cfg.observability_mode, dt=cfg.observability_dt)
    return index, q


def cmd_observability(cfg: ExperimentConfig, out: str, workers: int, quiet: bool) -> None:
    started = time.perf_counter()
    os.makedirs(out, exist_ok=True)
    payloads = [(cfg, j) for j in range(cfg.observability_samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = sorted(pool.map(_observability_worker, payloads))
    else:
        results = [_observability_worker(p) for p in payloads]
    rows = [(str(j), str(cfg.seed + j), _fmt(q)) for j, q in results]
    _write_csv(os.path.join(out, "observability.csv"), "sample,seed,Q", rows)
    qs = np.array([q for _, q in results])
    finite = qs[np.isfinite(qs)]
    estimate = float(qs.max()) if finite.size == qs.size else math.inf
    _write_json(os.path.join(out, "summary.json"), _summary(cfg, started, {
        "estimate_C": estimate if math.isfinite(estimate) else "inf",
        "mode": cfg.observability_mode,
        "samples": cfg.observability_samples,
        "degenerate_members": int(qs.size - finite.size),
    }))
    if not quiet:
        print(f"observability: estimate={estimate:.6g} over {qs.size} members")


def cmd_critical_lengths(args, cfg: ExperimentConfig | None, out: str) -> None:
    jmax = args.jmax if args.jmax is not None else (cfg.jmax if cfg else 5)
    lengths = critical_lengths(jmax)
    os.makedirs(out, exist_ok=True)
    _write_csv(os.path.join(out, "lengths.csv"), "length",
               ((_fmt(v),) for v in lengths))


def carleman_forcing(cfg: ExperimentConfig):
    """Interior-supported smooth forcing for the weighted-ratio run."""
    horizon = cfg.sim.snapped_horizon
    amp = cfg.carleman_forcing_amplitude
    length = cfg.grid.length

    def f(x, t):
        return amp * np.sin(np.pi * x / length) * math.exp(
            -0.5 * ((t - horizon / 2) / (0.15 * horizon)) ** 2)

    return f


def cmd_carleman(cfg: ExperimentConfig, out: str, quiet: bool) -> None:
    started = time.perf_counter()
    if cfg.model.kind != "kdv_linear":
        raise ConfigurationError("carleman needs model.kind = kdv_linear")
    os.makedirs(out, exist_ok=True)
    sim = SimConfig(dt=cfg.sim.dt, horizon=cfg.sim.horizon, snapshot_stride=1,
                    blowup_factor=cfg.sim.blowup_factor,
                    trace_cadence=cfg.sim.trace_cadence,
                    allow_large_dt=cfg.sim.allow_large_dt)
    forcing = carleman_forcing(cfg)
    u0 = np.zeros(cfg.grid.cell_count + 1)
    trace = run(cfg.model, cfg.grid, DampingSpec("none"), u0, sim, forcing=forcing)
    fsamp = np.stack([forcing(cfg.grid.nodes, t) for t in trace.snapshot_times])
    ccfg = CarlemanConfig(
        psi_coeffs=default_psi_coeffs(cfg.grid.length),
        s0=cfg.carleman_s0,
        s_grid=tuple(default_s_grid(cfg.carleman_s0)),
        exponent_clamp=cfg.carleman_exponent_clamp,
        time_margin=cfg.carleman_time_margin,
    )
    rows = []
    for s in ccfg.s_grid:
        rows.append((_fmt(s), _fmt(carleman_ratio(trace, fsamp, ccfg, s))))
        if not quiet:
            print(f"carleman: s={s:.4g} ratio={float(rows[-1][1]):.6g}")
    _write_csv(os.path.join(out, "carleman.csv"), "s,ratio", rows)
    report = [
        {"name": c.name, "holds": c.holds, "witness_node": c.witness_node,
         "witness_value": c.witness_value}
        for c in validate_psi(ccfg, cfg.grid)
    ]
    _write_json(os.path.join(out, "psi_report.json"), {"conditions": report})
    _write_json(os.path.join(out, "summary.json"), _summary(cfg, started, {}))


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kdvdamp",
                                description="damped dispersive-wave simulation lab")
    p.add_argument("--config", help="experiment config file")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="worker pool size for fan-out commands")
    p.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate")
    sub.add_parser("compare")
    d = sub.add_parser("decay-fit")
    d.add_argument("--trace", required=True, help="existing trace.csv")
    d.add_argument("--t0", type=float)
    d.add_argument("--t1", type=float)
    sub.add_parser("observability")
    c = sub.add_parser("critical-lengths")
    c.add_argument("--jmax", type=int)
    sub.add_parser("carleman")
    sub.add_parser("version")
    return p


_NEEDS_CONFIG = {"simulate", "compare", "observability", "carleman"}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "version":
        print(f"kdvdamp-{__version__}")
        return 0
    try:
        cfg = None
        if args.config:
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
                cfg.raw["seed"] = args.seed
        elif args.command in _NEEDS_CONFIG:
            raise ConfigurationError(f"{args.command} requires --config")
        if args.command == "simulate":
            cmd_simulate(cfg, args.out, args.quiet)
        elif args.command == "compare":
            cmd_compare(cfg, args.out, args.workers, args.quiet)
        elif args.command == "decay-fit":
            cmd_decay_fit(args, cfg, args.out)
        elif args.command == "observability":
            cmd_observability(cfg, args.out, args.workers, args.quiet)
        elif args.command == "critical-lengths":
            cmd_critical_lengths(args, cfg, args.out)
        elif args.command == "carleman":
            cmd_carleman(cfg, args.out, args.quiet)
        return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BlowupError as exc:
        print(f"numerical blowup: {exc} (last good time "
              f"{exc.last_good_time})", file=sys.stderr)
        return 3
    except (FitDomainError, UndefinedRatioError) as exc:
        print(f"diagnostic-domain error: {exc}", file=sys.stderr)
        return 4
    except KdvDampError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
