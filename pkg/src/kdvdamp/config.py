"""Experiment configuration: flat key-value files, full validation.

Grammar (see README for the worked example):

* ``[section]`` headers group keys; a key's full name is ``section.key``.
* ``key = value`` lines; ``#`` starts a comment; blank lines ignored.
* Scalars are typed per schema (int, float, bool, string); lists are
  comma-separated floats.

Validation collects every violation before reporting, so a broken file is
diagnosed in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field


from .damping import DampingSpec, bump_profile, indicator_profile
from .errors import ConfigurationError
from .grid import Grid1D, OmegaWindow
from .models import ModelSpec
from .timestepper import SimConfig

_TYPES = {"int": int, "float": float, "bool": bool, "str": str, "floats": list}

# key -> (type name, default); required keys have default REQUIRED
REQUIRED = object()
SCHEMA = {
    "seed": ("int", 20240901),
    "model.kind": ("str", REQUIRED),
    "model.a1": ("float", 0.0),
    "model.a2": ("float", 0.0),
    "model.a3": ("float", 0.0),
    "model.b2": ("float", 1.0),
    "model.c": ("float", 1.0),
    "model.r": ("float", 0.0),
    "grid.L": ("float", REQUIRED),
    "grid.n": ("int", REQUIRED),
    "damping.kind": ("str", "weak_g"),
    "damping.l1": ("float", None),
    "damping.l2": ("float", None),
    "damping.a0": ("float", 1.0),
    "damping.profile": ("str", "indicator"),
    "ic.kind": ("str", "sine"),
    "ic.amplitude": ("float", 1.0),
    "ic.mode": ("int", 1),
    "ic.center": ("float", None),
    "ic.width": ("float", None),
    "ic.v_amplitude": ("float", None),
    "ic.v_mode": ("int", 2),
    "sim.dt": ("float", REQUIRED),
    "sim.T": ("float", REQUIRED),
    "sim.stride": ("int", 100),
    "sim.cadence": ("int", 1),
    "sim.blowup_factor": ("float", 10.0),
    "sim.allow_large_dt": ("bool", False),
    "diag.fit_t0": ("float", None),
    "diag.fit_t1": ("float", None),
    "diag.observability_mode": ("str", "interior"),
    "diag.observability_samples": ("int", 16),
    "diag.observability_T": ("float", 6.0),
    "diag.observability_dt": ("float", 1e-3),
    "diag.jmax": ("int", 5),
    "carleman.s0": ("float", 1.0),
    "carleman.time_margin": ("float", 0.05),
    "carleman.exponent_clamp": ("float", -700.0),
    "carleman.forcing_amplitude": ("float", 1.0),
    "sweep.amplitudes": ("floats", None),
}


@dataclass
class ExperimentConfig:
    model: ModelSpec
    grid: Grid1D
    damping: DampingSpec
    sim: SimConfig
    seed: int
    ic_kind: str
    ic_amplitude: float
    ic_mode: int
    ic_center: float | None
    ic_width: float | None
    ic_v_amplitude: float | None
    ic_v_mode: int
    fit_window: tuple | None
    observability_mode: str
    observability_samples: int
    observability_horizon: float
    observability_dt: float
    jmax: int
    carleman_s0: float
    carleman_time_margin: float
    carleman_exponent_clamp: float
    carleman_forcing_amplitude: float
    sweep_amplitudes: tuple | None
    raw: dict = field(default_factory=dict)


def _parse_scalar(key: str, raw: str, typename: str, line: int):
    try:
        if typename == "int":
            return int(raw)
        if typename == "float":
            return float(raw)
        if typename == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if typename == "floats":
            return tuple(float(p.strip()) for p in raw.split(",") if p.strip())
        return raw
    except ValueError:
        raise ConfigurationError(
            f"line {line}: {key}: cannot parse {raw!r} as {typename}"
        ) from None


def parse_flat_file(path: str) -> dict:
    """Parse the flat grammar into {dotted_key: (raw_value, line_number)}."""
    out: dict = {}
    section = ""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    for ln, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("[") and body.endswith("]"):
            section = body[1:-1].strip()
            if not section:
                raise ConfigurationError(f"line {ln}: empty section name")
            continue
        if "=" not in body:
            raise ConfigurationError(f"line {ln}: expected 'key = value', got {body!r}")
        key, raw = (p.strip() for p in body.split("=", 1))
        if not key:
            raise ConfigurationError(f"line {ln}: empty key")
        full = f"{section}.{key}" if section else key
        if full in out:
            raise ConfigurationError(f"line {ln}: duplicate key {full}")
        out[full] = (raw, ln)
    return out


def load_config(path: str) -> ExperimentConfig:
    """Parse + validate; raises ConfigurationError listing all violations."""
    raw_items = parse_flat_file(path)
    violations: list[str] = []
    values: dict = {}
    for key, (raw, ln) in raw_items.items():
        if key not in SCHEMA:
            violations.append(f"{key}: unknown key (line {ln})")
            continue
        try:
            values[key] = _parse_scalar(key, raw, SCHEMA[key][0], ln)
        except ConfigurationError as exc:
            violations.append(str(exc))
    for key, (typename, default) in SCHEMA.items():
        if key in values:
            continue
        if default is REQUIRED:
            violations.append(f"{key}: required key missing")
        else:
            values[key] = default
    if violations:
        raise ConfigurationError("invalid config:\n  " + "\n  ".join(violations))
    return build_experiment(values)


def build_experiment(values: dict) -> ExperimentConfig:
    """Assemble the typed config, revalidating every module invariant."""
    violations: list[str] = []

    grid = None
    try:
        grid = Grid1D(values["grid.L"], values["grid.n"])
    except ConfigurationError as exc:
        violations.append(f"grid: {exc}")

    model = None
    try:
        model = ModelSpec(
            kind=values["model.kind"], a1=values["model.a1"], a2=values["model.a2"],
            a3=values["model.a3"], b2=values["model.b2"], c=values["model.c"],
            r=values["model.r"],
        )
    except ConfigurationError as exc:
        violations.append(f"model: {exc}")

    damping = None
    if grid is not None:
        try:
            damping = _build_damping(values, grid)
        except ConfigurationError as exc:
            violations.append(f"damping: {exc}")

    sim = None
    try:
        sim = SimConfig(
            dt=values["sim.dt"], horizon=values["sim.T"],
            snapshot_stride=values["sim.stride"], blowup_factor=values["sim.blowup_factor"],
            trace_cadence=values["sim.cadence"], allow_large_dt=values["sim.allow_large_dt"],
        )
    except ConfigurationError as exc:
        violations.append(f"sim: {exc}")

    if values["ic.kind"] not in ("sine", "gaussian", "random_modes"):
        violations.append(f"ic.kind: unknown initial-condition kind {values['ic.kind']!r}")
    if values["diag.observability_mode"] not in ("interior", "boundary"):
        violations.append("diag.observability_mode: must be 'interior' or 'boundary'")
    if values["diag.observability_samples"] < 1:
        violations.append("diag.observability_samples: must be >= 1")
    if values["diag.jmax"] < 1:
        violations.append("diag.jmax: must be >= 1")
    if values["carleman.s0"] <= 0:
        violations.append("carleman.s0: must be positive")
    if not (0.0 < values["carleman.time_margin"] < 0.5):
        violations.append("carleman.time_margin: must lie in (0, 1/2)")

    fit_window = None
    if (values["diag.fit_t0"] is None) != (values["diag.fit_t1"] is None):
        violations.append("diag.fit_t0/fit_t1: give both ends or neither")
    elif values["diag.fit_t0"] is not None:
        if values["diag.fit_t0"] >= values["diag.fit_t1"]:
            violations.append("diag.fit_t0: must be below diag.fit_t1")
        else:
            fit_window = (values["diag.fit_t0"], values["diag.fit_t1"])

    if violations:
        raise ConfigurationError("invalid config:\n  " + "\n  ".join(violations))

    return ExperimentConfig(
        model=model, grid=grid, damping=damping, sim=sim,
        seed=values["seed"],
        ic_kind=values["ic.kind"], ic_amplitude=values["ic.amplitude"],
        ic_mode=values["ic.mode"], ic_center=values["ic.center"],
        ic_width=values["ic.width"],
        ic_v_amplitude=values["ic.v_amplitude"], ic_v_mode=values["ic.v_mode"],
        fit_window=fit_window,
        observability_mode=values["diag.observability_mode"],
        observability_samples=values["diag.observability_samples"],
        observability_horizon=values["diag.observability_T"],
        observability_dt=values["diag.observability_dt"],
        jmax=values["diag.jmax"],
        carleman_s0=values["carleman.s0"],
        carleman_time_margin=values["carleman.time_margin"],
        carleman_exponent_clamp=values["carleman.exponent_clamp"],
        carleman_forcing_amplitude=values["carleman.forcing_amplitude"],
        sweep_amplitudes=values["sweep.amplitudes"],
        raw={k: v for k, v in values.items()},
    )


def _build_damping(values: dict, grid: Grid1D) -> DampingSpec:
    kind = values["damping.kind"]
    if kind == "none":
        return DampingSpec("none")
    l1, l2 = values["damping.l1"], values["damping.l2"]
    if l1 is None or l2 is None:
        raise ConfigurationError(f"damping.omega: kind {kind!r} needs damping.l1 and damping.l2")
    try:
        window = OmegaWindow.from_bounds(grid, l1, l2)
    except ConfigurationError as exc:
        raise ConfigurationError(f"damping.omega: {exc}") from None
    if kind == "multiplicative":
        a0 = values["damping.a0"]
        profile = values["damping.profile"]
        if profile == "indicator":
            a = indicator_profile(grid, window, a0)
        elif profile == "bump":
            a = bump_profile(grid, window, a0)
        else:
            raise ConfigurationError(f"damping.profile: unknown profile {profile!r}")
        spec = DampingSpec(kind, window, a0=a0, a_values=a)
    else:
        spec = DampingSpec(kind, window, a0=values["damping.a0"])
    spec.validate_against(grid)
    return spec


def config_echo(cfg: ExperimentConfig) -> dict:
    """JSON-ready echo of the resolved key-value pairs."""
    out = {}
    for k, v in sorted(cfg.raw.items()):
        if isinstance(v, tuple):
            out[k] = list(v)
        else:
            out[k] = v
    return out
