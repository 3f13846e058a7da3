"""Measurement layer: decay fitting, observability quotients, critical
lengths, weighted-estimate ratio checks, weight-function validation, and the
flatness probe on the observation window."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import damping as damping_mod
from .damping import DampingSpec
from .errors import ConfigurationError, FitDomainError, UndefinedRatioError
from .grid import Grid1D, OmegaWindow, quadrature, trapezoid_weights
from .models import ModelSpec
from .profiles import random_modes
from .timestepper import SimConfig, SimTrace, run


# ---------------------------------------------------------------------------
# exponential decay fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    """Envelope ||u(t)|| <= C e^{-k t} ||u0|| fitted on a trace window."""

    amplitude: float
    rate: float
    r_squared: float
    window: tuple[float, float]


def default_fit_window(trace: SimTrace) -> tuple[float, float]:
    """[T/6, T]: skips the initial transient; override per experiment."""
    t_end = trace.times[-1]
    return (t_end / 6.0, t_end)


def fit_decay(trace: SimTrace, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares line on log ||u(t)|| over the window; k = -slope."""
    if window is None:
        window = default_fit_window(trace)
    t_a, t_b = window
    slack = 1e-9 * max(1.0, abs(trace.times[-1]))
    if not (trace.times[0] - slack <= t_a < t_b <= trace.times[-1] + slack):
        raise ConfigurationError(f"fit window {window} outside trace range")
    mask = (trace.times >= t_a) & (trace.times <= t_b)
    if mask.sum() < 10:
        raise ConfigurationError(f"fit window holds {mask.sum()} samples, need >= 10")
    e_win = trace.energy[mask]
    if np.any(e_win <= 0.0):
        raise FitDomainError("nonpositive energies in the fit window")
    t = trace.times[mask]
    y = 0.5 * np.log(2.0 * e_win)  # log ||u||
    design = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    pred = design @ coef
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    # a flat log-series has only roundoff variance: the line fits perfectly
    floor = 1e-24 * y.size * max(1.0, float(np.abs(y).max()) ** 2)
    r2 = 1.0 if ss_tot <= floor else max(0.0, 1.0 - ss_res / ss_tot)
    u0_norm = math.sqrt(2.0 * trace.energy[0])
    if u0_norm <= 0.0:
        raise FitDomainError("trace starts from zero energy")
    return DecayFit(
        amplitude=float(np.exp(coef[1])) / u0_norm,
        rate=float(-coef[0]),
        r_squared=r2,
        window=(float(t_a), float(t_b)),
    )


# ---------------------------------------------------------------------------
# observability quotients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObservabilityReport:
    quotients: np.ndarray
    estimate: float          # max_j Q_j
    ensemble_size: int
    mode: str
    seed: int


def observability_quotient(model: ModelSpec, grid: Grid1D, damping: DampingSpec,
                           u0: np.ndarray, horizon: float, mode: str,
                           dt: float = 1e-3) -> float:
    """Q = ||u0||^2 / int_0^T (observed)^2 dt.

    Interior mode observes ||G u(t)|| (requires the mean-removal damping to be
    active); boundary mode observes u_x(0, t) on the undamped linear model.
    Returns +inf when the observed integral degenerates (candidate
    non-observability, e.g. boundary observation at a critical length).
    """
    if mode not in ("interior", "boundary"):
        raise ConfigurationError(f"unknown observability mode {mode!r}")
    if mode == "interior" and damping.kind != "weak_g":
        raise ConfigurationError("interior mode requires weak_g damping")
    if mode == "boundary" and (model.kind != "kdv_linear" or damping.kind != "none"):
        raise ConfigurationError("boundary mode requires undamped kdv_linear")
    u0 = np.asarray(u0, dtype=float)
    u0_sq = quadrature(grid, u0 * u0)
    if u0_sq <= 0.0:
        raise ConfigurationError("observability needs a nonzero initial state")
    trace = run(model, grid, damping, u0, SimConfig(dt=dt, horizon=horizon))
    observed_sq = trace.diss_damping if mode == "interior" else trace.ux0 ** 2
    integral = float(np.trapezoid(observed_sq, trace.times))
    if integral < 1e-14 * u0_sq:
        return math.inf
    return u0_sq / integral


def observability_ensemble(model: ModelSpec, grid: Grid1D, damping: DampingSpec,
                           horizon: float, mode: str, samples: int, seed: int,
                           dt: float = 1e-3) -> ObservabilityReport:
    """Quotients for seeded random initial states (unit norm, first 10 modes)."""
    qs = np.empty(samples)
    for j in range(samples):
        u0 = random_modes(grid, seed, amplitude=1.0, index=j)
        qs[j] = observability_quotient(model, grid, damping, u0, horizon, mode, dt)
    return ObservabilityReport(
        quotients=qs, estimate=float(qs.max()), ensemble_size=samples,
        mode=mode, seed=seed,
    )


# ---------------------------------------------------------------------------
# critical lengths
# ---------------------------------------------------------------------------

def _critical_value(j: int, l: int) -> float:
    return 2.0 * math.pi * math.sqrt((j * j + l * l + j * l) / 3.0)


def critical_lengths(j_max: int) -> np.ndarray:
    """Sorted unique lengths 2 pi sqrt((j^2 + l^2 + j l)/3), 1 <= j <= l <= j_max."""
    if j_max < 1:
        raise ConfigurationError(f"j_max must be >= 1, got {j_max}")
    vals = sorted(_critical_value(j, l) for j in range(1, j_max + 1)
                  for l in range(j, j_max + 1))
    out = []
    for v in vals:
        if not out or v - out[-1] > 1e-12:
            out.append(v)
    return np.array(out)


def is_critical(length: float, tol: float) -> bool:
    """Membership test against the critical set, by absolute tolerance."""
    if tol <= 0:
        raise ConfigurationError(f"tolerance must be positive, got {tol}")
    j = 1
    while _critical_value(j, j) <= length + tol:
        l = j
        while True:
            v = _critical_value(j, l)
            if v > length + tol:
                break
            if abs(v - length) <= tol:
                return True
            l += 1
        j += 1
    return False


# ---------------------------------------------------------------------------
# weighted-estimate (exponential weight) machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CarlemanConfig:
    """Weight phi(t, x) = psi(x) / (t (T - t)) with psi given by polynomial
    coefficients (ascending powers of x)."""

    psi_coeffs: tuple
    s0: float = 1.0
    s_grid: tuple = ()
    exponent_clamp: float = -700.0
    time_margin: float = 0.05

    def __post_init__(self):
        if self.s0 <= 0:
            raise ConfigurationError(f"s0 must be positive, got {self.s0}")
        grid = self.s_grid if self.s_grid else tuple(default_s_grid(self.s0))
        object.__setattr__(self, "s_grid", tuple(float(s) for s in grid))
        if any(s < self.s0 for s in self.s_grid):
            raise ConfigurationError("s values must satisfy s >= s0")
        if any(b <= a for a, b in zip(self.s_grid, self.s_grid[1:])):
            raise ConfigurationError("s grid must ascend")
        if not (0.0 < self.time_margin < 0.5):
            raise ConfigurationError("time margin must lie in (0, 1/2)")

    def psi_values(self, grid: Grid1D) -> np.ndarray:
        return np.polynomial.polynomial.polyval(grid.nodes, np.asarray(self.psi_coeffs))


def default_psi_coeffs(length: float) -> tuple:
    """psi(x) = 1 + x (L - x) / L^2 (ships with its validator report)."""
    return (1.0, 1.0 / length, -1.0 / length ** 2)


def default_s_grid(s0: float, count: int = 8) -> np.ndarray:
    return np.logspace(math.log10(s0), math.log10(4.0 * s0), count)


def _derivative_rows(q: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """First and second x-derivatives of snapshot rows: centered interior,
    one-sided second-order at the end nodes."""
    qx = np.empty_like(q)
    qxx = np.empty_like(q)
    qx[:, 1:-1] = (q[:, 2:] - q[:, :-2]) / (2 * h)
    qx[:, 0] = (-3 * q[:, 0] + 4 * q[:, 1] - q[:, 2]) / (2 * h)
    qx[:, -1] = (3 * q[:, -1] - 4 * q[:, -2] + q[:, -3]) / (2 * h)
    qxx[:, 1:-1] = (q[:, 2:] - 2 * q[:, 1:-1] + q[:, :-2]) / h ** 2
    qxx[:, 0] = (2 * q[:, 0] - 5 * q[:, 1] + 4 * q[:, 2] - q[:, 3]) / h ** 2
    qxx[:, -1] = (2 * q[:, -1] - 5 * q[:, -2] + 4 * q[:, -3] - q[:, -4]) / h ** 2
    return qx, qxx


def carleman_ratio(trace: SimTrace, forcing_samples: np.ndarray,
                   cfg: CarlemanConfig, s: float) -> float:
    """LHS(s)/RHS(s) for one forced linear trace.

    LHS = space-time integral of [s phi q_xx^2 + (s phi)^3 q_x^2
    + (s phi)^5 q^2] e^{-2 s phi}; RHS = integral of f^2 e^{-2 s phi};
    both restricted to the interior time window and clamped so the weight is
    exactly zero once the exponent falls below the configured floor.
    """
    grid = trace.grid
    horizon = trace.snapped_horizon
    t_lo = cfg.time_margin * horizon
    t_hi = (1.0 - cfg.time_margin) * horizon
    mask = (trace.snapshot_times >= t_lo) & (trace.snapshot_times <= t_hi)
    if mask.sum() < 3:
        raise ConfigurationError("too few snapshots inside the interior time window")
    tsnap = trace.snapshot_times[mask]
    gaps = np.diff(tsnap)
    if gaps.max() > trace.dt * (1.0 + 1e-9):
        raise ConfigurationError(
            "weighted-ratio evaluation needs snapshots at every step inside "
            "the interior time window (snapshot stride 1)"
        )
    q = trace.snapshots_u[mask]
    f = np.asarray(forcing_samples, dtype=float)
    if f.shape != trace.snapshots_u.shape:
        raise ConfigurationError(
            f"forcing samples shape {f.shape} must match snapshots "
            f"{trace.snapshots_u.shape}"
        )
    f = f[mask]
    psi = cfg.psi_values(grid)
    if np.any(psi <= 0.0):
        raise ConfigurationError("psi must be positive on all nodes")
    h = grid.dx
    xw = trapezoid_weights(grid)
    qx, qxx = _derivative_rows(q, h)
    phi = psi[None, :] / (tsnap * (horizon - tsnap))[:, None]
    expo = -2.0 * s * phi
    weight = np.where(expo < cfg.exponent_clamp, 0.0, np.exp(np.maximum(expo, cfg.exponent_clamp)))
    sp = s * phi
    lhs_t = ((sp * qxx ** 2 + sp ** 3 * qx ** 2 + sp ** 5 * q ** 2) * weight) @ xw
    rhs_t = (f ** 2 * weight) @ xw
    lhs = float(np.trapezoid(lhs_t, tsnap))
    rhs = float(np.trapezoid(rhs_t, tsnap))
    if rhs < 1e-300:
        raise UndefinedRatioError(
            "weight annihilated the forcing integral (s too large or f too small)"
        )
    return lhs / rhs


# ---------------------------------------------------------------------------
# psi validator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PsiCondition:
    name: str
    holds: bool
    witness_node: int | None = None
    witness_value: float | None = None


def _third_derivative(psi: np.ndarray, h: float) -> np.ndarray:
    d3 = np.empty_like(psi)
    d3[2:-2] = (psi[4:] - 2 * psi[3:-1] + 2 * psi[1:-3] - psi[:-4]) / (2 * h ** 3)
    # biased second-order rows near the ends
    b = np.array([-1.5, 5.0, -6.0, 3.0, -0.5]) / h ** 3      # nodes i-1..i+3
    o = np.array([-17/4, 71/4, -59/2, 49/2, -41/4, 7/4]) / h ** 3  # nodes i..i+5
    d3[1] = b @ psi[0:5]
    d3[0] = o @ psi[0:6]
    d3[-2] = -(b @ psi[-1:-6:-1])
    d3[-1] = -(o @ psi[-1:-7:-1])
    return d3


def validate_psi(cfg: CarlemanConfig, grid: Grid1D) -> list[PsiCondition]:
    """Pointwise status of each weight-shape condition; never blocks the
    ratio evaluation, only annotates the report."""
    psi = cfg.psi_values(grid)
    h = grid.dx
    d1 = np.empty_like(psi)
    d1[1:-1] = (psi[2:] - psi[:-2]) / (2 * h)
    d1[0] = (-3 * psi[0] + 4 * psi[1] - psi[2]) / (2 * h)
    d1[-1] = (3 * psi[-1] - 4 * psi[-2] + psi[-3]) / (2 * h)
    d2 = np.empty_like(psi)
    d2[1:-1] = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) / h ** 2
    d2[0] = (2 * psi[0] - 5 * psi[1] + 4 * psi[2] - psi[3]) / h ** 2
    d2[-1] = (2 * psi[-1] - 5 * psi[-2] + 4 * psi[-3] - psi[-4]) / h ** 2
    d3 = _third_derivative(psi, h)

    def pointwise(name, values, ok):
        bad = np.nonzero(~ok(values))[0]
        if bad.size:
            i = int(bad[0])
            return PsiCondition(name, False, i, float(values[i]))
        return PsiCondition(name, True)

    conditions = [
        pointwise("psi_positive", psi, lambda v: v > 0),
        pointwise("slope_nonvanishing", d1, lambda v: np.abs(v) > 0),
        pointwise("concave", d2, lambda v: v < 0),
        pointwise("slope_times_third_negative", d1 * d3, lambda v: v < 0),
    ]
    conditions.append(PsiCondition("left_slope_negative", bool(d1[0] < 0), 0, float(d1[0])))
    n = grid.cell_count
    conditions.append(PsiCondition("right_slope_positive", bool(d1[-1] > 0), n, float(d1[-1])))
    tol = 1e-12 * max(1.0, float(np.abs(psi).max()))
    peak = float(psi.max())
    ok_max = (psi[0] >= peak - tol) and (psi[-1] >= peak - tol)
    witness = int(np.argmax(psi))
    conditions.append(PsiCondition("max_at_both_endpoints", bool(ok_max),
                                   None if ok_max else witness,
                                   None if ok_max else peak))
    return conditions


# ---------------------------------------------------------------------------
# flatness probe on the observation window
# ---------------------------------------------------------------------------

def flatness_on_omega(trace: SimTrace, window: OmegaWindow) -> float:
    """sup over snapshots of || u - mean_w u ||_{L2(w)} (equals ||G u||_w):
    how far the state is from constant on the window."""
    grid = trace.grid
    worst = 0.0
    for row in trace.snapshots_u:
        gu = damping_mod.apply_weak_g(grid, window, row)
        worst = max(worst, math.sqrt(max(0.0, quadrature(grid, gu * gu, window))))
    return worst
