"""Localized damping mechanisms and their dissipation functionals.

Four mechanisms are available:

* ``none``            -- undamped baseline (boundary dissipation only),
* ``weak_g``          -- window mean-removal feedback: G u = 1_w (u - mean_w u),
* ``multiplicative``  -- pointwise a(x) u with a >= a0 > 0 on the window,
* ``h_minus_one``     -- B u = 1_w (-d2/dx2)^(-1) u with Dirichlet values at
                         the snapped window endpoints.

All mean/inner-product computations use the same trapezoid weights as the
rest of the package, so the zero-mean identity for G holds exactly in
discrete arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, InternalError
from .grid import BandedMatrix, Grid1D, OmegaWindow, banded_solve, quadrature, trapezoid_weights

KINDS = ("none", "weak_g", "multiplicative", "h_minus_one")


@dataclass(frozen=True)
class DampingSpec:
    """Tagged damping mechanism with its parameters.

    ``a_values`` (full-node samples) and ``a0`` apply to the multiplicative
    mechanism only.
    """

    kind: str
    window: OmegaWindow | None = None
    a0: float = 1.0
    a_values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown damping kind {self.kind!r}")
        if self.kind != "none" and self.window is None:
            raise ConfigurationError(f"damping kind {self.kind!r} requires a window")

    def validate_against(self, grid: Grid1D) -> None:
        if self.kind == "multiplicative":
            if self.a_values is None:
                raise ConfigurationError("multiplicative damping needs a(x) samples")
            a = np.asarray(self.a_values, dtype=float)
            if a.shape != (grid.cell_count + 1,):
                raise ConfigurationError("a(x) must be sampled on all nodes")
            if self.a0 <= 0:
                raise ConfigurationError(f"floor a0 must be positive, got {self.a0}")
            w = self.window
            if np.any(a[w.i1 : w.i2 + 1] < self.a0):
                raise ConfigurationError("a(x) dips below a0 inside the window")
            if np.any(a < 0):
                raise ConfigurationError("a(x) must be nonnegative")
        if self.kind == "h_minus_one":
            w = self.window
            if w.i1 < 1 or w.i2 > grid.cell_count - 1:
                raise ConfigurationError(
                    "h_minus_one window must stay strictly inside (0, L)"
                )


def indicator_profile(grid: Grid1D, window: OmegaWindow, a0: float = 1.0) -> np.ndarray:
    """a(x) = a0 on the snapped window, 0 elsewhere."""
    a = np.zeros(grid.cell_count + 1)
    a[window.i1 : window.i2 + 1] = a0
    return a

def bump_profile(grid: Grid1D, window: OmegaWindow, a0: float = 1.0) -> np.ndarray:
    """Smoothed profile: floor a0 on the window, cosine-tapered shoulders."""
    x = grid.nodes
    xa, xb = x[window.i1], x[window.i2]
    width = (xb - xa) / 2
    a = np.zeros_like(x)
    inside = (x >= xa) & (x <= xb)
    a[inside] = a0
    left = (x >= xa - width) & (x < xa)
    a[left] = a0 * 0.5 * (1 + np.cos(np.pi * (xa - x[left]) / width))
    right = (x > xb) & (x <= xb + width)
    a[right] = a0 * 0.5 * (1 + np.cos(np.pi * (x[right] - xb) / width))
    return a


def apply_weak_g(grid: Grid1D, window: OmegaWindow, u: np.ndarray) -> np.ndarray:
    """G u: subtract the trapezoid window mean on the window, zero elsewhere."""
    u = np.asarray(u, dtype=float)
    w = trapezoid_weights(grid, window)
    mean = float(w @ u) / window.measure
    out = np.zeros_like(u)
    sl = slice(window.i1, window.i2 + 1)
    out[sl] = u[sl] - mean
    return out


def apply_multiplicative(spec: DampingSpec, u: np.ndarray) -> np.ndarray:
    """Pointwise product a(x_i) u_i."""
    if spec.kind != "multiplicative":
        raise ConfigurationError("apply_multiplicative needs a multiplicative spec")
    return np.asarray(spec.a_values, dtype=float) * np.asarray(u, dtype=float)


@lru_cache(maxsize=64)
def _dirichlet_laplacian(dx: float, interior_nodes: int) -> BandedMatrix:
    mat = BandedMatrix(interior_nodes, 1)
    for i in range(interior_nodes):
        mat.add(i, i, 2.0 / dx ** 2)
        if i > 0:
            mat.add(i, i - 1, -1.0 / dx ** 2)
        if i < interior_nodes - 1:
            mat.add(i, i + 1, -1.0 / dx ** 2)
    return mat


def apply_h_minus_one(grid: Grid1D, window: OmegaWindow, u: np.ndarray) -> np.ndarray:
    """B u: solve -v'' = u on the window with v = 0 at both snapped endpoints."""
    if window.node_count < 3:
        raise ConfigurationError("h_minus_one window needs at least 3 nodes")
    u = np.asarray(u, dtype=float)
    nw = window.i2 - window.i1 - 1
    lap = _dirichlet_laplacian(grid.dx, nw)
    v = banded_solve(lap, u[window.i1 + 1 : window.i2])
    if not np.all(np.isfinite(v)):
        raise InternalError("h_minus_one tridiagonal solve produced non-finite values")
    out = np.zeros_like(u)
    out[window.i1 + 1 : window.i2] = v
    return out


def apply(spec: DampingSpec, grid: Grid1D, u: np.ndarray) -> np.ndarray:
    """Damping term added to u_t + ... = 0 for the spec's mechanism."""
    if spec.kind == "none":
        return np.zeros_like(u)
    if spec.kind == "weak_g":
        return apply_weak_g(grid, spec.window, u)
    if spec.kind == "multiplicative":
        return apply_multiplicative(spec, u)
    return apply_h_minus_one(grid, spec.window, u)


def dissipation_functional(spec: DampingSpec, grid: Grid1D, u: np.ndarray) -> float:
    """Damping contribution to -dE/dt with E = (1/2) int u^2.

    weak_g -> int_w (Gu)^2; multiplicative -> int a u^2;
    h_minus_one -> int u Bu; none -> 0.  Always >= 0.
    """
    u = np.asarray(u, dtype=float)
    if spec.kind == "none":
        return 0.0
    if spec.kind == "weak_g":
        gu = apply_weak_g(grid, spec.window, u)
        return quadrature(grid, gu * gu, spec.window)
    if spec.kind == "multiplicative":
        a = np.asarray(spec.a_values, dtype=float)
        return quadrature(grid, a * u * u)
    bu = apply_h_minus_one(grid, spec.window, u)
    return quadrature(grid, u * bu)
