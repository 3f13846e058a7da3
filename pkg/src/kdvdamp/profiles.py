"""Initial-condition profiles.

All randomness flows from one explicit 64-bit seed through the counter-based
Philox generator; OS entropy is never consulted.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .grid import Grid1D, quadrature


def sine(grid: Grid1D, amplitude: float = 1.0, mode: int = 1) -> np.ndarray:
    x = grid.nodes
    u = amplitude * np.sin(mode * np.pi * x / grid.length)
    u[0] = u[-1] = 0.0
    return u


def gaussian(grid: Grid1D, amplitude: float = 1.0, center: float | None = None,
             width: float | None = None) -> np.ndarray:
    x = grid.nodes
    c = grid.length / 2 if center is None else center
    w = grid.length / 12 if width is None else width
    if w <= 0:
        raise ConfigurationError(f"gaussian width must be positive, got {w}")
    u = amplitude * np.exp(-0.5 * ((x - c) / w) ** 2)
    u[0] = u[-1] = 0.0
    return u


def rng_for(seed: int, index: int = 0) -> np.random.Generator:
    """Philox stream for a base seed and a derived-run index."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed) + np.uint64(index)))


def random_modes(grid: Grid1D, seed: int, amplitude: float = 1.0,
                 n_modes: int = 10, index: int = 0) -> np.ndarray:
    """Seeded sum of the first n_modes Dirichlet sine modes with standard
    normal coefficients, endpoints zeroed, normalized to ||u0|| = amplitude
    in the discrete L2 norm."""
    rng = rng_for(seed, index)
    coef = rng.standard_normal(n_modes)
    x = grid.nodes
    u = np.zeros_like(x)
    for j in range(n_modes):
        u += coef[j] * np.sin((j + 1) * np.pi * x / grid.length)
    u[0] = u[-1] = 0.0
    norm = np.sqrt(quadrature(grid, u * u))
    if norm == 0.0:
        raise ConfigurationError("degenerate random initial profile")
    return amplitude * u / norm


def poly_clamped(grid: Grid1D, amplitude: float = 1.0) -> np.ndarray:
    """x^2 (L-x)^3 scaled to peak amplitude; value and slope vanish at x=0,
    value, slope, and curvature vanish at x=L, so it is admissible for every
    supported bc set."""
    x = grid.nodes
    u = x ** 2 * (grid.length - x) ** 3
    return amplitude * u / np.abs(u).max()


def resonant_profile(grid: Grid1D, amplitude: float = 1.0) -> np.ndarray:
    """1 - cos(2 pi x / L); at L = 2*pi*sqrt((j^2+l^2+jl)/3) with j=l=1 this is
    the steady mode invisible to boundary observation at x=0."""
    x = grid.nodes
    u = amplitude * (1.0 - np.cos(2 * np.pi * x / grid.length))
    u[0] = u[-1] = 0.0
    return u


def from_config(kind: str, grid: Grid1D, amplitude: float, seed: int,
                mode: int = 1, center: float | None = None,
                width: float | None = None) -> np.ndarray:
    if kind == "sine":
        return sine(grid, amplitude, mode)
    if kind == "gaussian":
        return gaussian(grid, amplitude, center, width)
    if kind == "random_modes":
        return random_modes(grid, seed, amplitude)
    raise ConfigurationError(f"unknown initial-condition kind {kind!r}")
