"""Uniform 1-D mesh, banded finite-difference operators, quadrature.

Derivative operators act on the interior unknowns u_1..u_{n-1}; the Dirichlet
end values u_0 = u_n = 0 are eliminated.  Interior rows use second-order
centered stencils (3-point for d/dx, 5-point for d3/dx3, 7-point for d5/dx5).
Rows whose stencil reaches past the domain eliminate the ghost values through
polynomial extrapolation that honors the homogeneous boundary conditions of
the chosen set, except that u_x(L)=0 in the "kdv" set is imposed by the
reflected ghost u_{n+1} := u_{n-1}.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import get_lapack_funcs

from .errors import ConfigurationError, SingularMatrixError

# boundary-condition sets: derivative orders clamped to zero at each end
# (order 0 = the function value itself)
BC_SETS = {
    "kdv": ((0,), (0, 1)),          # u(0)=0 ; u(L)=u_x(L)=0
    "kdv_adjoint": ((0, 1), (0,)),  # u(0)=u_x(0)=0 ; u(L)=0
    "kawahara": ((0, 1), (0, 1, 2)),
}

_CENTERED = {
    1: np.array([-0.5, 0.0, 0.5]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    5: np.array([-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5]),
}

_MIN_CELLS = 16


@dataclass(frozen=True)
class Grid1D:
    """Uniform mesh 0 = x_0 < ... < x_n = L with spacing dx = L/n."""

    length: float
    cell_count: int

    def __post_init__(self):
        if not np.isfinite(self.length) or self.length <= 0:
            raise ConfigurationError(f"grid length must be positive, got {self.length}")
        if self.cell_count < _MIN_CELLS:
            raise ConfigurationError(
                f"grid needs at least {_MIN_CELLS} cells, got {self.cell_count}"
            )

    @property
    def dx(self) -> float:
        return self.length / self.cell_count

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.cell_count + 1)

    @property
    def n_interior(self) -> int:
        return self.cell_count - 1


@dataclass(frozen=True)
class OmegaWindow:
    """Observation/damping window (l1, l2) snapped outward to mesh nodes."""

    l1: float
    l2: float
    i1: int
    i2: int
    measure: float

    @classmethod
    def from_bounds(cls, grid: Grid1D, l1: float, l2: float) -> "OmegaWindow":
        if not (0.0 <= l1 < l2 <= grid.length):
            raise ConfigurationError(f"window ({l1}, {l2}) not inside [0, {grid.length}]")
        dx = grid.dx
        i1 = int(np.floor(l1 / dx + 1e-9))
        i2 = int(np.ceil(l2 / dx - 1e-9))
        i1 = max(i1, 0)
        i2 = min(i2, grid.cell_count)
        if i2 - i1 < 2:
            raise ConfigurationError(
                f"window ({l1}, {l2}) snaps to fewer than 3 nodes at n={grid.cell_count}"
            )
        return cls(l1=l1, l2=l2, i1=i1, i2=i2, measure=dx * (i2 - i1))

    @property
    def node_count(self) -> int:
        return self.i2 - self.i1 + 1


class BandedMatrix:
    """Square matrix with symmetric half-bandwidth, packed by diagonals.

    Storage is the LAPACK general-band layout with room for fill-in, so the
    LU factorization (dgbtrf, partial pivoting within the band) happens in
    place and is cached for repeated solves.
    """

    def __init__(self, m: int, bandwidth: int):
        self.m = m
        self.b = bandwidth
        # rows 0..2b hold the 2b+1 diagonals; extra b rows for pivot fill-in
        self._ab = np.zeros((3 * bandwidth + 1, m))
        self._lu = None
        self._ipiv = None

    # -- assembly -----------------------------------------------------------

    def add(self, i: int, j: int, value: float) -> None:
        if abs(i - j) > self.b:
            raise ConfigurationError(
                f"entry ({i},{j}) outside half-bandwidth {self.b}"
            )
        self._ab[2 * self.b + i - j, j] += value
        self._lu = None

    def row_dict(self, i: int) -> dict:
        """Nonzero entries of row i (for tests and block assembly)."""
        out = {}
        for j in range(max(0, i - self.b), min(self.m, i + self.b + 1)):
            v = self._ab[2 * self.b + i - j, j]
            if v != 0.0:
                out[j] = v
        return out

    @property
    def factored(self) -> bool:
        return self._lu is not None

    # -- linear algebra ------------------------------------------------------

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros_like(x)
        b, m = self.b, self.m
        for d in range(-b, b + 1):
            diag = self._ab[2 * b + d]
            if d >= 0:
                # entries A[i, i-d] live at ab[2b+d, i-d] for i = d..m-1
                y[d:] += diag[: m - d] * x[: m - d]
            else:
                y[: m + d] += diag[-d:] * x[-d:]
        return y

    def scaled_plus_identity(self, alpha: float, beta: float) -> "BandedMatrix":
        """Return alpha*I + beta*A with the same bandwidth."""
        out = BandedMatrix(self.m, self.b)
        for d in range(-self.b, self.b + 1):
            out._ab[2 * out.b + d] = beta * self._ab[2 * self.b + d]
        out._ab[2 * out.b] += alpha
        return out

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.m, self.m))
        for i in range(self.m):
            for j, v in self.row_dict(i).items():
                a[i, j] = v
        return a

    def max_abs(self) -> float:
        return float(np.abs(self._ab[self.b :, :]).max())

    def factor(self) -> None:
        if self._lu is not None:
            return
        gbtrf = get_lapack_funcs(("gbtrf",), (self._ab,))[0]
        # LAPACK wants 2*kl+ku+1 rows with the matrix in rows kl..2kl+ku
        ab = np.zeros((3 * self.b + 1, self.m), order="F")
        ab[self.b :, :] = self._ab[self.b :, :]
        scale = self.max_abs()
        lu, ipiv, info = gbtrf(ab, self.b, self.b, overwrite_ab=True)
        if info > 0:
            raise SingularMatrixError(f"exact zero pivot at column {info - 1}")
        if info < 0:
            raise SingularMatrixError(f"gbtrf illegal argument {-info}")
        upper = np.abs(lu[2 * self.b, :])
        if scale > 0 and upper.min() < 1e-14 * scale:
            raise SingularMatrixError(
                f"near-zero pivot {upper.min():.3e} (matrix scale {scale:.3e})"
            )
        if scale == 0.0:
            raise SingularMatrixError("zero matrix is singular")
        self._lu = lu
        self._ipiv = ipiv

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        self.factor()
        gbtrs = get_lapack_funcs(("gbtrs",), (self._lu,))[0]
        x, info = gbtrs(self._lu, self.b, self.b, rhs, self._ipiv)
        if info != 0:
            raise SingularMatrixError(f"gbtrs failed with info={info}")
        return x


def banded_solve(a: BandedMatrix, rhs: np.ndarray) -> np.ndarray:
    """Solve A y = rhs, factoring (and caching) A on first use."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (a.m,):
        raise ConfigurationError(f"rhs length {rhs.shape} != matrix dimension {a.m}")
    return a.solve(rhs)


# -- ghost elimination -------------------------------------------------------

def _hermite_ghost_weights(bc_orders, node_offsets, ghost_offset):
    """Weights w with p(g*dx) = sum_j w_j p(o_j*dx) for every polynomial p of
    degree len(bc_orders)+len(node_offsets)-1 whose bc_orders-th derivatives
    vanish at offset 0.  Offsets are integers in units of dx; the weights are
    dx-independent because all constrained derivative values are zero."""
    conds = [(0.0, r) for r in bc_orders] + [(float(o), 0) for o in node_offsets]
    m = len(conds)
    mat = np.zeros((m, m))
    for c, (xi, r) in enumerate(conds):
        for k in range(r, m):
            coef = 1.0
            for j in range(r):
                coef *= k - j
            mat[c, k] = coef * xi ** (k - r)
    rhs = np.array([float(ghost_offset) ** k for k in range(m)])
    sol = np.linalg.solve(mat.T, rhs)
    return sol[len(bc_orders):]


def _ghost_tables(order: int, bc: str, n: int):
    """Ghost elimination weights for each out-of-range node index.

    Returns {index: list of (interior_node, weight)}; entries for the
    eliminated Dirichlet nodes 0 and n are empty.
    """
    left_bc, right_bc = BC_SETS[bc]
    reach = (len(_CENTERED[order]) - 1) // 2
    table = {0: [], n: []}
    depth = reach - 1  # ghost depth needed past each eliminated end node
    for g in range(1, depth + 1):
        # left ghosts at index -g
        if bc == "kdv_adjoint" and g == 1:
            table[-1] = [(1, 1.0)]  # u_x(0)=0 by reflection
        else:
            nodes = _extrap_nodes(order, len(left_bc))
            w = _hermite_ghost_weights(left_bc, nodes, -g)
            table[-g] = [(nodes[k], w[k]) for k in range(len(nodes))]
        # right ghosts at index n+g
        if bc == "kdv" and g == 1:
            table[n + 1] = [(n - 1, 1.0)]  # u_x(L)=0 by reflection
        else:
            nodes = _extrap_nodes(order, len(right_bc))
            w = _hermite_ghost_weights(right_bc, nodes, g)
            table[n + g] = [(n - nodes[k], w[k]) for k in range(len(nodes))]
    return table


def _extrap_nodes(order: int, n_bc: int):
    """Interior nodes used by the extrapolating polynomial.

    The polynomial degree is n_bc + n_nodes - 1; chosen so the ghost error is
    O(dx^(order+2)) and every boundary row keeps second-order truncation."""
    degree = order + 1  # ghost error O(dx^(degree+1))
    n_nodes = degree + 1 - n_bc
    return list(range(1, n_nodes + 1))


def build_derivative_matrix(grid: Grid1D, order: int, bc: str) -> BandedMatrix:
    """Banded derivative operator on interior unknowns for one bc set."""
    if order not in _CENTERED:
        raise ConfigurationError(f"unsupported derivative order {order}")
    if bc not in BC_SETS:
        raise ConfigurationError(f"unknown boundary-condition set '{bc}'")
    if order == 5 and bc != "kawahara":
        raise ConfigurationError("order-5 operator requires the kawahara bc set")
    n = grid.cell_count
    stencil = _CENTERED[order]
    reach = (len(stencil) - 1) // 2
    if n - 1 < 2 * reach + 4:
        raise ConfigurationError(f"n={n} too small for the order-{order} stencil")
    ghosts = _ghost_tables(order, bc, n)
    # assemble rows as dense row buffers, then pack
    rows = np.zeros((n - 1, n - 1))
    scale = 1.0 / grid.dx ** order
    for i in range(1, n):
        row = np.zeros(n - 1)
        for s, c in enumerate(stencil):
            if c == 0.0:
                continue
            j = i + s - reach
            if 1 <= j <= n - 1:
                row[j - 1] += c
            else:
                for node, w in ghosts[j]:
                    if 1 <= node <= n - 1:
                        row[node - 1] += c * w
        rows[i - 1] = row * scale
    bandwidth = 0
    for i in range(n - 1):
        nz = np.nonzero(rows[i])[0]
        if nz.size:
            bandwidth = max(bandwidth, int(np.abs(nz - i).max()))
    mat = BandedMatrix(n - 1, bandwidth)
    for i in range(n - 1):
        for j in np.nonzero(rows[i])[0]:
            mat.add(i, int(j), rows[i, j])
    return mat


# -- quadrature and boundary derivatives --------------------------------------

def trapezoid_weights(grid: Grid1D, window: OmegaWindow | None = None) -> np.ndarray:
    """Composite-trapezoid weights on all nodes (zero outside the window)."""
    w = np.zeros(grid.cell_count + 1)
    if window is None:
        w[:] = grid.dx
        w[0] = w[-1] = grid.dx / 2
    else:
        if window.i2 > grid.cell_count:
            raise ConfigurationError("window extends past the grid")
        w[window.i1 : window.i2 + 1] = grid.dx
        w[window.i1] = w[window.i2] = grid.dx / 2
    return w


def quadrature(grid: Grid1D, values: np.ndarray, window: OmegaWindow | None = None) -> float:
    """Trapezoid integral of node values over the full domain or a window."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.cell_count + 1,):
        raise ConfigurationError(
            f"expected {grid.cell_count + 1} node values, got {values.shape}"
        )
    return float(trapezoid_weights(grid, window) @ values)


def boundary_derivative(grid: Grid1D, u: np.ndarray, end: str, order: int) -> float:
    """One-sided second-order first or second derivative at an endpoint."""
    if grid.cell_count < 4:
        raise ConfigurationError("boundary derivative needs n >= 4")
    if end not in ("left", "right"):
        raise ConfigurationError(f"end must be 'left' or 'right', got {end!r}")
    if order not in (1, 2):
        raise ConfigurationError(f"boundary derivative order must be 1 or 2, got {order}")
    u = np.asarray(u, dtype=float)
    h = grid.dx
    if end == "left":
        a, b, c, d = u[0], u[1], u[2], u[3]
        sgn = 1.0
    else:
        a, b, c, d = u[-1], u[-2], u[-3], u[-4]
        sgn = -1.0
    if order == 1:
        return sgn * (-3 * a + 4 * b - c) / (2 * h)
    return (2 * a - 5 * b + 4 * c - d) / h ** 2


@lru_cache(maxsize=32)
def _cached_operator(length: float, n: int, order: int, bc: str) -> BandedMatrix:
    return build_derivative_matrix(Grid1D(length, n), order, bc)


def derivative_matrix(grid: Grid1D, order: int, bc: str) -> BandedMatrix:
    """Cached variant of build_derivative_matrix (operators are immutable
    once assembled; factorization state lives on the CN matrices, not here)."""
    return _cached_operator(grid.length, grid.cell_count, order, bc)
