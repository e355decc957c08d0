"""Lattice discretization of u -> -eps u'' + (-Delta)^s u + mu u' + lam u.

The kernel |x - y|^{-1-2s} is used without normalizing constant.  On the
uniform lattice the principal value integral is replaced by the full lattice
sum h^{-2s} sum_{j != i} |i - j|^{-1-2s} (u_i - u_j), extended to j outside
the grid through the declared tail models, plus a near-field correction
kappa h^{-2s} (2 u_i - u_{i-1} - u_{i+1}).  With kappa = -zeta(2s - 1) the
scheme is exact on the quadratic part of the singular integrand, which is
what a Taylor-corrected trapezoid rule aims at.  Lattice sums over constant
tails are Hurwitz zeta values, so constants are annihilated to rounding and
the kernel block is exactly Toeplitz.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.linalg import matmul_toeplitz, toeplitz
from scipy.signal import fftconvolve
from scipy.special import zeta

from .errors import ContractError
from .model import ConstantTail, PowerLawTail, fractional_order

_TAIL_TERMS = 2 ** 18


def symbol_constant(s):
    """c(s) = int_R (1 - cos z) |z|^{-1-2s} dz, by adaptive quadrature."""
    s = fractional_order(s)
    # (1 - cos z)/z^2 is smooth on [0, 1]; the algebraic weight carries z^{1-2s}
    near = quad(lambda z: (1.0 - np.cos(z)) / z ** 2 if z > 0 else 0.5, 0.0, 1.0,
                weight="alg", wvar=(1.0 - 2.0 * s, 0.0))[0]
    far_cos = quad(lambda z: z ** (-1.0 - 2.0 * s), 1.0, np.inf, weight="cos",
                   wvar=1.0, limlst=200)[0]
    return 2.0 * (near + 1.0 / (2.0 * s) - far_cos)


def near_field_coefficient(s):
    return float(-zeta(2.0 * s - 1.0))


def kernel_column(n, s, h):
    """First column of the symmetric Toeplitz kernel block (near field included)."""
    kap = near_field_coefficient(s)
    k = np.arange(n, dtype=float)
    k[0] = 1.0
    col = -k ** (-1.0 - 2.0 * s)
    col[0] = 2.0 * zeta(1.0 + 2.0 * s) + 2.0 * kap
    if n > 1:
        col[1] -= kap
    return col * h ** (-2.0 * s)


def constant_tail_weights(n, s, h):
    """Kernel weights of a unit constant beyond the left and right grid ends."""
    kap = near_field_coefficient(s)
    i = np.arange(n, dtype=float)
    wl = zeta(1.0 + 2.0 * s, i + 1.0)
    wr = zeta(1.0 + 2.0 * s, n - i)
    wl[0] += kap
    wr[-1] += kap
    scale = h ** (-2.0 * s)
    return wl * scale, wr * scale


def _power_tail_sum(n, s, h, x0, exponent, coefficient):
    """sum_{k >= 1} (i + k)^{-1-2s} g_k with g_k = coefficient*(|x0| + k h)^exponent.

    Explicit lattice sum over the first 2^18 ghost points by FFT correlation,
    remainder by the midpoint-rule integral of the summand."""
    K = _TAIL_TERMS
    a = abs(x0)
    k = np.arange(1, K + 1, dtype=float)
    g = coefficient * (a + k * h) ** exponent
    w = np.arange(n + K, dtype=float)
    w[0] = 1.0
    w = w ** (-1.0 - 2.0 * s)
    w[0] = 0.0
    full = fftconvolve(w, g[::-1])
    # full[m] = sum_k w[m - K + k] g_k
    partial = full[K:K + n]
    i = np.arange(n, dtype=float)

    def integrand(t):
        return (i + t) ** (-1.0 - 2.0 * s) * coefficient * (a + t * h) ** exponent

    rem = quad_vec(integrand, K + 0.5, np.inf, epsabs=1e-16, epsrel=1e-10)[0]
    return partial + rem


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense matrix of the discrete operator and the exterior load.

    (operator u)_i = (matrix @ u - load)_i for grid values u with the grid's
    declared tails."""
    matrix: np.ndarray
    load: np.ndarray
    left_weights: np.ndarray
    right_weights: np.ndarray
    s: float
    epsilon: float
    mu: float
    lam: float
    h: float
    advection: str
    grid: object

    def constant_load(self, left_value, right_value):
        return left_value * self.left_weights + right_value * self.right_weights

    def apply(self, u, load=None):
        return self.matrix @ u - (self.load if load is None else load)

    @property
    def n(self):
        return self.matrix.shape[0]


def _local_coefficients(h, epsilon, mu, advection):
    """Diagonal, sub- and super-diagonal of -eps u'' + mu u'."""
    d2 = epsilon / h ** 2
    if advection == "upwind":
        diag = 2 * d2 + abs(mu) / h
        lower = -d2 - max(mu, 0.0) / h
        upper = -d2 - max(-mu, 0.0) / h
    elif advection == "central":
        diag = 2 * d2
        lower = -d2 - mu / (2 * h)
        upper = -d2 + mu / (2 * h)
    else:
        raise ContractError("advection must be 'upwind' or 'central'")
    return diag, lower, upper


def _left_ghost(grid):
    """Value of the left tail model at the first exterior lattice point."""
    x_ghost = grid.left_end - grid.h
    lt = grid.left_tail
    return float(lt(x_ghost))


def _left_tail_kernel_load(grid, s):
    """Kernel part of the load produced by the left tail (near field included)."""
    n, h = grid.n_points, grid.h
    lt = grid.left_tail
    if isinstance(lt, ConstantTail):
        wl, _ = constant_tail_weights(n, s, h)
        return lt.value * wl
    if isinstance(lt, PowerLawTail):
        out = _power_tail_sum(n, s, h, grid.left_end, lt.exponent, lt.coefficient)
        out[0] += near_field_coefficient(s) * _left_ghost(grid)
        return out * h ** (-2.0 * s)
    raise ContractError("unknown left tail model")


def frac_laplacian_apply(profile):
    """(-Delta)^s u at every grid point of a profile with declared tails."""
    grid = profile.grid
    if grid.left_tail is None or grid.right_tail is None:
        raise ContractError("profile needs tail models at both ends")
    s = fractional_order(profile.s)
    u = np.asarray(profile.values, dtype=float)
    n, h = grid.n_points, grid.h
    col = kernel_column(n, s, h)
    out = matmul_toeplitz((col, col), u)
    out = out - _left_tail_kernel_load(grid, s)
    _, wr = constant_tail_weights(n, s, h)
    return out - grid.right_tail.value * wr


def assemble_operator(grid, s, epsilon, mu, lam=0.0, advection="upwind"):
    """Dense OperatorMatrix for -eps u'' + (-Delta)^s u + mu u' + lam u on grid."""
    s = fractional_order(s)
    h = grid.h
    if not h > 0:
        raise ContractError("grid spacing must be positive")
    if epsilon < 0:
        raise ContractError("epsilon must be nonnegative")
    if lam < 0:
        raise ContractError("lambda must be nonnegative")
    n = grid.n_points
    if n < 16:
        raise ContractError("at least 16 grid points are required")
    col = kernel_column(n, s, h)
    row = col.copy()
    diag, lower, upper = _local_coefficients(h, epsilon, mu, advection)
    col[0] += diag + lam
    row[0] = col[0]
    col[1] += lower
    row[1] += upper
    A = toeplitz(col, row)

    wl, wr = constant_tail_weights(n, s, h)
    wl[0] -= lower
    wr[-1] -= upper

    if isinstance(grid.left_tail, ConstantTail):
        load = grid.left_tail.value * wl
    else:
        load = _left_tail_kernel_load(grid, s)
        load[0] -= lower * _left_ghost(grid)
    load = load + grid.right_tail.value * wr
    return OperatorMatrix(A, load, wl, wr, s, float(epsilon), float(mu), float(lam), h,
                          advection, grid)


@dataclass(frozen=True)
class MMatrixReport:
    is_m_matrix: bool
    worst_row: int
    worst_margin: float
    min_diagonal: float
    max_offdiagonal: float


def mmatrix_check(A, tol=0.0):
    """Sign pattern and weak diagonal dominance, row by row.

    worst_row is the row with the smallest margin diag - sum |offdiag| (or the
    first row with a sign violation)."""
    M = A.matrix if isinstance(A, OperatorMatrix) else np.asarray(A)
    d = np.diag(M).copy()
    off = M - np.diag(d)
    max_off_row = off.max(axis=1)
    margin = d - np.abs(off).sum(axis=1)
    sign_bad = (d <= 0) | (max_off_row > tol)
    if np.any(sign_bad):
        worst = int(np.argmax(sign_bad))
    else:
        worst = int(np.argmin(margin))
    ok = (not np.any(sign_bad)) and bool(np.all(margin >= -tol * np.abs(d)))
    return MMatrixReport(bool(ok), worst, float(margin[worst]), float(d.min()),
                         float(max_off_row.max()))
