"""Domain types: grids with tail models, the nonlinearity family, profiles and
solver parameters."""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import ContractError, DomainError

# ---------------------------------------------------------------------------
# tails and grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantTail:
    """u(x) = value beyond the grid end."""
    value: float

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)


@dataclass(frozen=True)
class PowerLawTail:
    """u(x) = coefficient * |x|**exponent beyond the (negative) left grid end."""
    coefficient: float
    exponent: float

    def __post_init__(self):
        if not self.coefficient > 0:
            raise ContractError("power-law tail needs a positive coefficient")
        if not self.exponent < 0:
            raise ContractError("power-law tail needs a negative exponent")

    def __call__(self, x):
        return self.coefficient * np.abs(np.asarray(x, dtype=float)) ** self.exponent


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid x_i = left_end + i*h, i = 0..n_points-1, with exterior models."""
    left_end: float
    right_end: float
    n_points: int
    left_tail: object = ConstantTail(0.0)
    right_tail: object = ConstantTail(1.0)

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ContractError("n_points must be an integer >= 2")
        if not self.right_end > self.left_end:
            raise ContractError("grid spacing must be positive")
        if not isinstance(self.right_tail, ConstantTail):
            raise ContractError("right tail must be a constant")
        if not isinstance(self.left_tail, (ConstantTail, PowerLawTail)):
            raise ContractError("unknown left tail model")
        if not isinstance(self.left_tail, ConstantTail) and self.left_end >= 0:
            raise ContractError("power-law tails need a negative left end")

    @property
    def h(self):
        return (self.right_end - self.left_end) / (self.n_points - 1)

    @cached_property
    def x(self):
        return self.left_end + self.h * np.arange(self.n_points)

    def with_tails(self, left=None, right=None):
        return replace(self, left_tail=self.left_tail if left is None else left,
                       right_tail=self.right_tail if right is None else right)

    def shifted(self, offset):
        return replace(self, left_end=self.left_end + offset,
                       right_end=self.right_end + offset)

    def compatible(self, other, rtol=1e-12):
        """Same spacing and overlapping ranges."""
        same_h = abs(self.h - other.h) <= rtol * max(self.h, other.h)
        overlap = min(self.right_end, other.right_end) > max(self.left_end, other.left_end)
        return same_h and overlap


def truncated_grid(r, right_end, n_points, vartheta=0.0, right_value=1.0):
    """Grid for the semi-truncated problem on (-r, right_end]; u = vartheta at x <= -r.

    The first unknown sits at -r + h so that the lattice point -r belongs to
    the exterior."""
    if r <= 0:
        raise DomainError("r must be positive")
    h = (right_end + r) / n_points
    return GridSpec(-r + h, right_end, n_points, ConstantTail(vartheta),
                    ConstantTail(right_value))


@dataclass(frozen=True)
class FractionalOrder:
    s: float

    def __post_init__(self):
        if not (0.5 < self.s < 1.0):
            raise DomainError("fractional order must satisfy 1/2 < s < 1, got %r" % self.s)

    def __float__(self):
        return float(self.s)


def fractional_order(s):
    return float(FractionalOrder(float(s)))


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------

def _lipschitz(dF):
    t = np.linspace(0.0, 1.0, 100001)
    return 1.05 * float(np.max(np.abs(dF(t))))


@dataclass(frozen=True)
class GeneralizedKPP:
    """F(tau) = scale * tau**p * (1 - tau)."""
    p: float = 3.0
    scale: float = 1.0
    theta: float = 0.5

    def __post_init__(self):
        if not self.p > 0 or not self.scale > 0:
            raise DomainError("p and scale must be positive")
        if not 0 < self.theta < 1:
            raise DomainError("theta must lie in (0, 1)")

    def evaluate(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.scale * tau ** self.p * (1.0 - tau)

    def derivative(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.scale * (self.p * tau ** (self.p - 1) - (self.p + 1) * tau ** self.p)

    @property
    def A1(self):
        return self.scale * (1.0 - self.theta)

    @property
    def A2(self):
        return self.scale

    @property
    def leading_coefficient(self):
        """F(tau) ~ leading_coefficient * tau**p as tau -> 0."""
        return self.scale

    @property
    def rho(self):
        return 0.0

    @cached_property
    def lipschitz_bound(self):
        return _lipschitz(self.derivative)

    def scaled(self, factor):
        return replace(self, scale=self.scale * factor)


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def smoothstep_derivative(t):
    t = np.clip(t, 0.0, 1.0)
    return 30.0 * t * t * (1.0 - t) ** 2


@dataclass(frozen=True)
class CombustionCutoff:
    """F_sigma = Lambda_sigma * F_base with a quintic ramp from sigma to 2 sigma."""
    base: GeneralizedKPP
    sigma: float

    def __post_init__(self):
        if not 0 < self.sigma < 0.5:
            raise DomainError("sigma must lie in (0, 1/2)")

    def cutoff(self, tau):
        return smoothstep((np.asarray(tau, dtype=float) - self.sigma) / self.sigma)

    def evaluate(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.cutoff(tau) * self.base.evaluate(tau)

    def derivative(self, tau):
        tau = np.asarray(tau, dtype=float)
        t = (tau - self.sigma) / self.sigma
        return (smoothstep_derivative(t) / self.sigma * self.base.evaluate(tau)
                + smoothstep(t) * self.base.derivative(tau))

    @property
    def p(self):
        return self.base.p

    @property
    def theta(self):
        return self.base.theta

    @property
    def A1(self):
        return self.base.A1

    @property
    def A2(self):
        return self.base.A2

    @property
    def leading_coefficient(self):
        return 0.0

    @property
    def rho(self):
        return self.sigma

    @cached_property
    def lipschitz_bound(self):
        return _lipschitz(self.derivative)

    def scaled(self, factor):
        return replace(self, base=self.base.scaled(factor))


@dataclass(frozen=True)
class ZeroNonlinearity:
    """F = 0; used for linear checks."""

    def evaluate(self, tau):
        return np.zeros_like(np.asarray(tau, dtype=float))

    def derivative(self, tau):
        return np.zeros_like(np.asarray(tau, dtype=float))

    p = 1.0
    theta = 0.5
    A1 = 0.0
    A2 = 0.0
    leading_coefficient = 0.0
    rho = 0.0
    lipschitz_bound = 0.0


def eval_nonlinearity(F, tau):
    """Evaluate F on [0, 1]; raises DomainError outside."""
    arr = np.asarray(tau, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("nonlinearity is defined on [0, 1] only")
    out = F.evaluate(arr)
    # exact zeros at the equilibria
    out = np.where((arr == 0.0) | (arr == 1.0), 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HypothesisReport:
    ok: bool
    A1: float
    A2: float
    theta: float
    rho: float
    violation: str = ""
    violation_at: float = float("nan")


def validate_hypotheses(F, n_samples=20001):
    """Certify the growth conditions of the nonlinearity by dense sampling.

    For the generalized KPP family A1 tau^p <= F <= A2 tau^p and
    F'(tau) >= A1 tau^(p-1) are checked on [0, theta]; for a combustion cutoff
    the ignition conditions (F = 0 on [0, rho], F > 0 on (rho, 1), F'(1) < 0)
    are checked instead."""
    one = np.array(1.0)
    if isinstance(F, CombustionCutoff):
        rho = F.sigma
        t_off = np.linspace(0.0, rho, n_samples)
        t_on = np.linspace(rho, 1.0, n_samples)[1:-1]
        f_off = F.evaluate(t_off)
        f_on = F.evaluate(t_on)
        if np.any(f_off != 0.0):
            k = int(np.argmax(f_off != 0.0))
            return HypothesisReport(False, F.A1, F.A2, F.theta, rho, "nonzero below ignition", t_off[k])
        if np.any(f_on <= 0.0):
            k = int(np.argmax(f_on <= 0.0))
            return HypothesisReport(False, F.A1, F.A2, F.theta, rho, "nonpositive above ignition", t_on[k])
        if not F.derivative(one) < 0 or F.evaluate(one) != 0.0:
            return HypothesisReport(False, F.A1, F.A2, F.theta, rho, "F(1) = 0 > F'(1) fails", 1.0)
        return HypothesisReport(True, F.A1, F.A2, F.theta, rho)

    p, theta, A1, A2 = F.p, F.theta, F.A1, F.A2
    t_in = np.linspace(0.0, 1.0, n_samples)[1:-1]
    if np.any(F.evaluate(t_in) <= 0.0) or F.evaluate(0.0) != 0.0 or F.evaluate(1.0) != 0.0:
        return HypothesisReport(False, A1, A2, theta, 0.0, "positivity", float("nan"))
    if not F.derivative(one) < 0:
        return HypothesisReport(False, A1, A2, theta, 0.0, "F'(1) < 0 fails", 1.0)
    t = np.linspace(0.0, theta, n_samples)[1:]
    f = F.evaluate(t)
    tp = t ** p
    slack = 1e-12
    low = f < A1 * tp * (1 - slack)
    high = f > A2 * tp * (1 + slack)
    deriv = F.derivative(t[:-1]) < A1 * t[:-1] ** (p - 1) * (1 - slack)
    for mask, name, tt in ((low, "A1 tau^p <= F", t), (high, "F <= A2 tau^p", t),
                           (deriv, "F' >= A1 tau^(p-1)", t[:-1])):
        if np.any(mask):
            return HypothesisReport(False, A1, A2, theta, 0.0, name, float(tt[np.argmax(mask)]))
    return HypothesisReport(True, A1, A2, theta, 0.0)


def critical_order(p):
    """Smallest fractional order for which generalized KPP fronts exist."""
    p = float(p)
    if not p > 2:
        raise DomainError("critical order is defined for p > 2 only")
    return p / (2.0 * (p - 1.0))


# ---------------------------------------------------------------------------
# profiles and parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FrontProfile:
    grid: GridSpec
    values: np.ndarray
    s: float
    mu: float
    epsilon: float = 0.0
    normalization_point: float = -1.0
    normalization_value: float = 0.5
    vartheta: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ContractError("profile length does not match the grid")
        object.__setattr__(self, "values", v)
        fractional_order(self.s)
        if self.epsilon < 0:
            raise DomainError("epsilon must be nonnegative")

    @property
    def x(self):
        return self.grid.x

    def at(self, xq):
        return np.interp(xq, self.x, self.values)

    def with_values(self, values, **kw):
        return replace(self, values=np.asarray(values, dtype=float), **kw)

    def with_grid(self, grid):
        return replace(self, grid=grid)

    def check_invariants(self, tol_mono=1e-9, tol_match=None):
        """Return a list of violated invariants (empty when all hold)."""
        v = self.values
        bad = []
        if v.min() < -tol_mono or v.max() > 1 + tol_mono:
            bad.append("bounds")
        if np.min(np.diff(v)) < -tol_mono:
            bad.append("monotone")
        if tol_match is not None:
            lt, rt = self.grid.left_tail, self.grid.right_tail
            x0 = self.grid.left_end
            if abs(float(lt(x0)) - v[0]) > tol_match:
                bad.append("left_match")
            if abs(rt.value - v[-1]) > tol_match:
                bad.append("right_match")
        return bad


def constant_profile(grid, c, s, mu=0.0, epsilon=0.0):
    return FrontProfile(grid.with_tails(ConstantTail(c), ConstantTail(c)),
                        np.full(grid.n_points, float(c)), s, mu, epsilon)


@dataclass(frozen=True)
class SolveParams:
    epsilon: float = 0.0
    mu: float = 1.0
    lambda_shift: float = None
    r: float = 100.0
    tol_iter: float = 1e-10
    tol_norm: float = 1e-8
    tol_mono: float = 1e-9
    max_iters: int = 20000
    epsilon_schedule: tuple = (0.5, 0.25, 0.1, 0.05, 0.02, 0.0)
    sigma_schedule: tuple = (0.2, 0.1, 0.05, 0.025, 0.0125)
    newton_polish: bool = True
    burn_in: int = 40

    def __post_init__(self):
        if self.epsilon < 0:
            raise DomainError("epsilon must be nonnegative")
        if self.r <= 0:
            raise DomainError("r must be positive")
        for name in ("tol_iter", "tol_norm", "tol_mono"):
            if not getattr(self, name) > 0:
                raise DomainError("%s must be positive" % name)
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise DomainError("max_iters must be a positive integer")
        for name in ("epsilon_schedule", "sigma_schedule"):
            sched = tuple(float(v) for v in getattr(self, name))
            if any(b >= a for a, b in zip(sched, sched[1:])):
                raise DomainError("%s must be strictly decreasing" % name)
            object.__setattr__(self, name, sched)
        if self.lambda_shift is not None and self.lambda_shift < 0:
            raise DomainError("lambda_shift must be nonnegative")

    def lam_for(self, F):
        """Shift used in the monotone scheme; must exceed the Lipschitz bound of F."""
        L = F.lipschitz_bound
        if self.lambda_shift is None:
            return 1.05 * L + 1.0
        if not self.lambda_shift > L:
            raise DomainError("lambda_shift %.4g does not exceed the Lipschitz bound %.4g"
                              % (self.lambda_shift, L))
        return float(self.lambda_shift)

    def but(self, **kw):
        return replace(self, **kw)
