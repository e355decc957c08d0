"""Checks of computed fronts against the identities and asymptotics they must
satisfy: speed integral, left-tail decay, tail limit, L2 norms, the power-law
super-solution, the barrier inequality and uniqueness under translation."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar
from scipy.special import binom

from .errors import ContractError, DomainError, WindowError
from .model import ConstantTail, GridSpec, PowerLawTail, fractional_order
from .nonlocal_operator import frac_laplacian_apply

# ---------------------------------------------------------------------------
# speed identity
# ---------------------------------------------------------------------------


@dataclass
class IdentityResult:
    rel_err: float
    mu: float
    bulk: float
    left_term: float
    right_term: float
    left_exponent: float


def left_power_tail(profile, mode="fit", decades=1.0):
    """Power-law model of the profile beyond its left end, matched at left_end.

    mode 'declared' uses the exponent -(2s - 1); mode 'fit' uses the local
    log-log slope over the outermost `decades` of |x|."""
    lt = profile.grid.left_tail
    if isinstance(lt, PowerLawTail):
        return lt
    x0 = profile.grid.left_end
    u0 = float(profile.values[0])
    if x0 >= 0 or u0 <= 0:
        return None
    if mode == "declared":
        a = -(2 * profile.s - 1)
    elif mode == "fit":
        x = profile.x
        sel = (x <= x0 / 10 ** decades) & (profile.values > 0)
        if sel.sum() < 8:
            a = -(2 * profile.s - 1)
        else:
            a = float(np.polyfit(np.log(-x[sel]), np.log(profile.values[sel]), 1)[0])
    else:
        raise ValueError("mode must be 'fit' or 'declared'")
    if not a < 0:
        return None
    return PowerLawTail(u0 * abs(x0) ** (-a), a)


def speed_identity(profile, F, left_mode="fit", right_mode="model"):
    """|mu (u(+inf) - u(-inf)) - int F(u)| / mu for a 0 -> 1 front.

    The bulk integral is the trapezoid rule on the grid.  Beyond the left end
    F ~ A u^p is integrated over the power-law tail model (left_mode 'fit',
    'declared' or 'none').  Beyond the right end F ~ F'(1)(u - 1) is
    integrated over the declared right tail: the constant 1 contributes
    nothing.  right_mode='asymptotic' adds the mass of the continuum tail
    1 - u ~ x^{-2s}/(2s|F'(1)|) instead, which on a truncated domain counts
    the exterior flux a second time."""
    u = profile.values
    if not isinstance(profile.grid.right_tail, ConstantTail):
        raise ContractError("front must have a constant right tail")
    if np.ptp(u) < 1e-14:
        integral = trapezoid(F.evaluate(np.clip(u, 0, 1)), profile.x)
        err = abs(integral)
        return IdentityResult(err, profile.mu, integral, 0.0, 0.0, float("nan"))
    if np.min(np.diff(u)) < -1e-8 or profile.grid.right_tail.value != 1.0:
        raise ContractError("speed identity needs a non-decreasing profile with right tail 1")
    if right_mode not in ("model", "asymptotic", "none"):
        raise ValueError("right_mode must be 'model', 'asymptotic' or 'none'")
    s = profile.s
    mu = profile.mu
    bulk = float(trapezoid(F.evaluate(np.clip(u, 0, 1)), profile.x))
    left = 0.0
    a = float("nan")
    if left_mode != "none":
        lt = profile.grid.left_tail
        if isinstance(lt, ConstantTail) and lt.value == 0.0:
            left = 0.0
        else:
            tail = left_power_tail(profile, left_mode)
            if tail is not None and F.leading_coefficient > 0:
                a = tail.exponent
                p = F.p
                x0 = abs(profile.grid.left_end)
                if a * p >= -1:
                    left = float("inf")
                else:
                    left = F.leading_coefficient * tail.coefficient ** p * x0 ** (1 + a * p) / (-1 - a * p)
    right = 0.0
    if right_mode == "asymptotic" and profile.grid.right_end > 0:
        right = profile.grid.right_end ** (1 - 2 * s) / (2 * s * (2 * s - 1))
    total = bulk + left + right
    return IdentityResult(abs(mu - total) / abs(mu), mu, bulk, left, right, a)


# ---------------------------------------------------------------------------
# decay and tail limit
# ---------------------------------------------------------------------------


@dataclass
class DecayFit:
    slope: float
    intercept: float
    window: tuple
    n_points: int
    target: float


def _window_mask(profile, window):
    x = profile.x
    lo, hi = window
    sel = (x >= lo) & (x <= hi) & (profile.values > 0) & (x < 0)
    if sel.sum() < 8:
        raise WindowError("only %d points in the window [%g, %g]" % (sel.sum(), lo, hi))
    return sel


def decay_fit(profile, x_fit=10.0, window=None):
    """Least-squares slope of log phi against log|x| on [left_end, -x_fit]."""
    if window is None:
        window = (profile.grid.left_end, -abs(x_fit))
    sel = _window_mask(profile, window)
    lx = np.log(-profile.x[sel])
    lu = np.log(profile.values[sel])
    slope, intercept = np.polyfit(lx, lu, 1)
    return DecayFit(float(slope), float(intercept), tuple(window), int(sel.sum()),
                    -(2 * profile.s - 1))


def tail_limit(profile, alpha=1.0, x_fit=10.0, window=None):
    """Mean of phi(x) |alpha x|^{2s-1} on the window, and its spread over the
    outermost half-decade."""
    if window is None:
        window = (profile.grid.left_end, -abs(x_fit))
    sel = _window_mask(profile, window)
    x = profile.x[sel]
    ratio = profile.values[sel] * np.abs(alpha * x) ** (2 * profile.s - 1)
    outer = x <= window[0] / 10 ** 0.5
    if outer.sum() < 2:
        raise WindowError("window too short for a half-decade spread")
    return float(ratio.mean()), float(np.ptp(ratio[outer]))


# ---------------------------------------------------------------------------
# L2 norms and the energy balance
# ---------------------------------------------------------------------------


def l2_tail_norms(profile, F=None, r=None):
    """Discrete L2 norms of u', u'', (-Delta)^s u over the grid and of 1 - u
    over [-r, right_end]; with F given, also the energy balance
    int F(u) u = eps |u'|^2 + mu/2 + int u (-Delta)^s u."""
    x, u, h = profile.x, profile.values, profile.grid.h
    du = np.gradient(u, h)
    d2u = np.zeros_like(u)
    d2u[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h ** 2
    lap = frac_laplacian_apply(profile)
    if r is None:
        r = -profile.grid.left_end
    sel = x >= -r
    out = {
        "du": float(np.sqrt(trapezoid(du ** 2, x))),
        "d2u": float(np.sqrt(trapezoid(d2u ** 2, x))),
        "fraclap_u": float(np.sqrt(trapezoid(lap ** 2, x))),
        "one_minus_u_right": float(np.sqrt(trapezoid((1 - u[sel]) ** 2, x[sel]))),
    }
    if F is not None and np.ptp(u) > 0:
        reaction = float(trapezoid(F.evaluate(np.clip(u, 0, 1)) * u, x))
        eps_term = profile.epsilon * out["du"] ** 2
        nonlocal_term = float(trapezoid(u * lap, x))
        half_mu = 0.5 * profile.mu * (u[-1] ** 2 - u[0] ** 2)
        out["energy_lhs"] = reaction
        out["energy_eps_term"] = eps_term
        out["energy_nonlocal_term"] = nonlocal_term
        out["energy_rel_residual"] = abs(reaction - eps_term - half_mu - nonlocal_term) / abs(reaction)
        out["eps_du2_bound_ok"] = bool(eps_term <= reaction - 0.5 * profile.mu + 1e-12
                                       or nonlocal_term < 0)
    return out


def l2_stability(norms_a, norms_b, keys=("du", "d2u", "fraclap_u", "one_minus_u_right"), tol=0.05):
    """Relative change of each norm between two runs (e.g. right_end doubled)."""
    rel = {k: abs(norms_b[k] - norms_a[k]) / max(abs(norms_a[k]), 1e-300) for k in keys}
    return rel, all(v < tol for v in rel.values())


# ---------------------------------------------------------------------------
# the power-law super-solution
# ---------------------------------------------------------------------------


def gamma_profile(x, s, alpha=1.0):
    """Gamma_alpha(x) = |alpha x|^{1-2s} for x <= -1 and 1 for x > -1."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    left = x <= -1
    out[left] = np.abs(alpha * x[left]) ** (1 - 2 * s)
    return out


@dataclass
class GammaResidual:
    min_residual: float
    scale: float
    argmin_x: float
    x: np.ndarray
    residual: np.ndarray

    @property
    def tol_resid(self):
        return 1e-3 * self.scale

    @property
    def ok(self):
        return bool(self.min_residual >= -self.tol_resid)

    def min_over(self, x_max):
        sel = self.x <= x_max
        return float(self.residual[sel].min())


def gamma_supersolution_residual(s, epsilon, mu, F, grid=None, check_bound=False):
    """-eps Gamma'' + (-Delta)^s Gamma + mu Gamma' - F(Gamma) on the grid points.

    (-Delta)^s is applied with the exact power-law tail on the left; Gamma'
    and Gamma'' are taken analytically (one-sided at the corner x = -1)."""
    from .speed_finder import nu_bound

    s = fractional_order(s)
    if check_bound and mu < nu_bound(s, epsilon, F.A2):
        raise DomainError("mu is below the speed bound")
    if grid is None:
        grid = GridSpec(-400.0, 50.0, 4501)
    if grid.left_end >= -1:
        raise ContractError("grid must extend left of -1")
    a = -(2 * s - 1)
    grid = grid.with_tails(PowerLawTail(1.0, a), ConstantTail(1.0))
    x = grid.x
    g = gamma_profile(x, s)
    from .model import FrontProfile

    lap = frac_laplacian_apply(FrontProfile(grid, g, s, mu, epsilon))
    ax = np.maximum(np.abs(x), 1.0)
    dg = np.where(x <= -1, (2 * s - 1) * ax ** (-2 * s), 0.0)
    d2g = np.where(x < -1, -(2 * s - 1) * 2 * s * ax ** (-2 * s - 1), 0.0)
    res = -epsilon * d2g + lap + mu * dg - F.evaluate(np.clip(g, 0, 1))
    k = int(np.argmin(res))
    return GammaResidual(float(res[k]), float(np.max(np.abs(res))), float(x[k]), x, res)


# ---------------------------------------------------------------------------
# barrier inequality
# ---------------------------------------------------------------------------


def _pair_sum(t, s):
    """f(1 + t) + f(1 - t) for f(z) = 1 - z^{1-2s}, stable for small t."""
    b = 1 - 2 * s
    t = np.asarray(t, dtype=float)
    series = -2 * (binom(b, 2) * t ** 2 + binom(b, 4) * t ** 4 + binom(b, 6) * t ** 6
                   + binom(b, 8) * t ** 8)
    direct = 2 - (1 + t) ** b - (1 - t) ** b
    return np.where(t < 0.05, series, direct)


@lru_cache(maxsize=256)
def barrier_integral(s, vartheta):
    """I' = PV int_{vartheta^{1/2}}^inf (z^{2s-1} - 1) / (z^{2s-1} |1 - z|^{2s+1}) dz.

    Split at z = 1: on [a, 2 - a] the principal value pairs z = 1 +- t, which
    turns the integrand into an integrable t^{1-2s} singularity."""
    s = float(s)
    a = float(np.sqrt(vartheta))
    d = 1.0 - a

    def paired(t):
        if t == 0:
            return -binom(1 - 2 * s, 2) * 2
        return float(_pair_sum(t, s)) / t ** 2

    near = quad(paired, 0.0, d, weight="alg", wvar=(1 - 2 * s, 0.0), epsabs=1e-13, limit=200)[0]
    far = quad(lambda z: (1 - z ** (1 - 2 * s)) * (z - 1) ** (-1 - 2 * s), 2 - a, np.inf,
               epsabs=1e-13, limit=200)[0]
    return near + far


def _J(s, z0, vartheta):
    """PV int_{z0}^inf (1 - z^{1-2s}) |1-z|^{-1-2s} dz for 0 < z0 < vartheta^{1/2}."""
    a = np.sqrt(vartheta)
    extra = quad(lambda z: (1 - z ** (1 - 2 * s)) * (1 - z) ** (-1 - 2 * s), z0, a,
                 epsabs=1e-14, epsrel=1e-11, limit=200)[0]
    return barrier_integral(s, vartheta) + extra


@dataclass
class BarrierResult:
    max_value: float
    x: np.ndarray
    values: np.ndarray


def barrier_check(s, mu, m, M, eps0, eps, R, vartheta, alpha, R_eps0, phi_at_R_eps0,
                  n_x=200, x_span=1e4, full=False):
    """max over x < -R/vartheta of (-Delta)^s varphi + mu varphi' for the
    piecewise barrier varphi = g Gamma_alpha."""
    s = fractional_order(s)
    if not (0 < eps < eps0 < (M - m) / 4):
        raise ContractError("need 0 < eps < eps0 < (M - m)/4")
    if not (alpha > 1 and R > 1 and 1 < R_eps0 < R):
        raise ContractError("need alpha > 1 and 1 < R_eps0 < R")
    if not 0 < vartheta < 1:
        raise ContractError("vartheta must lie in (0, 1)")
    if not 0 < phi_at_R_eps0 <= 1:
        raise ContractError("phi(-R_eps0) must lie in (0, 1]")
    b = 1 - 2 * s
    k = alpha ** b
    c1 = (m + eps) * k
    b1 = -R / np.sqrt(vartheta)
    # pieces to the right of b1: (start, end, coefficient of |y|^{1-2s})
    pieces = [(b1, -R, 0.5 * (M + m) * k), (-R, -R_eps0, (m - eps0) * k),
              (-R_eps0, -1.0, phi_at_R_eps0 * k)]
    xs = -(R / vartheta) * np.geomspace(1.0 + 1e-9, x_span, n_x)
    vals = np.empty_like(xs)
    for idx, x in enumerate(xs):
        phi_x = c1 * abs(x) ** b
        near = c1 * abs(x) ** (1 - 4 * s) * _J(s, b1 / x, vartheta)
        right = phi_x * (b1 - x) ** (-2 * s) / (2 * s)
        for lo, hi, c in pieces:
            right -= c * quad(lambda y: abs(y) ** b * (y - x) ** (-1 - 2 * s), lo, hi,
                              epsabs=0.0, epsrel=1e-11, limit=200)[0]
        right -= phi_at_R_eps0 * (-1.0 - x) ** (-2 * s) / (2 * s)
        drift = mu * c1 * (2 * s - 1) * abs(x) ** (-2 * s)
        vals[idx] = near + right + drift
    out = BarrierResult(float(vals.max()), xs, vals)
    return out if full else out.max_value


def scan_barrier(s, mu, m, M, eps0, eps, vartheta, R_eps0, phi_at_R_eps0,
                 alphas=None, Rs=None):
    """First (alpha, R) on a geometric grid with barrier_check < 0, or None."""
    alphas = np.geomspace(2, 1e4, 14) if alphas is None else alphas
    Rs = np.geomspace(max(2 * R_eps0, 2), 1e4, 8) if Rs is None else Rs
    for al in alphas:
        for R in Rs:
            v = barrier_check(s, mu, m, M, eps0, eps, R, vartheta, al, R_eps0, phi_at_R_eps0)
            if v < 0:
                return float(al), float(R), v
    return None


# ---------------------------------------------------------------------------
# uniqueness under translation
# ---------------------------------------------------------------------------


def uniqueness_sliding(phi1, phi2, r=None, n_coarse=None):
    """min over tau in [-r, r] of sup |phi1(. + tau) - phi2| on the common range.

    A coarse scan picks the basin, golden-section search refines tau; phi1 is
    evaluated off-grid by cubic spline interpolation."""
    if not phi1.grid.compatible(phi2.grid, rtol=1e-9):
        raise ContractError("profiles live on incompatible grids")
    x1, u1 = phi1.x, phi1.values
    x2, u2 = phi2.x, phi2.values
    h = phi1.grid.h
    if r is None:
        r = min(abs(phi1.grid.left_end), abs(phi2.grid.left_end), 0.25 * (x1[-1] - x1[0]))
    spline = CubicSpline(x1, u1)

    def objective(tau):
        y = x2 + tau
        sel = (y >= x1[0]) & (y <= x1[-1])
        if sel.sum() < 8:
            return np.inf
        return float(np.max(np.abs(spline(y[sel]) - u2[sel])))

    if n_coarse is None:
        n_coarse = int(min(4001, 2 * r / h + 1))
    taus = np.linspace(-r, r, n_coarse)
    vals = np.array([objective(t) for t in taus])
    k = int(np.argmin(vals))
    lo = taus[max(k - 1, 0)]
    hi = taus[min(k + 1, len(taus) - 1)]
    opt = minimize_scalar(objective, bracket=None, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, h), "maxiter": 500})
    # golden-section polish inside the bounded basin
    a, b = lo, hi
    gr = (np.sqrt(5) - 1) / 2
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(200):
        if b - a < 1e-12 * max(1.0, h):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = objective(d)
    cands = [(opt.fun, opt.x), (fc, c), (fd, d), (vals[k], taus[k])]
    best = min(cands, key=lambda t: t[0])
    return float(best[1]), float(best[0])


# ---------------------------------------------------------------------------
# aggregate report
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticsReport:
    speed_identity_rel_err: float = float("nan")
    decay_slope: float = float("nan")
    decay_slope_target: float = float("nan")
    tail_limit_estimate: float = float("nan")
    tail_limit_spread: float = float("nan")
    l2_norms: dict = field(default_factory=dict)
    gamma_residual_min: float = float("nan")
    barrier_max: float = float("nan")
    uniqueness_residual: float = float("nan")
    checks: dict = field(default_factory=dict)
    pass_: bool = False

    @property
    def passed(self):
        return self.pass_

    def as_pairs(self):
        pairs = [("pass", str(self.pass_).lower()),
                 ("speed_identity_rel_err", self.speed_identity_rel_err),
                 ("decay_slope", self.decay_slope),
                 ("decay_slope_target", self.decay_slope_target),
                 ("tail_limit_estimate", self.tail_limit_estimate),
                 ("tail_limit_spread", self.tail_limit_spread),
                 ("gamma_residual_min", self.gamma_residual_min),
                 ("barrier_max", self.barrier_max),
                 ("uniqueness_residual", self.uniqueness_residual)]
        pairs += [("l2_" + k, v) for k, v in sorted(self.l2_norms.items())]
        pairs += [("check_" + k, str(v).lower()) for k, v in sorted(self.checks.items())]
        return pairs


def diagnostics_report(profile, F, x_fit=10.0, other=None, tol_mono=1e-8, left_mode="fit"):
    """All single-profile checks. pass = bounds and monotonicity, speed
    identity < 2%, decay slope within 10% of -(2s - 1), tail-limit
    spread/estimate < 0.1 (and sliding residual < 5e-3 when `other` is given)."""
    from .speed_finder import nu_bound

    rep = DiagnosticsReport()
    s = profile.s
    rep.checks["invariants"] = not profile.check_invariants(tol_mono)
    try:
        rep.speed_identity_rel_err = speed_identity(profile, F, left_mode).rel_err
    except ContractError:
        rep.speed_identity_rel_err = float("inf")
    rep.checks["speed_identity"] = bool(rep.speed_identity_rel_err < 0.02)
    rep.decay_slope_target = -(2 * s - 1)
    try:
        fit = decay_fit(profile, x_fit)
        rep.decay_slope = fit.slope
        est, spread = tail_limit(profile, 1.0, x_fit)
        rep.tail_limit_estimate, rep.tail_limit_spread = est, spread
    except WindowError:
        pass
    rep.checks["decay_slope"] = bool(abs(rep.decay_slope - rep.decay_slope_target)
                                     <= 0.1 * abs(rep.decay_slope_target))
    rep.checks["tail_limit"] = bool(rep.tail_limit_spread < 0.1 * rep.tail_limit_estimate)
    rep.l2_norms = {k: v for k, v in l2_tail_norms(profile, F).items() if not isinstance(v, bool)}
    if getattr(F, "A2", 0) > 0:
        nu = nu_bound(s, profile.epsilon, F.A2)
        rep.gamma_residual_min = gamma_supersolution_residual(
            s, profile.epsilon, max(profile.mu, nu), F).min_residual
    if other is not None:
        rep.uniqueness_residual = uniqueness_sliding(profile, other)[1]
        rep.checks["uniqueness"] = bool(rep.uniqueness_residual < 5e-3)
    rep.pass_ = all(rep.checks.values())
    return rep
