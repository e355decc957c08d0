"""Combustion speeds, the sigma -> 0 extrapolation of the critical speed, the
analytic upper bound, and fronts by viscous continuation."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .bvp_solver import ShiftedProblem, _root, monotone_iterate, normalize_theta
from .errors import BracketError, ContinuationError, DomainError, OrderingError
from .model import CombustionCutoff, ConstantTail, FrontProfile, fractional_order


def nu_bound(s, epsilon, A2):
    """Speed above which the power-law profile is a super-solution."""
    s = float(s)
    if not s > 0.5:
        raise DomainError("the speed bound is singular for s <= 1/2")
    fractional_order(s)
    if epsilon < 0 or not A2 > 0:
        raise DomainError("need epsilon >= 0 and A2 > 0")
    return 2 * s * epsilon + 1.0 / (2 * s * (2 * s - 1)) + (A2 + 1.0) / (2 * s - 1)


@dataclass
class CombustionResult:
    mu_c: float
    profile: FrontProfile
    identity_rel_err: float
    scan: list = field(default_factory=list)
    evaluations: int = 0

    def __iter__(self):
        return iter((self.mu_c, self.profile))


def combustion_speed(F_sigma, epsilon, grid, params, s, x_phase=0.0, mu_max=None, n_scan=12,
                     mu_tol=1e-10):
    """Unique speed of the combustion front with phase phi(x_phase) = (sigma + 1)/2.

    The exterior value is 0 on the left.  phi_mu(x_phase) is evaluated on a
    scan of (0, mu_max] (default mu_max = nu_bound); the sign change is refined
    by Brent's method.  Solutions at a larger speed are sub-solutions at a
    smaller one, so every solve is warm-started from the nearest faster one."""
    from .diagnostics import speed_identity

    if not isinstance(F_sigma, CombustionCutoff):
        raise DomainError("combustion_speed needs a CombustionCutoff nonlinearity")
    s = fractional_order(s)
    grid = grid.with_tails(left=ConstantTail(0.0), right=ConstantTail(1.0))
    target = 0.5 * (F_sigma.sigma + 1.0)
    if mu_max is None:
        mu_max = nu_bound(s, epsilon, F_sigma.A2)
    lam = params.but(epsilon=epsilon).lam_for(F_sigma)
    cache = {}

    def solve(mu):
        faster = [m for m in cache if m >= mu]
        start = cache[min(faster)].values if faster else None
        prob = ShiftedProblem(F_sigma, grid, s, epsilon, mu, lam)
        prof, _ = monotone_iterate(F_sigma, params.but(epsilon=epsilon, mu=mu), grid,
                                   sub=start, problem=prob, vartheta=0.0, check_inputs=False)
        cache[mu] = prof
        return prof

    def g(mu):
        prof = cache[mu] if mu in cache else solve(mu)
        return float(prof.at(x_phase)) - target

    mus = np.linspace(mu_max, mu_max / n_scan, n_scan)
    table = []
    bracket = None
    for k, m in enumerate(mus):
        val = g(m)
        table.append((float(m), val + target))
        if k and np.sign(val) != np.sign(table[-2][1] - target):
            bracket = (m, mus[k - 1])
            break
    if bracket is None:
        # the phase value may still cross between the last scan point and 0
        m = 1e-3
        val = g(m)
        table.append((m, val + target))
        if np.sign(val) != np.sign(table[-2][1] - target):
            bracket = (m, mus[-1])
    if bracket is None:
        raise BracketError("no sign change of phi_mu(%g) - %g on (1e-3, %g]"
                           % (x_phase, target, mu_max), table)
    mu_c = _root(g, bracket[0], bracket[1], ftol=1e-12, xtol=mu_tol)
    prof = cache[mu_c]
    prof = FrontProfile(prof.grid, prof.values, s, mu_c, epsilon, x_phase, target, 0.0,
                        {"sigma": F_sigma.sigma})
    rel = speed_identity(prof, F_sigma).rel_err
    return CombustionResult(float(mu_c), prof, rel, table, len(cache))


@dataclass
class SpeedEstimate:
    sigma_schedule: np.ndarray
    mu_values: np.ndarray
    extrapolated_mu_star: float
    fit_exponent: float
    epsilon: float
    nu_bound: float
    identity_rel_errs: np.ndarray = None
    fit_coefficient: float = float("nan")
    fit_residual: float = float("nan")
    ordering_ok: bool = True
    worst_pair: tuple = None
    profiles: list = field(default_factory=list)

    @property
    def q(self):
        return self.fit_exponent

    @property
    def bound_ok(self):
        return bool(self.extrapolated_mu_star <= self.nu_bound)


def fit_extrapolation(sigmas, mus):
    """Fit mu(sigma) = mu_star - c sigma^q through the given points.

    Returns (mu_star, c, q, residual).  Falls back to mu_star = max(mus) with
    q = nan when the data are not strictly increasing toward sigma -> 0."""
    sig = np.asarray(sigmas, dtype=float)
    mu = np.asarray(mus, dtype=float)
    if len(mu) < 3 or np.any(np.diff(mu) <= 0):
        return float(mu.max()), 0.0, float("nan"), 0.0
    d1, d2 = mu[1] - mu[0], mu[2] - mu[1]
    q0 = np.log(d1 / d2) / np.log(sig[0] / sig[1]) if d2 > 0 else 1.0
    q0 = float(np.clip(q0, 0.05, 5.0))
    c0 = d1 / (sig[0] ** q0 - sig[1] ** q0)
    x0 = [mu[-1] + c0 * sig[-1] ** q0, c0, q0]

    def res(p):
        return p[0] - p[1] * sig ** p[2] - mu

    sol = least_squares(res, x0, bounds=([-np.inf, 0.0, 1e-3], [np.inf, np.inf, 10.0]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    mu_star, c, q = sol.x
    return float(max(mu_star, mu.max())), float(c), float(q), float(np.max(np.abs(sol.fun)))


def estimate_mu_star(F, epsilon, sigma_schedule, grid, params, s, order_tol=1e-6,
                     raise_on_disorder=True):
    """Run the combustion speed along a decreasing sigma schedule and extrapolate."""
    sched = np.asarray(sigma_schedule, dtype=float)
    if len(sched) < 4 or np.any(np.diff(sched) >= 0) or sched[-1] <= 0:
        raise DomainError("sigma schedule must be strictly decreasing, positive, >= 4 entries")
    nu = nu_bound(s, epsilon, F.A2)
    mus, errs, profs = [], [], []
    for sig in sched:
        res = combustion_speed(CombustionCutoff(F, float(sig)), epsilon, grid, params, s,
                               mu_max=nu)
        mus.append(res.mu_c)
        errs.append(res.identity_rel_err)
        profs.append(res.profile)
    mus = np.array(mus)
    drops = mus[:-1] - mus[1:]
    worst = int(np.argmax(drops))
    ordering_ok = bool(drops[worst] <= order_tol)
    mu_star, c, q, resid = fit_extrapolation(sched[-3:], mus[-3:])
    est = SpeedEstimate(sched, mus, mu_star, q, float(epsilon), nu, np.array(errs), c, resid,
                        ordering_ok, (float(sched[worst]), float(sched[worst + 1])), profs)
    if not ordering_ok and raise_on_disorder:
        raise OrderingError("speeds decrease by %.3g between sigma=%g and sigma=%g"
                            % (drops[worst], sched[worst], sched[worst + 1]), est.worst_pair)
    return est


@dataclass
class StageRecord:
    epsilon: float
    normalized: bool
    reason: str
    vartheta: float
    evaluations: int


def epsilon_continuation_front(F, mu, epsilon_schedule, grid, params, s, theta=None,
                               mu_star=None, margin=0.05, diagnose=True,
                               left_mode="fit"):
    """Front at speed mu obtained by lowering epsilon along the schedule.

    Each stage normalizes phi(-1) = theta, with the bracket search seeded by
    the exterior value of the previous stage.  When a stage fails to normalize,
    the remaining stages are still attempted so that the failure signature is
    recorded at every epsilon, then ContinuationError is raised."""
    from .diagnostics import diagnostics_report

    sched = [float(e) for e in epsilon_schedule]
    if any(b >= a for a, b in zip(sched, sched[1:])) or min(sched) < 0:
        raise DomainError("epsilon schedule must be strictly decreasing and nonnegative")
    if theta is None:
        theta = F.theta
    if mu_star is not None and mu <= mu_star * (1 + margin):
        warnings.warn("mu is not above the critical speed estimate plus margin", RuntimeWarning)
    stages = []
    result = None
    guess = None
    for eps in sched:
        res = normalize_theta(F, params.but(epsilon=eps, mu=float(mu)), grid, theta, s,
                              vt_guess=guess)
        stages.append(StageRecord(eps, res.normalized, res.reason, res.vartheta, res.evaluations))
        if res.normalized:
            result = res
        # the previous exterior value seeds the bracket of the next stage
        guess = res.vartheta if res.normalized else None
    failed = [st for st in stages if not st.normalized]
    if failed:
        raise ContinuationError("normalization failed at epsilon=%g, mu=%g (%s)"
                                % (failed[0].epsilon, mu, failed[0].reason),
                                failed[0].epsilon, mu, stages)
    prof = result.profile
    prof.meta["stages"] = stages
    if diagnose:
        prof.meta["diagnostics"] = diagnostics_report(prof, F, left_mode=left_mode)
    return prof
