"""Monotone iteration for the semi-truncated front problem and the
normalization phi(-1) = theta by a root search in the exterior value."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lapack, lu_factor, lu_solve
from scipy.optimize import brentq

from .errors import InvariantViolation, IterationError, SolverError
from .model import ConstantTail, FrontProfile, fractional_order
from .nonlocal_operator import OperatorMatrix, assemble_operator

RCOND_MIN = 1e-14
SANDWICH_TOL = 1e-6


class LinearSolver:
    """LU factorization of a dense matrix with a condition-number guard."""

    def __init__(self, A):
        M = A.matrix if isinstance(A, OperatorMatrix) else np.asarray(A, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise SolverError("matrix must be square")
        self.matrix = M
        anorm = np.linalg.norm(M, 1)
        with warnings.catch_warnings():
            # singularity is reported below as SolverError
            warnings.simplefilter("ignore", LinAlgWarning)
            self.lu, self.piv = lu_factor(M, check_finite=True)
        if np.any(np.diag(self.lu) == 0):
            raise SolverError("matrix is singular")
        rcond, info = lapack.dgecon(self.lu, anorm, norm="1")
        self.rcond = float(rcond)
        if info != 0 or not self.rcond > RCOND_MIN:
            raise SolverError("condition estimate %.3g exceeds 1e14" % (1.0 / max(self.rcond, 1e-300)))

    def solve(self, b):
        return lu_solve((self.lu, self.piv), b, check_finite=False)


def solve_linear(A, load):
    """Solve A u = load; verifies the residual against the load scale."""
    load = np.asarray(load, dtype=float)
    if not np.all(np.isfinite(load)):
        raise SolverError("load must be finite")
    ls = LinearSolver(A)
    u = ls.solve(load)
    bnorm = np.max(np.abs(load))
    if bnorm == 0.0:
        return np.zeros_like(load)
    res = np.max(np.abs(ls.matrix @ u - load))
    if res >= 1e-10 * bnorm:
        # one step of iterative refinement before giving up
        u = u + ls.solve(load - ls.matrix @ u)
        res = np.max(np.abs(ls.matrix @ u - load))
        if res >= 1e-10 * bnorm:
            raise SolverError("linear residual %.3g too large" % res)
    return u


@dataclass
class IterationTrace:
    iterate_count: int = 0
    sup_diffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    monotone_in_n: bool = True
    final_residual: float = float("nan")
    min_increment: float = float("inf")
    polished: bool = False
    converged: bool = False


class ShiftedProblem:
    """Assembled lambda-shifted operator for fixed (grid geometry, s, eps, mu).

    The factorization is reused for every exterior value vartheta."""

    def __init__(self, F, grid, s, epsilon, mu, lam):
        self.F = F
        self.grid = grid
        self.s = fractional_order(s)
        self.epsilon = float(epsilon)
        self.mu = float(mu)
        self.lam = float(lam)
        self.op = assemble_operator(grid, self.s, self.epsilon, self.mu, self.lam)
        self.solver = LinearSolver(self.op)
        self._A0 = None

    @property
    def A0(self):
        """Unshifted operator matrix."""
        if self._A0 is None:
            self._A0 = self.op.matrix - self.lam * np.eye(self.op.n)
        return self._A0

    def load(self, vartheta=None):
        if vartheta is None:
            return self.op.load
        return self.op.constant_load(vartheta, self.grid.right_tail.value)

    def reaction(self, u):
        return self.F.evaluate(np.clip(u, 0.0, 1.0))

    def residual(self, u, load):
        """Discrete  -eps u'' + (-Delta)^s u + mu u' - F(u)  with exterior data."""
        return self.A0 @ u - load - self.reaction(u)

    def step(self, u, load):
        return self.solver.solve(self.reaction(u) + self.lam * u + load)

    def newton(self, u, load, max_steps=30, tol=1e-13):
        """Damped Newton on the discrete nonlinear system; returns None on failure."""
        u = u.copy()
        res = self.residual(u, load)
        scale = max(1.0, np.max(np.abs(load)))
        for _ in range(max_steps):
            rn = np.max(np.abs(res))
            if rn < tol * scale:
                return u
            dF = self.F.derivative(np.clip(u, 0.0, 1.0))
            J = self.A0 - np.diag(dF)
            try:
                du = np.linalg.solve(J, -res)
            except np.linalg.LinAlgError:
                return None
            t = 1.0
            while t > 1e-4:
                trial = u + t * du
                r_trial = self.residual(trial, load)
                if np.max(np.abs(r_trial)) < (1 - 0.5 * t) * rn:
                    break
                t *= 0.5
            else:
                return None
            u, res = trial, r_trial
        return u if np.max(np.abs(res)) < 1e-10 * scale else None


def sub_solution(grid, vartheta=None):
    """vartheta_0: the exterior value to the left of the grid, zero on it."""
    return np.zeros(grid.n_points)


def super_solution(grid):
    """1_vartheta: the exterior value to the left of the grid, one on it."""
    return np.ones(grid.n_points)


def _as_values(obj, n):
    if obj is None:
        return None
    v = obj.values if isinstance(obj, FrontProfile) else np.asarray(obj, dtype=float)
    if v.shape != (n,):
        raise InvariantViolation("sub/super-solution has the wrong length")
    return v


def monotone_iterate(F, params, grid, sub=None, super_=None, s=None, problem=None,
                     polish=None, vartheta=None, check_inputs=True, start="sub"):
    """Monotone iteration from the sub-solution for the semi-truncated problem.

    (A + lam) u_{n+1} = F(u_n) + lam u_n + load, with the exterior value on
    the left and 1 on the right taken from the grid (or `vartheta`).  With
    start='super' the iteration descends from the super-solution instead and
    monotone_in_n refers to non-increasing iterates.  Returns the converged
    profile and the iteration trace."""
    if start not in ("sub", "super"):
        raise ValueError("start must be 'sub' or 'super'")
    sign = 1.0 if start == "sub" else -1.0
    if problem is None:
        if s is None:
            raise ValueError("s is required when no assembled problem is given")
        lam = params.lam_for(F)
        problem = ShiftedProblem(F, grid, s, params.epsilon, params.mu, lam)
    lam = problem.lam
    if not lam > F.lipschitz_bound:
        raise ValueError("lambda must exceed the Lipschitz bound of F")
    n = grid.n_points
    if vartheta is None:
        lt = grid.left_tail
        vartheta = lt.value if isinstance(lt, ConstantTail) else None
    load = problem.load(vartheta)
    lo = _as_values(sub, n)
    hi = _as_values(super_, n)
    if lo is None:
        lo = sub_solution(grid)
    if hi is None:
        hi = super_solution(grid)
    if np.any(lo > hi + SANDWICH_TOL):
        raise InvariantViolation("sub-solution exceeds super-solution")
    if check_inputs:
        if np.max(problem.residual(lo, load)) > 1e-8:
            warnings.warn("initial iterate violates the sub-solution inequality", RuntimeWarning)
        if np.min(problem.residual(hi, load)) < -1e-8:
            warnings.warn("upper barrier violates the super-solution inequality", RuntimeWarning)
    polish = params.newton_polish if polish is None else polish

    u = lo.copy() if sign > 0 else hi.copy()
    diffs = []
    trace = IterationTrace()
    next_polish = params.burn_in
    for it in range(1, params.max_iters + 1):
        un = problem.step(u, load)
        inc = sign * (un - u)
        d = float(np.max(np.abs(inc)))
        trace.min_increment = min(trace.min_increment, float(inc.min()))
        if inc.min() < -params.tol_mono:
            trace.monotone_in_n = False
        if np.any(un < lo - SANDWICH_TOL) or np.any(un > hi + SANDWICH_TOL):
            trace.iterate_count = it
            trace.sup_diffs = np.array(diffs + [d])
            raise InvariantViolation("iterate left the [sub, super] interval at step %d" % it)
        diffs.append(d)
        u = un
        if d < params.tol_iter:
            trace.converged = True
            # a small increment is not a small error when the contraction is
            # slow (warm starts near a steep S): polish once before returning
            if polish:
                v = problem.newton(u, load)
                if v is not None and not np.array_equal(v, u) \
                        and np.all(sign * (v - u) >= -params.tol_mono) \
                        and np.all(v <= hi + SANDWICH_TOL) and np.all(v >= lo - SANDWICH_TOL):
                    w = problem.step(v, load)
                    if float(np.max(np.abs(w - v))) < params.tol_iter:
                        trace.min_increment = min(trace.min_increment,
                                                  float((sign * (v - u)).min()))
                        diffs.append(float(np.max(np.abs(v - u))))
                        u = w
                        trace.polished = True
            break
        if polish and it >= next_polish:
            next_polish = it + 10 * params.burn_in
            v = problem.newton(u, load)
            if v is not None and np.all(sign * (v - u) >= -params.tol_mono) \
                    and np.all(v <= hi + SANDWICH_TOL) and np.all(v >= lo - SANDWICH_TOL):
                w = problem.step(v, load)
                dv = float(np.max(np.abs(w - v)))
                if dv < params.tol_iter:
                    trace.min_increment = min(trace.min_increment, float((sign * (v - u)).min()))
                    diffs.append(float(np.max(np.abs(v - u))))
                    diffs.append(dv)
                    u = w
                    trace.polished = True
                    trace.converged = True
                    break
    trace.iterate_count = len(diffs)
    trace.sup_diffs = np.array(diffs)
    trace.final_residual = float(np.max(np.abs(problem.residual(u, load))))
    if not trace.converged:
        raise IterationError("monotone iteration did not converge in %d steps (last diff %.3g)"
                             % (params.max_iters, diffs[-1]), trace)
    prof = FrontProfile(grid.with_tails(left=ConstantTail(vartheta)) if vartheta is not None else grid,
                        u, problem.s, problem.mu, problem.epsilon,
                        vartheta=float("nan") if vartheta is None else float(vartheta))
    bad = prof.check_invariants(max(params.tol_mono, 1e-8))
    if bad:
        raise InvariantViolation("converged profile violates %s" % ", ".join(bad))
    return prof, trace


class _Converged(Exception):
    def __init__(self, x):
        self.x = x


def _root(g, a, b, ftol, xtol=1e-15):
    """Brent's method that also stops as soon as |g| < ftol."""
    def wrapped(x):
        val = g(x)
        if abs(val) < ftol:
            raise _Converged(x)
        return val
    try:
        return brentq(wrapped, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    except _Converged as done:
        return done.x


@dataclass
class NormalizationResult:
    profile: FrontProfile = None
    vartheta: float = float("nan")
    normalized: bool = False
    reason: str = ""
    scan: list = field(default_factory=list)
    evaluations: int = 0

    def __iter__(self):
        # allows  profile, vartheta = normalize_theta(...)
        return iter((self.profile, self.vartheta))


def _local_bracket(S, theta, guess, vt_min, vt_max, factor=1.25, max_steps=12):
    """(a, b) with S(a) < theta <= S(b) found by expanding around guess, or None."""
    lo, hi = guess / factor, min(guess * factor, vt_max)
    g_lo, g_hi = S(lo) - theta, S(hi) - theta
    for _ in range(max_steps):
        if g_lo < 0 <= g_hi:
            return lo, hi
        if g_lo >= 0:
            hi, g_hi = lo, g_lo
            lo = lo / factor ** 2
            if lo < vt_min:
                return None
            g_lo = S(lo) - theta
        else:
            lo, g_lo = hi, g_hi
            hi = hi * factor ** 2
            if hi > vt_max:
                return None
            g_hi = S(hi) - theta
    return None


def normalize_theta(F, params, grid, theta, s, x_norm=-1.0, n_scan=16, vt_min=1e-6,
                    vt_max=1.0 - 1e-3, start="sub", vt_guess=None):
    """Find the exterior value vartheta with phi_r(x_norm) = theta.

    A 16-point geometric pre-scan of S(vartheta) = phi_r(x_norm) establishes
    the bracket; Brent's method refines it.  S > theta everywhere on the scan
    (down to 1e-6) is reported as the no-normalization outcome.  Each solve is
    warm-started from the nearest cached solution on the side allowed by
    `start` (smaller vartheta gives a sub-solution, larger a super-solution).
    With `vt_guess` (e.g. the value of a previous continuation stage) the
    bracket is first sought by geometric expansion around the guess; the full
    scan is the fallback."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    lam = params.lam_for(F)
    problem = ShiftedProblem(F, grid, s, params.epsilon, params.mu, lam)
    cache = {}
    result = NormalizationResult()

    def solve(vt):
        if start == "sub":
            below = [k for k in cache if k <= vt]
            bounds = dict(sub=cache[max(below)][0].values if below else None)
        else:
            above = [k for k in cache if k >= vt]
            bounds = dict(super_=cache[min(above)][0].values if above else None)
        prof, tr = monotone_iterate(F, params, grid, problem=problem, vartheta=vt,
                                    check_inputs=False, start=start, **bounds)
        cache[vt] = (prof, tr)
        result.evaluations += 1
        return prof

    def S(vt):
        if vt not in cache:
            solve(vt)
        return float(cache[vt][0].at(x_norm))

    bracket = None
    if vt_guess is not None and vt_min < vt_guess < vt_max:
        bracket = _local_bracket(S, theta, vt_guess, vt_min, vt_max)
    if bracket is None:
        scan_pts = np.geomspace(vt_min, vt_max, n_scan)
        order = scan_pts if start == "sub" else scan_pts[::-1]
        for v in order:
            S(v)
        vals = [S(v) for v in scan_pts]
        result.scan = list(zip(scan_pts.tolist(), vals))
        G = np.array(vals) - theta
        if G[0] > 0:
            result.reason = "no_normalization"
            result.profile = cache[scan_pts[0]][0]
            return result
        if np.all(G < 0):
            result.reason = "no_bracket"
            result.profile = cache[scan_pts[-1]][0]
            return result
        monotone = np.all(np.diff(vals) >= -params.tol_norm)
        k = int(np.argmax(G >= 0))  # first nonnegative sample
        a, b = scan_pts[k - 1], scan_pts[k]
        if not monotone:
            # scan-and-refine: densify the first crossing interval before Brent
            sub_pts = np.linspace(a, b, 9)
            sub_vals = np.array([S(v) for v in sub_pts]) - theta
            j = int(np.argmax(sub_vals >= 0))
            a, b = sub_pts[j - 1], sub_pts[j]
    else:
        a, b = bracket
        pts = sorted(cache)
        result.scan = [(v, S(v)) for v in pts]
        monotone = bool(np.all(np.diff([S(v) for v in pts]) >= -params.tol_norm))
    if S(b) == theta:
        vt = b
    else:
        vt = _root(lambda v: S(v) - theta, a, b, 0.1 * params.tol_norm)
    gval = S(vt) - theta
    prof = cache[vt][0]
    result.profile = FrontProfile(prof.grid, prof.values, prof.s, prof.mu, prof.epsilon,
                                  x_norm, theta, float(vt),
                                  {"trace": cache[vt][1], "S_monotone": bool(monotone)})
    result.vartheta = float(vt)
    if abs(gval) < params.tol_norm:
        result.normalized = True
        result.reason = "ok"
    else:
        result.reason = "discontinuous_S"
    return result
