"""Command line entry point: fracfront <command> --config FILE --out DIR.

Exit codes: 0 success, 1 a check failed (reason in report.txt as
fail_reason=<token>), 2 bad input or I/O failure."""

import argparse
import itertools
import os
import sys

import numpy as np

from . import diagnostics as diag
from .config import ConfigError, RunConfig, load_config
from .errors import (BracketError, ContinuationError, FrontError, IterationError,
                     OrderingError)
from .model import (CombustionCutoff, ConstantTail, FrontProfile, GridSpec)
from .nonlocal_operator import (assemble_operator, frac_laplacian_apply, mmatrix_check,
                                symbol_constant)
from .speed_finder import (combustion_speed, epsilon_continuation_front, estimate_mu_star,
                           nu_bound)

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, (int, np.integer)):
        return "%d" % v
    return str(v)


def write_report(path, pairs):
    with open(path, "w") as fh:
        for k, v in pairs:
            fh.write("%s=%s\n" % (k, _fmt(v)))


def read_report(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.rstrip("\n").split("=", 1)
                out[k] = v
    return out


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_front_csv(path, profile):
    with open(path, "w") as fh:
        fh.write("x,phi\n")
        for xi, ui in zip(profile.x, profile.values):
            fh.write("%.17g,%.17g\n" % (xi, ui))


def read_front_csv(path):
    """(x, phi) from a front.csv; ValueError when malformed or x not uniform increasing."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "x,phi":
            raise ValueError("front.csv header must be 'x,phi'")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != 2 or data.shape[0] < 16:
        raise ValueError("front.csv needs two columns and at least 16 rows")
    x, phi = data[:, 0], data[:, 1]
    dx = np.diff(x)
    if np.any(dx <= 0):
        raise ValueError("x is not strictly increasing")
    if np.ptp(dx) > 1e-6 * dx.mean():
        raise ValueError("x is not uniformly spaced")
    if not np.all(np.isfinite(phi)):
        raise ValueError("phi has non-finite entries")
    return x, phi


def _figures(cfg, outdir, kind, **kw):
    if not cfg.plots:
        return
    from . import plotting

    if kind == "front":
        plotting.plot_front(os.path.join(outdir, "front.png"), **kw)
    else:
        plotting.plot_speeds(os.path.join(outdir, "speeds.png"), **kw)


def _write_front_outputs(cfg, outdir, profile, report_pairs, slope, intercept):
    write_front_csv(os.path.join(outdir, "front.csv"), profile)
    write_report(os.path.join(outdir, "report.txt"), report_pairs)
    from .plotting import gnuplot_front_script

    with open(os.path.join(outdir, "plot_front.gp"), "w") as fh:
        fh.write(gnuplot_front_script("front.csv", slope, intercept))
    _figures(cfg, outdir, "front", x=profile.x, phi=profile.values, slope=slope,
             intercept=intercept, title="s=%g, mu=%.6g" % (profile.s, profile.mu))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cos_oracle_error(s, half_width, n_points):
    """Interior-half relative sup error of the discrete operator on (1 + cos x)/2."""
    grid = GridSpec(-half_width, half_width, n_points, ConstantTail(0.5), ConstantTail(0.5))
    x = grid.x
    u = 0.5 * (1 + np.cos(x))
    # the constant tails stand in for the mean of the oscillation beyond the grid
    lap = frac_laplacian_apply(FrontProfile(grid, u, s, 0.0))
    exact = symbol_constant(s) * 0.5 * np.cos(x)
    inner = np.abs(x) <= half_width / 2
    return float(np.max(np.abs(lap[inner] - exact[inner])) / np.max(np.abs(exact[inner])))


def cmd_op_test(cfg, outdir):
    rows = []
    # constant annihilation through the full operator
    grid = cfg.grid().with_tails(ConstantTail(0.7), ConstantTail(0.7))
    op = assemble_operator(grid, cfg.s, 1.0, 0.0, 0.0)
    const = float(np.max(np.abs(op.apply(np.full(grid.n_points, 0.7)))))
    rows.append(("constant", "sup_abs", const, 1e-12, const < 1e-12))
    # M-matrix of the configured operator
    F = cfg.nonlinearity()
    lam = cfg.params().lam_for(F)
    mu = cfg.mu if cfg.mu is not None else (cfg.resolved_mu() if cfg.mu_over_nu else 1.0)
    rep = mmatrix_check(assemble_operator(cfg.grid(), cfg.s, cfg.epsilon, mu, lam))
    rows.append(("mmatrix", "worst_margin", rep.worst_margin, 0.0, rep.is_m_matrix))
    for s in cfg.op_s_values:
        errs = [cos_oracle_error(s, cfg.op_half_width, cfg.op_n_points // 4 * 2 ** k)
                for k in range(3)]
        rows.append(("cos_s=%g" % s, "rel_err", errs[-1], 1e-3, errs[-1] < 1e-3))
        rate = float(np.log2(errs[1] / errs[2]))
        need = 2 - 2 * s - 0.1
        rows.append(("refine_s=%g" % s, "rate", rate, need, rate >= need))
    write_csv(os.path.join(outdir, "op_test.csv"), ("test", "metric", "value", "threshold", "pass"),
              rows)
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_FAIL


def _stage_pairs(stages):
    pairs = []
    for k, st in enumerate(stages):
        pairs += [("stage%d_epsilon" % k, st.epsilon), ("stage%d_reason" % k, st.reason),
                  ("stage%d_vartheta" % k, st.vartheta)]
    return pairs


def cmd_solve_front(cfg, outdir):
    F = cfg.nonlinearity()
    mu = cfg.resolved_mu()
    params = cfg.params(mu=mu)
    head = [("command", "solve-front"), ("s", cfg.s), ("p", cfg.p), ("mu", mu),
            ("nu_bound", nu_bound(cfg.s, min(cfg.epsilon_schedule), F.A2))]
    try:
        prof = epsilon_continuation_front(F, mu, cfg.epsilon_schedule, cfg.grid(), params, cfg.s,
                                          theta=cfg.theta, diagnose=True,
                                          left_mode=cfg.identity_left_mode)
    except ContinuationError as exc:
        every = all(not st.normalized for st in exc.stages)
        reasons = sorted({st.reason for st in exc.stages if not st.normalized})
        write_report(os.path.join(outdir, "report.txt"),
                     head + [("pass", False), ("fail_reason", reasons[0]),
                             ("failed_all_stages", every)] + _stage_pairs(exc.stages))
        return EXIT_FAIL
    except IterationError as exc:
        write_report(os.path.join(outdir, "report.txt"),
                     head + [("pass", False), ("fail_reason", "iteration_error"),
                             ("message", str(exc))])
        return EXIT_FAIL
    rep = prof.meta["diagnostics"]
    pairs = head + [("epsilon", prof.epsilon), ("vartheta", prof.vartheta)] + rep.as_pairs()
    if not rep.passed:
        bad = [k for k, v in sorted(rep.checks.items()) if not v]
        pairs.append(("fail_reason", "diagnostics_" + "+".join(bad)))
    pairs += _stage_pairs(prof.meta["stages"])
    fit_slope = rep.decay_slope
    fit = None
    try:
        fit = diag.decay_fit(prof, cfg.x_fit)
    except FrontError:
        pass
    _write_front_outputs(cfg, outdir, prof, pairs, fit_slope,
                         fit.intercept if fit else float("nan"))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_combustion_speed(cfg, outdir):
    F = cfg.nonlinearity()
    if not isinstance(F, CombustionCutoff):
        F = CombustionCutoff(F, cfg.sigma)
    nu = nu_bound(cfg.s, cfg.epsilon, F.A2)
    try:
        res = combustion_speed(F, cfg.epsilon, cfg.grid(), cfg.params(), cfg.s, mu_max=nu)
    except BracketError as exc:
        write_report(os.path.join(outdir, "report.txt"),
                     [("command", "combustion-speed"), ("pass", False),
                      ("fail_reason", "no_bracket")]
                     + [("scan_mu_%d" % k, "%.17g:%.17g" % t) for k, t in enumerate(exc.table)])
        return EXIT_FAIL
    ok = res.identity_rel_err < 0.02
    write_csv(os.path.join(outdir, "speeds.csv"), ("sigma", "epsilon", "mu_c", "identity_rel_err"),
              [(F.sigma, cfg.epsilon, res.mu_c, res.identity_rel_err)])
    pairs = [("command", "combustion-speed"), ("sigma", F.sigma), ("epsilon", cfg.epsilon),
             ("mu_c", res.mu_c), ("nu_bound", nu), ("identity_rel_err", res.identity_rel_err),
             ("evaluations", res.evaluations), ("pass", ok)]
    if not ok:
        pairs.append(("fail_reason", "speed_identity"))
    _write_front_outputs(cfg, outdir, res.profile, pairs, float("nan"), float("nan"))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_critical_speed(cfg, outdir):
    F = cfg.base_nonlinearity()
    eps_values = cfg.epsilon_values or (cfg.epsilon,)
    rows, lines, ok = [], [], True
    fail = None
    for eps in eps_values:
        try:
            est = estimate_mu_star(F, eps, cfg.sigma_schedule, cfg.grid(), cfg.params(), cfg.s,
                                   order_tol=cfg.order_tol, raise_on_disorder=False)
        except BracketError:
            ok, fail = False, fail or "no_bracket"
            lines.append(("epsilon_%g_status" % eps, "no_bracket"))
            continue
        for sig, mu, err in zip(est.sigma_schedule, est.mu_values, est.identity_rel_errs):
            rows.append((sig, eps, mu, err))
        tag = "" if len(eps_values) == 1 else "epsilon_%g_" % eps
        lines += [(tag + "extrapolated_mu_star", est.extrapolated_mu_star), (tag + "q", est.q),
                  (tag + "nu_bound", est.nu_bound), (tag + "ordering_ok", est.ordering_ok),
                  (tag + "bound_ok", est.bound_ok), (tag + "fit_residual", est.fit_residual)]
        if not est.ordering_ok:
            ok, fail = False, fail or "ordering"
            lines.append((tag + "worst_pair", "%g:%g" % est.worst_pair))
        if not est.bound_ok:
            ok, fail = False, fail or "bound"
        if cfg.plots and len(eps_values) == 1:
            _figures(cfg, outdir, "speeds", sigmas=est.sigma_schedule, mus=est.mu_values,
                     mu_star=est.extrapolated_mu_star, nu=est.nu_bound)
    write_csv(os.path.join(outdir, "speeds.csv"), ("sigma", "epsilon", "mu_c", "identity_rel_err"),
              rows)
    lines.append(("pass", ok))
    if fail:
        lines.append(("fail_reason", fail))
    write_report(os.path.join(outdir, "speed_estimate.txt"), lines)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_diagnose(cfg, outdir, front_csv):
    try:
        x, phi = read_front_csv(front_csv)
    except (OSError, ValueError) as exc:
        print("cannot read %s: %s" % (front_csv, exc), file=sys.stderr)
        return EXIT_IO
    F = cfg.base_nonlinearity()
    mu = cfg.resolved_mu()
    left = ConstantTail(float(np.clip(phi[0], 0, 1)))
    grid = GridSpec(float(x[0]), float(x[-1]), len(x), left, ConstantTail(1.0))
    prof = FrontProfile(grid, np.clip(phi, 0, 1), cfg.s, mu, cfg.epsilon)
    rep = diag.diagnostics_report(prof, F, x_fit=cfg.x_fit, left_mode=cfg.identity_left_mode)
    pairs = [("command", "diagnose"), ("source", front_csv)] + rep.as_pairs()
    if not rep.passed:
        bad = [k for k, v in sorted(rep.checks.items()) if not v]
        pairs.append(("fail_reason", "diagnostics_" + "+".join(bad)))
    for k, v in pairs:
        print("%s=%s" % (k, _fmt(v)))
    write_report(os.path.join(outdir, "report.txt"), pairs)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _point_name(mu, sigma, eps):
    parts = []
    for key, v in (("mu", mu), ("sigma", sigma), ("eps", eps)):
        if v is not None:
            parts.append("%s=%.6g" % (key, v))
    return "_".join(parts) or "point"


def cmd_sweep(cfg, outdir):
    commands = {"solve-front": cmd_solve_front, "combustion-speed": cmd_combustion_speed,
                "critical-speed": cmd_critical_speed}
    mus = cfg.mu_values or (None,)
    sigmas = cfg.sigma_values or (None,)
    epss = cfg.epsilon_values or (None,)
    rows, worst = [], EXIT_OK
    for mu, sig, eps in itertools.product(mus, sigmas, epss):
        over = {"mu_values": (), "sigma_values": (), "epsilon_values": ()}
        if mu is not None:
            over.update(mu=mu, mu_over_nu=None)
        if sig is not None:
            over["sigma"] = sig
        if eps is not None:
            over["epsilon"] = eps
            if cfg.sweep_command == "solve-front":
                sched = tuple(e for e in cfg.epsilon_schedule if e > eps) + (eps,)
                over["epsilon_schedule"] = sched
        name = _point_name(mu, sig, eps)
        sub = os.path.join(outdir, name)
        os.makedirs(sub, exist_ok=True)
        try:
            code = commands[cfg.sweep_command](cfg.but(**over), sub)
        except ConfigError:
            code = EXIT_IO
        rows.append((name, code))
        worst = max(worst, code)
    write_csv(os.path.join(outdir, "sweep.csv"), ("point", "exit_code"), rows)
    return worst


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="fracfront", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("op-test", "solve-front", "combustion-speed", "critical-speed", "diagnose",
                 "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key=value configuration file")
        sp.add_argument("--out", help="output directory (overrides the config)")
        if name == "diagnose":
            sp.add_argument("front_csv", help="front.csv written by solve-front")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
    except (OSError, ConfigError) as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    outdir = args.out or cfg.out
    try:
        os.makedirs(outdir, exist_ok=True)
        if not os.access(outdir, os.W_OK):
            raise PermissionError("output directory %s is not writable" % outdir)
        if args.command == "op-test":
            return cmd_op_test(cfg, outdir)
        if args.command == "solve-front":
            return cmd_solve_front(cfg, outdir)
        if args.command == "combustion-speed":
            return cmd_combustion_speed(cfg, outdir)
        if args.command == "critical-speed":
            return cmd_critical_speed(cfg, outdir)
        if args.command == "diagnose":
            return cmd_diagnose(cfg, outdir, args.front_csv)
        return cmd_sweep(cfg, outdir)
    except ConfigError as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print("I/O error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except OrderingError as exc:
        print("ordering error: %s" % exc, file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
