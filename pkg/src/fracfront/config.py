"""Flat key=value run configuration: one pair per line, '#' starts a comment."""

from dataclasses import dataclass, fields, replace

from .errors import DomainError
from .model import (CombustionCutoff, GeneralizedKPP, SolveParams, fractional_order,
                    truncated_grid)


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError("not a boolean: %r" % text)


def _opt_float(text):
    t = text.strip().lower()
    return None if t in ("", "none", "auto") else float(t)


@dataclass(frozen=True)
class RunConfig:
    # nonlinearity
    kind: str = "kpp"
    p: float = 3.0
    scale: float = 1.0
    theta: float = 0.5
    sigma: float = 0.1
    # operator and grid
    s: float = 0.8
    r: float = 100.0
    right_end: float = 50.0
    n_points: int = 1024
    # solver
    epsilon: float = 0.0
    mu: float = None
    mu_over_nu: float = None
    lambda_shift: float = None
    tol_iter: float = 1e-10
    tol_norm: float = 1e-8
    tol_mono: float = 1e-9
    max_iters: int = 20000
    newton_polish: bool = True
    burn_in: int = 40
    epsilon_schedule: tuple = (0.5, 0.25, 0.1, 0.05, 0.02, 0.0)
    sigma_schedule: tuple = (0.2, 0.1, 0.05, 0.025, 0.0125)
    order_tol: float = 1e-6
    # diagnostics
    x_fit: float = 10.0
    identity_left_mode: str = "fit"
    # operator oracle
    op_s_values: tuple = (0.6, 0.75, 0.9)
    op_half_width: float = 200.0
    op_n_points: int = 4096
    # sweep
    mu_values: tuple = ()
    sigma_values: tuple = ()
    epsilon_values: tuple = ()
    sweep_command: str = "solve-front"
    # output
    out: str = "out"
    plots: bool = True
    deterministic: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        try:
            fractional_order(self.s)
            self.nonlinearity()
            self.grid()
            self.params()
        except (DomainError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.kind not in ("kpp", "combustion"):
            raise ConfigError("kind must be 'kpp' or 'combustion'")
        if self.mu is not None and self.mu_over_nu is not None:
            raise ConfigError("give at most one of mu and mu_over_nu")
        if self.mu_over_nu is not None and not self.mu_over_nu > 0:
            raise ConfigError("mu_over_nu must be positive")
        if not 0 < self.theta < 1:
            raise ConfigError("theta must lie in (0, 1)")
        if self.right_end <= 0:
            raise ConfigError("right_end must be positive")
        if self.n_points < 16:
            raise ConfigError("n_points must be at least 16")
        if self.x_fit <= 0:
            raise ConfigError("x_fit must be positive")
        if self.identity_left_mode not in ("fit", "declared", "none"):
            raise ConfigError("identity_left_mode must be fit, declared or none")
        if self.sweep_command not in ("solve-front", "combustion-speed", "critical-speed"):
            raise ConfigError("sweep_command must be solve-front, combustion-speed or critical-speed")
        for s in self.op_s_values:
            fractional_order(s)
        if self.op_n_points < 64 or self.op_half_width <= 0:
            raise ConfigError("operator oracle grid is too small")
        if not self.deterministic:
            raise ConfigError("deterministic must be true")

    def base_nonlinearity(self):
        return GeneralizedKPP(self.p, self.scale, self.theta)

    def nonlinearity(self):
        F = self.base_nonlinearity()
        if self.kind == "combustion":
            return CombustionCutoff(F, self.sigma)
        return F

    def grid(self):
        return truncated_grid(self.r, self.right_end, self.n_points)

    def params(self, **kw):
        base = dict(epsilon=self.epsilon, mu=1.0 if self.mu is None else self.mu,
                    lambda_shift=self.lambda_shift, r=self.r, tol_iter=self.tol_iter,
                    tol_norm=self.tol_norm, tol_mono=self.tol_mono, max_iters=self.max_iters,
                    epsilon_schedule=self.epsilon_schedule, sigma_schedule=self.sigma_schedule,
                    newton_polish=self.newton_polish, burn_in=self.burn_in)
        base.update(kw)
        return SolveParams(**base)

    def resolved_mu(self):
        """mu, or mu_over_nu times the speed bound at the smallest scheduled epsilon."""
        from .speed_finder import nu_bound

        if self.mu is not None:
            return float(self.mu)
        if self.mu_over_nu is None:
            raise ConfigError("mu (or mu_over_nu) is required")
        eps = min(self.epsilon_schedule)
        return self.mu_over_nu * nu_bound(self.s, eps, self.base_nonlinearity().A2)

    def but(self, **kw):
        return replace(self, **kw)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_TUPLES = {"epsilon_schedule", "sigma_schedule", "op_s_values", "mu_values", "sigma_values",
           "epsilon_values"}
_BOOLS = {"newton_polish", "plots", "deterministic"}
_INTS = {"n_points", "max_iters", "burn_in", "op_n_points"}
_OPTIONAL = {"mu", "mu_over_nu", "lambda_shift"}
_STRINGS = {"kind", "identity_left_mode", "sweep_command", "out"}


def _convert(key, text):
    if key in _TUPLES:
        return _floats(text)
    if key in _BOOLS:
        return _bool(text)
    if key in _INTS:
        v = float(text)
        if v != int(v):
            raise ConfigError("%s must be an integer" % key)
        return int(v)
    if key in _OPTIONAL:
        return _opt_float(text)
    if key in _STRINGS:
        return text.strip()
    return float(text)


def parse_config(text, **overrides):
    """RunConfig from key=value text.  Unknown or repeated keys are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected key=value" % lineno)
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError("line %d: unknown key %r" % (lineno, key))
        if key in values:
            raise ConfigError("line %d: repeated key %r" % (lineno, key))
        try:
            values[key] = _convert(key, val)
        except ValueError as exc:
            raise ConfigError("line %d: bad value for %s: %s" % (lineno, key, exc)) from exc
    values.update(overrides)
    return RunConfig(**values)


def load_config(path, **overrides):
    with open(path) as fh:
        return parse_config(fh.read(), **overrides)


def format_config(cfg):
    """Inverse of parse_config (up to comments and float formatting)."""
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if v is None:
            v = "none"
        elif isinstance(v, tuple):
            v = ",".join("%.17g" % x for x in v)
        elif isinstance(v, bool):
            v = str(v).lower()
        elif isinstance(v, float):
            v = "%.17g" % v
        lines.append("%s = %s" % (f.name, v))
    return "\n".join(lines) + "\n"
