"""Command-line front end.

Subcommands write CSV with ``#`` metadata lines (command, seed, versions)
followed by a header row. Exit codes: 0 success, 2 configuration error,
3 unmet precondition, 4 numerical failure, 5 I/O error.

CSV columns
  solve      closed/hermite: x, g ; laplace: alpha, r
  check      n, alpha, I_n
  transform  t, f_nu
  invert     t, f, unreliable
  simulate   tau (absorbed hitting times, sorted)
  examples   point, f, g, g_alt (example 6: point, f_series, f_mixture, g)
"""

from __future__ import annotations

import argparse
import configparser
import io
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy
from scipy import stats

from . import __version__
from .boundaries import Linear, parse_boundary
from .errors import ConfigError, RFPTError
from .targets import GammaMixture, gamma_density, parse_target

IO_EXIT = 5
COMMANDS = ("solve", "check", "transform", "invert", "simulate", "examples")


@dataclass
class RunConfig:
    command: str
    boundary: Optional[str] = None
    target: Optional[str] = None
    method: Optional[str] = None
    output: Optional[str] = None
    seed: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        self.seed = int(self.seed)
        self.options = {str(k): str(v) for k, v in self.options.items()}

    def serialize(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        run = {"command": self.command, "seed": str(self.seed)}
        for key in ("boundary", "target", "method", "output"):
            value = getattr(self, key)
            if value is not None:
                run[key] = value
        cp["run"] = run
        cp["options"] = dict(sorted(self.options.items()))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from None
        if "run" not in cp or "command" not in cp["run"]:
            raise ConfigError("config needs a [run] section with a command")
        run = cp["run"]
        unknown = set(run) - {"command", "boundary", "target", "method", "output", "seed"}
        if unknown:
            raise ConfigError(f"unknown [run] keys: {sorted(unknown)}")
        try:
            seed = int(run.get("seed", "0"))
        except ValueError:
            raise ConfigError("seed must be an integer") from None
        opts = dict(cp["options"]) if "options" in cp else {}
        return cls(run["command"], run.get("boundary"), run.get("target"), run.get("method"),
                   run.get("output"), seed, opts)

    def opt(self, key: str, default=None, kind=str):
        raw = self.options.get(key)
        if raw is None:
            return default
        try:
            return kind(raw)
        except ValueError:
            raise ConfigError(f"option {key}={raw!r} is not a valid {kind.__name__}") from None


# --------------------------------------------------------------------------
# CSV output
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def render_csv(cfg: RunConfig, columns, rows, meta: Optional[dict] = None) -> str:
    lines = [f"# command: {cfg.command}", f"# seed: {cfg.seed}",
             f"# versions: rfpt {__version__}, numpy {np.__version__}, scipy {scipy.__version__}"]
    for key in ("boundary", "target", "method"):
        value = getattr(cfg, key)
        if value is not None:
            lines.append(f"# {key}: {value}")
    for k, v in sorted(cfg.options.items()):
        lines.append(f"# option {k}: {v}")
    for k, v in (meta or {}).items():
        lines.append(f"# {k}: {v}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _grid(cfg: RunConfig, lo_key: str, hi_key: str, lo: float, hi: float, n: int = 101) -> np.ndarray:
    a = cfg.opt(lo_key, lo, float)
    b = cfg.opt(hi_key, hi, float)
    m = cfg.opt("n-points", n, int)
    if m < 2 or b <= a:
        raise ConfigError("grid needs at least two points and an increasing range")
    return np.linspace(a, b, m)


def _need(cfg: RunConfig, key: str) -> str:
    value = getattr(cfg, key)
    if not value:
        raise ConfigError(f"{cfg.command} needs --{key}")
    return value


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def _cmd_solve(cfg: RunConfig):
    b = parse_boundary(_need(cfg, "boundary"))
    f = parse_target(_need(cfg, "target"))
    method = cfg.method or "closed"
    if method == "closed":
        from .linear import solve_gamma_mixture
        if not isinstance(b, Linear) or not isinstance(f, GammaMixture):
            raise ConfigError("the closed form needs a linear boundary and a gamma-mixture target")
        g = solve_gamma_mixture(b.mu, f)
        x = _grid(cfg, "x-min", "x-max", 0.0, 5.0)
        return ["x", "g"], zip(x, g.pdf(x)), {"solution": g.tag}
    if method == "hermite":
        from .hermite import solve_series
        anchor = cfg.opt("anchor", None, float)
        n_terms = cfg.opt("terms", 40, int)
        x = _grid(cfg, "x-min", "x-max", 0.0, 5.0)
        s = solve_series(b, f, anchor, n_terms, x_max=float(x[-1]))
        coeff_path = cfg.opt("coeffs")
        if coeff_path:
            table = render_csv(cfg, ["n", "a_n", "scaled"], zip(range(s.N + 1), s.coeffs, s.scaled))
            _write(coeff_path, table)
        meta = {"solution": s.tag, "anchor": s.t_anchor, "terms": s.N,
                "est_trunc_error": s.est_trunc_error, "negative_mass": s.negative_mass()}
        return ["x", "g"], zip(x, s.evaluate(x)), meta
    if method == "laplace":
        from .transforms import r_alpha
        alphas = _grid(cfg, "alpha-min", "alpha-max", 0.1, 5.0, 50)
        return ["alpha", "r"], ((a, r_alpha(b, f, float(a))) for a in alphas), {"solution": "LaplaceOnly"}
    raise ConfigError(f"unknown solve method {method!r}")


def _cmd_check(cfg: RunConfig):
    from .transforms import DEFAULT_ALPHA_GRID, check_complete_monotonicity, kernel_triviality
    b = parse_boundary(_need(cfg, "boundary"))
    f = parse_target(_need(cfg, "target"))
    n_max = cfg.opt("n-max", 8, int)
    alphas = cfg.opt("alphas")
    try:
        grid = [float(a) for a in alphas.split(",")] if alphas else list(DEFAULT_ALPHA_GRID)
    except ValueError:
        raise ConfigError(f"bad alpha list {alphas!r}") from None
    rep = check_complete_monotonicity(b, f, n_max, grid)
    meta = {"verdict": rep.verdict, "min_value": rep.min_value, "witness": rep.witness,
            "hypotheses": rep.hypotheses, "uniqueness": kernel_triviality(b)}
    print(f"{rep.verdict}: min I_n = {rep.min_value:.6g}" + (f" at (n, alpha) = {rep.witness}" if rep.witness else ""),
          file=sys.stderr)
    return ["n", "alpha", "I_n"], list(rep.rows()), meta


def _gamma_source(cfg: RunConfig) -> tuple[float, float]:
    f = parse_target(cfg.target or "gamma:2:0.5")
    if not isinstance(f, GammaMixture) or len(f.components) != 1:
        raise ConfigError("transform needs a single gamma target (gamma:SCALE:SHAPE or exp:RATE)")
    c = f.components[0]
    return c.scale, c.shape


def _cmd_transform(cfg: RunConfig):
    from .boundary_maps import affine_gamma_density_grid
    from .inversion import GaverStehfest, TalbotContour
    mu = cfg.opt("from-slope", None, float)
    nu = cfg.opt("to-slope", None, float)
    if mu is None or nu is None:
        raise ConfigError("transform needs --from-slope and --to-slope")
    scale, shape = _gamma_source(cfg)
    t = _grid(cfg, "t-min", "t-max", 0.01, 10.0, 200)
    method = cfg.method or "auto"
    chosen = {"auto": None, "explicit": None, "talbot": TalbotContour(), "stehfest": GaverStehfest()}
    if method not in chosen:
        raise ConfigError(f"unknown transform method {method!r}")
    if method == "explicit" and mu <= nu:
        raise ConfigError("the explicit integral needs from-slope > to-slope")
    if method == "auto" and mu <= nu:
        chosen["auto"] = TalbotContour()
    vals = affine_gamma_density_grid(scale, shape, mu, nu, t, chosen[method])
    route = "explicit integral" if chosen[method] is None else type(chosen[method]).__name__
    return ["t", "f_nu"], zip(t, vals), {"route": route}


def _tabulated_transform(path: str):
    from scipy.interpolate import CubicSpline

    from .inversion import LaplaceFn
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        if isinstance(exc, OSError):
            raise
        raise ConfigError(f"cannot read transform table {path}: {exc}") from None
    s, F = data[:, 0], data[:, 1]
    if np.any(np.diff(s) <= 0) or np.any(F <= 0) or s[0] <= 0:
        raise ConfigError("table needs increasing positive s and positive F(s)")
    ls = np.log(s)
    # Gaver-Stehfest amplifies interpolation kinks, so the table is splined in log-log
    spline = CubicSpline(ls, np.log(F))

    def ev(x):
        lx = math.log(x)
        if lx < ls[0] or lx > ls[-1]:
            raise ConfigError(f"s={x:g} outside the tabulated range")
        return math.exp(float(spline(lx)))

    return LaplaceFn(ev, float(s[0]), f"table {path}")


def _named_transform(text: str):
    from .boundary_maps import affine_gamma_laplace, gamma_mixture_laplace
    kind, _, rest = text.partition(":")
    if kind == "affine":
        try:
            scale, shape, mu, nu = (float(v) for v in rest.split(":"))
        except ValueError:
            raise ConfigError("affine transform spec is affine:SCALE:SHAPE:MU:NU") from None
        return affine_gamma_laplace(scale, shape, mu, nu)
    f = parse_target(text)
    if not isinstance(f, GammaMixture):
        raise ConfigError(f"no closed-form transform for {text!r}")
    return gamma_mixture_laplace(f)


def _cmd_invert(cfg: RunConfig):
    from .inversion import GaverStehfest, InversionConfig, TalbotContour, invert
    table = cfg.opt("table")
    spec = cfg.opt("transform")
    if bool(table) == bool(spec):
        raise ConfigError("invert needs exactly one of --transform or --table")
    F = _tabulated_transform(table) if table else _named_transform(spec)
    method = cfg.method or ("talbot" if F.is_analytic else "stehfest")
    if method == "talbot":
        m = TalbotContour(cfg.opt("nodes", 24, int))
    elif method == "stehfest":
        m = GaverStehfest(cfg.opt("terms", 14, int))
    else:
        raise ConfigError(f"unknown inversion method {method!r}")
    t = _grid(cfg, "t-min", "t-max", 0.05, 10.0, 200)
    res = invert(F, InversionConfig(m, t))
    meta = {"transform": F.provenance, "cross_method_max_diff": res.cross_method_max_diff}
    return ["t", "f", "unreliable"], zip(res.t, res.values, res.unreliable), meta


def _cmd_simulate(cfg: RunConfig):
    from .montecarlo import SimConfig, parse_x_dist, simulate_tau
    b = parse_boundary(_need(cfg, "boundary"))
    xs = parse_x_dist(cfg.opt("x-dist", "exp:1"))
    bridge = cfg.opt("bridge", "on")
    if bridge not in ("on", "off"):
        raise ConfigError("--bridge takes on or off")
    kw = {}
    workers = cfg.opt("workers", None, int)
    if workers is not None:
        kw["n_workers"] = workers
    sim = SimConfig(n_paths=cfg.opt("paths", 100_000, int), dt=cfg.opt("dt", 1e-3, float),
                    t_horizon=cfg.opt("horizon", 50.0, float), bridge_correction=bridge == "on",
                    seed=cfg.seed, **kw)
    emp = simulate_tau(b, xs, sim)
    meta = {"n_paths": emp.n_paths, "n_absorbed": emp.n_absorbed, "n_censored": emp.n_censored,
            "instant_absorptions": emp.n_instant, "first_step_fraction": emp.first_step_fraction}
    target = cfg.target
    if target:
        f = parse_target(target)
        meta["ks_vs_target"] = emp.ks_vs(f.cdf)
        meta["ks_95pct_threshold"] = 1.36 / math.sqrt(emp.n_paths)
    print(", ".join(f"{k}={v}" for k, v in meta.items()), file=sys.stderr)
    if cfg.opt("format", "csv") == "npy":
        if not cfg.output:
            raise ConfigError("npy output needs --output")
        return None, emp.times, meta
    return ["tau"], ((v,) for v in emp.times), meta


def example_table(ex_id: int):
    """Columns, rows and metadata reproducing one of the six worked examples."""
    from . import linear as L
    x = np.linspace(0.0, 5.0, 51)
    x[0] = 1e-6
    if ex_id == 1:
        mu, shape = 1.0, 1.5
        f = gamma_density(2.0 / mu ** 2, shape)
        g = L.solve_gamma_mixture(mu, f)
        alt = stats.gamma.pdf(x, 2 * shape, scale=1.0 / mu)
        meta = {"example": "single gamma at the critical scale 2/mu^2", "mu": mu, "shape": shape}
    elif ex_id == 2:
        mu = 1.0
        f = gamma_density(2.0 / mu ** 2, 0.5)
        g = L.solve_gamma_mixture(mu, f)
        alt = mu * np.exp(-mu * x)
        meta = {"example": "exponential start", "mu": mu}
    elif ex_id == 3:
        mu = 1.5
        f = GammaMixture([(0.4, 1.0, 1.0), (0.6, 2.0, 1.0)], label="shape-one mixture")
        g = L.solve_gamma_mixture(mu, f)
        alt = L.example3_density(mu, f)(x)
        meta = {"example": "shape-one mixture, sinh form", "mu": mu}
    elif ex_id == 4:
        mu, k = 1.5, 3.0
        f = gamma_density(2.0, k / 2)
        g = L.solve_gamma_mixture(mu, f)
        alt = L.example4_density(mu, k)(x)
        meta = {"example": "chi-square target", "mu": mu, "k": k}
    elif ex_id == 5:
        mu, a, v, c = 1.5, 1.0, 0.5, 0.5
        f = L.build_family(L.PoissonGamma(a, v, c))
        g = L.solve_gamma_mixture(mu, f)
        alt = L.example5_density(mu, a, v, c)(x)
        meta = {"example": "Poisson-weighted gammas", "mu": mu, "a": a, "v": v, "c": c,
                "truncated_mass": f.truncated_mass}
    elif ex_id == 6:
        mu = 1.0
        kind = L.Hypergeometric((1.0,), (2.5,), 0.4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            f = L.build_family(kind, max_terms=400)
        g = L.solve_gamma_mixture(mu, f)
        f_series = L.hypergeometric_family_pdf(kind, x, f.normalizer)
        meta = {"example": "hypergeometric weights", "mu": mu, "alpha": 1.0, "beta": 2.5, "c": 0.4,
                "normalizer": f.normalizer, "terms": len(f.components), "truncated_mass": f.truncated_mass}
        return ["point", "f_series", "f_mixture", "g"], zip(x, f_series, f.pdf(x), g.pdf(x)), meta
    else:
        raise ConfigError("example id must be between 1 and 6")
    return ["point", "f", "g", "g_alt"], zip(x, f.pdf(x), g.pdf(x), alt), meta


def _cmd_examples(cfg: RunConfig):
    ex_id = cfg.opt("id", None, int)
    if ex_id is None:
        raise ConfigError("examples needs --id")
    return example_table(ex_id)


HANDLERS = {"solve": _cmd_solve, "check": _cmd_check, "transform": _cmd_transform,
            "invert": _cmd_invert, "simulate": _cmd_simulate, "examples": _cmd_examples}


def _write(path: str, text: str) -> None:
    tmp = f"{path}.partial"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def run(cfg: RunConfig) -> int:
    """Execute ``cfg``; output is written only once the command has fully succeeded."""
    try:
        columns, rows, meta = HANDLERS[cfg.command](cfg)
        if columns is None:
            np.save(cfg.output, np.asarray(rows))
            return 0
        text = render_csv(cfg, columns, list(rows), meta)
        if cfg.output:
            _write(cfg.output, text)
        else:
            sys.stdout.write(text)
        return 0
    except RFPTError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error[IOError]: {exc}", file=sys.stderr)
        return IO_EXIT


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------

# flag name -> (help, subcommands)
OPTION_FLAGS = {
    "x-min": ("lower end of the x grid", ("solve",)),
    "x-max": ("upper end of the x grid", ("solve",)),
    "alpha-min": ("smallest alpha for --method laplace", ("solve",)),
    "alpha-max": ("largest alpha for --method laplace", ("solve",)),
    "n-points": ("number of grid points", ("solve", "transform", "invert")),
    "anchor": ("anchor time of the Hermite series", ("solve",)),
    "terms": ("Hermite order, or Gaver-Stehfest term count", ("solve", "invert")),
    "coeffs": ("write the Hermite coefficient table to this file", ("solve",)),
    "n-max": ("highest derivative order checked", ("check",)),
    "alphas": ("comma-separated alpha grid", ("check",)),
    "from-slope": ("slope mu the target is given for", ("transform",)),
    "to-slope": ("new slope nu", ("transform",)),
    "t-min": ("lower end of the t grid", ("transform", "invert")),
    "t-max": ("upper end of the t grid", ("transform", "invert")),
    "transform": ("named transform: exp:R, gamma:A:B, mixture:..., affine:A:B:MU:NU", ("invert",)),
    "table": ("CSV of s,F(s) pairs", ("invert",)),
    "nodes": ("Talbot node count", ("invert",)),
    "x-dist": ("starting-point law: fixed:V, exp:R, gamma:A:B, lognormal:M:S, uniform:L:H", ("simulate",)),
    "paths": ("number of paths", ("simulate",)),
    "dt": ("time step", ("simulate",)),
    "horizon": ("censoring horizon", ("simulate",)),
    "bridge": ("Brownian-bridge crossing correction, on or off", ("simulate",)),
    "workers": ("worker threads (default from $RFPT_THREADS or all cores)", ("simulate",)),
    "format": ("csv or npy", ("simulate",)),
    "id": ("example number 1-6", ("examples",)),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfpt", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"rfpt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key-value config file with [run] and [options] sections")
        p.add_argument("--output", "-o", help="output file (default stdout)")
        p.add_argument("--seed", type=int)
        if name in ("solve", "check", "simulate"):
            p.add_argument("--boundary", help="zero | linear:MU | sqrt:MU | quadratic:C2:C1[:C0]")
        if name in ("solve", "check", "transform", "simulate"):
            p.add_argument("--target", help="exp:RATE | gamma:SCALE:SHAPE | mixture:p,a,b;...")
        if name in ("solve", "transform", "invert"):
            p.add_argument("--method")
        for flag, (text, cmds) in OPTION_FLAGS.items():
            if name in cmds:
                p.add_argument(f"--{flag}", dest=f"opt_{flag}", help=text)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = RunConfig.parse(fh.read())
        if cfg.command != args.command:
            raise ConfigError(f"config is for {cfg.command!r}, not {args.command!r}")
    else:
        cfg = RunConfig(args.command)
    for key in ("boundary", "target", "method", "output", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    for key, value in vars(args).items():
        if key.startswith("opt_") and value is not None:
            cfg.options[key[4:]] = str(value)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except RFPTError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error[IOError]: {exc}", file=sys.stderr)
        return IO_EXIT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
