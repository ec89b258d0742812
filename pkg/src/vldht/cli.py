"""Command-line front end: strict JSON configs, experiments, sweeps and CSV output.

Data goes to stdout or ``--out``; logs go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, DomainError, InfeasibleTarget, ResourceLimit, VldhtError
from .info import AuxChannel, JointSource, dsbs

log = logging.getLogger("vldht")

MODES = ("exponent", "exponent-dmc", "simulate-link", "simulate-dmc", "sweep", "verify")
SWEEP_PARAMS = ("alpha", "rho", "R", "epsilon", "kappa")
DEFAULT_SEED = 0

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_VERIFY = 0, 2, 3, 4

_DOMAINS = {
    "alpha": (0.0, 0.5, False),  # upper end open
    "rho": (0.0, 1.0, True),
    "R": (0.0, math.inf, True),
    "epsilon": (0.0, 1.0, False),
    "kappa": (0.0, math.inf, True),
}


@dataclass(frozen=True)
class SweepSpec:
    swept_parameter: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.swept_parameter not in SWEEP_PARAMS:
            raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}", "sweep_param")
        if not isinstance(self.steps, int) or self.steps < 2:
            raise ConfigError("a sweep needs steps >= 2", "steps")
        lo, hi, closed = _DOMAINS[self.swept_parameter]
        for name, v in (("start", self.start), ("stop", self.stop)):
            inside = lo <= v <= hi if closed else lo <= v < hi
            if not inside:
                raise ConfigError(f"{self.swept_parameter} = {v} outside its domain", name)

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass
class ExperimentConfig:
    mode: str
    seed: int = DEFAULT_SEED
    trials: int = 1000
    output_path: str | None = None
    workers: int = 1
    # source: exactly one of alpha (DSBS), joint (table) or rho (Gaussian, closed form only)
    alpha: float | None = None
    joint: list | None = None
    rho: float | None = None
    rate: float | None = None
    epsilon: float = 0.0
    u_cardinality: int | None = None
    restarts: int = 32
    # channel: exactly one of bsc, bec or channel
    bsc: float | None = None
    bec: float | None = None
    channel: list | None = None
    kappa: float | None = None
    # scheme simulation
    n: int | None = None
    mu: float | None = None
    aux: list | None = None
    aux_crossover: float = 0.1
    epsilon_prime: float | None = None
    q_exponent: float = 0.75
    w0: int = 0
    w1: int = 1
    # sweep
    sweep_param: str | None = None
    start: float | None = None
    stop: float | None = None
    steps: int | None = None
    method: str = "auto"
    # verify
    lemma_trials: int = 10_000
    grid_steps: int = 11

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def _check_type(name, value):
    if value is None:
        return
    spec = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    ok = True
    if "int" in spec and "float" not in spec:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif "float" in spec:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif "list" in spec:
        ok = isinstance(value, list)
    elif "str" in spec:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"field {name!r} has the wrong type ({type(value).__name__})", name)


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a single JSON object", "<root>")
    for k in d:
        if k not in FIELD_NAMES:
            raise ConfigError(f"unknown config field {k!r}", k)
    if "mode" not in d:
        raise ConfigError("missing required field 'mode'", "mode")
    for k, v in d.items():
        _check_type(k, v)
    if d["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES}", "mode")
    for k in ("alpha", "rho", "rate", "epsilon", "bsc", "bec", "kappa", "mu", "aux_crossover",
              "epsilon_prime", "q_exponent", "start", "stop"):
        if d.get(k) is not None:
            d[k] = float(d[k])
    return ExperimentConfig(**d)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}", "--config") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}", "--config") from e


# --------------------------------------------------------------------------
# building library objects


def _need(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise ConfigError(f"mode {cfg.mode} requires {name!r}", name)


def _source(cfg) -> JointSource:
    given = [k for k in ("alpha", "joint") if getattr(cfg, k) is not None]
    if len(given) != 1:
        raise ConfigError("give exactly one of 'alpha' or 'joint' for the source", "alpha")
    try:
        return dsbs(cfg.alpha) if cfg.alpha is not None else JointSource(cfg.joint)
    except DomainError as e:
        raise ConfigError(str(e), given[0]) from e


def _dmc(cfg):
    from .solver import Dmc

    given = [k for k in ("bsc", "bec", "channel") if getattr(cfg, k) is not None]
    if len(given) != 1:
        raise ConfigError("give exactly one of 'bsc', 'bec' or 'channel'", "channel")
    try:
        if cfg.bsc is not None:
            return Dmc.bsc(cfg.bsc)
        if cfg.bec is not None:
            return Dmc.bec(cfg.bec)
        return Dmc(cfg.channel)
    except DomainError as e:
        raise ConfigError(str(e), given[0]) from e


def _aux(cfg, src) -> AuxChannel:
    try:
        if cfg.aux is not None:
            return AuxChannel(cfg.aux)
        return AuxChannel.symmetric(src.shape[0], cfg.aux_crossover)
    except DomainError as e:
        raise ConfigError(str(e), "aux") from e


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _write_rows(header, rows, out):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(v) for v in r])


# --------------------------------------------------------------------------
# modes


def _mode_exponent(cfg):
    from .solver import binary_example_exponent, gaussian_example_exponent, solve_vl_exponent

    _need(cfg, "rate")
    if cfg.rho is not None:
        theta = gaussian_example_exponent(cfg.rho, cfg.rate, cfg.epsilon)
        header = ["rate", "epsilon", "theta", "iux", "iuy", "constraint_slack", "theta_source"]
        return header, [[cfg.rate, cfg.epsilon, theta, "", "", "", "closed_form"]], EXIT_OK
    src = _source(cfg)
    res = solve_vl_exponent(src, cfg.rate, cfg.epsilon, u_cardinality=cfg.u_cardinality,
                            restarts=cfg.restarts, seed=cfg.seed)
    if cfg.alpha is not None and cfg.alpha < 0.5:
        log.info("closed form for DSBS(%g): %.12g", cfg.alpha,
                 binary_example_exponent(cfg.alpha, cfg.rate, cfg.epsilon))
    header = ["rate", "epsilon", "theta", "iux", "iuy", "constraint_slack", "theta_source"]
    return header, [[cfg.rate, cfg.epsilon, res.theta, res.iux, res.iuy, res.constraint_slack,
                     "optimizer"]], EXIT_OK


def _mode_exponent_dmc(cfg):
    from .solver import solve_dmc_exponent

    _need(cfg, "kappa")
    src, dmc = _source(cfg), _dmc(cfg)
    if not cfg.kappa > 0:
        raise ConfigError("kappa must be positive", "kappa")
    res = solve_dmc_exponent(src, dmc, cfg.kappa, cfg.epsilon, u_cardinality=cfg.u_cardinality,
                             restarts=cfg.restarts, seed=cfg.seed)
    header = ["capacity", "kappa", "epsilon", "rate", "theta", "iux", "iuy", "constraint_slack"]
    row = [dmc.capacity, cfg.kappa, cfg.epsilon, cfg.kappa * dmc.capacity, res.theta, res.iux,
           res.iuy, res.constraint_slack]
    return header, [row], EXIT_OK


def _mode_simulate_link(cfg):
    from .noiseless import NoiselessConfig, run_trials

    _need(cfg, "n", "mu")
    src = _source(cfg)
    try:
        ncfg = NoiselessConfig(src, _aux(cfg, src), cfg.n, cfg.mu, cfg.epsilon, cfg.rate, cfg.seed)
    except DomainError as e:
        raise ConfigError(str(e), "epsilon") from e
    rep = run_trials(ncfg, cfg.trials, workers=cfg.workers)
    log.info("simulate-link: alpha=%.6g beta=%.6g len/n=%.6g", rep.alpha_hat, rep.beta_hat,
             rep.mean_len_per_symbol)
    header = ["n", "rate", "mu", "epsilon", "trials", "alpha_hat", "alpha_lo", "alpha_hi",
              "beta_hat", "beta_lo", "beta_hi", "mean_len_per_symbol", "empirical_exponent",
              "codebook_size", "reject_mass", "iux", "iuy"]
    row = [cfg.n, ncfg.rate, cfg.mu, cfg.epsilon, cfg.trials, rep.alpha_hat, *rep.alpha_ci,
           rep.beta_hat, *rep.beta_ci, rep.mean_len_per_symbol, rep.empirical_exponent,
           rep.codebook_size, rep.reject_mass, ncfg.iux, ncfg.iuy]
    return header, [row], EXIT_OK


def _mode_simulate_dmc(cfg):
    from .dmc import DmcSchemeConfig, run_dmc_trials

    _need(cfg, "n", "kappa", "epsilon_prime")
    src, dmc = _source(cfg), _dmc(cfg)
    try:
        dcfg = DmcSchemeConfig(src, _aux(cfg, src), dmc, cfg.n, cfg.kappa, cfg.epsilon,
                               cfg.epsilon_prime, cfg.q_exponent, cfg.w0, cfg.w1, rate=cfg.rate,
                               seed=cfg.seed)
    except DomainError as e:
        raise ConfigError(str(e), "epsilon_prime") from e
    rep = run_dmc_trials(dcfg, cfg.trials, workers=cfg.workers)
    log.info("simulate-dmc: alpha=%.6g beta=%.6g tau/n=%.6g", rep.alpha_hat, rep.beta_hat,
             rep.mean_tau_over_n)
    header = ["n", "q", "n_prime", "rate", "kappa", "epsilon", "epsilon_prime", "trials",
              "alpha_hat", "alpha_lo", "alpha_hi", "beta_hat", "beta_lo", "beta_hi",
              "empirical_exponent", "mean_tau_over_n", "analytic_tau_over_n",
              "phase1_fa_hat", "design_fa", "phase1_miss_hat", "design_miss"]
    row = [cfg.n, rep.q, rep.n_prime, rep.rate, cfg.kappa, cfg.epsilon, cfg.epsilon_prime,
           cfg.trials, rep.alpha_hat, *rep.alpha_ci, rep.beta_hat, *rep.beta_ci,
           rep.empirical_exponent, rep.mean_tau_over_n, rep.analytic_tau_over_n,
           rep.phase1_fa_hat, rep.design_fa, rep.phase1_miss_hat, rep.design_miss]
    return header, [row], EXIT_OK


SWEEP_HEADER = ["param", "value", "theta_vl", "theta_fl", "theta_source"]


def sweep_points(cfg, spec: SweepSpec):
    """Rows (param, value, theta_vl, theta_fl, theta_source), one per grid point."""
    from .solver import (binary_example_exponent, gaussian_example_exponent, solve_fl_exponent,
                         solve_vl_exponent)

    if cfg.method not in ("auto", "closed_form", "optimizer"):
        raise ConfigError("method must be auto, closed_form or optimizer", "method")
    p = spec.swept_parameter
    rows = []
    for v in spec.values():
        v = float(v)
        alpha = v if p == "alpha" else cfg.alpha
        rho = v if p == "rho" else cfg.rho
        eps = v if p == "epsilon" else cfg.epsilon
        if p == "kappa":
            rate = v * _dmc(cfg).capacity
        else:
            rate = v if p == "R" else cfg.rate
            if rate is None:
                raise ConfigError("sweep requires 'rate' unless sweeping R or kappa", "rate")
        if p == "alpha" and (cfg.joint is not None or cfg.rho is not None):
            raise ConfigError("an alpha sweep uses the DSBS source only", "joint")
        if rho is not None or p == "rho":
            if cfg.method == "optimizer":
                raise ConfigError("the Gaussian example has no optimizer", "method")
            rows.append((p, v, gaussian_example_exponent(rho, rate, eps),
                         gaussian_example_exponent(rho, rate, 0.0), "closed_form"))
            continue
        closed = alpha is not None and cfg.method != "optimizer"
        if closed:
            if not 0.0 <= alpha < 0.5:
                raise ConfigError(f"alpha = {alpha} outside [0, 0.5)", "alpha")
            rows.append((p, v, binary_example_exponent(alpha, rate, eps),
                         binary_example_exponent(alpha, rate, 0.0), "closed_form"))
            continue
        if cfg.method == "closed_form":
            raise ConfigError("closed forms exist only for the DSBS and Gaussian examples", "method")
        src = dsbs(alpha) if alpha is not None else _source(cfg)
        kw = dict(u_cardinality=cfg.u_cardinality, restarts=cfg.restarts, seed=cfg.seed)
        rows.append((p, v, solve_vl_exponent(src, rate, eps, **kw).theta,
                     solve_fl_exponent(src, rate, **kw).theta, "optimizer"))
    return rows


def emit_sweep_csv(spec: SweepSpec, results, out) -> None:
    """Write the fixed sweep schema to a path or text stream."""
    if not results:
        raise DomainError("no sweep results to write")
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        with open(out, "w", newline="") as fh:
            _write_rows(SWEEP_HEADER, results, fh)
    else:
        _write_rows(SWEEP_HEADER, results, out)


def _mode_sweep(cfg):
    _need(cfg, "sweep_param", "start", "stop", "steps")
    spec = SweepSpec(cfg.sweep_param, cfg.start, cfg.stop, cfg.steps)
    rows = sweep_points(cfg, spec)
    bad = [r for r in rows if r[2] < r[3] - 1e-9]
    if bad:
        log.warning("%d rows with theta_vl < theta_fl", len(bad))
    return SWEEP_HEADER, rows, EXIT_OK


def _mode_verify(cfg):
    from .verify import lemma_suite, solver_oracle_suite

    rows = []
    finite, bad = lemma_suite(cfg.lemma_trials, cfg.seed)
    rows.append(["change_of_measure", f"{finite} finite cases", len(bad), 0, not bad])
    for name, theta, grid, aligned in solver_oracle_suite(cfg.grid_steps):
        rows.append(["solver_ge_grid", name, theta, grid, theta >= grid - 1e-9])
        if aligned:
            rows.append(["solver_near_grid", name, theta, grid, theta - grid <= 5e-3])
    ok = all(r[-1] for r in rows)
    log.info("verify: %d checks, %s", len(rows), "all hold" if ok else "FAILURES")
    return ["check", "case", "value", "reference", "passed"], rows, EXIT_OK if ok else EXIT_VERIFY


_RUNNERS = {
    "exponent": _mode_exponent,
    "exponent-dmc": _mode_exponent_dmc,
    "simulate-link": _mode_simulate_link,
    "simulate-dmc": _mode_simulate_dmc,
    "sweep": _mode_sweep,
    "verify": _mode_verify,
}


def run(cfg: ExperimentConfig, stdout=None) -> int:
    """Execute one experiment and write its CSV; returns the process exit code."""
    stdout = stdout if stdout is not None else sys.stdout
    try:
        header, rows, code = _RUNNERS[cfg.mode](cfg)
        buf = io.StringIO()
        _write_rows(header, rows, buf)
        if cfg.output_path:
            with open(cfg.output_path, "w", newline="") as fh:
                fh.write(buf.getvalue())
            log.info("wrote %d rows to %s", len(rows), cfg.output_path)
        else:
            stdout.write(buf.getvalue())
        return code
    except ConfigError as e:
        log.error("config error in %s: %s", e.field, e)
        return EXIT_CONFIG
    except InfeasibleTarget as e:
        log.error("infeasible configuration: %s", e)
        return EXIT_CONFIG
    except ResourceLimit as e:
        log.error("resource limit: %s", e)
        return EXIT_RESOURCE
    except (DomainError, VldhtError) as e:
        log.error("%s: %s", type(e).__name__, e)
        return EXIT_CONFIG
    except OSError as e:
        log.error("i/o error: %s", e)
        return EXIT_CONFIG


# --------------------------------------------------------------------------
# argument parsing

_FLAG_TYPES = {
    "alpha": float, "rho": float, "rate": float, "epsilon": float, "u_cardinality": int,
    "restarts": int, "bsc": float, "bec": float, "kappa": float, "n": int, "mu": float,
    "aux_crossover": float, "epsilon_prime": float, "q_exponent": float, "w0": int, "w1": int,
    "sweep_param": str, "start": float, "stop": float, "steps": int, "method": str,
    "lemma_trials": int, "grid_steps": int, "workers": int,
}
_MATRIX_FLAGS = ("joint", "channel", "aux")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vldht",
                                     description="Distributed testing against independence "
                                                 "under variable-length coding.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", help="JSON file with a single object of config fields")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--out", dest="output_path")
        p.add_argument("--dump-config", action="store_true",
                       help="print the effective config as JSON and exit")
        for name, typ in _FLAG_TYPES.items():
            p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)
        for name in _MATRIX_FLAGS:
            p.add_argument("--" + name, dest=name, help="matrix as a JSON list of rows")
    return parser


def _effective_config(ns) -> ExperimentConfig:
    d = load_config(ns.config) if ns.config else {}
    if not isinstance(d, dict):
        raise ConfigError("config must be a single JSON object", "<root>")
    if "mode" in d and d["mode"] != ns.mode:
        raise ConfigError(f"config mode {d['mode']!r} differs from subcommand {ns.mode!r}", "mode")
    d["mode"] = ns.mode
    for name in ("seed", "trials", "output_path", *_FLAG_TYPES):
        v = getattr(ns, name)
        if v is not None:
            d[name] = v
    for name in _MATRIX_FLAGS:
        v = getattr(ns, name)
        if v is not None:
            try:
                d[name] = json.loads(v)
            except json.JSONDecodeError as e:
                raise ConfigError(f"--{name} is not a JSON matrix", name) from e
    return config_from_dict(d)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _effective_config(ns)
    except ConfigError as e:
        log.error("config error in %s: %s", e.field, e)
        return EXIT_CONFIG
    if ns.dump_config:
        sys.stdout.write(cfg.to_json() + "\n")
        return EXIT_OK
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
