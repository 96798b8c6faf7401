"""Command-line front end: ``proxcert <certify|solve|sweep> --config <path>``.

The config file holds ``key = value`` lines, ``#`` comments and optional
``[certify]``, ``[solve]`` and ``[sweep]`` sections. Keys outside a section
are always used; keys inside a section are validated but only used when the
section matches the command.

Exit codes: 0 success or certified pass, 2 certified fail, 1 error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .problems import FIXTURE_IDS, Expectation, make_fixture
from .regularity import run_query
from .setvalued import SolutionSet
from .solvers import (
    PDHGMMethod,
    ProxPointMethod,
    default_pdhgm_schedule,
    fit_rate,
    run_with_monitor,
)

COMMANDS = ("certify", "solve", "sweep")
SCHEDULES = ("constant", "linear", "accelerated")


class ConfigError(ValueError):
    pass


def _choice(options):
    def conv(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return conv


def _schedule(s):
    if s not in SCHEDULES:
        raise ValueError(f"unknown schedule '{s}'")
    return s


def _floats(s):
    return [float(t) for t in s.replace(",", " ").split()]


def _nonneg(conv):
    def f(s):
        v = conv(s)
        if v < 0:
            raise ValueError("must be nonnegative")
        return v
    return f


def _positive(conv):
    def f(s):
        v = conv(s)
        if not v > 0:
            raise ValueError("must be positive")
        return v
    return f


# key -> (converter, default, description)
KEYS = {
    "command": (_choice(COMMANDS), None, "certify, solve or sweep"),
    "fixture": (_choice(FIXTURE_IDS), None, "fixture id"),
    # fixture parameters; None means the fixture default
    "mu": (_positive(float), None, "subspace_mu kink location"),
    "L": (_nonneg(int), None, "dist_dyadic truncation level"),
    "fixture_gamma": (float, None, "cone_gamma parameter"),
    "fixture_tau": (_positive(float), None, "orthant_partial step parameter"),
    "alpha": (_positive(float), None, "ball radius, Lasso or TV weight"),
    "q_norm": (_positive(float), None, "ball_indicator |q*|"),
    "angle": (float, None, "ball_indicator direction of x*"),
    "q_star": (float, None, "abs_value base subgradient"),
    "n": (_positive(int), None, "Lasso / TV primal dimension"),
    "m": (_positive(int), None, "Lasso dual dimension"),
    "mode": (_choice(("strictly_complementary", "boundary")), None, "Lasso mode"),
    "seed": (int, 0, "instance and sampling seed"),
    # certifier
    "expectation": (str, None, "name of a row of the fixture verdict table"),
    "kind": (_choice(("psm", "psr")), "psm", "inequality to check"),
    "xi": (_floats, None, "Xi (psm) or P (psr): scalar or diagonal entries"),
    "n_weight": (_floats, [1.0], "N: scalar or diagonal entries"),
    "m_weight": (_floats, [1.0], "M: scalar or diagonal entries"),
    "radius": (_floats, None, "neighbourhood radius (scalar or per axis)"),
    "grid": (_positive(int), None, "grid points per axis"),
    "random_samples": (_nonneg(int), None, "random samples"),
    "slack": (_nonneg(float), 1e-9, "margin slack"),
    "top_k": (_nonneg(int), 10, "counterexamples kept in the report"),
    # solver
    "method": (_choice(("pdhgm", "prox_point")), "pdhgm", "solver"),
    "schedule": (_schedule, "constant", "PDHGM step schedule"),
    "gamma": (_nonneg(float), 0.0, "primal strong monotonicity constant"),
    "rho": (_nonneg(float), 0.0, "dual strong monotonicity constant"),
    "gamma_tilde": (_nonneg(float), 0.0, "acceleration parameter"),
    "delta": (float, 0.5, "step condition slack in (0, 1)"),
    "tau0": (_positive(float), None, "initial primal step"),
    "sigma0": (_positive(float), None, "initial dual step"),
    "step_scale": (_positive(float), 0.99, "tau sigma |K|^2 when steps are not given"),
    "prox_xi": (_nonneg(float), 0.0, "prox point testing growth"),
    "prox_tau": (_positive(float), 0.5, "prox point step"),
    "max_iter": (_nonneg(int), 2000, "iteration limit"),
    "stop_tol": (_nonneg(float), 0.0, "stop when the optimality residual drops below this"),
    "init_scale": (_nonneg(float), 1.0, "half-width of the uniform initial perturbation"),
    "fit_window": (_positive(int), 200, "records used for the rate fit"),
    "fit_floor": (_nonneg(float), 1e-24, "relative floor below which distances count as zero"),
    # sweep
    "sweep_param": (str, None, "solver key to vary"),
    "sweep_values": (_floats, None, "values of the swept key"),
}

_FIXTURE_KEYS = {
    "mu": "mu", "L": "L", "fixture_gamma": "gamma", "fixture_tau": "tau", "alpha": "alpha",
    "q_norm": "q_norm", "angle": "angle", "q_star": "q_star", "n": "n", "m": "m", "mode": "mode",
    "seed": "seed",
}
_FIXTURE_ACCEPTS = {
    "dist_pm1": (), "dist_dyadic": ("L",), "subspace_mu": ("mu",), "cone_gamma": ("gamma",),
    "orthant_swap": (), "orthant_bilinear": (), "orthant_partial": ("tau",),
    "ball_indicator": ("alpha", "q_norm", "angle"), "abs_value": ("q_star",),
    "lasso": ("n", "m", "alpha", "seed", "mode"), "tv1d": ("n", "alpha", "seed"),
}
_SWEEPABLE = ("gamma", "rho", "gamma_tilde", "delta", "tau0", "sigma0", "step_scale", "prox_xi",
              "prox_tau", "seed", "alpha")


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        if key in self.values:
            return self.values[key]
        return KEYS[key][1]

    def get(self, key, default=None):
        v = self[key]
        return default if v is None else v

    def with_values(self, **kw) -> "RunConfig":
        return RunConfig(self.command, {**self.values, **kw}, dict(self.lines))


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config; errors name the key and line number."""
    values, lines = {}, {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1].strip() not in COMMANDS:
                raise ConfigError(f"unknown section {line} (line {lineno})")
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' (line {lineno})")
        key, val = (t.strip() for t in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key '{key}' (line {lineno})")
        if section is not None and key == "command":
            raise ConfigError(f"command must be set outside sections (line {lineno})")
        conv = KEYS[key][0]
        try:
            parsed = conv(val)
        except ValueError as exc:
            msg = str(exc)
            if msg.startswith("unknown schedule"):
                raise ConfigError(f"{msg} (line {lineno})") from None
            raise ConfigError(f"invalid value for '{key}': {msg} (line {lineno})") from None
        values.setdefault(section, {})[key] = parsed
        lines.setdefault(section, {})[key] = lineno
    glob = values.get(None, {})
    if "command" not in glob:
        raise ConfigError("missing required key: command")
    cmd = glob["command"]
    merged = dict(glob)
    merged_lines = dict(lines.get(None, {}))
    merged.update(values.get(cmd, {}))
    merged_lines.update(lines.get(cmd, {}))
    cfg = RunConfig(cmd, merged, merged_lines)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    def need(key):
        if cfg[key] is None:
            raise ConfigError(f"missing required key: {key}")

    def bad(key, msg):
        line = cfg.lines.get(key)
        where = f" (line {line})" if line else ""
        raise ConfigError(f"invalid value for '{key}': {msg}{where}")

    need("fixture")
    fid = cfg["fixture"]
    for key, pname in _FIXTURE_KEYS.items():
        if key in cfg.values and key != "seed" and pname not in _FIXTURE_ACCEPTS[fid]:
            bad(key, f"not a parameter of fixture {fid}")
    if not 0 < cfg["delta"] < 1:
        bad("delta", "must lie in (0, 1)")
    if cfg.command == "certify":
        if cfg["expectation"] is None and cfg["xi"] is None:
            raise ConfigError("missing required key: xi (or expectation)")
    else:
        if cfg["method"] == "pdhgm" and fid not in ("lasso", "tv1d"):
            bad("method", f"pdhgm needs a saddle problem fixture, not {fid}")
        if cfg["method"] == "prox_point" and fid in ("lasso", "tv1d"):
            bad("method", "prox_point needs a map fixture")
    if cfg.command == "sweep":
        need("sweep_param")
        need("sweep_values")
        if cfg["sweep_param"] not in _SWEEPABLE:
            bad("sweep_param", f"expected one of {', '.join(_SWEEPABLE)}")


# -- commands --------------------------------------------------------------------

def _fixture_of(cfg: RunConfig):
    fid = cfg["fixture"]
    params = {}
    for key, pname in _FIXTURE_KEYS.items():
        if pname in _FIXTURE_ACCEPTS[fid] and cfg[key] is not None:
            params[pname] = cfg[key]
    return make_fixture(fid, **params)


def _weight(v, dim):
    v = np.asarray(v, dtype=float)
    if v.size == 1:
        return float(v[0])
    if v.size != dim:
        raise ConfigError(f"weight needs 1 or {dim} entries, got {v.size}")
    return np.diag(v)


def build_query(cfg: RunConfig):
    fx = _fixture_of(cfg)
    dim = fx.base_u.size
    if cfg["expectation"] is not None:
        match = [e for e in fx.expectations if e.name == cfg["expectation"]]
        if not match:
            names = "; ".join(e.name for e in fx.expectations)
            raise ConfigError(f"fixture {fx.id} has no expectation '{cfg['expectation']}' (known: {names})")
        e = match[0]
    else:
        e = Expectation("config", cfg["kind"],
                        (_weight(cfg["xi"], dim), _weight(cfg["n_weight"], dim), _weight(cfg["m_weight"], dim)),
                        "")
    q = fx.query(e, slack=cfg["slack"])
    over = {}
    if cfg["radius"] is not None:
        r = np.asarray(cfg["radius"], dtype=float)
        over["radius"] = r if r.size > 1 else float(r[0])
    if cfg["grid"] is not None:
        over["grid_points_per_axis"] = cfg["grid"]
    if cfg["random_samples"] is not None:
        over["random_samples"] = cfg["random_samples"]
    if "seed" in cfg.values:
        over["seed"] = cfg["seed"]
    if over:
        q.neighborhood = dataclasses.replace(q.neighborhood, **over)
    return q


def run_certify(cfg: RunConfig, out: Path, workers: int = 1) -> int:
    q = build_query(cfg)
    rep = run_query(q, workers=workers, top_k=cfg["top_k"])
    emit_report(rep, out / "certificate.txt")
    print(f"verdict={rep.verdict} worst_margin={rep.worst_margin:.17g} samples={rep.samples_evaluated}")
    return 0 if rep.passed else 2


def _initial_point(fx, cfg: RunConfig):
    rng = np.random.default_rng(cfg["seed"])
    base = fx.solution_set.representatives(1)[0]
    return base + rng.uniform(-cfg["init_scale"], cfg["init_scale"], base.size)


def build_method(cfg: RunConfig, fx=None):
    fx = _fixture_of(cfg) if fx is None else fx
    if cfg["method"] == "pdhgm":
        P = fx.map
        s = default_pdhgm_schedule(P, cfg["schedule"], gamma=cfg["gamma"], rho=cfg["rho"],
                                   gamma_tilde=cfg["gamma_tilde"], delta=cfg["delta"],
                                   step_scale=cfg["step_scale"], tau0=cfg["tau0"], sigma0=cfg["sigma0"],
                                   seed=cfg["seed"])
        return fx, PDHGMMethod(P, s)
    if not fx.map.has_resolvent:
        raise ConfigError(f"fixture {fx.id} has no resolvent")
    return fx, ProxPointMethod(fx.map, cfg["prox_tau"], cfg["prox_xi"])


def solve_job(cfg: RunConfig):
    """Run one solver job.

    Returns the trace CSV, the summary line, the final distance, the fitted
    rate (a negative exponent when the polynomial model fits better), the
    divergence flag and the trace notes.
    """
    fx, method = build_method(cfg)
    sol: SolutionSet = fx.solution_set
    tr = run_with_monitor(method, sol, _initial_point(fx, cfg), max_iter=cfg["max_iter"],
                          stop_tol=cfg["stop_tol"])
    d = tr.column("dist2_euclid")
    try:
        fit = fit_rate(d, window=cfg["fit_window"], iters=tr.column("iter"), floor=cfg["fit_floor"] * d[0])
        summary, rate = fit.summary(), fit.rate
    except ValueError as exc:
        summary, rate = f"rate_kind=none rate=nan r2=nan ({exc})", math.nan
    return tr.to_csv(), summary, float(d[-1]), rate, tr.diverged, tr.notes


def run_solve(cfg: RunConfig, out: Path) -> int:
    csv_text, summary, _, _, diverged, notes = solve_job(cfg)
    emit_text(csv_text, out / "trace.csv")
    emit_text(summary + "\n", out / "summary.txt")
    print(summary)
    if diverged:
        print("error: iteration diverged; " + "; ".join(notes), file=sys.stderr)
        return 1
    return 0


def _sweep_worker(args):
    cfg, key, value = args
    if key == "seed":
        value = int(value)
    return solve_job(cfg.with_values(**{key: value}))


def run_sweep(cfg: RunConfig, out: Path, workers: int = 1) -> int:
    key, vals = cfg["sweep_param"], cfg["sweep_values"]
    jobs = [(cfg, key, v) for v in vals]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    rows = ["param,final_dist2,fitted_rate"]
    status = 0
    # single collector: files are written here, in parameter order
    for k, (v, res) in enumerate(zip(vals, results)):
        csv_text, summary, final, rate, diverged, notes = res
        emit_text(csv_text, out / f"trace_{k:03d}.csv")
        rows.append(f"{v:.17g},{final:.17g},{rate:.17g}")
        if diverged:
            print(f"error: run {k} ({key}={v:g}) diverged", file=sys.stderr)
            status = 1
    emit_text("\n".join(rows) + "\n", out / "sweep.csv")
    return status


# -- output ----------------------------------------------------------------------

def emit_text(text: str, path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def emit_report(obj, path):
    """Write a trace (CSV) or a certificate report (text)."""
    text = obj.to_csv() if hasattr(obj, "to_csv") else obj.to_text()
    emit_text(text, path)


def run_command(cfg: RunConfig, out=".", workers: int = 1) -> int:
    out = Path(out)
    if cfg.command == "certify":
        return run_certify(cfg, out, workers)
    if cfg.command == "solve":
        return run_solve(cfg, out)
    return run_sweep(cfg, out, workers)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="proxcert", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=".")
    ap.add_argument("--workers", type=int, default=int(os.environ.get("PROXCERT_WORKERS", "1")))
    ap.add_argument("--seed-override", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text)
        if cfg.command != args.command:
            raise ConfigError(f"config command '{cfg.command}' does not match '{args.command}'")
        if args.seed_override is not None:
            cfg = cfg.with_values(seed=args.seed_override)
        return run_command(cfg, args.out, max(1, args.workers))
    except (ConfigError, OSError, ValueError, RuntimeError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
