"""Command-line front end (``bdl``).

Subcommands: ``solve``, ``simulate``, ``regret``, ``fit``, ``stationary-check``.

Configuration comes from built-in defaults, then an optional flat
``key = value`` file (``--config``), then command-line flags. ``regret``
writes the effective configuration next to its CSV (``<out>.meta``); that
file is itself a valid ``--config`` and reproduces the CSV byte for byte.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 numeric
failure (including a failed ``stationary-check``).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats as sps

from .model import ModelParams
from .regret import (
    ALGORITHMS,
    DEFAULT_HORIZONS,
    Algorithm,
    estimate_regret,
    export_curve,
    fit_fixed_power,
    fit_log_rate,
    fit_power_rate,
    import_curve,
)
from .sde import PathStepper, SimConfig
from .stationary import StationaryLaw

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    theta0: float = -1.0
    theta1: float = 1.0
    algorithm: str = "apac"
    K: float = 10.0
    z: float | None = None
    horizons: tuple[float, ...] = DEFAULT_HORIZONS
    reps: int = 200
    dt: float = 1e-2
    seed: int = 0
    x0: float = 0.0
    T: float = 500.0
    n_samples: int = 100_000
    compare_z: float | None = None
    out: str = "regret.csv"
    csv: str | None = None

    def params(self) -> ModelParams:
        try:
            return ModelParams(self.theta0, self.theta1)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"theta0/theta1: {exc}") from exc

    def sim(self) -> SimConfig:
        try:
            return SimConfig(self.dt, self.seed, 0)
        except ValueError as exc:
            raise ConfigError(f"dt/seed: {exc}") from exc

    def algorithm_spec(self) -> Algorithm:
        if self.algorithm == "fixed" and self.z is None:
            raise ConfigError("z: the fixed algorithm needs a threshold level")
        try:
            return Algorithm(self.algorithm, K=self.K if self.algorithm == "apac" else None,
                             z=self.z if self.algorithm == "fixed" else None)
        except ValueError as exc:
            raise ConfigError(f"algorithm: {exc}") from exc

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if f.name == "horizons":
                value = ",".join(_fmt(h) for h in value)
            elif isinstance(value, float):
                value = _fmt(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return format(v, ".17g")


def _parse_float(name, raw):
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{name}: must be finite, got {raw!r}")
    return v


def _parse_int(name, raw, lo=0):
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None
    if v < lo:
        raise ConfigError(f"{name}: must be >= {lo}, got {v}")
    return v


_PARSERS = {
    "theta0": _parse_float,
    "theta1": _parse_float,
    "algorithm": lambda n, r: r,
    "K": _parse_float,
    "z": _parse_float,
    "horizons": lambda n, r: tuple(_parse_float(n, p) for p in r.split(",") if p.strip()),
    "reps": _parse_int,
    "dt": _parse_float,
    "seed": _parse_int,
    "x0": _parse_float,
    "T": _parse_float,
    "n_samples": _parse_int,
    "compare_z": _parse_float,
    "out": lambda n, r: r,
    "csv": lambda n, r: r,
}


def read_config_file(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        raw[key] = value
    return raw


def build_config(args: argparse.Namespace) -> RunConfig:
    raw: dict[str, str] = {}
    if args.config:
        raw.update(read_config_file(args.config))
    for key in _PARSERS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    cfg = RunConfig()
    for key, value in raw.items():
        setattr(cfg, key, _PARSERS[key](key, value))
    if cfg.reps < 2 and args.command in ("regret", "simulate"):
        raise ConfigError(f"reps: need at least 2 replications, got {cfg.reps}")
    if cfg.n_samples < 1:
        raise ConfigError(f"n_samples: must be positive, got {cfg.n_samples}")
    if cfg.algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm: expected one of {', '.join(ALGORITHMS)}, got {cfg.algorithm!r}")
    cfg.params()
    cfg.sim()
    return cfg


def cmd_solve(cfg: RunConfig) -> int:
    p = cfg.params()
    print(f"theta0      = {_fmt(p.theta0)}")
    print(f"theta1      = {_fmt(p.theta1)}")
    print(f"delta       = {_fmt(p.delta)}")
    print(f"eta         = {_fmt(p.eta)}")
    print(f"delta_bar   = {_fmt(p.delta_bar)}")
    for label, z in (("0", 0.0), ("delta", p.delta)):
        law = StationaryLaw(p, z)
        print(f"z={label:<5}  mean = {_fmt(law.mean())}  second_moment = {_fmt(law.second_moment())}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    p = cfg.params()
    sim = cfg.sim()
    z = p.delta if cfg.z is None else cfg.z
    n = sim.steps(cfg.T)
    avg_x, avg_x2 = [], []
    for r in range(cfg.reps):
        st = PathStepper(p, cfg.x0, sim.with_stream(r)).advance(z, n)
        avg_x.append(st.int_x / cfg.T)
        avg_x2.append(st.int_x2 / cfg.T)
    law = StationaryLaw(p, z)
    print(f"z = {_fmt(z)}, T = {_fmt(cfg.T)}, dt = {_fmt(cfg.dt)}, reps = {cfg.reps}")
    for name, values, exact in (("time-average X", avg_x, law.mean()),
                                ("time-average X^2", avg_x2, law.second_moment())):
        a = np.asarray(values)
        se = a.std(ddof=1) / math.sqrt(a.size)
        print(f"{name:<18} {a.mean(): .6f} +/- {se:.6f}   stationary {exact: .6f}")
    return EXIT_OK


def write_plot_script(csv_path: Path, label: str) -> Path:
    script = csv_path.with_suffix(".gp")
    png = csv_path.with_suffix(".png").name
    script.write_text(
        "# gnuplot script; run from this directory: gnuplot " + script.name + "\n"
        "set datafile separator ','\n"
        "set key top left\n"
        "set logscale xy\n"
        "set xlabel 'horizon T'\n"
        "set ylabel 'mean regret'\n"
        "set terminal pngcairo size 800,600\n"
        f"set output '{png}'\n"
        f"plot '{csv_path.name}' skip 1 using 6:7:8 with yerrorlines title '{label}'\n"
    )
    return script


def cmd_regret(cfg: RunConfig, plot_script: bool = False) -> int:
    p = cfg.params()
    alg = cfg.algorithm_spec()
    curve = estimate_regret(alg, p, cfg.horizons, cfg.reps, cfg.seed, cfg.sim(), x0=cfg.x0)
    out = Path(cfg.out)
    export_curve(curve, out)
    excluded = curve.positive().excluded
    meta = out.with_name(out.name + ".meta")
    meta.write_text(
        "# effective configuration; rerun with: bdl regret --config " + meta.name + "\n"
        + cfg.to_text()
        + "# horizons excluded from log fits (nonpositive mean regret): "
        + (",".join(_fmt(h) for h in excluded) or "none") + "\n"
    )
    print(f"wrote {out}")
    if plot_script:
        print(f"wrote {write_plot_script(out, alg.tag)}")
    return EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    path = cfg.csv or cfg.out
    curve = import_curve(path)
    usable = curve.positive()
    if usable.excluded:
        print(f"excluded horizons with nonpositive regret: {usable.excluded}")
    for fit in (fit_power_rate(usable), fit_log_rate(usable), fit_fixed_power(usable, 0.5)):
        print(f"{fit.model:<11} slope = {fit.slope:.6g}  intercept = {fit.intercept:.6g}  "
              f"r^2 = {fit.r_squared:.6f}")
    return EXIT_OK


def stationary_checks(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    """KS test of the exact sampler and simulated vs. closed-form moments.

    ``compare_z`` swaps in a different level for the closed forms only,
    which must make the moment checks fail.
    """
    p = cfg.params()
    sim = cfg.sim()
    z = 0.0 if cfg.z is None else cfg.z
    law = StationaryLaw(p, z)
    draws = law.sample(sim.with_stream(0).stream(), cfg.n_samples)
    ks = sps.kstest(draws, law.cdf)
    crit = float(sps.kstwo.ppf(0.99, cfg.n_samples))
    results = [("ks_exact_sampler", ks.statistic < crit,
                f"D = {ks.statistic:.5f}, 1% critical value = {crit:.5f}")]

    reference = StationaryLaw(p, z if cfg.compare_z is None else cfg.compare_z)
    n = sim.steps(cfg.T)
    avg_x, avg_x2 = [], []
    for r in range(cfg.reps):
        x0 = float(law.sample(sim.with_stream(r + 1).stream()))
        st = PathStepper(p, x0, sim.with_stream(r + 1)).advance(z, n)
        avg_x.append(st.int_x / cfg.T)
        avg_x2.append(st.int_x2 / cfg.T)
    for name, values, exact in (("sim_mean", avg_x, reference.mean()),
                                ("sim_second_moment", avg_x2, reference.second_moment())):
        a = np.asarray(values)
        se = a.std(ddof=1) / math.sqrt(a.size)
        # 4 standard errors of MC noise plus a 2% allowance for the Euler bias.
        tol = 4.0 * se + 0.02 * max(abs(exact), law.second_moment())
        err = abs(a.mean() - exact)
        passed = err <= tol
        results.append((name, passed, f"simulated {a.mean():.5f}, exact {exact:.5f}, "
                                      f"|diff| {err:.5f} {'<=' if passed else '>'} {tol:.5f}"))
    return results


def cmd_stationary_check(cfg: RunConfig) -> int:
    if cfg.reps < 2:
        raise ConfigError(f"reps: need at least 2 replications, got {cfg.reps}")
    ok = True
    for name, passed, detail in stationary_checks(cfg):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name:<18} {detail}")
    return EXIT_OK if ok else EXIT_NUMERIC


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value configuration file")
    common.add_argument("--seed", metavar="U64", help="master seed of the random streams")
    common.add_argument("--reps", metavar="N", help="number of replications")
    common.add_argument("--dt", metavar="F", help="time step")
    common.add_argument("--out", metavar="PATH", help="output CSV path")
    common.add_argument("--theta0", metavar="F")
    common.add_argument("--theta1", metavar="F")
    common.add_argument("--algorithm", metavar="NAME", help=", ".join(ALGORITHMS))
    common.add_argument("--K", metavar="F", help="APAC clip bound")
    common.add_argument("--z", metavar="F", help="threshold level")
    common.add_argument("--horizons", metavar="LIST", help="comma-separated horizons")
    common.add_argument("--x0", metavar="F", help="initial state")
    common.add_argument("--T", metavar="F", help="simulation horizon")
    common.add_argument("--n-samples", dest="n_samples", metavar="N")
    common.add_argument("--compare-z", dest="compare_z", metavar="F",
                        help="closed-form level used by stationary-check (negative control)")
    common.add_argument("--csv", metavar="PATH", help="input CSV for fit")

    parser = argparse.ArgumentParser(prog="bdl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="closed-form optimal control")
    sub.add_parser("simulate", parents=[common], help="simulate threshold-controlled paths")
    rp = sub.add_parser("regret", parents=[common], help="Monte Carlo regret curve to CSV")
    rp.add_argument("--plot-script", action="store_true", help="also write a gnuplot script")
    sub.add_parser("fit", parents=[common], help="fit growth rates to a regret CSV")
    sub.add_parser("stationary-check", parents=[common], help="validate the stationary law")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "regret":
            return cmd_regret(cfg, plot_script=args.plot_script)
        if args.command == "fit":
            return cmd_fit(cfg)
        return cmd_stationary_check(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, ValueError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
