"""Benchmark experiment runner.

Runs a grid of (objective x dimension x controller x seed) cells, writes
one trace CSV per run plus a summary CSV with median and interquartile
evaluation counts to target, and prints the summary table.

Example:
    tpcma --objective sphere,rosenbrock --n 10,20 --controller tpa,csa \\
          --seeds 0,1,2,3,4 --budget 100000 --target-f 1e-9 --out results/
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import (
    CONTROLLERS,
    RestartPolicy,
    RunConfig,
    RunResult,
    TerminationCriteria,
    run,
    run_with_restarts,
)
from .objectives import OBJECTIVE_KINDS, ObjectiveSpec

__all__ = ["ExperimentConfig", "ConfigError", "parse_config", "run_experiment", "main"]

TRACE_COLUMNS = ("generation", "evals", "best_f", "sigma", "alpha_s", "axis_ratio", "trace_C")

SUMMARY_COLUMNS = (
    "objective",
    "n",
    "controller",
    "runs",
    "solved",
    "failed",
    "median_evals",
    "q25_evals",
    "q75_evals",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message lists every problem."""


@dataclass(frozen=True)
class ExperimentConfig:
    """A grid of runs plus shared run settings and output options."""

    objectives: tuple[str, ...] = ("sphere",)
    dimensions: tuple[int, ...] = (10,)
    controllers: tuple[str, ...] = ("tpa", "csa")
    seeds: tuple[int, ...] = tuple(range(11))
    budget: int = 100_000
    target_f: float = 1e-9
    tol_fun: float = 1e-12
    tol_x: float = 0.0
    lam: int | None = None
    beta: float | None = None
    c_alpha: float | None = None
    sigma0: float = 2.0
    m0: float = 3.0
    noise_level: float = 1.0
    condition: float = 1e6
    restarts: int = 0
    out: str = "results"
    workers: int = 1
    timestamp: bool = True

    def validate(self) -> None:
        problems = []
        if not self.objectives:
            problems.append("objective grid is empty")
        for kind in self.objectives:
            if kind not in OBJECTIVE_KINDS:
                problems.append(f"unknown objective {kind!r}; choose from {OBJECTIVE_KINDS}")
        if not self.dimensions:
            problems.append("dimension grid is empty")
        for n in self.dimensions:
            if n < 1:
                problems.append(f"dimension must be >= 1, got {n}")
        if not self.controllers:
            problems.append("controller grid is empty")
        for c in self.controllers:
            if c not in CONTROLLERS:
                problems.append(f"unknown controller {c!r}; choose from {CONTROLLERS}")
        if not self.seeds:
            problems.append("seed list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            problems.append("seeds must be distinct")
        if self.budget < 0:
            problems.append(f"budget must be >= 0, got {self.budget}")
        if self.sigma0 <= 0:
            problems.append(f"sigma0 must be positive, got {self.sigma0}")
        if self.restarts < 0:
            problems.append(f"restarts must be >= 0, got {self.restarts}")
        if self.workers < 1:
            problems.append(f"workers must be >= 1, got {self.workers}")
        if problems:
            raise ConfigError("; ".join(problems))


@dataclass(frozen=True)
class _Cell:
    objective: str
    n: int
    controller: str
    seed: int
    config: ExperimentConfig

    @property
    def name(self) -> str:
        return f"{self.objective}_n{self.n}_{self.controller}_seed{self.seed}"


@dataclass
class _CellOutcome:
    cell: _Cell
    solved: bool = False
    evals_to_target: int | None = None
    best_f: float = math.nan
    error: str | None = None


def _run_config_for(cell: _Cell) -> RunConfig:
    cfg = cell.config
    spec = ObjectiveSpec(
        kind=cell.objective,
        n=cell.n,
        noise_level=cfg.noise_level if cell.objective == "noisy_sphere" else 0.0,
        condition=cfg.condition,
    )
    criteria = TerminationCriteria(
        max_evals=cfg.budget,
        target_f=cfg.target_f,
        tol_fun=cfg.tol_fun,
        tol_x=cfg.tol_x,
    )
    return RunConfig(
        objective=spec,
        controller=cell.controller,
        seed=cell.seed,
        m0=cfg.m0,
        sigma0=cfg.sigma0,
        lam=cfg.lam,
        beta_bias=cfg.beta,
        c_alpha=cfg.c_alpha,
        criteria=criteria,
    )


def _format(value) -> str:
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def write_trace_csv(path: Path, cell: _Cell, result: RunResult, *, timestamp: bool) -> None:
    """One row per generation, fixed column order, deterministic bytes.

    Header comment lines carry the run configuration; the creation
    timestamp line is suppressed with timestamp=False so that reruns are
    byte-identical.
    """
    params, _ = _run_config_for(cell).build_params()
    with path.open("w", newline="") as fh:
        fh.write(f"# run={cell.name}\n")
        fh.write(
            f"# objective={cell.objective} n={cell.n} controller={cell.controller} "
            f"seed={cell.seed} sigma0={_format(cell.config.sigma0)} "
            f"m0={_format(cell.config.m0)} budget={cell.config.budget} "
            f"target_f={_format(cell.config.target_f)} restarts={cell.config.restarts}\n"
        )
        fh.write(
            f"# lam={params.lam} mu={params.mu} mu_w={_format(params.mu_w)} "
            f"c_c={_format(params.c_c)} c_1={_format(params.c_1)} c_mu={_format(params.c_mu)} "
            f"alpha_test={_format(params.alpha_test)} alpha_change={_format(params.alpha_change)} "
            f"beta_bias={_format(params.beta_bias)} c_alpha={_format(params.c_alpha)} "
            f"c_sigma={_format(params.c_sigma)} d_sigma={_format(params.d_sigma)}\n"
        )
        fh.write(f"# termination={result.termination} evals={result.evals} "
                 f"best_f={_format(result.best_f)}\n")
        if timestamp:
            fh.write(f"# created={time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in result.trace:
            writer.writerow(
                (
                    row.generation,
                    row.evals,
                    _format(row.best_f),
                    _format(row.sigma),
                    _format(row.alpha_s),
                    _format(row.axis_ratio),
                    _format(row.trace_C),
                )
            )


def _execute_cell(cell: _Cell) -> _CellOutcome:
    outcome = _CellOutcome(cell=cell)
    try:
        config = _run_config_for(cell)
        if cell.config.restarts > 0:
            result = run_with_restarts(config, RestartPolicy(max_restarts=cell.config.restarts))
        else:
            result = run(config)
        outcome.solved = result.termination == "target_f"
        outcome.evals_to_target = result.evals if outcome.solved else cell.config.budget
        outcome.best_f = result.best_f
        out_dir = Path(cell.config.out)
        write_trace_csv(
            out_dir / f"{cell.name}.csv", cell, result, timestamp=cell.config.timestamp
        )
    except Exception as exc:  # failures are per-cell, not fatal to the batch
        outcome.error = f"{type(exc).__name__}: {exc}"
        outcome.evals_to_target = cell.config.budget
    return outcome


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """Run the full grid and write per-run CSVs plus summary.csv.

    Returns the summary rows (one per objective x n x controller cell
    group).  Failed runs count at budget in the evaluation statistics and
    are tallied in the ``failed`` column.
    """
    config.validate()
    out_dir = Path(config.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output path {config.out!r} is not writable: {exc}") from exc

    cells = [
        _Cell(objective=kind, n=n, controller=controller, seed=seed, config=config)
        for kind in config.objectives
        for n in config.dimensions
        for controller in config.controllers
        for seed in config.seeds
    ]

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_execute_cell, cells))
    else:
        outcomes = [_execute_cell(cell) for cell in cells]

    for outcome in outcomes:
        if outcome.error is not None:
            print(f"run {outcome.cell.name} failed: {outcome.error}", file=sys.stderr)

    summary = []
    for kind in config.objectives:
        for n in config.dimensions:
            for controller in config.controllers:
                group = [
                    o
                    for o in outcomes
                    if o.cell.objective == kind and o.cell.n == n and o.cell.controller == controller
                ]
                evals = np.array([o.evals_to_target for o in group], dtype=float)
                q25, q50, q75 = np.percentile(evals, [25.0, 50.0, 75.0])
                summary.append(
                    {
                        "objective": kind,
                        "n": n,
                        "controller": controller,
                        "runs": len(group),
                        "solved": sum(o.solved for o in group),
                        "failed": sum(o.error is not None for o in group),
                        "median_evals": float(q50),
                        "q25_evals": float(q25),
                        "q75_evals": float(q75),
                    }
                )

    with (out_dir / "summary.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in summary:
            writer.writerow({k: _format(v) for k, v in row.items()})
    return summary


# -- argument / config-file parsing -------------------------------------------


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part != "")

def _str_list(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


_OPTIONS: dict[str, tuple] = {
    # name -> (converter, help)
    "objective": (_str_list, f"comma list of objectives; choose from {', '.join(OBJECTIVE_KINDS)}"),
    "n": (_int_list, "comma list of dimensions"),
    "controller": (_str_list, f"comma list of controllers; choose from {', '.join(CONTROLLERS)}"),
    "seeds": (_int_list, "comma list of distinct RNG seeds"),
    "lambda": (int, "population size override (default 4 + floor(3 ln n))"),
    "beta": (float, "step-size increase bias (two-point controllers only)"),
    "c-alpha": (float, "step-size signal smoothing rate in (0, 1]"),
    "budget": (int, "max function evaluations per run"),
    "target-f": (float, "stop when a fitness below this is found"),
    "tol-fun": (float, "stop on a flat best-fitness window (0 disables)"),
    "tol-x": (float, "stop when sigma * max axis std falls below this (0 disables)"),
    "sigma0": (float, "initial step-size"),
    "m0": (float, "initial mean, broadcast to all coordinates"),
    "noise-level": (float, "multiplicative noise strength of noisy_sphere"),
    "condition": (float, "ellipsoid condition number"),
    "restarts": (int, "max restarts with doubled population size"),
    "out": (str, "output directory for per-run CSVs and summary.csv"),
    "workers": (int, "parallel worker processes"),
}

_FIELD_FOR_OPTION = {
    "objective": "objectives",
    "n": "dimensions",
    "controller": "controllers",
    "lambda": "lam",
    "c-alpha": "c_alpha",
    "target-f": "target_f",
    "tol-fun": "tol_fun",
    "tol-x": "tol_x",
    "noise-level": "noise_level",
}


def _field_name(option: str) -> str:
    return _FIELD_FOR_OPTION.get(option, option.replace("-", "_"))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tpcma",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", type=str, default=None,
                        help="key=value config file; explicit flags override it")
    for option, (converter, help_text) in _OPTIONS.items():
        names = [f"--{option}"]
        if option == "seeds":
            names.append("--seed")  # convenient singular alias
        parser.add_argument(*names, type=converter, default=None, help=help_text)
    parser.add_argument("--no-timestamp", action="store_true",
                        help="omit the creation-time header line from CSVs")
    return parser


def _parse_config_file(path: str) -> dict:
    """Flat key=value file; keys match the CLI flags (dashes or underscores)."""
    values: dict[str, object] = {}
    problems: list[str] = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    known = {opt.replace("-", "_"): opt for opt in _OPTIONS}
    known["seed"] = "seeds"
    known["no_timestamp"] = "no-timestamp"
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            continue
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in known:
            problems.append(f"{path}:{lineno}: unknown key {key.replace('_', '-')!r}")
            continue
        if key == "no_timestamp":
            if value.lower() not in ("true", "false", "0", "1"):
                problems.append(f"{path}:{lineno}: no-timestamp must be true/false")
            else:
                values["timestamp"] = value.lower() in ("false", "0")
            continue
        converter = _OPTIONS[known[key]][0]
        try:
            values[_field_name(known[key])] = converter(value)
        except ValueError:
            problems.append(f"{path}:{lineno}: bad value {value!r} for {key.replace('_', '-')!r}")
    if problems:
        raise ConfigError("; ".join(problems))
    return values


def parse_config(argv: list[str] | None = None) -> ExperimentConfig:
    """Build the experiment configuration from flags and an optional file.

    Precedence: explicit flags > config file > built-in defaults.  All
    validation problems are reported at once.
    """
    parser = _build_parser()
    args = parser.parse_args(argv)

    values: dict[str, object] = {}
    if args.config:
        values.update(_parse_config_file(args.config))
    for option in _OPTIONS:
        flag_value = getattr(args, option.replace("-", "_"))
        if flag_value is not None:
            values[_field_name(option)] = flag_value
    if args.no_timestamp:
        values["timestamp"] = False

    config = ExperimentConfig(**values)
    config.validate()
    if config.beta is not None and "csa" in config.controllers:
        print("warning: --beta has no effect on the csa controller", file=sys.stderr)
    return config


def main(argv: list[str] | None = None) -> int:
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = run_experiment(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    widths = {name: max(len(name), 12) for name in SUMMARY_COLUMNS}
    print("  ".join(name.ljust(widths[name]) for name in SUMMARY_COLUMNS))
    for row in summary:
        print("  ".join(str(row[name]).ljust(widths[name]) for name in SUMMARY_COLUMNS))
    print(f"wrote {Path(config.out) / 'summary.csv'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
