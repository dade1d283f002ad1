"""Command-line entry point for the slab Boussinesq toolkit."""

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.config import settings
from app.core.propagator import dispersion
from app.errors import ConfigError, ToolkitError
from app.schemas import RunConfig
from app.services.checkpoint import load_checkpoint, save_checkpoint
from app.services.decay_verifier import decay_suite, fit_rate, ray_decay
from app.services.monitors import COLUMNS, DECAY_TARGETS
from app.services.series import read_series, table_text, write_series, write_table
from app.services.simulation import RunResult, gen_initial, run
from app.services.verification import SUITES, dispersion_bounds, run_suites
from app.utils.logging import get_logger

logger = get_logger(__name__)

IO_EXIT_CODE = 4


def load_config(args: argparse.Namespace) -> RunConfig:
    """Config file (or defaults) with the --seed / --out overrides applied."""
    path = args.config or settings.default_config
    if path:
        config = RunConfig.from_file(path)
        return config.with_overrides(seed=args.seed, out=args.out)
    seed = settings.default_seed if args.seed is None else args.seed
    return RunConfig().with_overrides(seed=seed, out=args.out or settings.output_dir)


def _emit(rows: List[Dict[str, object]], target: Optional[Path]) -> None:
    if target is None:
        sys.stdout.write(table_text(rows))
    else:
        write_table(target, rows)
        logger.info(f"Wrote {len(rows)} rows to {target}")


# Dispersion table

def _q_values(args: argparse.Namespace) -> np.ndarray:
    if args.q_min < 0 or args.q_max < args.q_min:
        raise ConfigError(f"invalid q range [{args.q_min}, {args.q_max}]")
    if args.n_q < 1:
        raise ConfigError("--n-q must be at least 1")
    if args.n_q == 1:
        return np.array([args.q_min])
    if args.spacing == "log":
        if args.q_min <= 0:
            raise ConfigError("log spacing needs q-min > 0")
        return np.geomspace(args.q_min, args.q_max, args.n_q)
    return np.linspace(args.q_min, args.q_max, args.n_q)


def cmd_dispersion_table(args: argparse.Namespace) -> int:
    if args.k_min < 1:
        raise ConfigError("temperature modes need k >= 1", {"k_min": args.k_min})
    if args.k_max < args.k_min:
        raise ConfigError(f"invalid k range [{args.k_min}, {args.k_max}]")
    q, k = np.meshgrid(_q_values(args), np.arange(args.k_min, args.k_max + 1), indexing="ij")
    d = dispersion(q.ravel(), k.ravel())
    ok = np.logical_and.reduce(list(dispersion_bounds(d).values()))
    rows = [
        {
            "q": float(d.q[i]),
            "k": int(k.ravel()[i]),
            "Xi": float(d.Xi[i]),
            "sigma": float(d.sigma[i]),
            "lambda_plus": float(d.lambda_plus[i]),
            "lambda_minus": float(d.lambda_minus[i]),
            "bounds": "pass" if ok[i] else "fail",
        }
        for i in range(d.q.size)
    ]
    out = Path(args.out) / "dispersion.csv" if args.out else None
    _emit(rows, out)
    return 0 if all(r["bounds"] == "pass" for r in rows) else 3


# Linear kernel decay

def cmd_linear_decay(args: argparse.Namespace) -> int:
    config = load_config(args)
    block = config.decay
    times = block.times()
    suite = decay_suite(
        times,
        block.to_profile(),
        block.to_quadrature(),
        block.kernels,
        block.include_heat,
        block.window,
        block.tolerance,
    )
    summary = [row.summary() for row in suite]

    if block.q_min > 0:
        fit = ray_decay(times, block.q_min, profile=block.to_profile(), quad=block.to_quadrature())
        # semilog slope against the slowest surviving rate; reported only
        rate = float(dispersion(block.q_min, 1).lambda_plus)
        summary.append({
            "observable": "ray_L_hatL1",
            "fitted_exponent": round(fit.exponent, 6),
            "stderr": fit.stderr,
            "target_exponent": rate,
            "t_min": fit.window[0],
            "t_max": fit.window[1],
            "r_squared": fit.r_squared,
            "accurate": True,
            "status": "info",
        })

    series = [{"time": t} for t in times]
    for row in suite:
        for entry, value in zip(series, row.values):
            entry[row.name] = value
    columns = ["time"] + [row.name for row in suite]
    write_series(
        config.output.path("series_file"),
        series,
        columns,
        {row.name: row.target for row in suite},
    )
    write_table(config.output.path("summary_file"), summary)
    sys.stdout.write(table_text(summary))
    return 0 if all(r["status"] != "fail" for r in summary) else 3


# Simulation

def _write_run(config: RunConfig, result: RunResult) -> None:
    write_series(config.output.path("series_file"), result.rows, COLUMNS, DECAY_TARGETS)
    summary = []
    for name, target in DECAY_TARGETS.items():
        fit = result.fits.get(name)
        summary.append({
            "observable": name,
            "fitted_exponent": None if fit is None else fit.exponent,
            "stderr": None if fit is None else fit.stderr,
            "target_exponent": target,
            "t_min": result.fit_window[0] if result.fit_window else None,
            "t_max": result.fit_window[1] if result.fit_window else None,
        })
    write_table(config.output.path("summary_file"), summary)


def _execute(config: RunConfig, state, start_step: int = 0, recorder=None) -> int:
    snapshot = json.loads(json.dumps(config.dict()))

    def on_checkpoint(s, index, rec):
        save_checkpoint(config.output.path("checkpoint_file"), snapshot, s, index, rec)

    def on_failure(s, index, rec):
        save_checkpoint(config.output.path("blowup_file"), snapshot, s, index, rec)

    result = run(
        config.stepper_config(),
        state,
        start_step=start_step,
        recorder=recorder,
        on_checkpoint=on_checkpoint,
        on_failure=on_failure,
    )
    _write_run(config, result)
    if result.failure is not None:
        sys.stderr.write(json.dumps(result.failure, default=str) + "\n")
        return 3
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args)
    domain = config.domain.to_domain()
    init = config.initial
    state = gen_initial(domain, init.seed, init.amplitude, init.falloff, config.stepper.m_prime)
    Path(config.output.directory).mkdir(parents=True, exist_ok=True)
    (Path(config.output.directory) / "config.yaml").write_text(config.dump())
    return _execute(config, state)


def cmd_resume(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    config = RunConfig.parse_obj(checkpoint.config).with_overrides(out=args.out)
    if args.t_end is not None:
        data = config.dict()
        data["stepper"]["t_end"] = args.t_end
        config = RunConfig.parse_obj(data)
    if args.seed is not None:
        logger.warning("--seed has no effect on a resumed run")
    return _execute(config, checkpoint.state, checkpoint.step, checkpoint.recorder())


# Verification and fitting

def cmd_verify(args: argparse.Namespace) -> int:
    results = run_suites(args.suite)
    rows = [r.as_row() for r in results]
    out = Path(args.out) / "verify.csv" if args.out else None
    _emit(rows, out)
    return 0 if all(r.passed for r in results) else 3


def cmd_fit(args: argparse.Namespace) -> int:
    columns, data, targets = read_series(args.series)
    time_column = "time" if "time" in data else columns[0]
    names = args.columns or [c for c in columns if c in targets] or [
        c for c in columns if c not in ("step", time_column)
    ]
    missing = [c for c in names if c not in data]
    if missing:
        raise ConfigError(f"columns not in {args.series}: {missing}")
    window = None
    if args.t_min is not None or args.t_max is not None:
        times = data[time_column]
        window = (
            args.t_min if args.t_min is not None else min(times),
            args.t_max if args.t_max is not None else max(times),
        )

    rows = []
    for name in names:
        # one short column should not sink the whole table
        try:
            fit = fit_rate(data[time_column], data[name], window)
        except ToolkitError as e:
            logger.warning(f"No exponent for {name}: {e.message}")
            rows.append({"observable": name, "fitted_exponent": None, "stderr": None,
                         "target_exponent": targets.get(name), "n_points": 0, "status": e.error_type})
            continue
        rows.append({
            "observable": name,
            "fitted_exponent": fit.exponent,
            "stderr": fit.stderr,
            "target_exponent": targets.get(name),
            "n_points": fit.n_points,
            "status": "ok",
        })
    out = Path(args.out) / "fit.csv" if args.out else None
    _emit(rows, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="override initial.seed")
    common.add_argument("--out", metavar="DIR", help="override the output directory")

    parser = argparse.ArgumentParser(
        prog="bsq",
        description="Spectral simulation and decay verification for slab Boussinesq flow",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    table = sub.add_parser("dispersion-table", parents=[common], help="eigenvalues of the linear temperature modes")
    table.add_argument("--q-min", type=float, default=0.0)
    table.add_argument("--q-max", type=float, default=1.0)
    table.add_argument("--n-q", type=int, default=11)
    table.add_argument("--spacing", choices=("linear", "log"), default="linear")
    table.add_argument("--k-min", type=int, default=1)
    table.add_argument("--k-max", type=int, default=1)
    table.set_defaults(handler=cmd_dispersion_table)

    decay = sub.add_parser("linear-decay", parents=[common], help="fit kernel decay exponents")
    decay.set_defaults(handler=cmd_linear_decay)

    simulate = sub.add_parser("simulate", parents=[common], help="run the nonlinear solver")
    simulate.set_defaults(handler=cmd_simulate)

    resume = sub.add_parser("resume", parents=[common], help="continue a run from a checkpoint")
    resume.add_argument("checkpoint", help="checkpoint file")
    resume.add_argument("--t-end", type=float, help="extend the run to this time")
    resume.set_defaults(handler=cmd_resume)

    verify = sub.add_parser("verify", parents=[common], help="run the invariant suites")
    verify.add_argument("--suite", action="append", choices=sorted(SUITES), help="repeat to select suites")
    verify.set_defaults(handler=cmd_verify)

    fit = sub.add_parser("fit", parents=[common], help="fit decay exponents on a series CSV")
    fit.add_argument("series", help="series CSV written by simulate or linear-decay")
    fit.add_argument("--columns", nargs="+", help="columns to fit")
    fit.add_argument("--t-min", type=float)
    fit.add_argument("--t-max", type=float)
    fit.set_defaults(handler=cmd_fit)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ToolkitError as e:
        logger.error(f"{args.command} failed: {e.message}", error=e.error_type)
        sys.stderr.write(e.to_json() + "\n")
        return e.exit_code
    except OSError as e:
        payload = {"error": "io_error", "message": str(e), "details": {"path": getattr(e, "filename", None)}}
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(json.dumps(payload, default=str) + "\n")
        return IO_EXIT_CODE


if __name__ == "__main__":
    sys.exit(main())
