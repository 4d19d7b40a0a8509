"""Command-line front end: solve cutoff curves, simulate strategies, decide.

Every run that writes files also writes ``run_manifest.json`` recording the
package version, the effective parameters (defaults included), the seed, and
SHA-256 hashes of the outputs.  Outputs are written only after all
computation succeeds, so a failing run leaves no partial files.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .allocator import classify
from .config import ConfigError, RunConfig, load_config
from .harness import (
    ExperimentSpec,
    barrier_curve,
    run_experiment,
    time_evolution,
    write_barrier_csv,
    write_evolution_csv,
    write_sweep_csv,
)
from .pricing import price_schedule
from .thresholds import (
    NonConvergenceError,
    OrderingError,
    read_thresholds_csv,
    solve_thresholds,
    write_revenue_csv,
    write_thresholds_csv,
)

log = logging.getLogger(__name__)

_UNITS = {"time": "hours", "delays": "milliseconds"}


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(
    out_dir: Path, command: str, cfg: RunConfig, seed: int, filenames: list[str]
) -> None:
    params = json.loads(json.dumps(cfg.effective))
    params["experiment"]["base_seed"] = seed
    manifest = {
        "package": "fogalloc",
        "version": __version__,
        "command": command,
        "base_seed": seed,
        "units": _UNITS,
        "parameters": params,
        "outputs": {name: _sha256(out_dir / name) for name in filenames},
    }
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _seed_for(cfg: RunConfig, args) -> int:
    if args.seed is None:
        return cfg.base_seed
    if not 0 <= args.seed < 2**64:
        raise ConfigError("--seed must fit in an unsigned 64-bit int")
    return args.seed


def _cmd_solve(args) -> int:
    cfg = load_config(args.config)
    seed = _seed_for(cfg, args)
    n = cfg.solver_curve_count()
    log.info("solving %d cutoff curves over %.6g h", n, cfg.horizon)
    table, revenue = solve_thresholds(
        cfg.model, n, cfg.horizon, cfg.grid_points,
        max_iterations=cfg.max_iterations,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_thresholds_csv(table, out / "thresholds.csv")
    write_revenue_csv(revenue, out / "revenue.csv")
    _write_manifest(out, "solve", cfg, seed, ["thresholds.csv", "revenue.csv"])
    print(f"wrote {out / 'thresholds.csv'} and {out / 'revenue.csv'}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = _seed_for(cfg, args)
    spec = ExperimentSpec(
        model=cfg.model,
        topology=cfg.topology,
        strategies=cfg.strategies,
        horizon=cfg.horizon,
        replications=cfg.replications,
        base_seed=seed,
        sweep_axis=cfg.sweep_axis,
        sweep_values=cfg.sweep_values,
        grid_points=cfg.grid_points,
    )
    # Cutoff curves for the optimal strategy are solved on the fly per sweep
    # point, so simulate never requires a prior solve run.
    series = run_experiment(spec, threads=args.threads)
    evo = time_evolution(spec, cfg.evolution.points, args.threads) if cfg.evolution.enabled else None
    bar = None
    if cfg.barrier.enabled:
        grid = np.linspace(
            cfg.barrier.grid_max / cfg.barrier.points,
            cfg.barrier.grid_max,
            cfg.barrier.points,
        )
        bar = barrier_curve(
            cfg.model, cfg.horizon, grid, cfg.barrier.replications, seed
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    filenames = ["sweep.csv"]
    write_sweep_csv(series, out / "sweep.csv")
    if evo is not None:
        write_evolution_csv(evo, out / "evolution.csv")
        filenames.append("evolution.csv")
    if bar is not None:
        write_barrier_csv(bar, out / "barrier.csv")
        filenames.append("barrier.csv")
    _write_manifest(out, "simulate", cfg, seed, filenames)
    print(f"wrote {', '.join(str(out / f) for f in filenames)}")
    return 0


def _cmd_decide(args) -> int:
    table = read_thresholds_csv(args.thresholds, eta=args.eta)
    try:
        rates = np.array([float(tok) for tok in args.rates.split(",") if tok.strip()])
    except ValueError:
        raise ConfigError(f"--rates is not a comma-separated number list: {args.rates!r}")
    if rates.size == 0:
        raise ConfigError("--rates must list at least one rate")
    if np.any(rates <= 0) or np.any(np.diff(rates) > 0):
        raise ConfigError("--rates must be positive and sorted descending")
    if rates.size > table.n_initial:
        raise ConfigError(
            f"{rates.size} rates but the table holds {table.n_initial} curves"
        )
    if not 0.0 <= args.t <= table.horizon:
        raise ConfigError(
            f"--t must lie within the table horizon [0, {table.horizon:.12g}]"
        )
    if args.x < 0:
        raise ConfigError("--x must be nonnegative")
    n = int(rates.size)
    rank = classify(args.x, args.t, n, table)
    if rank is None:
        print("REJECT")
    else:
        prices = price_schedule(rates, table.family_at(n, args.t), args.eta)
        print(f"ALLOCATE rank={rank} price={prices[rank - 1]:.12g}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fogalloc",
        description="Revenue-optimal sequential allocation of fog VM instances",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="compute cutoff and revenue curves")
    p_solve.add_argument("--config", required=True, help="TOML run configuration")
    p_solve.add_argument("--out", default="out", help="output directory")
    p_solve.add_argument("--seed", type=int, default=None, help="override base seed")
    p_solve.set_defaults(func=_cmd_solve)

    p_sim = sub.add_parser("simulate", help="run the configured strategy list")
    p_sim.add_argument("--config", required=True, help="TOML run configuration")
    p_sim.add_argument("--out", default="out", help="output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override base seed")
    p_sim.add_argument(
        "--threads", type=int, default=1,
        help="worker processes for replications (0 = all cores)",
    )
    p_sim.set_defaults(func=_cmd_simulate)

    p_dec = sub.add_parser("decide", help="classify and price one arrival")
    p_dec.add_argument("--thresholds", required=True, help="thresholds.csv from solve")
    p_dec.add_argument(
        "--rates", required=True,
        help="descending comma-separated rates of the free slots",
    )
    p_dec.add_argument("--x", type=float, required=True, help="raw characteristic")
    p_dec.add_argument("--t", type=float, required=True, help="decision time, hours")
    p_dec.add_argument("--eta", type=float, default=1.0, help="concavity exponent")
    p_dec.set_defaults(func=_cmd_decide)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, NonConvergenceError, OrderingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
