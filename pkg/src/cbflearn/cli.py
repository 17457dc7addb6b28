"""Command-line entry point: ``cbflearn {simulate,campaign,train,plot}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure,
3 final-phase safety check failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .campaign import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, run_campaign
from .config import dump_config, load_config, shipped_config_path
from .controller import CBFQP, LCBFQP, pd_control
from .dynamics import perturb_params
from .episodic import ConfigError, rollout, theta_center
from .io import SchemaError, read_dataset_csv, write_trajectory_csv
from .learning import Dataset, erm_train, load_estimator, save_estimator
from .plotting import PlotSpec, Trace, emit_plot

log = logging.getLogger("cbflearn")


def _config(args):
    path = args.config or shipped_config_path("default")
    cfg = load_config(path)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = Path(args.out or "simulate_out")
    out.mkdir(parents=True, exist_ok=True)
    nom = cfg.nominal_params()
    bf, alpha, gains = cfg.barrier_function(), cfg.class_k(), cfg.pd_gains()
    seed = args.seed_override if args.seed_override is not None else cfg.plant.seed_candidates[0]
    plant = nom if args.nominal else perturb_params(nom, cfg.plant.perturbation, seed)
    if args.controller == "pd":
        ctrl = lambda x: pd_control(gains, x)  # noqa: E731
    elif args.controller == "cbf":
        ctrl = CBFQP(bf, alpha, nom, gains)
    else:
        if not args.estimator:
            raise ConfigError("--estimator is required with --controller lcbf")
        ctrl = LCBFQP(bf, alpha, nom, gains, load_estimator(args.estimator))
    x0 = np.array(args.x0, dtype=float)
    traj = rollout(plant, ctrl, x0, cfg.episode_config(), theta_center(bf))
    write_trajectory_csv(out / "trajectory.csv", traj, bf)
    dump_config(cfg, out / "config.yaml")
    h = bf.value(traj.states)
    print(f"steps={len(traj.inputs)} min_h={h.min():.6g} blew_up={traj.blew_up}")
    return EXIT_OK


def _campaign_job(cfg, out_dir):
    return run_campaign(cfg, out_dir).exit_code


def cmd_campaign(args) -> int:
    cfg = _config(args)
    if args.seed_override is not None:
        cfg = cfg.with_seed(args.seed_override)
    out = Path(args.out or cfg.output.directory)
    if args.replicas <= 1:
        res = run_campaign(cfg, out)
        print((out / "summary.txt").read_text(), end="")
        return res.exit_code
    base = cfg.episodes.seed
    jobs = [(cfg.with_seed(base + k), out / f"replica_{k:02d}") for k in range(args.replicas)]
    with ProcessPoolExecutor(max_workers=args.replicas) as pool:
        codes = list(pool.map(_campaign_job, *zip(*jobs)))
    for (_, d), code in zip(jobs, codes):
        print(f"{d}: exit {code}")
    return max(codes)


def cmd_train(args) -> int:
    cfg = _config(args)
    data = Dataset.empty()
    for p in args.data:
        data = data.concat(read_dataset_csv(p))
    train_cfg = cfg.train_config()
    if args.seed_override is not None:
        train_cfg = cfg.with_seed(args.seed_override).train_config()
    est, hist = erm_train(data, cfg.barrier_function(), cfg.nominal_params(), train_cfg,
                          tuple(cfg.network.hidden))
    out = Path(args.out or "estimator.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_estimator(out, est)
    print(f"records={len(data)} loss {hist.train_loss[0]:.6g} -> {hist.train_loss[-1]:.6g}; wrote {out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    cfg = _config(args)
    traces = [Trace(p, color, Path(p).stem) for p, color in zip(args.csv, _palette(len(args.csv)))]
    out = emit_plot(PlotSpec(args.kind, traces, args.out or f"{args.kind}.svg", cfg.barrier_function()))
    print(f"wrote {out}")
    return EXIT_OK


def _palette(n):
    colors = ["#d62728", "#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b"]
    return [colors[i % len(colors)] for i in range(n)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbflearn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="campaign YAML (default: shipped default config)")
        p.add_argument("--out", help="output directory or file")
        p.add_argument("--seed-override", type=int, default=None)

    p = sub.add_parser("simulate", help="one closed-loop rollout")
    common(p)
    p.add_argument("--controller", choices=("pd", "cbf", "lcbf"), default="cbf")
    p.add_argument("--estimator", help="estimator snapshot for --controller lcbf")
    p.add_argument("--x0", type=float, nargs=4, default=[0.0, 0.0, 0.1, 0.0],
                   metavar=("X", "XDOT", "THETA", "THETADOT"))
    p.add_argument("--nominal", action="store_true", help="simulate the unperturbed plant")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("campaign", help="baseline, episodic learning and final evaluation")
    common(p)
    p.add_argument("--replicas", type=int, default=1, help="independent seeded campaigns run in parallel")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("train", help="fit an estimator on stored dataset CSVs")
    common(p)
    p.add_argument("--data", nargs="+", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("plot", help="SVG figure from trajectory CSVs")
    common(p)
    p.add_argument("--kind", choices=("phase", "h_vs_t"), default="phase")
    p.add_argument("--csv", nargs="*", default=[])
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.exception("runtime failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
