"""Command line entry point: ``reachbench <command> [options]``.

Exit status is 0 on success, 1 on a runtime failure and 2 on a bad
configuration or bad arguments. ``REACH_LOG_LEVEL`` (error, info, debug)
sets the log verbosity.
"""
import argparse
import json
import logging
import math
import os
import sys

import numpy as np

log = logging.getLogger("reachbench")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _setup_logging():
    raw = os.environ.get("REACH_LOG_LEVEL", "info").strip().lower()
    level = LOG_LEVELS.get(raw)
    logging.basicConfig(level=level or logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    if level is None:
        log.warning("ignoring unknown REACH_LOG_LEVEL=%r", raw)


def _run_overrides(args):
    out = {}
    if args.seed is not None:
        out["seeds"] = [args.seed]
    for key, value in (("episodes", args.episodes), ("algorithm", args.algo), ("stage", args.stage),
                       ("her", args.her), ("reward", args.reward), ("remote", args.remote),
                       ("out_dir", args.out)):
        if value is not None:
            out[key] = value
    return out


def _load_run_config(args):
    from .config import RunConfig
    overrides = _run_overrides(args)
    if args.config:
        return RunConfig.load(args.config, **overrides)
    return RunConfig.from_dict(overrides)


def cmd_train(args):
    from .training import train
    cfg = _load_run_config(args)
    for seed in cfg.seeds:
        out = cfg.out_dir if len(cfg.seeds) == 1 else os.path.join(cfg.out_dir, f"seed_{seed}")
        result = train(cfg, seed=seed, out_dir=out)
        rates = " ".join(f"{k}:{v:.3f}" for k, v in result.final_report.success_rate.items())
        print(f"seed {seed}: success {rates} avg_dist {result.final_report.average_distance:.4f}")
        print(f"artifacts in {out}")
    return EXIT_OK


def _parse_thresholds(text):
    from .config import ConfigError
    try:
        values = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise ConfigError(f"thresholds must be comma-separated numbers, got {text!r}") from None
    if not values or any(not t > 0 for t in values):
        raise ConfigError("thresholds must be positive")
    return values


def cmd_eval(args):
    from . import kinematics
    from .agents import load_agent
    from .config import seed_streams
    from .curriculum import EVAL_THRESHOLDS, evaluate_policy, export_report
    from .environment import EpisodeConfig, ReachingEnv

    thresholds = _parse_thresholds(args.thresholds) if args.thresholds else EVAL_THRESHOLDS
    agent = load_agent(args.checkpoint)
    chain, table = kinematics.load_geometry(args.geometry)
    seed_seq = seed_streams(args.seed)["eval"].spawn(2)[1]
    env = ReachingEnv(EpisodeConfig("dense", min(thresholds), 1, agent.action_space), chain, table,
                      seed=np.random.default_rng(seed_seq).integers(2**63))
    if args.images:
        from .vision import eval_from_images
        report = eval_from_images(agent, env, args.episodes, thresholds=thresholds)
    else:
        report = evaluate_policy(agent, env, args.episodes, thresholds)
    row_info = {"algorithm": agent.algorithm, "stage": agent.action_space.name,
                "reward_kind": args.reward, "her": agent.config.her, "training_length": ""}
    paths = export_report(report, args.out, "eval", row_info)
    print(json.dumps(report.success_rate), f"avg_dist={report.average_distance:.4f}",
          f"extraction_failures={report.extraction_failures}")
    for p in paths.values():
        print(p)
    return EXIT_OK


def cmd_serve(args):
    from .service import make_server
    base = {}
    if args.config:
        cfg = _load_run_config(args)
        base = {"reward": cfg.reward, "threshold": cfg.curriculum["initial_threshold"],
                "max_tries": cfg.max_tries, "stage": cfg.stage}
    server = make_server((args.bind, args.port), base)
    host, port = server.server_address[:2]
    print(f"serving on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def cmd_vision_demo(args):
    from . import vision
    from .curriculum import write_csv
    os.makedirs(args.out, exist_ok=True)
    rows = vision.extraction_sweep(args.scenes, seed=args.seed, threshold=args.threshold)
    errs = np.array([r[4:] for r in rows], dtype=np.float64)
    failures = int(np.isnan(errs[:, 0]).sum())
    mean_abs = np.nanmean(np.abs(errs), axis=0) if failures < len(rows) else [math.nan, math.nan]
    header = ["scene", "true_x", "true_y", "est_x", "est_y", "err_x", "err_y"]
    body = [[i, *map(float, r)] for i, r in enumerate(rows)]
    write_csv(os.path.join(args.out, "vision_errors.csv"), header, body)
    write_csv(os.path.join(args.out, "vision_summary.csv"),
              ["scenes", "failures", "mean_abs_err_x", "mean_abs_err_y"],
              [[len(rows), failures, float(mean_abs[0]), float(mean_abs[1])]])
    if args.ppm:
        from . import kinematics
        chain, table = kinematics.load_geometry()
        rng = np.random.default_rng(args.seed + 1)
        for i in range(min(args.ppm, args.scenes)):
            target = kinematics.sample_target(table, rng)
            vision.write_ppm(os.path.join(args.out, f"scene_{i:03d}.ppm"),
                             vision.render(chain, table, np.zeros(6), target))
    print(f"{len(rows)} scenes, {failures} failures, mean |err| x={mean_abs[0]:.4f} m "
          f"y={mean_abs[1]:.4f} m")
    return EXIT_OK


def cmd_selfcheck(args):
    from .selfcheck import run_selfcheck
    report = run_selfcheck()
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_RUNTIME


def cmd_show_defaults(args):
    from .config import show_defaults
    print(json.dumps(show_defaults(), indent=2))
    return EXIT_OK


def _add_run_flags(p):
    p.add_argument("--config", help="run configuration JSON file")
    p.add_argument("--seed", type=int, help="master seed (replaces the config's seed list)")
    p.add_argument("--episodes", type=int, help="episode budget")
    p.add_argument("--algo", choices=("ddpg", "td3", "sac"), help="learning algorithm")
    p.add_argument("--stage", help="action space stage: A1, A2, A2' (alias A2p) or A3")
    p.add_argument("--her", choices=("yes", "no"), help="hindsight experience replay")
    p.add_argument("--reward", choices=("sparse", "dense"), help="reward function")
    p.add_argument("--remote", metavar="HOST:PORT", help="use an environment server")
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = _Parser(prog="reachbench", description="One-step reaching benchmark.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train an agent")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--episodes", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--thresholds", help="comma-separated thresholds in meters")
    p.add_argument("--reward", choices=("sparse", "dense"), default="dense",
                   help="reward label written into the table row")
    p.add_argument("--geometry", help="geometry JSON file")
    p.add_argument("--images", action="store_true", help="read targets from rendered images")
    p.add_argument("--out", default="eval_out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the environment server")
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7777)
    _add_run_flags(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("vision-demo", help="target extraction accuracy sweep")
    p.add_argument("--scenes", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=int, default=40)
    p.add_argument("--ppm", type=int, default=0, help="also write the first N scenes as PPM")
    p.add_argument("--out", default="vision_out")
    p.set_defaults(func=cmd_vision_demo)

    p = sub.add_parser("selfcheck", help="gradient, oracle, HER and framing checks")
    p.set_defaults(func=cmd_selfcheck)

    p = sub.add_parser("config", help="configuration helpers")
    csub = p.add_subparsers(dest="config_command", required=True, parser_class=_Parser)
    c = csub.add_parser("show-defaults", help="print every default setting")
    c.set_defaults(func=cmd_show_defaults)
    return parser


def main(argv=None):
    from .agents import CheckpointError
    from .config import ConfigError

    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
