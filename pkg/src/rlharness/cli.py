"""Command line entry point: ``rlh <command>`` or ``python3 -m rlharness <command>``.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from .errors import HarnessError

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2


def _fail(prog: str, exc: Exception, code: int) -> int:
    print(f"{prog}: {exc}", file=sys.stderr)
    return code


def cmd_train(args) -> int:
    from .pipeline import format_report, load_config, read_metrics, run_session

    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
        if args.out is not None:
            config = dataclasses.replace(config, out_dir=Path(args.out))
        report = run_session(config)
    except HarnessError as exc:
        return _fail("train", exc, EXIT_CONFIG)
    print(format_report(report, read_metrics(config.out_dir)))
    print(f"report: {(Path(config.out_dir) / 'report.json').resolve()}")
    return report.exit_code


def cmd_eval(args) -> int:
    from .agents import load_policy
    from .pipeline import Session, evaluate_policy, load_config

    try:
        config = load_config(args.config)
        policy = load_policy(args.checkpoint)
        session = Session(config)
        if policy.action_set and policy.action_set != session.env_config.action_set:
            raise HarnessError("CHECKPOINT_ERROR", f"checkpoint action_set {policy.action_set} "
                               f"does not match config {session.env_config.action_set}")
        if policy.obs_layout and policy.obs_layout != session.env_config.obs_layout:
            raise HarnessError("CHECKPOINT_ERROR", "checkpoint obs_layout does not match the environment")
    except HarnessError as exc:
        return _fail("eval", exc, EXIT_CONFIG)
    try:
        session.provision(fresh=False)
        session.sim.start()
        result = session.guarded(lambda: evaluate_policy(
            policy.params, session.env, args.episodes, seed=config.seed, before_reset=session.before_reset
        ))
    except HarnessError as exc:
        return _fail("eval", exc, EXIT_ABORT)
    finally:
        session.teardown()
    print(json.dumps({
        "episodes": args.episodes,
        "success_rate": result.success_rate,
        "mean_return": result.mean_return,
        "outcomes": {o: result.outcomes.count(o) for o in sorted(set(result.outcomes))},
    }, indent=2))
    return EXIT_OK


def cmd_worldgen(args) -> int:
    from .pipeline import instantiate_world_variants

    try:
        paths = instantiate_world_variants(args.world, args.instances, args.out)
    except HarnessError as exc:
        return _fail("worldgen", exc, EXIT_CONFIG)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_report(args) -> int:
    from .pipeline import format_report, read_metrics, read_report

    try:
        report = read_report(args.dir)
        metrics = read_metrics(args.dir)
    except (OSError, ValueError, TypeError) as exc:
        return _fail("report", exc, EXIT_CONFIG)
    print(format_report(report, metrics))
    if report.episodes != len(metrics):
        print(f"warning: report lists {report.episodes} episodes, metrics file has {len(metrics)}", file=sys.stderr)
    return EXIT_OK


def cmd_broker(args) -> int:
    from .busline import Broker, parse_address

    try:
        host, port = parse_address(args.listen)
        broker = Broker(host, port, liveness_secs=args.liveness_secs)
        broker.start()
    except (HarnessError, OSError) as exc:
        return _fail("broker", exc, EXIT_CONFIG)
    done = threading.Event()

    def _stop(signum, frame):
        done.set()

    signal.signal(signal.SIGTERM, _stop)
    signal.signal(signal.SIGINT, _stop)
    print(f"broker listening on {broker.address_text}", flush=True)
    while not done.wait(0.5):
        pass
    broker.close()
    return EXIT_OK


def cmd_sim(args) -> int:
    from .simcore.node import main as sim_main

    return sim_main(args)


class _Parser(argparse.ArgumentParser):
    # usage errors share the config-error exit code
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    from .simcore.node import add_arguments as sim_arguments

    parser = _Parser(prog="rlh", description="Unattended RL training harness")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a training session from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="override the config out_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy evaluation of a saved policy")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("worldgen", help="write world variants with unique node names")
    p.add_argument("--world", required=True)
    p.add_argument("--instances", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_worldgen)

    p = sub.add_parser("report", help="pretty-print a session report")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("broker", help="run a standalone broker")
    p.add_argument("--listen", default="127.0.0.1:0", help="HOST:PORT (port 0 picks a free port)")
    p.add_argument("--liveness-secs", type=float, default=6.0)
    p.set_defaults(func=cmd_broker)

    p = sub.add_parser("sim", help="run a simulator process against a broker")
    sim_arguments(p)
    p.set_defaults(func=cmd_sim)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
