import argparse
import logging
import sys
from typing import List, Optional

from src.algebra.errors import ConfigError, DegenerateShell, IFockError, QuadratureError, UnsupportedModel
from src.algebra.partitions import parse_epsilon
from src.app.commands import COMMANDS, write_csv
from src.app.config import SCHEMA_VERSION, Config, RunConfig, load_run_config
from src.app.logging_config import setup_logging
from src.app.metrics import command_duration_seconds, write_metrics

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_QUADRATURE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifock",
        description="Vacuum correlators of interacting-free quantum noise and their weak-coupling limit",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON run configuration (optional for partition)")
    parser.add_argument("--epsilon", help='creator/annihilator pattern, e.g. "1,1,0,0"; overrides the config')
    parser.add_argument("--out", help="CSV destination; stdout when omitted")
    parser.add_argument("--metrics-out", help="write Prometheus metrics here after the command")
    parser.add_argument("--log-level", help="overrides LOG_LEVEL")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        config = load_run_config(args.config)
    elif args.command == "partition":
        config = RunConfig(schema=SCHEMA_VERSION)
    else:
        raise ConfigError(f"{args.command} needs --config")
    if args.epsilon:
        try:
            config = config.with_epsilon(parse_epsilon(args.epsilon))
        except ValueError as exc:
            raise ConfigError(f"--epsilon: {exc}") from exc
    return config


def run(args: argparse.Namespace) -> int:
    """Run one command and map library failures onto exit codes."""
    try:
        config = resolve_config(args)
        logger.info("Command started", extra={"command": args.command, "route": config.route})
        with command_duration_seconds.labels(command=args.command).time():
            result = COMMANDS[args.command](config)
        write_csv(result.frame, args.out or config.output)
        if result.summary:
            print(result.summary, file=sys.stderr)
        logger.info("Command finished", extra={"command": args.command, "exit_code": result.exit_code})
        return result.exit_code
    except ConfigError as exc:
        logger.error("Invalid configuration", extra={"command": args.command, "error": str(exc)})
        return EXIT_CONFIG
    except UnsupportedModel as exc:
        logger.error("Unsupported model", extra={"command": args.command, "error": str(exc)})
        return EXIT_CONFIG
    except DegenerateShell as exc:
        logger.error(
            "Degenerate energy shell",
            extra={"command": args.command, "p": exc.p, "l": exc.l, "k": exc.k, "jacobian": exc.jacobian},
        )
        return EXIT_DEGENERATE
    except QuadratureError as exc:
        logger.error(
            "Quadrature failed",
            extra={"command": args.command, "routine": exc.routine, "estimate": exc.estimate, "abserr": exc.error},
        )
        return EXIT_QUADRATURE
    except IFockError as exc:
        logger.error("Command failed", extra={"command": args.command, "error": str(exc)}, exc_info=True)
        return EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or Config.LOG_LEVEL)
    code = run(args)
    metrics_path = args.metrics_out or Config.IFOCK_METRICS_PATH
    if metrics_path:
        write_metrics(metrics_path)
    return code


if __name__ == "__main__":
    sys.exit(main())
