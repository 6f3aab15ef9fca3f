import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from src import __version__
from src.commands import data, modelling, scoring
from src.commands.router import Command
from src.config import LOG_LEVEL
from src.errors import GPError
from src.runconfig import RunConfig, load_run_config

logger = logging.getLogger(__name__)


def create_dispatcher() -> dict[str, Command]:
    commands: dict[str, Command] = {}
    for router in (modelling.router, data.router, scoring.router):
        commands.update(router.commands)
    return commands


def build_parser(commands: dict[str, Command]) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpcp", description="Change-point Gaussian process models")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in commands.values():
        p = sub.add_parser(command.name, help=command.help)
        p.add_argument("--config", help="run config file (KEY=value)")
        p.add_argument("--seed", type=int, help="overrides SEED")
        p.add_argument("--out", help="output directory, overrides OUT")
        for flags, kwargs in command.arguments:
            p.add_argument(*flags, **kwargs)
    return parser


def run(argv: list[str] | None = None) -> int:
    """Run one command; returns the process exit code."""
    commands = create_dispatcher()
    args = build_parser(commands).parse_args(argv)
    try:
        if args.config:
            config = load_run_config(args.config, seed=args.seed, out=args.out)
        else:
            config = load_run_config_defaults(args)
        return commands[args.command].handler(config, args)
    except GPError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return exc.exit_code
    except Exception:
        logger.exception("%s failed unexpectedly", args.command)
        return 1


def load_run_config_defaults(args) -> RunConfig:
    """Config for commands run without --config (synth, mostly)."""
    config = RunConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, out=Path(args.out))
    return config


def main():
    logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
