"""Per-area command registration, assembled into one parser by src.main."""

import argparse
from dataclasses import dataclass, field
from typing import Callable

from src.runconfig import RunConfig

Handler = Callable[[RunConfig, argparse.Namespace], int]


@dataclass
class Command:
    name: str
    handler: Handler
    help: str = ""
    arguments: list[tuple[tuple, dict]] = field(default_factory=list)


class Router:
    def __init__(self):
        self.commands: dict[str, Command] = {}

    def command(self, name: str, help: str = "", arguments=()):
        """Register a handler; `arguments` are (flags, kwargs) pairs for argparse."""

        def decorator(fn: Handler) -> Handler:
            self.commands[name] = Command(name, fn, help, list(arguments))
            return fn

        return decorator
