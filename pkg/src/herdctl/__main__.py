"""Module entry point so ``python -m herdctl`` behaves like the console script."""

from .cli import cli_entry

cli_entry()
