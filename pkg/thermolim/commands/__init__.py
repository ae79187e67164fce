"""Subcommands of the thermolim CLI, one module per family."""
