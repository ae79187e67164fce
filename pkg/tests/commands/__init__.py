"""Tests for thermolim subcommands."""
