"""Continuous in-context pure exploration: agents, trainer, and exact oracle."""

__version__ = "0.1.0"
