"""Toolkit for the ABCdE process algebra: terms, transitions, successors and equivalences."""

__version__ = "0.1.0"
