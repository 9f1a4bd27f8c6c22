"""Unpaired domain alignment by keeping a shared low-frequency band and regenerating the rest."""

__version__ = "0.1.0"
