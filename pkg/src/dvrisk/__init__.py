"""Repeat-victimization risk modeling and village-level case mapping."""

__version__ = "0.1.0"
