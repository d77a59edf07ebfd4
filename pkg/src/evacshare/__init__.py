"""Ridesharing evacuation planning: model export, exact and heuristic solvers."""

__version__ = "0.1.0"
