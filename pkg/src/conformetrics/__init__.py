"""Conformational metrics for protein trajectories, with a small MD kernel for validation data."""

__version__ = "0.1.0"
