"""Interaction-aware conformal prediction for robot crowd navigation."""

__version__ = "0.1.0"
