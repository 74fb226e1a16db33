"""Adaptive visual preference elicitation and nutrient-aware meal recommendation."""

__version__ = "0.1.0"
