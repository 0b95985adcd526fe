"""Quantum Mpemba effect in long-range XX spin models: exact dynamics and analysis tools."""

__version__ = "0.1.0"
