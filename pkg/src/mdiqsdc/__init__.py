"""Simulator and leakage analyzer for MDI quantum secure direct communication."""

__version__ = "0.1.0"
