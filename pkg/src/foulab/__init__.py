"""Fractional Ornstein-Uhlenbeck simulation and parameter estimation."""

__version__ = "0.1.0"
