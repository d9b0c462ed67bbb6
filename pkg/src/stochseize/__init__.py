"""Simulator for C-element stochastic Bayesian seizure detection."""

__version__ = "0.1.0"
