"""Differentially private obfuscation of power-network line parameters."""

__version__ = "0.1.0"
