"""Cattle diagnostics toolkit: classifiers, dosing, service, and CLI."""

__version__ = "0.1.0"
