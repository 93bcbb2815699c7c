"""Predictive trajectory patterns from isochronous compass-sensor logs."""

__version__ = "0.1.0"
