"""Gauge (Kurzweil-Henstock) integration, the Alexiewicz norm and
change-of-variable isometries on cells of the real line."""

__version__ = "0.1.0"
