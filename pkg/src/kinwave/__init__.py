"""Kinetic KPP fronts: dispersion relation, traveling waves, stability and spreading."""

__version__ = "0.1.0"
