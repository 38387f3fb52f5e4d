"""Refinement calculus of reactive systems: block diagram translation, analysis, simulation."""

__version__ = "0.1.0"
