"""Exterior calculus on coframe models and Moser/Gray stability flows for
symplectic pairs, contact pairs and their hyperplane-field generalisations."""

__version__ = "0.1.0"
