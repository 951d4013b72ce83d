"""Diversities, conformities and the constructions relating them."""

__version__ = "0.1.0"
