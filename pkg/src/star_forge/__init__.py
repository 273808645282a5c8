"""Exact formal deformation quantization on a flat symplectic chart."""

from .algebra import (
    MINUS_INFINITY,
    SymplecticFrame,
    WeylSeries,
    graded_commutator,
    involution,
    moyal_product,
    nu_bracket,
    star_commutator,
    total_degree,
    truncate,
)
from .kernel import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "MINUS_INFINITY",
    "SymplecticFrame",
    "WeylSeries",
    "graded_commutator",
    "involution",
    "moyal_product",
    "nu_bracket",
    "star_commutator",
    "total_degree",
    "truncate",
]
