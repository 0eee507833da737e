"""Mazur-Tate elements, Iwasawa invariants and signed decompositions for
non-ordinary modular forms, computed from modular symbols."""

__version__ = "0.1.0"
