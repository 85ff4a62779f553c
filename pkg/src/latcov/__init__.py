"""Lattice covering and packing-covering optimization.

Enumerates inequivalent Delone triangulations of Z^d, solves one
determinant-maximization problem per secondary cone, and certifies the
results in exact rational arithmetic.
"""

__version__ = "0.1.0"
