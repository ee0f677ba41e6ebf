"""
LTO Verifier - finite-volume checks of local topological order axioms on lattice models and skein modules.
"""

__version__ = "0.1.0"
