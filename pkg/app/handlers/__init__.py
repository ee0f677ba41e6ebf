"""
Check handlers, one per family: lattice models, skein modules and the von Neumann algebra toolkit.
"""
