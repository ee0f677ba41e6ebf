"""
Numerical core: lattice geometry, Pauli and stabilizer algebra, models, checks and the operator-algebra toolkit.
"""
