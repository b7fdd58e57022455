"""Numerical laboratory for support functions, torsion/eigenvalue/capacity functionals and Brunn-Minkowski type inequalities."""

__version__ = "0.1.0"
