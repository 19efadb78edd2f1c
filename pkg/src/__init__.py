"""
Hybrid neural-network / finite-difference solver for elliptic interface problems
"""
__version__ = "1.0.0"
__author__ = "Interface Solver Team"
