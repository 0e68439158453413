"""Numerical laboratory for transition layers of the inhomogeneous Allen-Cahn equation.

The package builds the one-dimensional heteroclinic profile and its correctors,
Fermi charts around planar curves, the Jacobi operator of a weighted geodesic,
the layer ansatz and its residuals, and the reduced problem for the interface
displacement.
"""

__version__ = "0.1.0"
