"""Numerical layer: energy shells, quadrature, interacting Fock space, correlators."""
