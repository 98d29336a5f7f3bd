"""Ising-Hamiltonian neural networks trained with annealing samplers."""

__version__ = "0.1.0"
