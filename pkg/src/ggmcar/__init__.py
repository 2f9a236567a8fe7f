"""Bayesian inference in Gaussian graphical models with G-Wishart priors.

Covers sampling a precision matrix on an arbitrary graph, joint
reversible-jump search over (K, G), matrix-variate models with row/column
graphs, and conditionally autoregressive spatial models on lattices.
"""

__version__ = "0.1.0"
