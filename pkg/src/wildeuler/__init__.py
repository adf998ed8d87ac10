"""Convex-integration surrogates for stochastic compressible Euler flows on the torus."""

__version__ = "0.1.0"
