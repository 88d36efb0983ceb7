"""qhlab: irregular planar domains, Whitney cubes, quasihyperbolic chains
and empirical Poincare inequality experiments."""

__version__ = "0.1.0"
