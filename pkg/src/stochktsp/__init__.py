"""Stochastic k-TSP: adaptive and non-adaptive policies, exact small-instance
oracles and adaptivity-gap tooling."""

__version__ = "0.1.0"
