"""Bayesian pharmacogenetic covariate selection for population PK models."""

__version__ = "1.0.0"
