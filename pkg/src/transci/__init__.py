"""Exact transitional conditional independence, σ-separation and causal Bayesian networks."""

__version__ = "0.1.0"
