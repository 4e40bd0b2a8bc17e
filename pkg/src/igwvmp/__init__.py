"""Variational message passing with Inverse G-Wishart variance priors.

Subpackages cover matrix reshaping helpers, the distribution families,
message passing fragment updates, prior planning, the factor graph engine,
the t response linear mixed model, its Gibbs sampling oracle and a command
line interface.
"""

__version__ = "0.1.0"
