"""Self-similar spreading in the constant-rate merging-splitting model.

Submodules
----------
params      exponent relations (alpha, beta, alpha_hat)
series      fractional power series of the profile near zero
profile     phase-plane shooting for the profile on (0, inf)
evolution   IMEX solver for the Bernstein-space evolution equation
model_d     truncated discrete-size merging-splitting system
transforms  Laplace inversion, stable densities, subordination, tail fits
acceptance  the numbered acceptance checks, runnable one by one
cli         command-line entry point (``mergesplit``)
io          deterministic CSV/JSON writers
"""

from .params import ProfileParams, alphahat_of_beta, beta_of_alpha, eigen_residuals

__all__ = [
    "ProfileParams",
    "alphahat_of_beta",
    "beta_of_alpha",
    "eigen_residuals",
]

__version__ = "0.1.0"
