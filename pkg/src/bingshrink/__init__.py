"""Simulations of the one-dimensional model of shrinking Bing's decomposition."""

from .plfun import (
    ClaspChoice,
    ClaspError,
    DomainError,
    FoldedPath,
    Interval,
    derive_clasp,
    diameter,
    equal_on,
    evaluate,
    fold_daughters,
    identity_path,
    image,
)

__version__ = "0.1.0"
