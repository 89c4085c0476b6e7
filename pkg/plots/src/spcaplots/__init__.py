"""spcaplots: figure rendering for the sparse-PCA harness CSV output."""

from .fits import FitResult, fit_from_name, poly_fit, power_fit
from .render import FigureSpec, SpecError, render

__version__ = "0.1.0"

__all__ = ["FitResult", "FigureSpec", "SpecError", "fit_from_name",
           "poly_fit", "power_fit", "render"]
