"""Model reduction toolkit for a stochastically forced Burgers element.

Derives the one-mode stochastic centre-manifold model symbolically,
eliminates quadratic-noise memory convolutions into effective drift and
new independent noises, and verifies every closed-form constant by
exact-arithmetic oracles and Monte Carlo simulation.
"""

from .construct import ConstructionConfig, NonConvergence, ReducedModel, construct, residual
from .noise import Atom, Conv, DegreeOverflow, NoiseExpr, NonDifferentiable, canonicalize
from .series import EvolutionSeries, FieldSeries

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "Conv",
    "ConstructionConfig",
    "DegreeOverflow",
    "EvolutionSeries",
    "FieldSeries",
    "NoiseExpr",
    "NonConvergence",
    "NonDifferentiable",
    "ReducedModel",
    "canonicalize",
    "construct",
    "residual",
    "__version__",
]
