"""Tantra: a social-information model for the agricultural sector.

Nine aspects (Who, Where, What, When, How, Why, Relationships, Relators,
Separations) by five reification levels, persisted in an embedded property
graph, with goal tracking, scheme analytics and a diffusion simulation.
"""

from .errors import TantraError
from .graph import GraphStore
from .metamodel import Aspect, Model, Perspective, TantraElement

__all__ = ["Aspect", "GraphStore", "Model", "Perspective", "TantraElement", "TantraError"]
__version__ = "0.1.0"
