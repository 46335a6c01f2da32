"""Mean-field particle systems, minimizing-movement flows and reference solutions."""

from ._chaoslab import *  # noqa: F401,F403
from ._chaoslab import ChaoslabError, Potential, ExternalPotential, QuantileMeasure

__all__ = [name for name in dir() if not name.startswith("_")]
