"""K-step averaging SGD with block momentum: simulator, bound calculator,
tuning-rule checks, and experiment harness."""

from .core import HyperParams, MetaState, RunTrace, run
from .errors import DivergenceError, InfeasibilityError
from .objectives import ObjectiveSpec, get_objective, registry
from .theory import BoundBreakdown, BoundInputs, convergence_bound

__version__ = "0.1.0"

__all__ = [
    "BoundBreakdown",
    "BoundInputs",
    "DivergenceError",
    "HyperParams",
    "InfeasibilityError",
    "MetaState",
    "ObjectiveSpec",
    "RunTrace",
    "convergence_bound",
    "get_objective",
    "registry",
    "run",
    "__version__",
]
