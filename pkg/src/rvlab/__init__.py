"""Regular variation on structured spaces: scalings, moduli, tail measures,
samplers, estimators and limit-theorem verifiers."""

__version__ = "0.1.0"

from . import core, moduli  # noqa: E402,F401
from .core import (  # noqa: E402,F401
    GridFunction,
    PointConfig,
    Polytope,
    Sequence,
    Vector,
    apply_scaling,
    invert_scaling,
)
from .kernels import BACKEND  # noqa: E402,F401
