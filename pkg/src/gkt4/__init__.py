"""Numerical laboratory for nondegenerate generalized Kahler structures on
the flat 4-torus: Joyce-type Hamiltonian deformations of the quaternionic
background, generalized Kahler-Ricci flow in the I-fixed gauge, and an
identity battery for the lemma-level tensor formulas.
"""

from .errors import (
    BrokenStructure,
    ConfigError,
    DegeneratePair,
    DimsMismatch,
    FormatMismatch,
    GKError,
    IoFailure,
    NonPositiveMetric,
    PositivityLoss,
    SingularForm,
)
from .fields import (
    EndoField,
    MetricField,
    OneFormField,
    ScalarField,
    ThreeFormField,
    TwoFormField,
)
from .grid import PeriodicGrid
from .state import GKState, assemble, flat_hyperkahler

__version__ = "0.1.0"

__all__ = [
    "PeriodicGrid",
    "GKState",
    "assemble",
    "flat_hyperkahler",
    "ScalarField",
    "OneFormField",
    "TwoFormField",
    "ThreeFormField",
    "EndoField",
    "MetricField",
    "GKError",
    "NonPositiveMetric",
    "SingularForm",
    "BrokenStructure",
    "DegeneratePair",
    "PositivityLoss",
    "IoFailure",
    "FormatMismatch",
    "DimsMismatch",
    "ConfigError",
    "__version__",
]
