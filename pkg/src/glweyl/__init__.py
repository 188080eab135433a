"""Compatible d-connections of generalized Lagrange-Weyl manifolds.

Build the Chern-Rund and Weyl-compatible connections of a generalized
Lagrange metric on the tangent bundle and check their defining identities
numerically, with exact symbolic or central finite-difference derivatives.
"""

from .expr import differentiate, evaluate, parse, to_text
from .manifold import DerivativeEngine, DTensorField, PointTM, SampleBox, ScalarField
from .metric import GLMetric, ConformalClass, WeylStructure, conformal_scale, inverse, validate
from .connection import (
    FinslerConnection, NonlinearConnection, canonical_N, chern_rund, levi_civita,
    weyl_connection,
)
from .verify import Scenario, run_all
from .scenario import load_scenario

__version__ = "0.1.0"
