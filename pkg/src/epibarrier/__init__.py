"""Admissible and robust positively invariant sets for capped epidemic models.

Constructs the boundaries of infection-cap-preserving state-space sets for
SIR/SEIR models with bounded intervention rates, via backward integration of
extremal trajectories, and provides forward policy simulation plus brute-force
verification oracles.
"""

from .analysis import (
    Classification,
    ClassTag,
    TangentSet,
    UsablePart,
    backward_filter,
    classify,
    is_trivial,
    tangent_set,
    usable_part,
)
from .barrier import (
    BarrierCurve,
    ComputedSet,
    Membership,
    Verdict,
    assemble_set,
    compute_barrier_curve,
    membership,
    select_extremal_input,
)
from .core import (
    Scenario,
    ScenarioError,
    SetKind,
    Tolerances,
    Variant,
    validate_scenario,
)
from .models import Channel, InputVec

__version__ = "0.1.0"

__all__ = [
    "Classification",
    "ClassTag",
    "TangentSet",
    "UsablePart",
    "backward_filter",
    "classify",
    "is_trivial",
    "tangent_set",
    "usable_part",
    "BarrierCurve",
    "ComputedSet",
    "Membership",
    "Verdict",
    "assemble_set",
    "compute_barrier_curve",
    "membership",
    "select_extremal_input",
    "Scenario",
    "ScenarioError",
    "SetKind",
    "Tolerances",
    "Variant",
    "validate_scenario",
    "Channel",
    "InputVec",
    "__version__",
]
