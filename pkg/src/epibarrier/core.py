"""Scenario types, validation, and shared numeric conventions.

Everything downstream (dynamics, barrier construction, simulation) is driven
by a single immutable :class:`Scenario`.  States are reduced simplex
coordinates: ``(S, I)`` for SIR variants and ``(S, E, I)`` for SEIR variants;
the removed proportion is reconstructed algebraically.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Variant",
    "SetKind",
    "Scenario",
    "Tolerances",
    "ScenarioError",
    "validate_scenario",
    "reconstruct_removed",
    "check_state",
]


class Variant(Enum):
    """Model variant; fixes state dimension and input/disturbance roles."""

    SIR_PERFECT = "SIR_PERFECT"
    SEIR_PERFECT = "SEIR_PERFECT"
    SIR_IMPERFECT = "SIR_IMPERFECT"
    SEIR_IMPERFECT = "SEIR_IMPERFECT"

    @property
    def dim(self) -> int:
        return 2 if self.is_sir else 3

    @property
    def is_sir(self) -> bool:
        return self in (Variant.SIR_PERFECT, Variant.SIR_IMPERFECT)

    @property
    def is_perfect(self) -> bool:
        return self in (Variant.SIR_PERFECT, Variant.SEIR_PERFECT)


class SetKind(Enum):
    ADMISSIBLE = "admissible"
    MRPI = "mrpi"


class ScenarioError(ValueError):
    """Scenario validation failure carrying a machine-readable code."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


@dataclass(frozen=True)
class Tolerances:
    """Numeric tolerances; all overridable per run."""

    geom_tol: float = 1e-9
    ham_tol: float = 1e-6
    event_time_tol: float = 1e-10
    boundary_layer_eps: float = 1e-3
    i_floor: float = 1e-9
    step_h: float = 1e-3
    t_back_max: float = 1000.0

    def __post_init__(self):
        for name in (
            "geom_tol",
            "ham_tol",
            "event_time_tol",
            "boundary_layer_eps",
            "i_floor",
            "step_h",
            "t_back_max",
        ):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"tolerance {name} must be strictly positive")
        if not self.event_time_tol < self.step_h:
            raise ValueError("event_time_tol must be smaller than step_h")


@dataclass(frozen=True)
class Scenario:
    """Validated model parameters and infection cap for one variant.

    Fields irrelevant to the variant are ``None``; use
    :func:`validate_scenario` to construct from a raw config document.
    """

    variant: Variant
    beta_min: float
    beta_max: float
    i_max: float
    gamma: float | None = None
    gamma_min: float | None = None
    gamma_max: float | None = None
    eta: float | None = None
    eta_min: float | None = None
    eta_max: float | None = None

    @property
    def dim(self) -> int:
        return self.variant.dim


# Per-variant field layout: scalar parameters and [lo, hi] interval parameters
# expected in a raw config document (key "beta" is always an interval).
_SCALARS = {
    Variant.SIR_PERFECT: ("gamma",),
    Variant.SEIR_PERFECT: ("eta",),
    Variant.SIR_IMPERFECT: (),
    Variant.SEIR_IMPERFECT: (),
}
_INTERVALS = {
    Variant.SIR_PERFECT: ("beta",),
    Variant.SEIR_PERFECT: ("beta", "gamma"),
    Variant.SIR_IMPERFECT: ("beta", "gamma"),
    Variant.SEIR_IMPERFECT: ("beta", "gamma", "eta"),
}


def _as_positive(value, name: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ScenarioError("REJECT_FIELDS", f"field '{name}' is not a number")
    if not np.isfinite(x):
        raise ScenarioError("REJECT_FIELDS", f"field '{name}' is not finite")
    if x <= 0.0:
        raise ScenarioError("REJECT_BOUNDS", f"field '{name}' must be positive")
    return x


def validate_scenario(raw: dict) -> Scenario:
    """Validate a raw key-value document into a :class:`Scenario`.

    Raises :class:`ScenarioError` with code REJECT_FIELDS (missing, extraneous
    or ill-typed fields), REJECT_BOUNDS (ordering/positivity violated) or
    REJECT_CAP (infection cap outside the open unit interval).
    """
    if not isinstance(raw, dict):
        raise ScenarioError("REJECT_FIELDS", "config must be a mapping")
    try:
        variant = Variant(raw.get("variant"))
    except ValueError:
        raise ScenarioError(
            "REJECT_FIELDS", f"unknown or missing variant {raw.get('variant')!r}"
        )

    allowed = {"variant", "i_max", "tolerances"}
    allowed |= set(_SCALARS[variant]) | set(_INTERVALS[variant])
    extra = set(raw) - allowed
    if extra:
        raise ScenarioError(
            "REJECT_FIELDS", f"fields {sorted(extra)} not allowed for {variant.value}"
        )
    if "i_max" not in raw:
        raise ScenarioError("REJECT_FIELDS", "missing field 'i_max'")

    fields: dict[str, float] = {}
    for name in _SCALARS[variant]:
        if name not in raw:
            raise ScenarioError("REJECT_FIELDS", f"missing scalar field '{name}'")
        if isinstance(raw[name], (list, tuple)):
            raise ScenarioError(
                "REJECT_FIELDS", f"field '{name}' must be a scalar for {variant.value}"
            )
        fields[name] = _as_positive(raw[name], name)
    for name in _INTERVALS[variant]:
        if name not in raw:
            raise ScenarioError("REJECT_FIELDS", f"missing interval field '{name}'")
        pair = raw[name]
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ScenarioError(
                "REJECT_FIELDS", f"field '{name}' must be a [lo, hi] pair"
            )
        lo = _as_positive(pair[0], f"{name}[0]")
        hi = _as_positive(pair[1], f"{name}[1]")
        if lo > hi:
            raise ScenarioError(
                "REJECT_BOUNDS", f"field '{name}' has lo={lo} > hi={hi}"
            )
        fields[f"{name}_min"] = lo
        fields[f"{name}_max"] = hi

    try:
        i_max = float(raw["i_max"])
    except (TypeError, ValueError):
        raise ScenarioError("REJECT_FIELDS", "field 'i_max' is not a number")
    if not (0.0 < i_max < 1.0):
        raise ScenarioError("REJECT_CAP", f"i_max={i_max} outside (0, 1)")

    return Scenario(variant=variant, i_max=i_max, **fields)


def reconstruct_removed(state) -> float:
    """Removed proportion R = 1 - sum(components), clamped to [0, 1]."""
    return float(min(1.0, max(0.0, 1.0 - float(np.sum(state)))))


def check_state(state, variant: Variant, geom_tol: float = 1e-9) -> np.ndarray:
    """Validate a state vector against the reduced simplex; returns an array.

    Rejects wrong dimension, negative components, or component sum above one,
    beyond ``geom_tol``.
    """
    x = np.asarray(state, dtype=float)
    if x.shape != (variant.dim,):
        raise ValueError(
            f"state must have {variant.dim} components for {variant.value}, "
            f"got shape {x.shape}"
        )
    if np.min(x) < -geom_tol or np.sum(x) > 1.0 + geom_tol:
        raise ValueError(f"state {x.tolist()} outside the simplex (tol={geom_tol})")
    return x
