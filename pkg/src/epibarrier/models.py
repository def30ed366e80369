"""Vector fields, feedback laws, adjoint systems and switching functionals.

All four model variants share the single state constraint I <= I_max, so the
Lie derivative of the constraint along the flow is simply the I-component of
the vector field.  Imperfect variants run closed loop: the contact rate (and,
for SEIR, the removal rate) is an affine feedback on I, and the only free
input is the disturbance channel.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Scenario, SetKind, Variant

__all__ = [
    "InputVec",
    "Channel",
    "BadChannelError",
    "DomainError",
    "sir_rhs",
    "seir_rhs",
    "beta_feedback",
    "gamma_feedback",
    "alpha_of_i",
    "delta_of_i",
    "state_rhs",
    "adjoint_matrix",
    "adjoint_rhs",
    "active_channels",
    "switch_value",
    "extremal_value",
    "lie_derivative_g",
    "input_box",
]


class Channel(Enum):
    BETA = "beta"
    GAMMA = "gamma"
    ETA = "eta"


class BadChannelError(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class InputVec:
    """Input values for the variant's free channels; unused fields are None.

    Perfect SIR carries beta; perfect SEIR beta and gamma; imperfect SIR the
    disturbance gamma; imperfect SEIR the disturbance eta.
    """

    beta: float | None = None
    gamma: float | None = None
    eta: float | None = None

    def get(self, channel: Channel) -> float:
        value = getattr(self, channel.value)
        if value is None:
            raise BadChannelError(f"channel {channel.value} not populated")
        return value


def sir_rhs(state, beta: float, gamma: float) -> np.ndarray:
    S, I = state
    flux = beta * S * I
    return np.array([-flux, flux - gamma * I])


def seir_rhs(state, beta: float, gamma: float, eta: float) -> np.ndarray:
    S, E, I = state
    flux = beta * S * I
    lat = eta * E
    return np.array([-flux, flux - lat, lat - gamma * I])


def beta_feedback(i: float, scenario: Scenario, geom_tol: float = 1e-9) -> float:
    """Pre-designed contact-rate feedback: beta_max at I=0 down to beta_min at I=I_max."""
    _check_feedback_domain(i, scenario, geom_tol)
    r = min(1.0, max(0.0, i / scenario.i_max))
    return scenario.beta_min * r + scenario.beta_max * (1.0 - r)


def gamma_feedback(i: float, scenario: Scenario, geom_tol: float = 1e-9) -> float:
    """Pre-designed removal-rate feedback: gamma_min at I=0 up to gamma_max at I=I_max."""
    _check_feedback_domain(i, scenario, geom_tol)
    r = min(1.0, max(0.0, i / scenario.i_max))
    return scenario.gamma_min * (1.0 - r) + scenario.gamma_max * r


def _check_feedback_domain(i: float, scenario: Scenario, geom_tol: float) -> None:
    if scenario.variant.is_perfect:
        raise BadChannelError("feedback laws apply to imperfect variants only")
    if i < -geom_tol or i > scenario.i_max + geom_tol:
        raise DomainError(f"I={i} outside [0, i_max={scenario.i_max}]")


# Clamped evaluations for the dynamics: breaching trajectories keep integrating
# past the cap, where the feedback saturates at its endpoint value.
def _bhat(i: float, scenario: Scenario) -> float:
    r = min(1.0, max(0.0, i / scenario.i_max))
    return scenario.beta_min * r + scenario.beta_max * (1.0 - r)


def _ghat(i: float, scenario: Scenario) -> float:
    r = min(1.0, max(0.0, i / scenario.i_max))
    return scenario.gamma_min * (1.0 - r) + scenario.gamma_max * r


def alpha_of_i(i: float, scenario: Scenario) -> float:
    """d(beta_feedback(I) * I)/dI, the feedback-corrected contact-rate slope."""
    return 2.0 * (scenario.beta_min - scenario.beta_max) / scenario.i_max * i + scenario.beta_max


def delta_of_i(i: float, scenario: Scenario) -> float:
    """d(gamma_feedback(I) * I)/dI for the imperfect SEIR adjoint."""
    return 2.0 * (scenario.gamma_max - scenario.gamma_min) / scenario.i_max * i + scenario.gamma_min


def state_rhs(scenario: Scenario, state, u: InputVec) -> np.ndarray:
    """Time derivative of the reduced state under input/disturbance ``u``."""
    v = scenario.variant
    if v is Variant.SIR_PERFECT:
        return sir_rhs(state, u.beta, scenario.gamma)
    if v is Variant.SEIR_PERFECT:
        return seir_rhs(state, u.beta, u.gamma, scenario.eta)
    if v is Variant.SIR_IMPERFECT:
        return sir_rhs(state, _bhat(state[1], scenario), u.gamma)
    # SEIR_IMPERFECT
    i = state[2]
    return seir_rhs(state, _bhat(i, scenario), _ghat(i, scenario), u.eta)


def adjoint_matrix(scenario: Scenario, state, u: InputVec) -> np.ndarray:
    """Coefficient matrix A of the adjoint system d(lambda)/dt = A lambda.

    Equals minus the transposed Jacobian of the (closed-loop, for imperfect
    variants) vector field.
    """
    v = scenario.variant
    if v is Variant.SIR_PERFECT:
        S, I = state
        b, g = u.beta, scenario.gamma
        return np.array([[b * I, -b * I], [b * S, -b * S + g]])
    if v is Variant.SEIR_PERFECT:
        S, E, I = state
        b, g, e = u.beta, u.gamma, scenario.eta
        return np.array(
            [
                [b * I, -b * I, 0.0],
                [0.0, e, -e],
                [b * S, -b * S, g],
            ]
        )
    if v is Variant.SIR_IMPERFECT:
        S, I = state
        bhat = _bhat(I, scenario)
        a = alpha_of_i(I, scenario)
        g = u.gamma
        return np.array([[bhat * I, -bhat * I], [a * S, -a * S + g]])
    # SEIR_IMPERFECT
    S, E, I = state
    bhat = _bhat(I, scenario)
    a = alpha_of_i(I, scenario)
    d = delta_of_i(I, scenario)
    e = u.eta
    return np.array(
        [
            [bhat * I, -bhat * I, 0.0],
            [0.0, e, -e],
            [a * S, -a * S, d],
        ]
    )


def adjoint_rhs(scenario: Scenario, state, adjoint, u: InputVec) -> np.ndarray:
    return adjoint_matrix(scenario, state, u) @ np.asarray(adjoint, dtype=float)


# Free channels per variant (controls for perfect, disturbances for imperfect).
_CHANNELS = {
    Variant.SIR_PERFECT: (Channel.BETA,),
    Variant.SEIR_PERFECT: (Channel.BETA, Channel.GAMMA),
    Variant.SIR_IMPERFECT: (Channel.GAMMA,),
    Variant.SEIR_IMPERFECT: (Channel.ETA,),
}


def active_channels(variant: Variant) -> tuple[Channel, ...]:
    return _CHANNELS[variant]


def _check_channel(variant: Variant, set_kind: SetKind, channel: Channel) -> None:
    if not variant.is_perfect and set_kind is SetKind.ADMISSIBLE:
        raise BadChannelError(
            f"{variant.value} has no controllable input; admissible set undefined"
        )
    if channel not in _CHANNELS[variant]:
        raise BadChannelError(f"channel {channel.value} not free for {variant.value}")


def switch_value(variant: Variant, set_kind: SetKind, channel: Channel, adjoint) -> float:
    """Signed switching functional whose sign selects the extremal input."""
    _check_channel(variant, set_kind, channel)
    lam = np.asarray(adjoint, dtype=float)
    if channel is Channel.BETA:
        return float(lam[1] - lam[0])
    if channel is Channel.GAMMA:
        if variant is Variant.SIR_IMPERFECT:
            return float(lam[1])
        return float(lam[2])
    # ETA (imperfect SEIR)
    return float(lam[2] - lam[1])


def extremal_value(
    scenario: Scenario, set_kind: SetKind, channel: Channel, positive: bool
) -> float:
    """Bang value of ``channel`` when its switching functional is positive/negative."""
    _check_channel(scenario.variant, set_kind, channel)
    if channel is Channel.BETA:
        lo, hi = scenario.beta_min, scenario.beta_max
        # admissible: beta_min when sigma > 0; MRPI: beta_max when sigma > 0
        if set_kind is SetKind.ADMISSIBLE:
            return lo if positive else hi
        return hi if positive else lo
    if channel is Channel.GAMMA:
        lo, hi = scenario.gamma_min, scenario.gamma_max
        # admissible (perfect SEIR): gamma_max when sigma > 0; MRPI: gamma_min
        if set_kind is SetKind.ADMISSIBLE:
            return hi if positive else lo
        return lo if positive else hi
    lo, hi = scenario.eta_min, scenario.eta_max
    # imperfect SEIR MRPI: eta_max when lambda3 - lambda2 > 0
    return hi if positive else lo


def lie_derivative_g(scenario: Scenario, state, u: InputVec) -> float:
    """Lie derivative of g = I - I_max along the flow, i.e. dI/dt."""
    return float(state_rhs(scenario, state, u)[-1])


def input_box(scenario: Scenario) -> dict[Channel, tuple[float, float]]:
    """Closed interval per free channel."""
    box: dict[Channel, tuple[float, float]] = {}
    for ch in _CHANNELS[scenario.variant]:
        if ch is Channel.BETA:
            box[ch] = (scenario.beta_min, scenario.beta_max)
        elif ch is Channel.GAMMA:
            box[ch] = (scenario.gamma_min, scenario.gamma_max)
        else:
            box[ch] = (scenario.eta_min, scenario.eta_max)
    return box
