"""Fixed-step RK4 integration with bisection event location.

The integrator is deliberately simple: classic fourth-order Runge-Kutta at a
fixed step, events located by bisecting the sub-step length of a full RK4
step from the last pre-event node.  Between located events the right-hand
side is smooth, so the scheme keeps its full order and the results are
bit-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .core import Tolerances

__all__ = [
    "EventKind",
    "EventSpec",
    "StepRecord",
    "IntegrationResult",
    "NonFiniteError",
    "SingularArcError",
    "rk4_step",
    "integrate_until",
]

SIGMA_TOL = 1e-12
SIGMA_STALL_STEPS = 50


class EventKind(Enum):
    SIGN_CHANGE = "sign_change"
    DOMAIN_EXIT = "domain_exit"
    I_FLOOR = "i_floor"
    HORIZON = "horizon"


@dataclass
class EventSpec:
    """A termination/switch condition monitored during integration.

    ``fn(t, y)`` is a scalar: SIGN_CHANGE triggers on a sign flip between
    consecutive steps; DOMAIN_EXIT and I_FLOOR trigger once the value exceeds
    their trigger level (an outward tolerance for domain faces, zero for the
    floor).  HORIZON needs no function.
    """

    kind: EventKind
    label: str
    fn: Callable[[float, np.ndarray], float] | None = None
    refine: bool = True
    trigger_level: float = 0.0


@dataclass
class StepRecord:
    t: float
    y: np.ndarray


@dataclass
class IntegrationResult:
    records: list[StepRecord]
    terminal: EventSpec
    t_end: float
    y_end: np.ndarray
    n_steps: int


class NonFiniteError(ArithmeticError):
    pass


class SingularArcError(RuntimeError):
    """A switching functional stayed at zero for many consecutive steps."""


def rk4_step(rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classic RK4 step; raises NonFiniteError on non-finite output."""
    if h == 0.0:
        raise ValueError("step size must be nonzero")
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    y1 = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y1)):
        raise NonFiniteError(f"non-finite state after step at t={t}")
    return y1


def _triggered(ev: EventSpec, f_prev: float, f_new: float) -> bool:
    if ev.kind is EventKind.SIGN_CHANGE:
        return f_prev * f_new < 0.0
    return f_new > ev.trigger_level and f_prev <= ev.trigger_level


def _refine_fraction(rhs, ev, t0, y0, h, f_prev, f_new, event_time_tol):
    """Bisect the sub-step fraction at which the event function crosses zero.

    For SIGN_CHANGE the bracket is a genuine sign flip; for threshold events
    the function is (value - trigger) which changed sign across the step.
    """
    target = ev.trigger_level if ev.kind is not EventKind.SIGN_CHANGE else 0.0
    lo, f_lo = 0.0, f_prev - target
    hi, f_hi = 1.0, f_new - target
    y_hi = None
    # bracket may be one-signed if f_prev sits exactly on the trigger
    if f_lo == 0.0:
        lo = 0.0
    while (hi - lo) * abs(h) > event_time_tol:
        mid = 0.5 * (lo + hi)
        y_mid = rk4_step(rhs, t0, y0, mid * h)
        f_mid = ev.fn(t0 + mid * h, y_mid) - target
        if f_lo * f_mid <= 0.0 and f_lo != 0.0:
            hi, f_hi, y_hi = mid, f_mid, y_mid
        else:
            lo, f_lo = mid, f_mid
    frac = hi
    y_ev = y_hi if y_hi is not None else rk4_step(rhs, t0, y0, frac * h)
    return frac, y_ev


def integrate_until(
    rhs,
    events: list[EventSpec],
    y0,
    t0: float = 0.0,
    direction: float = 1.0,
    tolerances: Tolerances | None = None,
    *,
    h: float | None = None,
    t_limit: float | None = None,
    record_every: int = 10,
    post_step=None,
) -> IntegrationResult:
    """Step until the first triggered event; always bounded by a horizon.

    ``direction`` is +1 (forward) or -1 (backward); ``post_step`` is applied
    to the state after every accepted step (and after event refinement), e.g.
    to renormalize an adjoint.  Records are emitted at the start, every
    ``record_every``-th step, and at the terminal point.
    """
    tol = tolerances or Tolerances()
    step = (h if h is not None else tol.step_h) * (1.0 if direction >= 0 else -1.0)
    limit = t_limit if t_limit is not None else tol.t_back_max
    y = np.asarray(y0, dtype=float).copy()
    t = t0

    horizon = next((e for e in events if e.kind is EventKind.HORIZON), None)
    if horizon is None:
        horizon = EventSpec(EventKind.HORIZON, "horizon")
    watched = [e for e in events if e.kind is not EventKind.HORIZON]

    f_prev = [e.fn(t, y) for e in watched]
    stall = [0] * len(watched)
    records = [StepRecord(t, y.copy())]
    n_steps = 0

    while True:
        remaining = limit - abs(t - t0)
        if remaining <= tol.event_time_tol:
            return IntegrationResult(_close(records, t, y), horizon, t, y, n_steps)
        h_cur = step if abs(step) <= remaining else remaining * np.sign(step)
        y_new = rk4_step(rhs, t, y, h_cur)
        t_new = t + h_cur
        f_new = [e.fn(t_new, y_new) for e in watched]

        hit: tuple[float, EventSpec, np.ndarray] | None = None
        for i, ev in enumerate(watched):
            if _triggered(ev, f_prev[i], f_new[i]):
                if ev.refine:
                    frac, y_ev = _refine_fraction(
                        rhs, ev, t, y, h_cur, f_prev[i], f_new[i], tol.event_time_tol
                    )
                else:
                    frac, y_ev = 1.0, y_new
                if hit is None or frac < hit[0]:
                    hit = (frac, ev, y_ev)
            if ev.kind is EventKind.SIGN_CHANGE:
                stall[i] = stall[i] + 1 if abs(f_new[i]) < SIGMA_TOL else 0
                if stall[i] > SIGMA_STALL_STEPS:
                    raise SingularArcError(
                        f"functional '{ev.label}' stayed below {SIGMA_TOL} "
                        f"for {stall[i]} consecutive steps"
                    )
        if hit is not None:
            frac, ev, y_ev = hit
            t_ev = t + frac * h_cur
            if post_step is not None:
                y_ev = post_step(y_ev)
            return IntegrationResult(
                _close(records, t_ev, y_ev), ev, t_ev, y_ev, n_steps + 1
            )

        if post_step is not None:
            y_new = post_step(y_new)
            f_new = [e.fn(t_new, y_new) for e in watched]
        t, y, f_prev = t_new, y_new, f_new
        n_steps += 1
        if n_steps % record_every == 0:
            records.append(StepRecord(t, y.copy()))


def _close(records: list[StepRecord], t: float, y: np.ndarray) -> list[StepRecord]:
    if records and records[-1].t == t:
        records[-1] = StepRecord(t, y.copy())
    else:
        records.append(StepRecord(t, y.copy()))
    return records
