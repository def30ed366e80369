"""Barrier curves by backward integration, and queryable computed sets.

A barrier curve starts on the constraint face I = I_max at an
ultimate-tangency point with adjoint (0, ..., 0, 1) and is integrated
backwards in time under the extremal bang-bang input selected by the adjoint's
switching functionals.  Curves are parameterized by backward time tau = -t
(the tangency instant is fixed at t = 0), so the integrator always moves
forward in its own variable:

    dx/dtau      = -f(x, u)
    dlambda/dtau = -A(x, u) lambda
    ds/dtau      = |f(x, u)|          (arc length, used for resampling)

For SIR variants the single curve plus the usable part and the invariant
simplex faces stitch into a closed boundary polygon; membership is an exact
even-odd ray test.  For SEIR variants a family of curves is resampled onto an
arc-length grid and triangulated; membership is a vertical-ray parity test
against that mesh with explicit UNKNOWN verdicts near its edges.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .analysis import (
    UsablePart,
    backward_filter,
    classify,
    is_trivial,
    tangent_set,
    usable_part,
)
from .core import Scenario, SetKind, Tolerances, Variant
from .integrate import (
    SIGMA_TOL,
    EventKind,
    EventSpec,
    IntegrationResult,
    SingularArcError,
    integrate_until,
)
from .models import (
    Channel,
    InputVec,
    active_channels,
    adjoint_matrix,
    adjoint_rhs,
    extremal_value,
    input_box,
    state_rhs,
    switch_value,
)

__all__ = [
    "Verdict",
    "Membership",
    "CurveSample",
    "BarrierCurve",
    "ComputedSet",
    "InvariantBreachError",
    "select_extremal_input",
    "compute_barrier_curve",
    "resample_by_arclength",
    "assemble_set",
    "membership",
]

SWITCH_GAP_MIN_FACTOR = 10.0  # consecutive switches closer than this * event_time_tol => chattering


class Verdict(Enum):
    INSIDE = "INSIDE"
    OUTSIDE = "OUTSIDE"
    BOUNDARY = "BOUNDARY"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class Membership:
    verdict: Verdict
    distance_estimate: float


class InvariantBreachError(RuntimeError):
    """A curve sample left the region I <= I_max (step size too coarse)."""


@dataclass
class CurveSample:
    tau: float  # backward time since tangency (t = -tau)
    state: np.ndarray
    adjoint: np.ndarray  # unit norm
    arclen: float
    u: InputVec
    is_switch: bool = False


@dataclass
class BarrierCurve:
    tangent_point: np.ndarray
    samples: list[CurveSample]
    termination: EventSpec
    switch_times: list[tuple[float, Channel]]
    truncated: bool = False
    step_h: float = 0.0

    @property
    def arc_length(self) -> float:
        return self.samples[-1].arclen

    def hamiltonian(self, scenario: Scenario) -> np.ndarray:
        """lambda^T f at every sample (zero along an exact extremal curve)."""
        return np.array(
            [
                float(s.adjoint @ state_rhs(scenario, s.state, s.u))
                for s in self.samples
            ]
        )


def select_extremal_input(
    scenario: Scenario,
    set_kind: SetKind,
    state,
    adjoint,
    sigma_tol: float = SIGMA_TOL,
) -> InputVec:
    """Bang-bang input selected by the signs of the switching functionals.

    At an exact zero of a functional (e.g. at the tangency instant for SEIR
    beta) the sign is taken one-sided in backward time from the analytic
    derivative: sigma just before t=0 has the sign of -d(sigma)/dt.
    """
    variant = scenario.variant
    box = input_box(scenario)
    values: dict[Channel, float] = {}
    pending: list[Channel] = []
    for ch in active_channels(variant):
        sigma = switch_value(variant, set_kind, ch, adjoint)
        if abs(sigma) >= sigma_tol:
            values[ch] = extremal_value(scenario, set_kind, ch, sigma > 0.0)
        else:
            pending.append(ch)
            lo, hi = box[ch]
            values[ch] = 0.5 * (lo + hi)  # placeholder for the derivative probe
    for ch in pending:
        probe = _make_input(variant, values)
        lam_dot = adjoint_rhs(scenario, state, adjoint, probe)
        sigma_dot = switch_value(variant, set_kind, ch, lam_dot)
        if abs(sigma_dot) < sigma_tol:
            raise SingularArcError(
                f"switching functional for {ch.value} and its derivative both "
                f"vanish at state {np.asarray(state).tolist()}"
            )
        values[ch] = extremal_value(scenario, set_kind, ch, -sigma_dot > 0.0)
    return _make_input(scenario.variant, values)


def _make_input(variant: Variant, values: dict[Channel, float]) -> InputVec:
    return InputVec(
        beta=values.get(Channel.BETA),
        gamma=values.get(Channel.GAMMA),
        eta=values.get(Channel.ETA),
    )


def _backward_rhs(scenario: Scenario, u: InputVec, d: int):
    """Coupled backward (state, adjoint, arc-length) right-hand side.

    Hand-inlined per variant: this is the innermost hot loop and the generic
    matrix build costs several times the arithmetic.
    """
    v = scenario.variant
    im = scenario.i_max
    if v is Variant.SIR_PERFECT or v is Variant.SIR_IMPERFECT:
        if v is Variant.SIR_PERFECT:
            g = scenario.gamma
        else:
            g = u.gamma

        def rhs(t, y):
            S, I, l1, l2 = y[0], y[1], y[2], y[3]
            if v is Variant.SIR_IMPERFECT:
                r = min(1.0, max(0.0, I / im))
                b = scenario.beta_min * r + scenario.beta_max * (1.0 - r)
                a = (
                    2.0 * (scenario.beta_min - scenario.beta_max) / im * I
                    + scenario.beta_max
                )
            else:
                b = u.beta
                a = b
            flux = b * S * I
            f0, f1 = -flux, flux - g * I
            return np.array(
                [
                    -f0,
                    -f1,
                    -(b * I * l1 - b * I * l2),
                    -(a * S * l1 + (-a * S + g) * l2),
                    np.sqrt(f0 * f0 + f1 * f1),
                ]
            )

        return rhs

    def rhs(t, y):
        S, E, I = y[0], y[1], y[2]
        l1, l2, l3 = y[3], y[4], y[5]
        if v is Variant.SEIR_PERFECT:
            b, g, e = u.beta, u.gamma, scenario.eta
            a, dd = b, g
        else:
            r = min(1.0, max(0.0, I / im))
            b = scenario.beta_min * r + scenario.beta_max * (1.0 - r)
            g = scenario.gamma_min * (1.0 - r) + scenario.gamma_max * r
            a = 2.0 * (scenario.beta_min - scenario.beta_max) / im * I + scenario.beta_max
            dd = 2.0 * (scenario.gamma_max - scenario.gamma_min) / im * I + scenario.gamma_min
            e = u.eta
        flux = b * S * I
        lat = e * E
        f0, f1, f2 = -flux, flux - lat, lat - g * I
        return np.array(
            [
                -f0,
                -f1,
                -f2,
                -(b * I * l1 - b * I * l2),
                -(e * l2 - e * l3),
                -(a * S * l1 - a * S * l2 + dd * l3),
                np.sqrt(f0 * f0 + f1 * f1 + f2 * f2),
            ]
        )

    return rhs


def _segment_events(scenario: Scenario, set_kind: SetKind, tol: Tolerances):
    d = scenario.dim
    events = []
    for ch in active_channels(scenario.variant):
        events.append(
            EventSpec(
                EventKind.SIGN_CHANGE,
                f"sigma_{ch.value}",
                fn=lambda t, y, ch=ch: switch_value(
                    scenario.variant, set_kind, ch, y[d : 2 * d]
                ),
            )
        )
    events.append(
        EventSpec(
            EventKind.DOMAIN_EXIT,
            "sum_face",
            fn=lambda t, y: float(np.sum(y[:d]) - 1.0),
            trigger_level=tol.geom_tol,
        )
    )
    events.append(
        EventSpec(
            EventKind.DOMAIN_EXIT,
            "s_floor",
            fn=lambda t, y: float(-y[0]),
            trigger_level=tol.geom_tol,
        )
    )
    if d == 3:
        events.append(
            EventSpec(
                EventKind.DOMAIN_EXIT,
                "e_floor",
                fn=lambda t, y: float(-y[1]),
                trigger_level=tol.geom_tol,
            )
        )
    events.append(
        EventSpec(
            EventKind.DOMAIN_EXIT,
            "cap_face",
            fn=lambda t, y: float(y[d - 1] - scenario.i_max),
            trigger_level=tol.geom_tol,
        )
    )
    events.append(
        EventSpec(
            EventKind.I_FLOOR,
            "i_floor",
            fn=lambda t, y: float(tol.i_floor - y[d - 1]),
        )
    )
    return events


_SIGMA_CHANNEL = {f"sigma_{ch.value}": ch for ch in Channel}


def compute_barrier_curve(
    scenario: Scenario,
    set_kind: SetKind,
    tangent_point,
    tolerances: Tolerances | None = None,
    *,
    record_every: int = 10,
) -> BarrierCurve:
    """Backward extremal curve from a tangency point; one h/10 retry on breach."""
    tol = tolerances or Tolerances()
    try:
        return _compute_curve(scenario, set_kind, tangent_point, tol, tol.step_h, record_every)
    except InvariantBreachError:
        return _compute_curve(
            scenario, set_kind, tangent_point, tol, tol.step_h / 10.0, record_every
        )


def _compute_curve(scenario, set_kind, tangent_point, tol, h, record_every):
    d = scenario.dim
    x0 = np.asarray(tangent_point, dtype=float)
    if x0.shape != (d,):
        raise ValueError(f"tangent point must have {d} components")
    lam0 = np.zeros(d)
    lam0[-1] = 1.0
    y = np.concatenate([x0, lam0, [0.0]])

    def renorm(state_vec):
        out = state_vec.copy()
        lam = out[d : 2 * d]
        out[d : 2 * d] = lam / np.linalg.norm(lam)
        return out

    events = _segment_events(scenario, set_kind, tol)
    samples: list[CurveSample] = []
    switches: list[tuple[float, Channel]] = []
    tau = 0.0
    truncated = False

    while True:
        u = select_extremal_input(scenario, set_kind, y[:d], y[d : 2 * d])
        res = integrate_until(
            _backward_rhs(scenario, u, d),
            events,
            y,
            t0=tau,
            direction=1.0,
            tolerances=tol,
            h=h,
            t_limit=tol.t_back_max - tau,
            record_every=record_every,
            post_step=renorm,
        )
        for rec in res.records:
            samples.append(
                CurveSample(
                    tau=rec.t,
                    state=rec.y[:d],
                    adjoint=rec.y[d : 2 * d],
                    arclen=rec.y[2 * d],
                    u=u,
                )
            )
        term = res.terminal
        if term.kind is EventKind.SIGN_CHANGE:
            gap_ok = not switches or (
                res.t_end - switches[-1][0] > SWITCH_GAP_MIN_FACTOR * tol.event_time_tol
            )
            if not gap_ok:
                truncated = True
                break
            samples[-1].is_switch = True
            switches.append((res.t_end, _SIGMA_CHANNEL[term.label]))
            tau, y = res.t_end, res.y_end
            continue
        if term.label == "cap_face" and res.t_end - tau <= 10.0 * h:
            # overshoot right after tangency: the step is too coarse; a later
            # return to the cap face is a genuine boundary termination
            raise InvariantBreachError(
                f"curve re-entered I > I_max at tau={res.t_end}"
            )
        break

    curve = BarrierCurve(
        tangent_point=x0,
        samples=samples,
        termination=term,
        switch_times=switches,
        truncated=truncated,
        step_h=h,
    )
    _check_containment(scenario, curve, tol)
    return curve


def _check_containment(scenario: Scenario, curve: BarrierCurve, tol: Tolerances):
    # face events trigger at depth geom_tol, so the terminal sample may sit up
    # to that deep plus refinement slack; allow twice the tolerance
    slack = 2.0 * tol.geom_tol
    for s in curve.samples:
        x = s.state
        if x[-1] > scenario.i_max + slack:
            raise InvariantBreachError(
                f"sample at tau={s.tau} has I={x[-1]} above the cap"
            )
        if np.min(x) < -slack or np.sum(x) > 1.0 + slack:
            raise InvariantBreachError(
                f"sample at tau={s.tau} left the simplex: {x.tolist()}"
            )


# ---------------------------------------------------------------------------
# arc-length resampling (cubic Hermite between recorded samples)
# ---------------------------------------------------------------------------


def _hermite(xa, xb, da, db, dt, theta):
    t2, t3 = theta * theta, theta * theta * theta
    return (
        (2 * t3 - 3 * t2 + 1) * xa
        + (t3 - 2 * t2 + theta) * dt * da
        + (-2 * t3 + 3 * t2) * xb
        + (t3 - t2) * dt * db
    )


def resample_by_arclength(
    curve: BarrierCurve, scenario: Scenario, n_nodes: int
) -> np.ndarray:
    """States at n_nodes equally spaced arc-length stations along the curve.

    Interpolation is cubic Hermite using the exact backward vector field as
    tangent data, so the resampled curve keeps the integrator's full order.
    """
    samples = curve.samples
    s_vals = np.array([s.arclen for s in samples])
    targets = np.linspace(0.0, s_vals[-1], n_nodes)
    out = np.empty((n_nodes, scenario.dim))
    out[0] = samples[0].state
    out[-1] = samples[-1].state
    k = 0
    for j in range(1, n_nodes - 1):
        s_t = targets[j]
        while k + 1 < len(samples) - 1 and s_vals[k + 1] < s_t:
            k += 1
        a, b = samples[k], samples[k + 1]
        dt = b.tau - a.tau
        if dt <= 0.0 or b.arclen <= a.arclen:  # duplicated switch node
            out[j] = b.state
            continue
        fa = state_rhs(scenario, a.state, a.u)
        fb = state_rhs(scenario, b.state, b.u)
        dsa, dsb = np.sqrt(fa @ fa), np.sqrt(fb @ fb)
        # invert the monotone arc-length Hermite s(theta) by bisection
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _hermite(a.arclen, b.arclen, dsa, dsb, dt, mid) < s_t:
                lo = mid
            else:
                hi = mid
        theta = 0.5 * (lo + hi)
        out[j] = _hermite(a.state, b.state, -fa, -fb, dt, theta)
    return out


# ---------------------------------------------------------------------------
# set assembly
# ---------------------------------------------------------------------------


@dataclass
class ComputedSet:
    """A computed admissible or robust-invariant set with membership queries.

    Membership only consults the geometric fields (boundary polyline for SIR,
    mesh nodes and usable part for SEIR), so a set reloaded from its exported
    geometry answers identically to the freshly assembled one.
    """

    scenario: Scenario
    set_kind: SetKind
    trivial: bool
    usable: UsablePart | None = None
    curves: list[BarrierCurve] = field(default_factory=list)
    polyline: np.ndarray | None = None  # SIR: closed boundary polygon (n, 2)
    mesh_nodes: np.ndarray | None = None  # SEIR: (n_curves, n_nodes, 3)
    special_segments: list[np.ndarray] = field(default_factory=list)
    tolerances: Tolerances = field(default_factory=Tolerances)


def _sir_special_segments(scenario: Scenario) -> list[np.ndarray]:
    im = scenario.i_max
    return [
        np.array([[0.0, 0.0], [1.0, 0.0]]),  # equilibrium axis I = 0
        np.array([[0.0, 0.0], [0.0, im]]),  # S = 0 edge, flow decays to origin
    ]


def _seir_special_segments(scenario: Scenario) -> list[np.ndarray]:
    return [
        np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),  # equilibria E = I = 0
    ]


def assemble_set(
    scenario: Scenario,
    set_kind: SetKind,
    n_curves: int = 30,
    tolerances: Tolerances | None = None,
    *,
    n_arc_nodes: int = 200,
    record_every: int = 10,
) -> ComputedSet:
    """Compute barrier curves and stitch them with the usable part.

    For a trivial classification the whole constrained simplex is the set and
    no curves are integrated.
    """
    tol = tolerances or Tolerances()
    if is_trivial(scenario, set_kind):
        return ComputedSet(scenario, set_kind, trivial=True, tolerances=tol)
    up = usable_part(scenario, set_kind)
    tangents = backward_filter(
        scenario, set_kind, tangent_set(scenario, set_kind)
    )
    curves = [
        compute_barrier_curve(
            scenario, set_kind, tangents.point(z1), tol, record_every=record_every
        )
        for z1 in tangents.sample(n_curves)
    ]
    if scenario.variant.is_sir:
        poly = _sir_boundary_polygon(scenario, up, curves[0], tol)
        return ComputedSet(
            scenario,
            set_kind,
            trivial=False,
            usable=up,
            curves=curves,
            polyline=poly,
            special_segments=_sir_special_segments(scenario),
            tolerances=tol,
        )
    nodes = np.stack(
        [resample_by_arclength(c, scenario, n_arc_nodes) for c in curves]
    )
    return ComputedSet(
        scenario,
        set_kind,
        trivial=False,
        usable=up,
        curves=curves,
        mesh_nodes=nodes,
        special_segments=_seir_special_segments(scenario),
        tolerances=tol,
    )


def _sir_boundary_polygon(
    scenario: Scenario, up: UsablePart, curve: BarrierCurve, tol: Tolerances
) -> np.ndarray:
    """Closed boundary: S=0 edge, usable part, barrier, then invariant faces."""
    im = scenario.i_max
    arc = resample_by_arclength(curve, scenario, 400)
    if abs(arc[0, 0] - up.s_hi) > 1e-6 or abs(arc[0, 1] - im) > tol.geom_tol:
        raise ValueError(
            "barrier tangent point does not meet the usable part endpoint"
        )
    pts = [np.array([0.0, 0.0]), np.array([0.0, im])]
    pts.extend(arc)  # arc[0] is the tangent point = usable-part right endpoint
    end = arc[-1]
    if curve.termination.label == "sum_face":
        pts.append(np.array([1.0, 0.0]))
    else:  # i_floor / horizon: drop to the axis below the endpoint
        pts.append(np.array([end[0], 0.0]))
    poly = np.array(pts)
    if not _polygon_is_simple(poly):
        raise ValueError("assembled boundary polygon self-intersects")
    return poly


def _polygon_is_simple(poly: np.ndarray, tol: float = 1e-12) -> bool:
    """Reject crossings between non-adjacent edges (O(n^2), vectorized)."""
    n = len(poly)
    a = poly
    b = np.vstack([poly[1:], poly[:1]])
    d = b - a
    for i in range(n):
        j = np.arange(i + 2, n if i > 0 else n - 1)
        if len(j) == 0:
            continue
        r, s = d[i], d[j]
        qp = a[j] - a[i]
        denom = r[0] * s[:, 1] - r[1] * s[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / denom
            u = (qp[:, 0] * r[1] - qp[:, 1] * r[0]) / denom
        crossing = (
            (np.abs(denom) > tol)
            & (t > tol)
            & (t < 1 - tol)
            & (u > tol)
            & (u < 1 - tol)
        )
        if np.any(crossing):
            return False
    return True


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------


def _simplex_boundary_distance(scenario: Scenario, x: np.ndarray) -> float:
    """Distance to the boundary of the constrained simplex."""
    d = scenario.dim
    faces = [float(x[j]) for j in range(d)]
    faces.append((1.0 - float(np.sum(x))) / np.sqrt(d))
    faces.append(scenario.i_max - float(x[-1]))
    return min(faces)


def _in_simplex(scenario: Scenario, x: np.ndarray, tol: float) -> bool:
    return (
        np.min(x) >= -tol
        and np.sum(x) <= 1.0 + tol
        and x[-1] <= scenario.i_max + tol
    )


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def _polyline_distance(p: np.ndarray, poly: np.ndarray, closed: bool) -> float:
    pts = np.vstack([poly, poly[:1]]) if closed else poly
    a, b = pts[:-1], pts[1:]
    return _segment_distance(p, a, b - a)


def _segment_distance(p: np.ndarray, a: np.ndarray, ab: np.ndarray) -> float:
    denom = np.einsum("ij,ij->i", ab, ab)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.einsum("ij,ij->i", p - a, ab) / denom
    t = np.clip(np.nan_to_num(t), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.min(np.linalg.norm(p - proj, axis=1)))


def _sir_edges(cset: ComputedSet):
    """Cached flat edge-component arrays for distance and parity tests."""
    cached = getattr(cset, "_edge_arrays", None)
    if cached is not None:
        return cached
    poly = cset.polyline
    closed = np.vstack([poly, poly[:1]])
    starts = [closed[:-1]]
    ends = [closed[1:]]
    for seg in cset.special_segments:
        starts.append(seg[:-1])
        ends.append(seg[1:])
    a = np.vstack(starts)
    ab = np.vstack(ends) - a
    denom = np.einsum("ij,ij->i", ab, ab)
    inv = np.where(denom > 0.0, 1.0 / np.maximum(denom, 1e-300), 0.0)
    n_poly = len(poly)  # the first n_poly edges are the closed polygon
    # dx/dy per edge; horizontal edges never straddle a ray so 0 is safe
    safe_dy = np.where(ab[:, 1] == 0.0, 1.0, ab[:, 1])
    slope = np.where(ab[:, 1] == 0.0, 0.0, ab[:, 0] / safe_dy)
    cached = (a[:, 0], a[:, 1], ab[:, 0], ab[:, 1], inv, slope, n_poly)
    cset._edge_arrays = cached
    return cached


def _even_odd_inside(x, y, ax, ay, abx, aby, slope, n_poly) -> bool:
    """Crossing-number test with the half-open vertex rule, vectorized."""
    ay_p, aby_p = ay[:n_poly], aby[:n_poly]
    straddle = (ay_p > y) != (ay_p + aby_p > y)
    if not np.any(straddle):
        return False
    x_cross = ax[:n_poly] + (y - ay_p) * slope[:n_poly]
    return bool(np.sum(straddle & (x < x_cross)) % 2)


def membership(cset: ComputedSet, point) -> Membership:
    """Verdict and boundary-distance estimate for a query state."""
    x = np.asarray(point, dtype=float)
    scenario, tol = cset.scenario, cset.tolerances
    if cset.trivial:
        dist = _simplex_boundary_distance(scenario, x)
        if not _in_simplex(scenario, x, tol.geom_tol):
            return Membership(Verdict.OUTSIDE, abs(dist))
        if dist <= tol.boundary_layer_eps:
            return Membership(Verdict.BOUNDARY, dist)
        return Membership(Verdict.INSIDE, dist)
    if scenario.variant.is_sir:
        return _sir_membership(cset, x)
    return _seir_membership(cset, x)


def _sir_membership(cset: ComputedSet, x: np.ndarray) -> Membership:
    tol = cset.tolerances
    ax, ay, abx, aby, inv, slope, n_poly = _sir_edges(cset)
    px, py = float(x[0]), float(x[1])
    dx, dy = px - ax, py - ay
    t = np.clip((dx * abx + dy * aby) * inv, 0.0, 1.0)
    ex, ey = dx - t * abx, dy - t * aby
    dist = float(np.sqrt(np.min(ex * ex + ey * ey)))
    if dist <= tol.boundary_layer_eps:
        return Membership(Verdict.BOUNDARY, dist)
    if not _in_simplex(cset.scenario, x, tol.geom_tol):
        return Membership(Verdict.OUTSIDE, dist)
    inside = _even_odd_inside(px, py, ax, ay, abx, aby, slope, n_poly)
    return Membership(Verdict.INSIDE if inside else Verdict.OUTSIDE, dist)


def mesh_triangles(cset: ComputedSet) -> np.ndarray:
    """Triangle vertex array (n_tri, 3, 3) over the curve/arc-length grid."""
    cached = getattr(cset, "_triangles", None)
    if cached is not None:
        return cached
    grid = cset.mesh_nodes
    nc, nn, _ = grid.shape
    q00 = grid[: nc - 1, : nn - 1].reshape(-1, 3)
    q10 = grid[1:, : nn - 1].reshape(-1, 3)
    q11 = grid[1:, 1:].reshape(-1, 3)
    q01 = grid[: nc - 1, 1:].reshape(-1, 3)
    tris = np.concatenate(
        [
            np.stack([q00, q10, q11], axis=1),
            np.stack([q00, q11, q01], axis=1),
        ]
    )
    cset._triangles = tris
    return tris


def _seir_raw_inside(cset: ComputedSet, x: np.ndarray) -> bool | None:
    """Vertical-ray parity test; None when the ray grazes a triangle edge.

    The upward ray from (S, E, I) toward the cap face I = I_max either ends on
    the set's own cap-face portion (the usable part) or not, and every barrier
    mesh crossing in between flips the side; the query is inside iff exactly
    one of those two indicators holds.
    """
    s_q, e_q, i_q = x
    tris = mesh_triangles(cset)
    edge_eps = 1e-9
    d = tris[:, :, :2] - np.array([s_q, e_q])
    a1 = d[:, 1, 0] * d[:, 2, 1] - d[:, 1, 1] * d[:, 2, 0]
    a2 = d[:, 2, 0] * d[:, 0, 1] - d[:, 2, 1] * d[:, 0, 0]
    a3 = d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0]
    total = a1 + a2 + a3
    ok = np.abs(total) > 1e-14  # skip degenerate projections
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.stack([a1, a2, a3], axis=1) / total[:, None]
    lo = np.min(b, axis=1)
    grazing = ok & (lo >= -edge_eps) & (lo < edge_eps)
    if np.any(grazing):
        return None
    interior = ok & (lo >= edge_eps)
    i_star = np.einsum("ij,ij->i", b, tris[:, :, 2])
    if np.any(interior & (np.abs(i_star - i_q) < edge_eps)):
        return None
    crossings = int(np.sum(interior & (i_star > i_q)))
    cap_usable = cset.usable.contains(
        np.array([s_q, e_q, cset.scenario.i_max]), tol=0.0
    )
    return cap_usable != (crossings % 2 == 1)


def _seir_membership(cset: ComputedSet, x: np.ndarray) -> Membership:
    scenario, tol = cset.scenario, cset.tolerances
    dist = _seir_distance_estimate(cset, x)
    if dist <= tol.boundary_layer_eps:
        return Membership(Verdict.BOUNDARY, dist)
    if not _in_simplex(scenario, x, tol.geom_tol):
        return Membership(Verdict.OUTSIDE, dist)
    jitters = [
        (0.0, 0.0),
        (1.5e-6, 0.0),
        (0.0, 1.5e-6),
        (-1.5e-6, 1.5e-6),
    ]
    votes = []
    for ds, de in jitters:
        probe = np.array([x[0] + ds, x[1] + de, x[2]])
        raw = _seir_raw_inside(cset, probe)
        if raw is not None:
            votes.append(raw)
        if len(votes) >= 3:
            break
    if not votes or any(v != votes[0] for v in votes):
        return Membership(Verdict.UNKNOWN, dist)
    return Membership(Verdict.INSIDE if votes[0] else Verdict.OUTSIDE, dist)


def _seir_distance_estimate(cset: ComputedSet, x: np.ndarray) -> float:
    scenario = cset.scenario
    grid = cset.mesh_nodes.reshape(-1, 3)
    dist = float(np.min(np.linalg.norm(grid - x, axis=1)))
    # usable part of the cap face: axis-aligned box-ish region at I = I_max
    up = cset.usable
    ds = max(0.0, -x[0], x[0] - up.s_hi)
    de = max(0.0, -x[1], x[1] - up.e_cap(min(max(x[0], 0.0), up.s_hi)))
    di = scenario.i_max - x[2]
    dist = min(dist, float(np.sqrt(ds * ds + de * de + di * di)))
    for seg in cset.special_segments:
        dist = min(dist, _polyline_distance(x, seg, closed=False))
    return dist
