import numpy as np
import pytest

from epibarrier.analysis import backward_filter, tangent_set
from epibarrier.barrier import (
    ComputedSet,
    Verdict,
    assemble_set,
    compute_barrier_curve,
    membership,
    mesh_triangles,
    resample_by_arclength,
    select_extremal_input,
)
from epibarrier.core import SetKind, Tolerances
from epibarrier.models import Channel, InputVec, lie_derivative_g


def _all_curves(sets):
    for name, cset in sets.items():
        for curve in cset.curves:
            yield name, cset, curve


def test_hamiltonian_invariant(all_proper_sets):
    for name, cset, curve in _all_curves(all_proper_sets):
        ham = np.max(np.abs(curve.hamiltonian(cset.scenario)))
        assert ham <= cset.tolerances.ham_tol, f"{name}: max |H| = {ham}"


def test_tangency_residual(all_proper_sets):
    for name, cset in all_proper_sets.items():
        sc = cset.scenario
        for curve in cset.curves:
            x0 = curve.tangent_point
            lam0 = np.zeros(sc.dim)
            lam0[-1] = 1.0
            u0 = select_extremal_input(sc, cset.set_kind, x0, lam0)
            assert abs(lie_derivative_g(sc, x0, u0)) <= 1e-8, name


def test_curve_containment(all_proper_sets):
    for name, cset, curve in _all_curves(all_proper_sets):
        sc, tol = cset.scenario, cset.tolerances
        states = np.array([s.state for s in curve.samples])
        slack = 2.0 * tol.geom_tol
        assert np.all(states[:, -1] <= sc.i_max + slack), name
        assert np.all(states.min(axis=1) >= -slack), name
        assert np.all(states.sum(axis=1) <= 1.0 + slack), name
        # interior samples (away from the refined terminal point) are strict
        interior = states[1:-1]
        assert np.all(interior[:, -1] <= sc.i_max + tol.geom_tol), name


def test_adjoint_stays_unit_norm(all_proper_sets):
    for name, cset, curve in _all_curves(all_proper_sets):
        norms = np.array([np.linalg.norm(s.adjoint) for s in curve.samples])
        assert np.max(np.abs(norms - 1.0)) <= 1e-9, name


def test_sir_input_saturation(adm_sir, mrpi_sir, mrpi_sir_imp):
    # admissible barrier rides beta_min, MRPI barrier beta_max, no switches
    curve = adm_sir.curves[0]
    assert curve.switch_times == []
    assert all(s.u.beta == adm_sir.scenario.beta_min for s in curve.samples)
    curve = mrpi_sir.curves[0]
    assert curve.switch_times == []
    assert all(s.u.beta == mrpi_sir.scenario.beta_max for s in curve.samples)
    # imperfect SIR: worst-case removal saturated at gamma_min throughout
    curve = mrpi_sir_imp.curves[0]
    assert curve.switch_times == []
    assert all(s.u.gamma == mrpi_sir_imp.scenario.gamma_min for s in curve.samples)


def test_switches_are_isolated(all_proper_sets):
    for name, cset, curve in _all_curves(all_proper_sets):
        assert not curve.truncated, name
        times = [t for t, _ in curve.switch_times]
        gap_min = 10.0 * cset.tolerances.event_time_tol
        assert all(b - a > gap_min for a, b in zip(times, times[1:])), name


def test_seir_imperfect_eta_switch(mrpi_seir_imp):
    # at least one curve shows a single eta switch, eta_max at the tangent end
    sc = mrpi_seir_imp.scenario
    found = False
    for curve in mrpi_seir_imp.curves:
        if len(curve.switch_times) == 1 and curve.switch_times[0][1] is Channel.ETA:
            assert curve.samples[0].u.eta == pytest.approx(sc.eta_max)
            assert curve.samples[-1].u.eta == pytest.approx(sc.eta_min)
            found = True
    assert found


def test_sir_polygon_closed_and_simple(adm_sir, mrpi_sir, mrpi_sir_imp):
    for cset in (adm_sir, mrpi_sir, mrpi_sir_imp):
        poly = cset.polyline
        assert poly.ndim == 2 and poly.shape[1] == 2
        # starts at the origin, visits the cap corner, returns to the axis
        assert np.allclose(poly[0], [0.0, 0.0])
        assert poly[-1][1] == pytest.approx(0.0, abs=1e-9)
        assert np.max(poly[:, 1]) <= cset.scenario.i_max + 2e-9


def test_sir_terminations(adm_sir, mrpi_sir):
    assert adm_sir.curves[0].termination.label == "sum_face"
    assert mrpi_sir.curves[0].termination.label == "i_floor"


def test_select_extremal_input_at_tangency(sc_sir, sc_seir, sc_seir_imp, sc_sir_imp):
    lam2 = np.array([0.0, 1.0])
    u = select_extremal_input(sc_sir, SetKind.ADMISSIBLE, [0.8, 0.02], lam2)
    assert u.beta == sc_sir.beta_min
    u = select_extremal_input(sc_sir, SetKind.MRPI, [0.8, 0.02], lam2)
    assert u.beta == sc_sir.beta_max
    u = select_extremal_input(sc_sir_imp, SetKind.MRPI, [0.5, 0.2], lam2)
    assert u.gamma == sc_sir_imp.gamma_min
    lam3 = np.array([0.0, 0.0, 1.0])
    # beta's functional vanishes at tangency; its backward-time sign comes from
    # the adjoint derivative and still lands on the bang value
    u = select_extremal_input(sc_seir, SetKind.MRPI, [0.2, 0.3, 0.3], lam3)
    assert u.gamma == sc_seir.gamma_min
    assert u.beta == sc_seir.beta_max
    u = select_extremal_input(sc_seir, SetKind.ADMISSIBLE, [0.2, 0.5, 0.3], lam3)
    assert u.gamma == pytest.approx(sc_seir.gamma_max)
    assert u.beta == sc_seir.beta_min
    u = select_extremal_input(sc_seir_imp, SetKind.MRPI, [0.2, 1.0 / 6.0, 0.1], lam3)
    assert u.eta == pytest.approx(sc_seir_imp.eta_max)


def test_resample_by_arclength(adm_sir):
    curve = adm_sir.curves[0]
    pts = resample_by_arclength(curve, adm_sir.scenario, 100)
    assert pts.shape == (100, 2)
    assert np.allclose(pts[0], curve.samples[0].state)
    assert np.allclose(pts[-1], curve.samples[-1].state)
    # chord lengths are close to the uniform arc spacing
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    target = curve.arc_length / 99.0
    assert np.max(np.abs(chords - target)) < 0.2 * target


def test_membership_reference_points(adm_sir, mrpi_sir):
    # a state inside the viable region but outside the robust one
    p = np.array([0.8, 0.012])
    assert membership(adm_sir, p).verdict is Verdict.INSIDE
    assert membership(mrpi_sir, p).verdict is Verdict.OUTSIDE
    # far right: no intervention holds the cap
    p = np.array([0.98, 0.019])
    assert membership(adm_sir, p).verdict is Verdict.OUTSIDE
    assert membership(mrpi_sir, p).verdict is Verdict.OUTSIDE
    # disease-free-ish corner is in both
    p = np.array([0.2, 0.005])
    assert membership(adm_sir, p).verdict is Verdict.INSIDE
    assert membership(mrpi_sir, p).verdict is Verdict.INSIDE
    # outside the simplex entirely
    assert membership(adm_sir, [0.99, 0.05]).verdict is Verdict.OUTSIDE


def test_membership_boundary_layer(adm_sir):
    up = adm_sir.usable
    near = np.array([0.5, adm_sir.scenario.i_max - 1e-4])
    m = membership(adm_sir, near)
    assert m.verdict is Verdict.BOUNDARY
    assert m.distance_estimate <= adm_sir.tolerances.boundary_layer_eps


def test_membership_distance_estimate(adm_sir):
    m = membership(adm_sir, [0.2, 0.005])
    # closest boundary piece is the equilibrium axis I = 0
    assert m.distance_estimate == pytest.approx(0.005, rel=1e-6)


def test_trivial_set_membership(sc_sir40):
    cset = assemble_set(sc_sir40, SetKind.ADMISSIBLE)
    assert cset.trivial and cset.curves == []
    assert membership(cset, [0.5, 0.2]).verdict is Verdict.INSIDE
    assert membership(cset, [0.5, 0.5]).verdict is Verdict.OUTSIDE
    assert membership(cset, [0.5, 0.4 - 1e-5]).verdict is Verdict.BOUNDARY


def test_seir_membership_basic(mrpi_seir):
    sc = mrpi_seir.scenario
    # deep inside: tiny infection, plenty of susceptibles
    assert membership(mrpi_seir, [0.3, 0.01, 0.01]).verdict is Verdict.INSIDE
    # large exposed pool with plenty of susceptibles must overshoot
    assert membership(mrpi_seir, [0.6, 0.3, 0.05]).verdict is Verdict.OUTSIDE
    # above the cap face
    assert membership(mrpi_seir, [0.2, 0.1, 0.35]).verdict is Verdict.OUTSIDE


def test_seir_membership_round_trip_determinism(mrpi_seir):
    p = [0.25, 0.1, 0.05]
    a = membership(mrpi_seir, p)
    b = membership(mrpi_seir, p)
    assert a.verdict is b.verdict
    assert a.distance_estimate == b.distance_estimate


def test_seir_mesh_probe_consistency(mrpi_seir):
    # probing both sides of interior mesh quads must flip the verdict for the
    # overwhelming majority of decisive probes
    grid = mrpi_seir.mesh_nodes
    nc, nn, _ = grid.shape
    rng = np.random.default_rng(11)
    eps = 2.5e-3
    decisive = flipped = 0
    for _ in range(150):
        i = rng.integers(1, nc - 1)
        j = rng.integers(5, nn - 5)
        quad = grid[i - 1 : i + 1, j : j + 2].reshape(4, 3)
        mid = quad.mean(axis=0)
        if mid[2] > mrpi_seir.scenario.i_max - 3.0 * eps:
            # skip the fold where curves return to the cap face: probes there
            # straddle the constraint surface instead of the barrier sheet
            continue
        n_vec = np.cross(quad[1] - quad[0], quad[2] - quad[0])
        norm = np.linalg.norm(n_vec)
        if norm < 1e-12:
            continue
        n_vec /= norm
        va = membership(mrpi_seir, mid + eps * n_vec).verdict
        vb = membership(mrpi_seir, mid - eps * n_vec).verdict
        if {va, vb} <= {Verdict.INSIDE, Verdict.OUTSIDE}:
            decisive += 1
            flipped += va is not vb
    assert decisive >= 30
    assert flipped / decisive >= 0.95


def test_mesh_triangles_shape(mrpi_seir):
    tris = mesh_triangles(mrpi_seir)
    nc, nn, _ = mrpi_seir.mesh_nodes.shape
    assert tris.shape == (2 * (nc - 1) * (nn - 1), 3, 3)


def test_compute_barrier_curve_records_arclength(sc_sir):
    tangents = backward_filter(
        sc_sir, SetKind.ADMISSIBLE, tangent_set(sc_sir, SetKind.ADMISSIBLE)
    )
    curve = compute_barrier_curve(sc_sir, SetKind.ADMISSIBLE, tangents.point(tangents.z1_lo))
    arcs = np.array([s.arclen for s in curve.samples])
    assert arcs[0] == 0.0
    assert np.all(np.diff(arcs) >= 0.0)
    # arc length is at least the straight-line distance covered
    chord = np.linalg.norm(curve.samples[-1].state - curve.samples[0].state)
    assert curve.arc_length >= chord - 1e-12
