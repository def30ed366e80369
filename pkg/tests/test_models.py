import numpy as np
import pytest

from epibarrier.core import SetKind, Variant
from epibarrier.models import (
    BadChannelError,
    Channel,
    DomainError,
    InputVec,
    active_channels,
    adjoint_matrix,
    adjoint_rhs,
    alpha_of_i,
    beta_feedback,
    delta_of_i,
    extremal_value,
    gamma_feedback,
    input_box,
    lie_derivative_g,
    seir_rhs,
    sir_rhs,
    state_rhs,
    switch_value,
)


def _mid_input(scenario):
    vals = {}
    for ch, (lo, hi) in input_box(scenario).items():
        vals[ch.value] = 0.5 * (lo + hi)
    return InputVec(**vals)


def _random_state(rng, dim, i_max):
    # strictly interior point of the constrained simplex
    while True:
        x = rng.uniform(0.01, 0.9, dim)
        x[-1] = rng.uniform(0.01, 0.95) * i_max
        if np.sum(x) < 0.98:
            return x


ALL_SCENARIO_FIXTURES = ["sc_sir", "sc_sir_imp", "sc_seir", "sc_seir_imp"]


def test_sir_rhs_values():
    f = sir_rhs([0.8, 0.1], beta=0.7, gamma=0.5)
    assert f[0] == pytest.approx(-0.056)
    assert f[1] == pytest.approx(0.056 - 0.05)


def test_seir_rhs_values():
    f = seir_rhs([0.6, 0.2, 0.1], beta=0.9, gamma=0.25, eta=0.2)
    flux, lat = 0.9 * 0.6 * 0.1, 0.2 * 0.2
    assert np.allclose(f, [-flux, flux - lat, lat - 0.25 * 0.1])


def test_simplex_mass_balance(sc_sir, sc_sir_imp, sc_seir, sc_seir_imp):
    # total derivative of S+I (resp. S+E+I) is -gamma I: mass only leaves
    rng = np.random.default_rng(7)
    for sc in (sc_sir, sc_sir_imp, sc_seir, sc_seir_imp):
        u = _mid_input(sc)
        for _ in range(5):
            x = _random_state(rng, sc.dim, sc.i_max)
            f = state_rhs(sc, x, u)
            assert float(np.sum(f)) <= 0.0
    # and the I=0 axis is invariant: f = 0 there for SIR
    assert np.allclose(state_rhs(sc_sir, [0.7, 0.0], InputVec(beta=0.7)), 0.0)


def test_feedback_endpoints(sc_sir_imp, sc_seir_imp):
    sc = sc_sir_imp
    assert beta_feedback(0.0, sc) == pytest.approx(sc.beta_max)
    assert beta_feedback(sc.i_max, sc) == pytest.approx(sc.beta_min)
    assert beta_feedback(0.5 * sc.i_max, sc) == pytest.approx(
        0.5 * (sc.beta_min + sc.beta_max)
    )
    sc = sc_seir_imp
    assert gamma_feedback(0.0, sc) == pytest.approx(sc.gamma_min)
    assert gamma_feedback(sc.i_max, sc) == pytest.approx(sc.gamma_max)


def test_feedback_domain_errors(sc_sir, sc_sir_imp):
    with pytest.raises(BadChannelError):
        beta_feedback(0.01, sc_sir)  # perfect variants have no feedback
    with pytest.raises(DomainError):
        beta_feedback(-0.01, sc_sir_imp)
    with pytest.raises(DomainError):
        beta_feedback(2.0 * sc_sir_imp.i_max, sc_sir_imp)


def test_alpha_delta_are_product_rule_slopes(sc_sir_imp, sc_seir_imp):
    # alpha(I) = d/dI [beta_feedback(I) I], delta(I) = d/dI [gamma_feedback(I) I]
    eps = 1e-7
    for i in (0.02, 0.1, 0.18):
        sc = sc_sir_imp
        num = (
            beta_feedback(i + eps, sc) * (i + eps)
            - beta_feedback(i - eps, sc) * (i - eps)
        ) / (2 * eps)
        assert alpha_of_i(i, sc) == pytest.approx(num, abs=1e-6)
    for i in (0.01, 0.05, 0.09):
        sc = sc_seir_imp
        num = (
            gamma_feedback(i + eps, sc) * (i + eps)
            - gamma_feedback(i - eps, sc) * (i - eps)
        ) / (2 * eps)
        assert delta_of_i(i, sc) == pytest.approx(num, abs=1e-6)


def test_adjoint_matrix_is_minus_jacobian_transposed(
    sc_sir, sc_sir_imp, sc_seir, sc_seir_imp
):
    rng = np.random.default_rng(42)
    eps = 1e-6
    for sc in (sc_sir, sc_sir_imp, sc_seir, sc_seir_imp):
        u = _mid_input(sc)
        for _ in range(10):
            x = _random_state(rng, sc.dim, sc.i_max)
            jac = np.empty((sc.dim, sc.dim))
            for j in range(sc.dim):
                dx = np.zeros(sc.dim)
                dx[j] = eps
                jac[:, j] = (
                    state_rhs(sc, x + dx, u) - state_rhs(sc, x - dx, u)
                ) / (2 * eps)
            A = adjoint_matrix(sc, x, u)
            assert np.max(np.abs(A + jac.T)) <= 1e-5


def test_adjoint_rhs_linearity(sc_seir):
    u = InputVec(beta=0.9, gamma=0.25)
    x = np.array([0.5, 0.1, 0.2])
    l1, l2 = np.array([1.0, -0.5, 0.2]), np.array([0.0, 2.0, -1.0])
    lhs = adjoint_rhs(sc_seir, x, 2.0 * l1 + 3.0 * l2, u)
    rhs = 2.0 * adjoint_rhs(sc_seir, x, l1, u) + 3.0 * adjoint_rhs(sc_seir, x, l2, u)
    assert np.allclose(lhs, rhs)


def test_active_channels():
    assert active_channels(Variant.SIR_PERFECT) == (Channel.BETA,)
    assert active_channels(Variant.SEIR_PERFECT) == (Channel.BETA, Channel.GAMMA)
    assert active_channels(Variant.SIR_IMPERFECT) == (Channel.GAMMA,)
    assert active_channels(Variant.SEIR_IMPERFECT) == (Channel.ETA,)


def test_switch_value_formulas():
    lam = [0.3, -0.4, 0.9]
    assert switch_value(
        Variant.SEIR_PERFECT, SetKind.MRPI, Channel.BETA, lam
    ) == pytest.approx(-0.7)
    assert switch_value(
        Variant.SEIR_PERFECT, SetKind.MRPI, Channel.GAMMA, lam
    ) == pytest.approx(0.9)
    assert switch_value(
        Variant.SEIR_IMPERFECT, SetKind.MRPI, Channel.ETA, lam
    ) == pytest.approx(1.3)
    assert switch_value(
        Variant.SIR_IMPERFECT, SetKind.MRPI, Channel.GAMMA, [0.3, -0.4]
    ) == pytest.approx(-0.4)


def test_switch_value_channel_guards():
    with pytest.raises(BadChannelError):
        switch_value(Variant.SIR_PERFECT, SetKind.MRPI, Channel.GAMMA, [0.0, 1.0])
    with pytest.raises(BadChannelError):
        # imperfect variants have no admissible set
        switch_value(
            Variant.SIR_IMPERFECT, SetKind.ADMISSIBLE, Channel.GAMMA, [0.0, 1.0]
        )


def test_extremal_value_table(sc_sir, sc_seir, sc_sir_imp, sc_seir_imp):
    # admissible beta: min when positive; MRPI beta: max when positive
    assert extremal_value(sc_sir, SetKind.ADMISSIBLE, Channel.BETA, True) == 0.6
    assert extremal_value(sc_sir, SetKind.ADMISSIBLE, Channel.BETA, False) == 0.8
    assert extremal_value(sc_sir, SetKind.MRPI, Channel.BETA, True) == 0.8
    assert extremal_value(sc_sir, SetKind.MRPI, Channel.BETA, False) == 0.6
    # SEIR gamma: admissible max when positive; MRPI min when positive
    assert extremal_value(sc_seir, SetKind.ADMISSIBLE, Channel.GAMMA, True) == (
        pytest.approx(1.0 / 3.0)
    )
    assert extremal_value(sc_seir, SetKind.MRPI, Channel.GAMMA, True) == (
        pytest.approx(0.2)
    )
    # imperfect SIR gamma disturbance: min when positive
    assert extremal_value(sc_sir_imp, SetKind.MRPI, Channel.GAMMA, True) == 0.3
    # imperfect SEIR eta disturbance: max when positive
    assert extremal_value(sc_seir_imp, SetKind.MRPI, Channel.ETA, True) == (
        pytest.approx(0.2)
    )
    assert extremal_value(sc_seir_imp, SetKind.MRPI, Channel.ETA, False) == (
        pytest.approx(1.0 / 7.0)
    )


def test_lie_derivative_is_i_component(sc_sir, sc_seir):
    u = InputVec(beta=0.7)
    x = [0.8, 0.015]
    assert lie_derivative_g(sc_sir, x, u) == pytest.approx(
        state_rhs(sc_sir, x, u)[-1]
    )
    u = InputVec(beta=0.9, gamma=0.25)
    x = [0.5, 0.1, 0.2]
    assert lie_derivative_g(sc_seir, x, u) == pytest.approx(
        state_rhs(sc_seir, x, u)[-1]
    )


def test_input_box(sc_seir_imp):
    box = input_box(sc_seir_imp)
    assert set(box) == {Channel.ETA}
    assert box[Channel.ETA] == (sc_seir_imp.eta_min, sc_seir_imp.eta_max)


def test_input_vec_get():
    u = InputVec(beta=0.7)
    assert u.get(Channel.BETA) == 0.7
    with pytest.raises(BadChannelError):
        u.get(Channel.GAMMA)
