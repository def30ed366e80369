"""Shared scenario fixtures and cached computed sets.

Set assembly is the expensive part of the suite, so every assembled set is a
session-scoped fixture shared across test modules.
"""
import numpy as np
import pytest

from epibarrier import SetKind, assemble_set, validate_scenario


SIR_PERFECT_RAW = {
    "variant": "SIR_PERFECT",
    "beta": [0.6, 0.8],
    "gamma": 0.5,
    "i_max": 0.02,
}
SIR_PERFECT_15_RAW = dict(SIR_PERFECT_RAW, i_max=0.15)
SIR_PERFECT_40_RAW = dict(SIR_PERFECT_RAW, i_max=0.4)
SIR_IMPERFECT_RAW = {
    "variant": "SIR_IMPERFECT",
    "beta": [0.6, 0.8],
    "gamma": [0.3, 0.5],
    "i_max": 0.2,
}
SEIR_PERFECT_RAW = {
    "variant": "SEIR_PERFECT",
    "beta": [0.8, 1.0],
    "gamma": [1.0 / 5.0, 1.0 / 3.0],
    "eta": 1.0 / 5.0,
    "i_max": 0.3,
}
SEIR_PERFECT_40_RAW = dict(SEIR_PERFECT_RAW, i_max=0.4)
SEIR_IMPERFECT_RAW = {
    "variant": "SEIR_IMPERFECT",
    "beta": [0.8, 1.0],
    "gamma": [1.0 / 5.0, 1.0 / 3.0],
    "eta": [1.0 / 7.0, 1.0 / 5.0],
    "i_max": 0.1,
}


@pytest.fixture(scope="session")
def sc_sir():
    return validate_scenario(SIR_PERFECT_RAW)


@pytest.fixture(scope="session")
def sc_sir15():
    return validate_scenario(SIR_PERFECT_15_RAW)


@pytest.fixture(scope="session")
def sc_sir40():
    return validate_scenario(SIR_PERFECT_40_RAW)


@pytest.fixture(scope="session")
def sc_sir_imp():
    return validate_scenario(SIR_IMPERFECT_RAW)


@pytest.fixture(scope="session")
def sc_seir():
    return validate_scenario(SEIR_PERFECT_RAW)


@pytest.fixture(scope="session")
def sc_seir40():
    return validate_scenario(SEIR_PERFECT_40_RAW)


@pytest.fixture(scope="session")
def sc_seir_imp():
    return validate_scenario(SEIR_IMPERFECT_RAW)


@pytest.fixture(scope="session")
def adm_sir(sc_sir):
    return assemble_set(sc_sir, SetKind.ADMISSIBLE)


@pytest.fixture(scope="session")
def mrpi_sir(sc_sir):
    return assemble_set(sc_sir, SetKind.MRPI)


@pytest.fixture(scope="session")
def adm_sir15(sc_sir15):
    return assemble_set(sc_sir15, SetKind.ADMISSIBLE)


@pytest.fixture(scope="session")
def mrpi_sir15(sc_sir15):
    return assemble_set(sc_sir15, SetKind.MRPI)


@pytest.fixture(scope="session")
def mrpi_sir_imp(sc_sir_imp):
    return assemble_set(sc_sir_imp, SetKind.MRPI)


@pytest.fixture(scope="session")
def adm_seir(sc_seir):
    return assemble_set(sc_seir, SetKind.ADMISSIBLE)


@pytest.fixture(scope="session")
def mrpi_seir(sc_seir):
    return assemble_set(sc_seir, SetKind.MRPI)


@pytest.fixture(scope="session")
def mrpi_seir40(sc_seir40):
    return assemble_set(sc_seir40, SetKind.MRPI)


@pytest.fixture(scope="session")
def mrpi_seir_imp(sc_seir_imp):
    return assemble_set(sc_seir_imp, SetKind.MRPI)


@pytest.fixture(scope="session")
def all_proper_sets(
    adm_sir,
    mrpi_sir,
    adm_sir15,
    mrpi_sir15,
    mrpi_sir_imp,
    adm_seir,
    mrpi_seir,
    mrpi_seir40,
    mrpi_seir_imp,
):
    """Every nontrivial computed set from the worked-example configurations."""
    return {
        "sir_adm_002": adm_sir,
        "sir_mrpi_002": mrpi_sir,
        "sir_adm_015": adm_sir15,
        "sir_mrpi_015": mrpi_sir15,
        "sir_imp_mrpi_020": mrpi_sir_imp,
        "seir_adm_030": adm_seir,
        "seir_mrpi_030": mrpi_seir,
        "seir_mrpi_040": mrpi_seir40,
        "seir_imp_mrpi_010": mrpi_seir_imp,
    }
