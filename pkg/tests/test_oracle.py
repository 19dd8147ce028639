import numpy as np
import pytest

from conftest import assert_unitary
from hyperbell.detection import analytic_joint
from hyperbell.experiments import build_system
from hyperbell.oracle import make_state, oracle_coincidences, setup_matrix, setup_unitaries, state_vector
from hyperbell.source import CouplingParams, all_states, params_for

STATES = all_states()


@pytest.mark.parametrize("setup", ["pol-bsm", "mom-bsm"])
def test_oracle_matrices_unitary(setup):
    assert_unitary(setup_matrix(setup))
    U1, U2, _, _ = setup_unitaries(setup)
    assert_unitary(U1) and assert_unitary(U2)


@pytest.mark.parametrize("state", STATES, ids=[s.label for s in STATES])
def test_states_normalized_and_orthogonal(state):
    v = state_vector(state)
    assert np.vdot(v, v).real == pytest.approx(1.0)
    for other in STATES:
        if other != state:
            assert abs(np.vdot(state_vector(other), v)) < 1e-15


def test_psi_plus_psi_plus_amplitudes():
    psi = make_state(params_for("Psi+", "psi+"))
    # (|HV> + |VH>)(|ab> + |ba>)/2
    assert psi[0, 3] == pytest.approx(0.5)  # aH, bV
    assert psi[1, 2] == pytest.approx(0.5)  # aV, bH
    assert psi[0, 0] == 0


@pytest.mark.parametrize("setup", ["pol-bsm", "mom-bsm"])
@pytest.mark.parametrize("state", STATES, ids=[s.label for s in STATES])
def test_oracle_matches_wigner(setup, state):
    oracle = oracle_coincidences(state, setup)
    assert sum(oracle.values()) == pytest.approx(1.0)
    wigner = analytic_joint(build_system(setup, state, CouplingParams(0.1))).normalized()
    for pair, p in oracle.items():
        assert abs(wigner[pair] - p) < 1e-10


def test_unknown_setup():
    with pytest.raises(ValueError):
        setup_unitaries("n1-demo")
