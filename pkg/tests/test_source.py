import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperbell.detection import pair_moments
from hyperbell.network import Device, compose, device_map, embed, identity
from hyperbell.source import (
    MOM_LABELS,
    POL_LABELS,
    CouplingParams,
    HyperBellParams,
    ParameterError,
    all_states,
    baseline_source,
    hyperbell_source,
    local_devices,
    params_for,
    parse_state,
)
from hyperbell.zpf import zpf_block

STATES = all_states()
IDS = [s.label for s in STATES]


def moment_between(system, c1, c2):
    G, _ = pair_moments(system)
    return G[system.fmap.output_index(c1), system.fmap.output_index(c2)]


def test_baseline_second_moments(coupling):
    src = baseline_source(coupling)
    assert moment_between(src, ("a1", "H"), ("b2", "H")) == pytest.approx(0.1)
    assert moment_between(src, ("b1", "V"), ("a2", "V")) == pytest.approx(0.1)
    assert abs(moment_between(src, ("a1", "H"), ("b1", "H"))) == 0
    assert abs(moment_between(src, ("a1", "H"), ("b2", "V"))) == 0
    _, N = pair_moments(src)
    excess = np.diag(N).real - 0.5
    assert np.allclose(excess, 0.1**2 / 2)


def test_sampled_moments_match(coupling):
    src = baseline_source(coupling)
    n = 200_000
    z = zpf_block(len(src.basis), 21, 0, n)
    F = src.fmap(z)
    i, j = src.fmap.output_index(("a1", "H")), src.fmap.output_index(("b2", "H"))
    prod = F[:, i] * F[:, j]
    err = np.std(prod) / np.sqrt(n)
    assert abs(prod.mean() - 0.1) < 5 * err
    other = F[:, i] * F[:, src.fmap.output_index(("a2", "H"))]
    assert abs(other.mean()) < 5 * np.std(other) / np.sqrt(n)
    intensity = np.abs(F[:, i]) ** 2
    assert abs(intensity.mean() - 0.5 - 0.005) < 5 * np.std(intensity) / np.sqrt(n)


def test_coupling_warning_and_polar():
    with pytest.warns(UserWarning):
        CouplingParams(0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        c = CouplingParams.polar(0.1, math.pi / 2)
    assert c.C == pytest.approx(0.1j)


def test_sixteen_distinct_labels():
    assert len(set(IDS)) == 16
    for s in STATES:
        assert parse_state(s.label) == s


@pytest.mark.parametrize(
    "pol,mom,expected",
    [
        ("Psi+", "psi+", (0.0, 0.0, "ab", 0.0, 0.0)),
        ("Phi-", "psi+", (-math.pi / 2, 0.0, "ab", 0.0, 0.0)),
        ("Psi+", "phi-", (0.0, 0.0, "ba", math.pi, 0.0)),
        ("Phi+", "psi-", (-math.pi / 2, math.pi, "ab", 0.0, math.pi)),
    ],
)
def test_params_for(pol, mom, expected):
    p = params_for(pol, mom)
    assert (p.beta, p.kappa, p.xy, p.phi1, p.phi2) == expected


def test_positive_beta_gives_same_class():
    assert HyperBellParams(beta=math.pi / 2).polarization_label == "Phi-"
    assert HyperBellParams(beta=math.pi / 2, kappa=math.pi).polarization_label == "Phi+"


@pytest.mark.parametrize("bad", ["Bogus", "Psi+", "Psi+:phi", "psi+:Psi+", "Chi+:psi+", ""])
def test_parse_errors(bad):
    with pytest.raises(ParameterError):
        parse_state(bad)


def test_param_validation():
    with pytest.raises(ParameterError):
        HyperBellParams(beta=0.3)
    with pytest.raises(ParameterError):
        HyperBellParams(kappa=math.pi / 2)
    with pytest.raises(ParameterError):
        HyperBellParams(xy="aa")


@pytest.mark.parametrize("state", STATES, ids=IDS)
def test_literal_fields_equal_device_chain(state, coupling):
    literal = hyperbell_source(coupling, state)
    chained = baseline_source(coupling).then(local_devices(state))
    assert chained.fmap.outputs == literal.fmap.outputs
    assert np.max(np.abs(literal.fmap.A - chained.fmap.A)) < 1e-14
    assert np.max(np.abs(literal.fmap.B - chained.fmap.B)) < 1e-14


@pytest.mark.parametrize("state", STATES, ids=IDS)
def test_photon_two_beams_untouched(state, coupling):
    base = baseline_source(coupling)
    sys_ = hyperbell_source(coupling, state)
    for ch in [("a2", "H"), ("a2", "V"), ("b2", "H"), ("b2", "V")]:
        k = sys_.fmap.output_index(ch)
        assert np.array_equal(sys_.fmap.A[k], base.fmap.A[k])
        assert np.array_equal(sys_.fmap.B[k], base.fmap.B[k])
    lf = local_devices(state)
    for k, ch in enumerate(lf.outputs):
        if ch[0].endswith("2"):
            assert np.allclose(lf.A[k], np.eye(8)[k])


@pytest.mark.parametrize("state", STATES, ids=IDS)
def test_correlation_pattern(state, coupling):
    sys_ = hyperbell_source(coupling, state)
    G, _ = pair_moments(sys_)
    side = np.array([int(c[0][-1]) for c in sys_.fmap.outputs])
    cross = np.abs(G[np.ix_(side == 1, side == 2)])
    same = np.concatenate([np.abs(G[np.ix_(side == s, side == s)]).ravel() for s in (1, 2)])
    assert np.sum(cross > 1e-14) == 4
    assert np.allclose(cross[cross > 1e-14], 0.1, atol=1e-14)
    assert np.max(same) < 1e-14


def channel_pairs(system, tol=1e-14):
    G, _ = pair_moments(system)
    out = system.fmap.outputs
    return {(out[i], out[j]) for i, j in zip(*np.nonzero(np.abs(G) > tol)) if out[i][0].endswith("1") and out[j][0].endswith("2")}


def test_psi_plus_pattern_is_opposite_polarizations(coupling):
    pairs = channel_pairs(hyperbell_source(coupling, params_for("Psi+", "psi+")))
    assert all(a[1] != b[1] for a, b in pairs)
    assert {(a[0], b[0]) for a, b in pairs} == {("a1", "b2"), ("b1", "a2")}


def test_phi_minus_pattern_is_equal_polarizations(coupling):
    pairs = channel_pairs(hyperbell_source(coupling, params_for("Phi-", "psi+")))
    assert all(a[1] == b[1] for a, b in pairs)


def test_path_swap_pattern(coupling):
    pairs = channel_pairs(hyperbell_source(coupling, params_for("Psi+", "phi+")))
    assert {(a[0], b[0]) for a, b in pairs} == {("b1", "b2"), ("a1", "a2")}


def test_retarder_is_periodic():
    ch = (("a1", "H"), ("a1", "V"))
    once = device_map(Device("WaveRetarder", ("a1",), ("a1",), math.pi))
    twice = compose(once, once)
    assert np.allclose(twice.A, identity(ch).A)


@settings(max_examples=30, deadline=None)
@given(beta=st.floats(-math.pi, math.pi), kappa=st.floats(-math.pi, math.pi))
def test_any_rotation_keeps_pair_moment_magnitude(beta, kappa):
    # the rotator accepts any angle; photon-1 unitaries preserve total cross correlation
    src = baseline_source(CouplingParams(0.1))
    channels = src.fmap.outputs
    f = identity(channels)
    for d in (Device("PolRotator", ("a1",), ("a1",), beta), Device("WaveRetarder", ("a1",), ("a1",), kappa)):
        f = compose(f, embed(device_map(d), channels))
    G, _ = pair_moments(src.then(f))
    assert np.sum(np.abs(G) ** 2) == pytest.approx(4 * 0.1**2 * 2, rel=1e-12)


def test_n1_source_layout():
    src = baseline_source(CouplingParams(), n_dof=1)
    assert [c[0] for c in src.fmap.outputs] == ["a1", "a1", "b2", "b2"]
    with pytest.raises(ParameterError):
        baseline_source(CouplingParams(), n_dof=3)


def test_labels_cover_grid():
    assert {(s.polarization_label, s.momentum_label) for s in STATES} == {
        (p, m) for p in POL_LABELS for m in MOM_LABELS
    }
