import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperbell.detection import CoincidenceTable, analytic_joint, mc_joint
from hyperbell.experiments import (
    AMBIGUOUS,
    ExperimentError,
    ExperimentSpec,
    SignatureTable,
    admissible_states,
    build_momentum_bsm,
    build_system,
    classify,
    run_experiment,
    signature_collisions,
    signature_table,
    sweep_matrix,
)
from hyperbell.source import CouplingParams, all_states, params_for, parse_state


def pairs(text):
    """'A1+A2+ B1-B2-' -> {('A1+','A2+'), ('B1-','B2-')}"""
    out = set()
    for tok in text.split():
        out.add((tok[:3], tok[3:]))
    return frozenset(out)


POL_EXPECTED = {
    "Psi+": pairs("A1+A2+ B1+B2+ A1-A2- B1-B2-"),
    "Psi-": pairs("A1+A2- B1+B2- A1-A2+ B1-B2+"),
    "Phi-": pairs("A1+B2+ B1+A2+ A1-B2- B1-A2-"),
    "Phi+": pairs("A1+B2- B1+A2- A1-B2+ B1-A2+"),
}
MOM_EXPECTED = {
    "psi+": pairs("A1HA2H B1HB2H A1VA2V B1VB2V"),
    "psi-": pairs("A1HB2H B1HA2H A1VB2V B1VA2V"),
    "phi-": pairs("A1HA2V A1VA2H B1HB2V B1VB2H"),
    "phi+": pairs("A1HB2V A1VB2H B1HA2V B1VA2H"),
}


@pytest.mark.parametrize("setup,expected", [("pol-bsm", POL_EXPECTED), ("mom-bsm", MOM_EXPECTED)])
def test_signature_tables(setup, expected):
    table = signature_table(setup)
    assert dict(table.signatures) == expected


@pytest.mark.parametrize("setup", ["pol-bsm", "mom-bsm"])
def test_signatures_partition_cross_pairs(setup):
    table = signature_table(setup)
    universe = analytic_joint(build_system(setup, admissible_states(setup)[0], CouplingParams())).cross_pairs()
    assert len(universe) == 16
    assert table.is_partition(universe)
    assert table.disjoint_classes() == 4


@pytest.mark.parametrize("setup", ["pol-bsm", "mom-bsm"])
def test_threshold_robustness(setup):
    assert signature_table(setup, 1e-10) == signature_table(setup, 1e-14)


@pytest.mark.parametrize("setup", ["pol-bsm", "mom-bsm"])
def test_quartet_weights_equal_and_same_side_vanishes(setup):
    for st_ in admissible_states(setup):
        raw = analytic_joint(build_system(setup, st_, CouplingParams()))
        norm = raw.normalized()
        for p in norm.nonzero():
            assert norm[p] == pytest.approx(0.25, abs=1e-12)
        for (a, b), v in raw.joint.items():
            if raw.sides[a] == raw.sides[b]:
                assert abs(v) < 1e-14


@pytest.mark.parametrize("mom", ["psi+", "psi-", "phi+", "phi-"])
def test_momentum_raw_values_follow_phase_formula(mom):
    C = 0.1
    st_ = params_for("Psi+", mom)
    raw = analytic_joint(build_system("mom-bsm", st_, CouplingParams(C)))
    e1, e2 = np.exp(1j * st_.phi1), np.exp(1j * st_.phi2)
    plus = C**2 * abs(e1 + e2) ** 2 / 4
    minus = C**2 * abs(e1 - e2) ** 2 / 4
    if st_.xy == "ab":
        groups = {plus: MOM_EXPECTED["psi+"], minus: MOM_EXPECTED["psi-"]}
    else:
        groups = {plus: MOM_EXPECTED["phi+"], minus: MOM_EXPECTED["phi-"]}
    for value, quartet in groups.items():
        for p in quartet:
            assert raw[p] == pytest.approx(value, rel=1e-12, abs=1e-16)


def test_hwp_port_follows_path_assignment():
    ab = build_momentum_bsm("a", "b").steps[0]
    ba = build_momentum_bsm("b", "a").steps[0]
    assert ab.kind == ba.kind == "HWP45"
    assert ab.inputs == ba.inputs == ("b1",)
    with pytest.raises(ExperimentError):
        build_momentum_bsm("a", "a")


@pytest.mark.parametrize("setup", ["pol-bsm", "mom-bsm"])
def test_classify_analytic(setup):
    for st_ in admissible_states(setup):
        t = analytic_joint(build_system(setup, st_, CouplingParams()))
        expected = st_.polarization_label if setup == "pol-bsm" else st_.momentum_label
        assert classify(t, setup) == expected


def test_classify_uniform_table_is_ambiguous():
    base = analytic_joint(build_system("pol-bsm", parse_state("Psi+:psi+"), CouplingParams()))
    uniform = CoincidenceTable(base.detectors, base.sides, {p: 1.0 for p in base.cross_pairs()}, {})
    assert classify(uniform, "pol-bsm") == AMBIGUOUS


def test_classify_zero_table_is_ambiguous():
    t = analytic_joint(build_system("pol-bsm", parse_state("Psi+:psi+"), CouplingParams(0.0)))
    assert classify(t, "pol-bsm") == AMBIGUOUS


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=16, max_size=16).filter(lambda v: sum(v) > 0.1))
def test_classify_random_table(values):
    base = analytic_joint(build_system("mom-bsm", parse_state("Psi+:psi+"), CouplingParams()))
    cross = base.cross_pairs()
    table = CoincidenceTable(base.detectors, base.sides, dict(zip(cross, values)), {})
    label = classify(table, "mom-bsm")
    sigs = signature_table("mom-bsm").signatures
    total = sum(values)
    if label != AMBIGUOUS:
        off = sum(v for p, v in zip(cross, values) if p not in sigs[label])
        assert off <= 0.01 * total


def test_classify_mc_table():
    st_ = parse_state("Psi+:phi-")
    t = mc_joint(build_system("mom-bsm", st_, CouplingParams()), samples=20_000, seed=5)
    assert classify(t, "mom-bsm") == "phi-"


def test_ancilla_is_enforced():
    with pytest.raises(ExperimentError):
        ExperimentSpec("pol-bsm", parse_state("Psi+:phi+"))
    with pytest.raises(ExperimentError):
        ExperimentSpec("mom-bsm", parse_state("Phi-:psi+"))
    ExperimentSpec("pol-bsm", parse_state("Psi+:phi+"), override_ancilla=True)


def test_wrong_ancilla_collides_with_other_class():
    st_ = parse_state("Psi+:phi+")
    spec = ExperimentSpec("pol-bsm", st_, override_ancilla=True)
    observed = run_experiment(spec).normalized().nonzero()
    table = signature_table("pol-bsm")
    assert observed == table.signatures["Phi-"]
    assert classify(run_experiment(spec), "pol-bsm") == "Phi-"
    assert signature_collisions("pol-bsm")


def test_pooled_signatures_collide_for_all_states():
    assert len(signature_collisions("mom-bsm")) == 6


def test_sweep_matrix_shape():
    cross, rows = sweep_matrix("pol-bsm", all_states())
    assert len(cross) == 16 and len(rows) == 16
    for _, r in rows:
        assert r.sum() == pytest.approx(1.0)


def test_spec_validation():
    with pytest.raises(ExperimentError):
        ExperimentSpec("n1-demo", parse_state("Psi+:psi+"))
    with pytest.raises(ExperimentError):
        ExperimentSpec("pol-bsm", parse_state("Psi+:psi+"), engine="exact")
    with pytest.raises(ExperimentError):
        ExperimentSpec("pol-bsm", parse_state("Psi+:psi+"), engine="montecarlo", samples=0)


def test_signature_table_disjoint_count_handles_overlap():
    a, b = frozenset({1, 2}), frozenset({2, 3})
    t = SignatureTable("x", {"p": a, "q": b, "r": frozenset({9})})
    assert t.disjoint_classes() == 1
    assert not t.is_partition({1, 2, 3, 9})
