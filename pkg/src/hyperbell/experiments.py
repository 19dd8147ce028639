"""The two complete Bell-state analyzers, their signature tables and a classifier.

``pol-bsm`` distinguishes the polarization Bell states with the momentum
fixed to psi+: a CNOT polarizing beam splitter per photon, then a +-45 deg
polarization analyzer on each of the four paths.

``mom-bsm`` distinguishes the momentum Bell states with the polarization
fixed to Psi+: a half-wave plate on each b path, a balanced beam splitter
per photon, then an H/V analyzer on each of the four outputs.

Every analyzer PBS has one idle input through which vacuum enters; the CNOT
beam splitters, wave plates and balanced beam splitters have none.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping

import numpy as np

from .detection import CoincidenceTable, analytic_joint, mc_joint
from .network import Detector, Device, Network, NetworkError, System
from .source import (
    MOM_LABELS,
    POL_LABELS,
    CouplingParams,
    HyperBellParams,
    all_states,
    baseline_source,
    hyperbell_source,
    params_for,
)

SETUPS = ("pol-bsm", "mom-bsm")
EXPERIMENTS = ("pol-bsm", "mom-bsm", "n1-demo")
ENGINES = ("analytic", "montecarlo", "oracle")
AMBIGUOUS = "ambiguous"


class ExperimentError(ValueError):
    pass


def _detectors(names, side):
    return tuple(Detector(n, side) for n in names)


def build_polarization_bsm() -> Network:
    steps = (
        Device("CnotPbs", ("a1", "b1"), ("a1", "b1"), side=1),
        Device("CnotPbs", ("a2", "b2"), ("a2", "b2"), side=2),
    )
    detectors = ()
    for path, X, side in (("a1", "A1", 1), ("b1", "B1", 1), ("a2", "A2", 2), ("b2", "B2", 2)):
        # reflects the +45 deg component to X+, transmits -45 deg to X-
        steps += (Device("PBS", (path, None), (f"{X}+", f"{X}-"), math.pi / 4, side),)
        detectors += _detectors((f"{X}+", f"{X}-"), side)
    return Network("pol-bsm", steps, detectors)


def build_momentum_bsm(x: str = "a", y: str = "b") -> Network:
    """Analyzer for momentum states; ``(x, y)`` says which photon-1 beam needs the HWP.

    For (a, b) the plate acts on the y beam, for (b, a) on the x beam; in
    both cases that beam travels along b1.
    """
    if (x, y) not in (("a", "b"), ("b", "a")):
        raise ExperimentError(f"(x, y) must be (a, b) or (b, a), got {(x, y)}")
    plate_on = {"ab": "y", "ba": "x"}[x + y]
    port = {"x": f"{x}1", "y": f"{y}1"}[plate_on]
    steps = (
        Device("HWP45", (port,), (port,), side=1),
        Device("HWP45", ("b2",), ("b2",), side=2),
        Device("BS50", ("a1", "b1"), ("A1", "B1"), side=1),
        Device("BS50", ("a2", "b2"), ("A2", "B2"), side=2),
    )
    detectors = ()
    for beam, side in (("A1", 1), ("B1", 1), ("A2", 2), ("B2", 2)):
        steps += (Device("PBS", (beam, None), (f"{beam}H", f"{beam}V"), 0.0, side),)
        detectors += _detectors((f"{beam}H", f"{beam}V"), side)
    return Network("mom-bsm", steps, detectors, meta={"xy": x + y})


def build_n1_demo() -> Network:
    """Polarization-only pair (beams a1, b2), each beam on an H/V analyzer."""
    steps = (
        Device("PBS", ("a1", None), ("A1H", "A1V"), 0.0, 1),
        Device("PBS", ("b2", None), ("B2H", "B2V"), 0.0, 2),
    )
    detectors = _detectors(("A1H", "A1V"), 1) + _detectors(("B2H", "B2V"), 2)
    return Network("n1-demo", steps, detectors, n_dof=1)


def network_for(experiment: str, state: HyperBellParams | None = None) -> Network:
    if experiment == "pol-bsm":
        return build_polarization_bsm()
    if experiment == "mom-bsm":
        xy = state.xy if state is not None else "ab"
        return build_momentum_bsm(xy[0], xy[1])
    if experiment == "n1-demo":
        return build_n1_demo()
    raise ExperimentError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")


def build_system(experiment: str, state: HyperBellParams, coupling: CouplingParams) -> System:
    net = network_for(experiment, state)
    if experiment == "n1-demo":
        return net.build(baseline_source(coupling, n_dof=1))
    return net.build(hyperbell_source(coupling, state))


def class_label(setup: str, state: HyperBellParams) -> str:
    return state.polarization_label if setup == "pol-bsm" else state.momentum_label


def admissible_states(setup: str) -> list[HyperBellParams]:
    if setup == "pol-bsm":
        return [params_for(p, "psi+") for p in POL_LABELS]
    if setup == "mom-bsm":
        return [params_for("Psi+", m) for m in MOM_LABELS]
    raise ExperimentError(f"unknown setup {setup!r}")


def check_ancilla(setup: str, state: HyperBellParams):
    if setup == "pol-bsm" and state.momentum_label != "psi+":
        raise ExperimentError(
            f"pol-bsm needs momentum fixed at psi+, got {state.label} (use the override flag)"
        )
    if setup == "mom-bsm" and state.polarization_label != "Psi+":
        raise ExperimentError(
            f"mom-bsm needs polarization fixed at Psi+, got {state.label} (use the override flag)"
        )


@dataclass(frozen=True)
class ExperimentSpec:
    setup: str
    state: HyperBellParams
    engine: str = "analytic"
    samples: int = 100_000
    seed: int = 0
    gains: Mapping[str, float] = field(default_factory=dict)
    coupling: CouplingParams = field(default_factory=CouplingParams)
    override_ancilla: bool = False

    def __post_init__(self):
        if self.setup not in SETUPS:
            raise ExperimentError(f"unknown setup {self.setup!r}; choose from {SETUPS}")
        if self.engine not in ENGINES:
            raise ExperimentError(f"unknown engine {self.engine!r}; choose from {ENGINES}")
        if self.engine == "montecarlo" and self.samples < 1:
            raise ExperimentError("samples must be >= 1")
        if not self.override_ancilla:
            check_ancilla(self.setup, self.state)


def run_experiment(spec: ExperimentSpec) -> CoincidenceTable:
    if spec.engine == "oracle":
        from .oracle import oracle_table

        return oracle_table(spec.state, spec.setup)
    system = build_system(spec.setup, spec.state, spec.coupling)
    if spec.engine == "analytic":
        return analytic_joint(system, spec.gains)
    return mc_joint(system, spec.gains, samples=spec.samples, seed=spec.seed)


@dataclass(frozen=True)
class SignatureTable:
    setup: str
    signatures: Mapping[str, frozenset]

    def is_partition(self, universe) -> bool:
        sets = list(self.signatures.values())
        union = frozenset().union(*sets)
        disjoint = all(not (a & b) for a, b in combinations(sets, 2))
        return disjoint and union == frozenset(universe)

    def disjoint_classes(self) -> int:
        """Number of states whose signature overlaps no other state's."""
        items = list(self.signatures.items())
        return sum(
            1
            for k, (_, s) in enumerate(items)
            if s and all(not (s & t) for j, (_, t) in enumerate(items) if j != k)
        )


def signature_table(
    setup: str,
    threshold: float = 1e-12,
    coupling: CouplingParams | None = None,
    states=None,
) -> SignatureTable:
    """Detector pairs with nonzero normalized probability, per admissible state."""
    coupling = coupling or CouplingParams()
    states = admissible_states(setup) if states is None else states
    sigs = {}
    for st in states:
        table = analytic_joint(build_system(setup, st, coupling)).normalized()
        sigs[class_label(setup, st)] = table.nonzero(threshold)
    return SignatureTable(setup, sigs)


def classify(
    table: CoincidenceTable,
    setup: str,
    eps: float = 0.01,
    signatures: SignatureTable | None = None,
    n_sigma: float = 5.0,
) -> str:
    """Label whose signature carries all but a small share of the coincidences.

    Without error bars the allowance is ``eps`` of the total; with error bars
    (Monte Carlo) it is ``n_sigma`` combined standard errors of the
    off-signature entries.  Anything other than a unique match is ambiguous.
    """
    signatures = signatures or signature_table(setup)
    pairs = table.cross_pairs()
    total = sum(table[p] for p in pairs)
    if not total > 0:
        return AMBIGUOUS
    matches = []
    for label, quartet in signatures.signatures.items():
        off = [p for p in pairs if p not in quartet]
        off_mass = sum(table[p] for p in off)
        if table.stderr is None:
            allowed = eps * total
        else:
            allowed = n_sigma * math.sqrt(sum(table.error(p) ** 2 for p in off))
        if abs(off_mass) <= allowed:
            matches.append(label)
    return matches[0] if len(matches) == 1 else AMBIGUOUS


def signature_collisions(setup: str, coupling: CouplingParams | None = None):
    """Overlaps between classes when every ancilla state is allowed in.

    Returns ``(label_a, label_b, shared_pairs)`` for each pair of distinct
    class labels whose pooled signatures intersect.
    """
    states = all_states()
    table = {}
    coupling = coupling or CouplingParams()
    for st in states:
        sig = analytic_joint(build_system(setup, st, coupling)).normalized().nonzero()
        table.setdefault(class_label(setup, st), set()).update(sig)
    out = []
    for a, b in combinations(sorted(table), 2):
        shared = table[a] & table[b]
        if shared:
            out.append((a, b, sorted(shared)))
    return out


def sweep_matrix(setup: str, states, coupling: CouplingParams | None = None):
    """Normalized cross-side probabilities, one row per state."""
    coupling = coupling or CouplingParams()
    rows = []
    pairs = None
    for st in states:
        t = analytic_joint(build_system(setup, st, coupling)).normalized()
        pairs = pairs or t.cross_pairs()
        rows.append((st.label, np.array([t[p] for p in pairs])))
    return pairs, rows


def n1_system(pol: str, coupling: CouplingParams | None = None) -> System:
    """The n=1 demo with photon 1's polarization set to one of the four Bell labels."""
    coupling = coupling or CouplingParams()
    settings = params_for(pol, "psi+")
    src = baseline_source(coupling, n_dof=1)
    src = src.apply(Device("PolRotator", ("a1",), ("a1",), settings.beta))
    src = src.apply(Device("WaveRetarder", ("a1",), ("a1",), settings.kappa))
    return build_n1_demo().build(src)


def signature_classes(experiment: str, coupling: CouplingParams | None = None) -> list[tuple[tuple[str, ...], frozenset]]:
    """Group admissible states by identical signature.

    Returns ``(labels, signature)`` per group, in first-seen order.
    """
    coupling = coupling or CouplingParams()
    if experiment == "n1-demo":
        sigs = [(p, analytic_joint(n1_system(p, coupling)).normalized().nonzero()) for p in POL_LABELS]
    else:
        table = signature_table(experiment, coupling=coupling)
        sigs = list(table.signatures.items())
    groups: dict[frozenset, list[str]] = {}
    for label, sig in sigs:
        groups.setdefault(sig, []).append(label)
    return [(tuple(labels), sig) for sig, labels in groups.items()]


def achieved_classes(experiment: str, coupling: CouplingParams | None = None) -> int:
    """Number of state groups whose signature shares no pair with any other group."""
    groups = signature_classes(experiment, coupling)
    return sum(
        1
        for k, (_, s) in enumerate(groups)
        if s and all(not (s & t) for j, (_, t) in enumerate(groups) if j != k)
    )
