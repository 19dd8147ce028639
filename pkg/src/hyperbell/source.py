"""Two-crystal down-conversion source and the sixteen hyper-Bell states.

Each source output is a vacuum amplitude plus ``C`` times the conjugate of
its partner's vacuum amplitude:

    a1 beam:  H = a1H + C b2H*,   V = a1V + C b2V*
    b2 beam:  H = b2H + C a1H*,   V = b2V + C a1V*
    b1 beam:  H = b1H + C a2H*,   V = b1V + C a2V*
    a2 beam:  H = a2H + C b1H*,   V = a2V + C b1V*

so that <F_a1,H F_b2,H> = C and the excess autocorrelation is |C|^2 / 2.
Only the photon-1 beams (a1, b1) are manipulated to select a state.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .network import Device, FieldMap, System, compose, embed, identity, device_map
from .zpf import POLARIZATIONS, source_basis

COUPLING_WARN = 0.2

POL_LABELS = ("Psi+", "Psi-", "Phi+", "Phi-")
MOM_LABELS = ("psi+", "psi-", "phi+", "phi-")


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class CouplingParams:
    """Effective coupling ``C`` (pump strength times pair correlation at zero delay)."""

    C: complex = 0.1

    def __post_init__(self):
        object.__setattr__(self, "C", complex(self.C))
        if abs(self.C) > COUPLING_WARN:
            warnings.warn(
                f"|C| = {abs(self.C):.3g} exceeds {COUPLING_WARN}; "
                "first-order truncation of the source becomes inaccurate",
                stacklevel=2,
            )

    @classmethod
    def polar(cls, magnitude: float, phase: float = 0.0) -> "CouplingParams":
        return cls(magnitude * complex(math.cos(phase), math.sin(phase)))


def _snap(value: float, allowed: tuple[float, ...], what: str) -> float:
    for a in allowed:
        if math.isclose(value, a, abs_tol=1e-9):
            return a
    raise ParameterError(f"{what}={value!r} not in {allowed}")


@dataclass(frozen=True)
class HyperBellParams:
    """Local settings on photon 1 that select one of the sixteen states.

    ``beta`` is the polarization rotation, ``kappa`` the retardation of the V
    component, ``xy`` whether the source's a1 beam leaves on path a ("ab")
    or b ("ba"), and ``phi1``/``phi2`` the phases of the two photon-1 beams.
    """

    beta: float = 0.0
    kappa: float = 0.0
    xy: str = "ab"
    phi1: float = 0.0
    phi2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta", _snap(self.beta, (0.0, -math.pi / 2, math.pi / 2), "beta"))
        object.__setattr__(self, "kappa", _snap(self.kappa, (0.0, math.pi), "kappa"))
        object.__setattr__(self, "phi1", _snap(self.phi1, (0.0, math.pi), "phi1"))
        object.__setattr__(self, "phi2", _snap(self.phi2, (0.0, math.pi), "phi2"))
        if self.xy not in ("ab", "ba"):
            raise ParameterError(f"xy must be 'ab' or 'ba', got {self.xy!r}")

    @property
    def polarization_label(self) -> str:
        if self.beta == 0.0:
            return "Psi+" if self.kappa == 0.0 else "Psi-"
        # beta = -pi/2: (H,V) -> (F_p, -e^{ik} F_s); beta = +pi/2 flips both signs
        return "Phi-" if self.kappa == 0.0 else "Phi+"

    @property
    def momentum_label(self) -> str:
        same = self.phi1 == self.phi2
        if self.xy == "ab":
            return "psi+" if same else "psi-"
        return "phi+" if same else "phi-"

    @property
    def label(self) -> str:
        return f"{self.polarization_label}:{self.momentum_label}"


_POL_SETTINGS = {
    "Psi+": (0.0, 0.0),
    "Psi-": (0.0, math.pi),
    "Phi-": (-math.pi / 2, 0.0),
    "Phi+": (-math.pi / 2, math.pi),
}
_MOM_SETTINGS = {
    "psi+": ("ab", 0.0, 0.0),
    "psi-": ("ab", 0.0, math.pi),
    "phi+": ("ba", 0.0, 0.0),
    "phi-": ("ba", math.pi, 0.0),
}
_STATE_RE = re.compile(r"^\s*(Psi|Phi)([+-])\s*:\s*(psi|phi)([+-])\s*$")


def params_for(pol: str, mom: str) -> HyperBellParams:
    try:
        beta, kappa = _POL_SETTINGS[pol]
        xy, phi1, phi2 = _MOM_SETTINGS[mom]
    except KeyError as exc:
        raise ParameterError(f"unknown Bell label {exc}") from None
    return HyperBellParams(beta, kappa, xy, phi1, phi2)


def parse_state(text: str) -> HyperBellParams:
    """Parse a selector such as ``"Phi+:psi-"``."""
    m = _STATE_RE.match(text)
    if not m:
        raise ParameterError(
            f"cannot parse state {text!r}; expected e.g. 'Psi+:psi+' "
            "(polarization Psi/Phi, momentum psi/phi, each with + or -)"
        )
    return params_for(m.group(1) + m.group(2), m.group(3) + m.group(4))


def all_states() -> list[HyperBellParams]:
    return [params_for(p, m) for p in POL_LABELS for m in MOM_LABELS]


def _source_outputs(paths):
    return tuple((p, pol) for p in paths for pol in POLARIZATIONS)


def baseline_source(coupling: CouplingParams, n_dof: int = 2) -> System:
    """The unmanipulated source.

    ``n_dof=2`` gives the four beams a1, b1, a2, b2 over eight mode sets;
    ``n_dof=1`` keeps only the a1/b2 pair (polarization entanglement alone).
    """
    if n_dof == 2:
        paths = ("a1", "b1", "a2", "b2")
        partner = {"a1": "b2", "b2": "a1", "b1": "a2", "a2": "b1"}
    elif n_dof == 1:
        paths = ("a1", "b2")
        partner = {"a1": "b2", "b2": "a1"}
    else:
        raise ParameterError("field construction is provided for n_dof in {1, 2}")
    basis = source_basis(paths)
    outputs = _source_outputs(paths)
    n = len(basis)
    A = np.eye(n, dtype=complex)
    B = np.zeros((n, n), dtype=complex)
    for row, (path, pol) in enumerate(outputs):
        B[row, basis.index((partner[path], pol))] = coupling.C
    return System(basis, FieldMap(A, B, basis.modes, outputs), name=f"source-n{n_dof}")


def hyperbell_source(coupling: CouplingParams, params: HyperBellParams) -> System:
    """Source beams for the selected state, written out component by component.

    Photon-1 beam fed by source beam ``F`` (components p=H, s=V) with phase
    ``phi``:

        H = (F_s cos(beta) - F_p sin(beta)) e^{i phi}
        V = e^{i kappa} (F_s sin(beta) + F_p cos(beta)) e^{i phi}

    The beam from the a1 crystal output leaves on path x, the one from b1
    on path y; photon-2 beams are untouched.
    """
    base = baseline_source(coupling)
    fmap = base.fmap
    A0, B0 = fmap.A, fmap.B
    row = {c: k for k, c in enumerate(fmap.outputs)}
    A = np.array(A0)
    B = np.array(B0)
    c, s = math.cos(params.beta), math.sin(params.beta)
    ek = complex(math.cos(params.kappa), math.sin(params.kappa))
    x, y = ("a1", "b1") if params.xy == "ab" else ("b1", "a1")
    for src, dst, phi in (("a1", x, params.phi1), ("b1", y, params.phi2)):
        ep = complex(math.cos(phi), math.sin(phi))
        p, q = row[(src, "H")], row[(src, "V")]
        h_out, v_out = row[(dst, "H")], row[(dst, "V")]
        for M, M0 in ((A, A0), (B, B0)):
            M[h_out] = (M0[q] * c - M0[p] * s) * ep
            M[v_out] = ek * (M0[q] * s + M0[p] * c) * ep
    return System(base.basis, FieldMap(A, B, fmap.inputs, fmap.outputs), name=params.label)


def local_device_chain(params: HyperBellParams) -> list[Device]:
    """Photon-1 devices realising ``params``: rotator, retarder, phases, path swap."""
    steps = []
    for port in ("a1", "b1"):
        steps.append(Device("PolRotator", (port,), (port,), params.beta))
        steps.append(Device("WaveRetarder", (port,), (port,), params.kappa))
    steps.append(Device("PhaseShift", ("a1",), ("a1",), params.phi1))
    steps.append(Device("PhaseShift", ("b1",), ("b1",), params.phi2))
    if params.xy == "ba":
        steps.append(Device("PathSwap", ("a1", "b1"), ("a1", "b1")))
    return steps


def local_devices(params: HyperBellParams) -> FieldMap:
    """The photon-1 device chain as one map over the eight source beam channels."""
    channels = _source_outputs(("a1", "b1", "a2", "b2"))
    fmap = identity(channels)
    for d in local_device_chain(params):
        fmap = compose(fmap, embed(device_map(d), fmap.outputs))
    return fmap
