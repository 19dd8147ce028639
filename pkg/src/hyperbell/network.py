"""Linear (Bogoliubov) field maps, optical devices and network composition.

A :class:`FieldMap` sends input amplitudes ``z`` to outputs ``d = A z + B z*``.
Channels on either side are labelled ``(port, pol)``.  Passive devices have
``B = 0`` and a unitary ``A``; only the source carries conjugate couplings.

Devices follow one phase convention throughout: a reflected amplitude picks
up a factor ``i`` at polarizing and non-polarizing beam splitters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .zpf import POLARIZATIONS, ModeBasis, ModeId


class NetworkError(ValueError):
    """Bad wiring, composition mismatch or malformed network description."""


Channel = tuple  # (port, pol)


def _channels(ports: Iterable[str]) -> tuple[Channel, ...]:
    return tuple((p, pol) for p in ports for pol in POLARIZATIONS)


@dataclass(frozen=True, eq=False)
class FieldMap:
    A: np.ndarray
    B: np.ndarray
    inputs: tuple
    outputs: tuple

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        B = np.asarray(self.B, dtype=complex)
        if A.shape != B.shape:
            raise NetworkError(f"A{A.shape} and B{B.shape} differ in shape")
        if A.shape != (len(self.outputs), len(self.inputs)):
            raise NetworkError("matrix shape does not match channel labels")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "inputs", tuple(tuple(c) for c in self.inputs))
        object.__setattr__(self, "outputs", tuple(tuple(c) for c in self.outputs))

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    @property
    def is_passive(self) -> bool:
        return not np.any(self.B)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        """Evaluate on one sample (n_in,) or a batch (n_samples, n_in)."""
        z = np.asarray(z)
        return z @ self.A.T + np.conj(z) @ self.B.T

    def output_index(self, channel) -> int:
        try:
            return self.outputs.index(tuple(channel))
        except ValueError:
            raise NetworkError(f"no output channel {channel!r}") from None

    def relabel(self, outputs: Sequence) -> "FieldMap":
        return FieldMap(self.A, self.B, self.inputs, tuple(outputs))


def identity(channels: Sequence) -> FieldMap:
    n = len(channels)
    return FieldMap(np.eye(n), np.zeros((n, n)), tuple(channels), tuple(channels))


def compose(first: FieldMap, second: FieldMap) -> FieldMap:
    """Map that applies ``first`` and then ``second``.

    ``second.inputs`` must be a permutation of ``first.outputs``.
    """
    if sorted(second.inputs) != sorted(first.outputs) or len(set(first.outputs)) != len(first.outputs):
        raise NetworkError("second map's inputs do not match first map's outputs")
    order = [first.outputs.index(c) for c in second.inputs]
    A1, B1 = first.A[order], first.B[order]
    A2, B2 = second.A, second.B
    A = A2 @ A1 + B2 @ np.conj(B1)
    B = A2 @ B1 + B2 @ np.conj(A1)
    return FieldMap(A, B, first.inputs, second.outputs)


def embed(block: FieldMap, channels: Sequence) -> FieldMap:
    """Extend a square device block to act as identity on the other ``channels``.

    Device outputs take the positions of the device inputs they replace.
    """
    channels = tuple(tuple(c) for c in channels)
    if len(block.inputs) != len(block.outputs):
        raise NetworkError("only square device blocks can be embedded")
    try:
        pos = [channels.index(c) for c in block.inputs]
    except ValueError as exc:
        raise NetworkError(f"device input not available: {exc}") from None
    n = len(channels)
    A = np.eye(n, dtype=complex)
    B = np.zeros((n, n), dtype=complex)
    outputs = list(channels)
    A[pos, :] = 0
    for r, p in enumerate(pos):
        A[p, pos] = block.A[r]
        B[p, pos] = block.B[r]
        outputs[p] = block.outputs[r]
    if len(set(outputs)) != n:
        raise NetworkError("device outputs collide with existing channels")
    return FieldMap(A, B, channels, tuple(outputs))


# --- devices -----------------------------------------------------------------

DEVICE_KINDS = {
    # kind: number of ports
    "PBS": 2,
    "CnotPbs": 2,
    "BS50": 2,
    "PathSwap": 2,
    "HWP45": 1,
    "PolRotator": 1,
    "WaveRetarder": 1,
    "PhaseShift": 1,
}
_OPEN_PORT_KINDS = {"PBS", "BS50"}


@dataclass(frozen=True)
class Device:
    """An optical element wired between named beam ports.

    ``inputs`` may contain ``None`` for an open (idle) port; such ports have
    to be filled with :func:`inject_idle` before the device can act.
    ``angle`` is the polarization axis of a PBS, the rotation of a
    PolRotator, the retardation of a WaveRetarder or the phase of a
    PhaseShift.  ``side`` tags where vacuum injected here enters.
    """

    kind: str
    inputs: tuple
    outputs: tuple
    angle: float = 0.0
    side: int | None = None

    def __post_init__(self):
        if self.kind not in DEVICE_KINDS:
            raise NetworkError(f"unknown device kind {self.kind!r}")
        n = DEVICE_KINDS[self.kind]
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if len(self.inputs) != n or len(self.outputs) != n:
            raise NetworkError(f"{self.kind} needs {n} input and {n} output ports")
        if any(p is None for p in self.outputs):
            raise NetworkError("output ports must be named")
        if None in self.inputs and self.kind not in _OPEN_PORT_KINDS:
            raise NetworkError(f"{self.kind} has no idle port")
        if self.kind == "CnotPbs" and None in self.inputs:
            raise NetworkError("CnotPbs takes signal on both inputs")

    @property
    def open_ports(self) -> tuple[int, ...]:
        return tuple(k for k, p in enumerate(self.inputs) if p is None)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "angle": self.angle,
            "side": self.side,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Device":
        return cls(
            d["kind"],
            tuple(d["inputs"]),
            tuple(d["outputs"]),
            float(d.get("angle", 0.0)),
            d.get("side"),
        )


def _pbs_block(theta: float) -> np.ndarray:
    u = np.array([np.cos(theta), np.sin(theta)])
    refl = np.outer(u, u)
    trans = np.eye(2) - refl
    # out0 = i R in0 + T in1 ; out1 = T in0 + i R in1
    return np.block([[1j * refl, trans], [trans, 1j * refl]])


def device_block(kind: str, angle: float = 0.0) -> np.ndarray:
    """Unitary transfer matrix of a device on its (port, H/V) channels."""
    if kind in ("PBS", "CnotPbs"):
        return _pbs_block(angle if kind == "PBS" else 0.0)
    if kind == "BS50":
        eye = np.eye(2)
        return np.block([[1j * eye, eye], [eye, 1j * eye]]) / np.sqrt(2)
    if kind == "PathSwap":
        eye, zero = np.eye(2), np.zeros((2, 2))
        return np.block([[zero, eye], [eye, zero]]).astype(complex)
    if kind == "HWP45":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind == "PolRotator":
        c, s = np.cos(angle), np.sin(angle)
        # H' = V cos - H sin ; V' = V sin + H cos
        return np.array([[-s, c], [c, s]], dtype=complex)
    if kind == "WaveRetarder":
        return np.diag([1, np.exp(1j * angle)])
    if kind == "PhaseShift":
        return np.exp(1j * angle) * np.eye(2)
    raise NetworkError(f"unknown device kind {kind!r}")


def device_map(d: Device) -> FieldMap:
    if d.open_ports:
        raise NetworkError(f"{d.kind} has unwired input ports {d.open_ports}")
    U = device_block(d.kind, d.angle)
    return FieldMap(U, np.zeros_like(U), _channels(d.inputs), _channels(d.outputs))


# --- composed systems -----------------------------------------------------------


@dataclass(frozen=True)
class Detector:
    name: str
    side: int


@dataclass(frozen=True, eq=False)
class System:
    """A field map over a vacuum mode basis, optionally with declared detectors."""

    basis: ModeBasis
    fmap: FieldMap
    detectors: tuple[Detector, ...] = ()
    name: str = ""

    def __post_init__(self):
        if tuple(self.fmap.inputs) != tuple(tuple(m) for m in self.basis.modes):
            raise NetworkError("field map inputs must be the basis modes")
        names = [d.name for d in self.detectors]
        if len(set(names)) != len(names):
            raise NetworkError("duplicate detector names")
        ports = {c[0] for c in self.fmap.outputs}
        for n in names:
            if n not in ports:
                raise NetworkError(f"detector {n!r} is not an output port")

    @property
    def detector_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.detectors)

    @property
    def sides(self) -> dict[str, int]:
        return {d.name: d.side for d in self.detectors}

    def detector_rows(self, name: str) -> list[int]:
        rows = [k for k, c in enumerate(self.fmap.outputs) if c[0] == name]
        if not rows:
            raise NetworkError(f"detector {name!r} has no channels")
        return rows

    def detector_channels(self) -> list[int]:
        return [r for d in self.detectors for r in self.detector_rows(d.name)]

    def apply(self, d: Device) -> "System":
        if d.open_ports:
            system, d, _ = inject_idle(self, d)
            return system.apply(d)
        fmap = compose(self.fmap, embed(device_map(d), self.fmap.outputs))
        return replace(self, fmap=fmap)

    def then(self, fmap: FieldMap) -> "System":
        """Follow the current outputs with an arbitrary map (e.g. local devices)."""
        return replace(self, fmap=compose(self.fmap, embed(fmap, self.fmap.outputs)))

    def with_detectors(self, detectors: Iterable[Detector], name: str | None = None) -> "System":
        return replace(self, detectors=tuple(detectors), name=self.name if name is None else name)


def inject_idle(system: System, device: Device) -> tuple[System, Device, tuple[ModeId, ...]]:
    """Fill every open input port of ``device`` with a fresh vacuum beam.

    Each port adds two mode sets (H and V) to the basis, tagged with the
    device's side.  Returns the extended system, the fully wired device and
    the new modes.
    """
    if not device.open_ports:
        raise NetworkError(f"{device.kind} has no open port")
    inputs = list(device.inputs)
    basis, fmap, new = system.basis, system.fmap, []
    used = {m.path for m in basis.idle_modes()}
    k = len(used)
    for slot in device.open_ports:
        while f"idle{k}" in used:
            k += 1
        port = f"idle{k}"
        used.add(port)
        modes = tuple(ModeId(port, pol) for pol in POLARIZATIONS)
        basis = basis.extend(modes, side=device.side)
        n_out, n_in = fmap.shape
        A = np.zeros((n_out + 2, n_in + 2), dtype=complex)
        B = np.zeros_like(A)
        A[:n_out, :n_in] = fmap.A
        B[:n_out, :n_in] = fmap.B
        A[n_out:, n_in:] = np.eye(2)
        fmap = FieldMap(A, B, fmap.inputs + modes, fmap.outputs + modes)
        inputs[slot] = port
        new.extend(modes)
    return replace(system, basis=basis, fmap=fmap), replace(device, inputs=tuple(inputs)), tuple(new)


@dataclass(frozen=True)
class Network:
    """A serialisable list of devices followed by detector declarations."""

    name: str
    steps: tuple[Device, ...]
    detectors: tuple[Detector, ...]
    n_dof: int = 2
    meta: Mapping = field(default_factory=dict)

    def build(self, source: System) -> System:
        system = source
        for step in self.steps:
            system = system.apply(step)
        return system.with_detectors(self.detectors, name=self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_dof": self.n_dof,
            "steps": [s.to_dict() for s in self.steps],
            "detectors": [{"name": d.name, "side": d.side} for d in self.detectors],
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Network":
        try:
            return cls(
                d["name"],
                tuple(Device.from_dict(s) for s in d["steps"]),
                tuple(Detector(x["name"], int(x["side"])) for x in d["detectors"]),
                int(d.get("n_dof", 2)),
                dict(d.get("meta", {})),
            )
        except (KeyError, TypeError) as exc:
            raise NetworkError(f"malformed network description: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Network":
        return cls.from_dict(json.loads(text))
