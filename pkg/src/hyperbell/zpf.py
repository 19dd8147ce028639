"""Zeropoint-field modes, vacuum moments and counter-based Gaussian sampling.

Every independent vacuum mode set is represented by a single complex
amplitude.  In the vacuum Wigner distribution these amplitudes are
independent circular complex Gaussians with

    <a_i a_j*> = 1/2 delta_ij,    <a_i a_j> = 0.

Sampling is counter based: the amplitude of mode ``m`` in sample ``i`` is a
pure function of ``(seed, i, m)``, so any partition of the sample range
over workers reproduces the same numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

POLARIZATIONS = ("H", "V")
SOURCE_PATHS = ("a1", "b1", "a2", "b2")


class BasisError(KeyError):
    """A mode was looked up in a basis that does not contain it."""


class ModeId(NamedTuple):
    """One zeropoint mode set: a spatial path (or idle injection) and a polarization."""

    path: str
    pol: str

    @property
    def is_idle(self) -> bool:
        return self.path.startswith("idle")

    def __str__(self) -> str:
        return f"{self.path}{self.pol}"


@dataclass(frozen=True)
class ModeBasis:
    """Ordered, duplicate-free collection of modes with per-path side tags.

    ``sides`` maps a path name to the side (1 or 2) of the apparatus on which
    the mode set enters.  It is the provenance used by the ledger audit.
    """

    modes: tuple[ModeId, ...]
    sides: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        modes = tuple(ModeId(*m) for m in self.modes)
        if len(set(modes)) != len(modes):
            raise ValueError("duplicate ModeId in basis")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "sides", dict(self.sides))
        object.__setattr__(self, "_index", {m: k for k, m in enumerate(modes)})

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __contains__(self, mode) -> bool:
        return ModeId(*mode) in self._index

    def index(self, mode) -> int:
        try:
            return self._index[ModeId(*mode)]
        except KeyError:
            raise BasisError(f"mode {mode!r} not in basis") from None

    def source_modes(self) -> tuple[ModeId, ...]:
        return tuple(m for m in self.modes if not m.is_idle)

    def idle_modes(self) -> tuple[ModeId, ...]:
        return tuple(m for m in self.modes if m.is_idle)

    def extend(self, modes: Iterable[ModeId], side: int | None = None) -> "ModeBasis":
        modes = tuple(ModeId(*m) for m in modes)
        sides = dict(self.sides)
        if side is not None:
            sides.update({m.path: side for m in modes})
        return ModeBasis(self.modes + modes, sides)


def source_basis(paths: Iterable[str] = SOURCE_PATHS) -> ModeBasis:
    """Basis of source mode sets; paths ending in ``1`` belong to photon 1."""
    paths = tuple(paths)
    modes = tuple(ModeId(p, pol) for p in paths for pol in POLARIZATIONS)
    return ModeBasis(modes, {p: int(p[-1]) for p in paths})


def second_moment(basis: ModeBasis, i, j, conjugate_second: bool) -> complex:
    """Vacuum second moment <a_i a_j*> (conjugate_second) or <a_i a_j>."""
    ii, jj = basis.index(i), basis.index(j)
    if conjugate_second and ii == jj:
        return 0.5 + 0j
    return 0j


# --- Philox4x32-10 -----------------------------------------------------------

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = np.uint32(0x9E3779B9)
_PHILOX_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10) -> np.ndarray:
    """Vectorised Philox4x32 block function.

    ``counter`` has shape (..., 4) and ``key`` shape (..., 2), both uint32
    (broadcastable).  Returns uint32 words of shape (..., 4).
    """
    ctr = np.asarray(counter, dtype=np.uint32)
    key = np.asarray(key, dtype=np.uint32)
    c0, c1, c2, c3 = (ctr[..., k] for k in range(4))
    k0, k1 = key[..., 0], key[..., 1]
    with np.errstate(over="ignore"):
        for r in range(rounds):
            if r:
                k0 = k0 + _PHILOX_W0
                k1 = k1 + _PHILOX_W1
            p0 = _PHILOX_M0 * c0.astype(np.uint64)
            p1 = _PHILOX_M1 * c2.astype(np.uint64)
            hi0 = (p0 >> _SHIFT32).astype(np.uint32)
            lo0 = (p0 & _MASK32).astype(np.uint32)
            hi1 = (p1 >> _SHIFT32).astype(np.uint32)
            lo1 = (p1 & _MASK32).astype(np.uint32)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack(np.broadcast_arrays(c0, c1, c2, c3), axis=-1)


def _split64(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.uint64)
    return (x & _MASK32).astype(np.uint32), (x >> _SHIFT32).astype(np.uint32)


def _unit_interval(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """53-bit uniform in [0, 1) from two 32-bit words."""
    a = (hi >> np.uint32(5)).astype(np.float64)
    b = (lo >> np.uint32(6)).astype(np.float64)
    return (a * 67108864.0 + b) / 9007199254740992.0


def zpf_block(n_modes: int, seed: int, start: int, stop: int) -> np.ndarray:
    """Vacuum amplitudes for samples ``start..stop-1``, shape (stop-start, n_modes).

    Mode ``m`` of sample ``i`` uses Philox counter (m, i_lo, i_hi, 0) under
    key (seed_lo, seed_hi); a Box-Muller transform turns the first two
    uniforms into the real and imaginary parts, each with variance 1/4.
    """
    if not 0 <= start <= stop:
        raise ValueError("need 0 <= start <= stop")
    idx = np.arange(start, stop, dtype=np.uint64)
    i_lo, i_hi = _split64(idx)
    s_lo, s_hi = _split64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    m = np.arange(n_modes, dtype=np.uint32)
    shape = (len(idx), n_modes)
    counter = np.stack(
        [
            np.broadcast_to(m[None, :], shape),
            np.broadcast_to(i_lo[:, None], shape),
            np.broadcast_to(i_hi[:, None], shape),
            np.zeros(shape, dtype=np.uint32),
        ],
        axis=-1,
    )
    words = philox4x32(counter, np.array([s_lo, s_hi], dtype=np.uint32))
    u1 = 1.0 - _unit_interval(words[..., 0], words[..., 1])  # (0, 1]
    u2 = _unit_interval(words[..., 2], words[..., 3])
    radius = 0.5 * np.sqrt(-2.0 * np.log(u1))
    return radius * np.exp(2j * np.pi * u2)


@dataclass(frozen=True)
class ZpfSample:
    basis: ModeBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        if len(self.amplitudes) != len(self.basis):
            raise ValueError("amplitude count does not match basis size")


def sample_zpf(basis: ModeBasis, seed: int, sample_index: int) -> ZpfSample:
    if len(basis) == 0:
        raise ValueError("empty basis")
    amps = zpf_block(len(basis), seed, sample_index, sample_index + 1)[0]
    amps.setflags(write=False)
    return ZpfSample(basis, amps)
