"""Single and joint detection probabilities.

The analytic engine propagates second moments exactly.  For outputs
``d = A z + B z*`` with vacuum inputs,

    <d_m d_n>  = (A B^T + B A^T)_mn / 2
    <d_m d_n*> = (A A^H + B B^H)_mn / 2

Singles are the intensity in excess of the vacuum, ``|B row|^2 / 2`` per
channel, and a joint probability is ``sum |<d_m d_n>|^2`` over the channels
of the two detectors.  All proportionality constants are 1 apart from the
detector gains.

The Monte-Carlo engine samples vacuum amplitudes and subtracts, per
realisation, the intensity that the same amplitudes produce with the
coupling switched off (``d0 = A z``).  See :func:`mc_accumulate` for the
estimator.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .network import NetworkError, System
from .zpf import zpf_block

BLOCK = 1000  # Monte-Carlo reduction granularity, in samples


def fmt(x: float) -> float:
    """Round to the 12 significant digits used in every emitted artifact."""
    return float(f"{x:.12g}")


class DetectorGains(dict):
    """Detector name -> positive gain; missing detectors have gain 1."""

    def __init__(self, gains: Mapping[str, float] | None = None):
        super().__init__(gains or {})
        for name, k in self.items():
            if not k > 0:
                raise ValueError(f"gain for {name!r} must be positive, got {k}")

    def __missing__(self, key):
        return 1.0


def pair_moments(system: System) -> tuple[np.ndarray, np.ndarray]:
    """Return (<d d>, <d d*>) over all output channels."""
    A, B = system.fmap.A, system.fmap.B
    G = 0.5 * (A @ B.T + B @ A.T)
    N = 0.5 * (A @ A.conj().T + B @ B.conj().T)
    return G, N


def _pairs(detectors) -> list[tuple[str, str]]:
    return [(a, b) for k, a in enumerate(detectors) for b in detectors[k + 1:]]


@dataclass(frozen=True)
class CoincidenceTable:
    """Joint and single detection probabilities for one run.

    ``raw`` tables hold every unordered detector pair.  ``normalized``
    tables hold only cross-side pairs and sum to one over them.
    """

    detectors: tuple[str, ...]
    sides: Mapping[str, int]
    joint: Mapping[tuple[str, str], float]
    singles: Mapping[str, float]
    stderr: Mapping[tuple[str, str], float] | None = None
    singles_stderr: Mapping[str, float] | None = None
    normalization: str = "raw"
    samples: int | None = None

    def cross_pairs(self) -> list[tuple[str, str]]:
        left = [d for d in self.detectors if self.sides[d] == 1]
        right = [d for d in self.detectors if self.sides[d] == 2]
        return [(a, b) for a in left for b in right]

    def __getitem__(self, pair) -> float:
        a, b = pair
        if (a, b) in self.joint:
            return self.joint[(a, b)]
        return self.joint[(b, a)]

    def error(self, pair) -> float | None:
        if self.stderr is None:
            return None
        a, b = pair
        return self.stderr[(a, b)] if (a, b) in self.stderr else self.stderr[(b, a)]

    def total(self) -> float:
        return float(sum(self[p] for p in self.cross_pairs()))

    def normalized(self) -> "CoincidenceTable":
        if self.normalization == "normalized":
            return self
        pairs = self.cross_pairs()
        total = self.total()
        scale = 1.0 / total if total != 0 else 0.0
        joint = {p: self[p] * scale for p in pairs}
        stderr = None if self.stderr is None else {p: self.error(p) * abs(scale) for p in pairs}
        return replace(self, joint=joint, stderr=stderr, normalization="normalized")

    def nonzero(self, threshold: float = 1e-12) -> frozenset:
        return frozenset(p for p in self.cross_pairs() if abs(self[p]) > threshold)

    def rows(self) -> list[tuple[str, str, float, float | None]]:
        return [(a, b, v, self.error((a, b))) for (a, b), v in self.joint.items()]

    def to_dict(self) -> dict:
        joint: dict = {}
        err: dict = {}
        for a, b, v, e in self.rows():
            joint.setdefault(a, {})[b] = fmt(v)
            if e is not None:
                err.setdefault(a, {})[b] = fmt(e)
        out = {
            "normalization": self.normalization,
            "detectors": list(self.detectors),
            "sides": {d: self.sides[d] for d in self.detectors},
            "samples": self.samples,
            "joint": joint,
            "stderr": err if self.stderr is not None else None,
            "singles": {d: fmt(v) for d, v in self.singles.items()},
            "singles_stderr": None
            if self.singles_stderr is None
            else {d: fmt(v) for d, v in self.singles_stderr.items()},
        }
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "CoincidenceTable":
        joint = {(a, b): v for a, row in d["joint"].items() for b, v in row.items()}
        stderr = None
        if d.get("stderr") is not None:
            stderr = {(a, b): v for a, row in d["stderr"].items() for b, v in row.items()}
        return cls(
            tuple(d["detectors"]),
            dict(d["sides"]),
            joint,
            dict(d.get("singles") or {}),
            stderr,
            d.get("singles_stderr"),
            d.get("normalization", "raw"),
            d.get("samples"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["detector_i", "detector_j", "p", "stderr"])
        for a, b, v, e in self.rows():
            w.writerow([a, b, f"{v:.12g}", "" if e is None else f"{e:.12g}"])
        return buf.getvalue()


def _check_detectors(system: System):
    if not system.detectors:
        raise NetworkError("system has no detectors")
    for d in system.detectors:
        system.detector_rows(d.name)


def analytic_singles(system: System, gains: Mapping[str, float] | None = None) -> dict[str, float]:
    _check_detectors(system)
    gains = DetectorGains(gains)
    B = system.fmap.B
    excess = 0.5 * np.sum(np.abs(B) ** 2, axis=1)
    return {
        d.name: float(gains[d.name] * excess[system.detector_rows(d.name)].sum())
        for d in system.detectors
    }


def analytic_joint(system: System, gains: Mapping[str, float] | None = None) -> CoincidenceTable:
    _check_detectors(system)
    gains = DetectorGains(gains)
    G, _ = pair_moments(system)
    names = system.detector_names
    rows = {n: system.detector_rows(n) for n in names}
    joint = {}
    for a, b in _pairs(names):
        block = G[np.ix_(rows[a], rows[b])]
        joint[(a, b)] = float(gains[a] * gains[b] * np.sum(np.abs(block) ** 2))
    return CoincidenceTable(names, system.sides, joint, analytic_singles(system, gains))


# --- Monte Carlo -------------------------------------------------------------------


@dataclass
class MCAccumulator:
    """Per-block sums of Monte-Carlo statistics.

    Blocks are fixed windows of ``BLOCK`` consecutive global sample indices.
    The final reduction always stacks blocks in index order, so merging
    shards that split the sample range on block boundaries reproduces the
    single-run result bit for bit.
    """

    detectors: tuple[str, ...]
    seed: int
    blocks: dict[int, tuple] = field(default_factory=dict)

    @property
    def samples(self) -> int:
        return sum(b[0] for b in self.blocks.values())

    def merge(self, other: "MCAccumulator") -> "MCAccumulator":
        if other.detectors != self.detectors or other.seed != self.seed:
            raise ValueError("cannot merge accumulators from different runs")
        overlap = self.blocks.keys() & other.blocks.keys()
        if overlap:
            raise ValueError(f"shards overlap in blocks {sorted(overlap)[:5]}")
        return MCAccumulator(self.detectors, self.seed, {**self.blocks, **other.blocks})

    def totals(self) -> tuple[np.ndarray, ...]:
        order = sorted(self.blocks)
        return tuple(
            np.sum(np.stack([self.blocks[b][k] for b in order]), axis=0)
            for k in range(1, 5)
        )


def _block_stats(system: System, z: np.ndarray, det_rows, vac_mean):
    A = system.fmap.A
    d = system.fmap(z)
    e = z @ A.T
    dI = np.abs(d) ** 2 - np.abs(e) ** 2
    I0 = np.abs(e) ** 2
    delta = np.stack([dI[:, r].sum(axis=1) for r in det_rows], axis=1)
    vac = np.stack([I0[:, r].sum(axis=1) for r in det_rows], axis=1) - vac_mean
    # Y_ab = dI_a dI_b + dI_a V_b + V_a dI_b ; the V_a V_b term is replaced by its mean
    Y = (
        delta[:, :, None] * delta[:, None, :]
        + delta[:, :, None] * vac[:, None, :]
        + vac[:, :, None] * delta[:, None, :]
    )
    return (
        len(z),
        delta.sum(axis=0),
        (delta**2).sum(axis=0),
        Y.sum(axis=0),
        (Y**2).sum(axis=0),
    )


def mc_accumulate(system: System, seed: int, start: int, stop: int) -> MCAccumulator:
    """Accumulate samples ``start..stop-1``; ``start`` must be block aligned.

    Per sample and detector, ``dI`` is the total intensity minus that of the
    paired vacuum run and ``V`` is the vacuum run's fluctuation about its
    exact mean.  The product ``(dI_a + V_a)(dI_b + V_b)`` is the zeropoint
    subtracted coincidence integrand; its ``V_a V_b`` part has a mean known
    in closed form and is swapped for it, which removes most of the
    variance without bias.  Dropping the ``dI V`` cross terms instead would
    halve the correlated signal.
    """
    _check_detectors(system)
    if stop <= start:
        raise ValueError("need at least one sample")
    if start % BLOCK:
        raise ValueError(f"shard start {start} is not a multiple of {BLOCK}")
    det_rows = [system.detector_rows(n) for n in system.detector_names]
    A = system.fmap.A
    vac_mean = np.array([0.5 * np.sum(np.abs(A[r]) ** 2) for r in det_rows])
    acc = MCAccumulator(system.detector_names, seed)
    n_modes = len(system.basis)
    for lo in range(start, stop, BLOCK):
        hi = min(lo + BLOCK, stop)
        z = zpf_block(n_modes, seed, lo, hi)
        acc.blocks[lo // BLOCK] = _block_stats(system, z, det_rows, vac_mean)
    return acc


def mc_table(system: System, acc: MCAccumulator, gains: Mapping[str, float] | None = None) -> CoincidenceTable:
    """Turn accumulated sums into a raw table with standard errors.

    Joint entries estimate the connected correlation
    ``<(I_a - I0_a)(I_b - I0_b)> - P_a P_b``, the quantity the analytic
    engine evaluates.  The error bar uses the spread of the per-sample
    integrand only; the singles-product correction contributes at higher
    order in the coupling.
    """
    if acc.detectors != system.detector_names:
        raise ValueError("accumulator does not match system detectors")
    gains = DetectorGains(gains)
    n = acc.samples
    s_d, s_d2, s_y, s_y2 = acc.totals()
    mean_d = s_d / n
    var_d = np.maximum(s_d2 / n - mean_d**2, 0.0)
    mean_y = s_y / n
    var_y = np.maximum(s_y2 / n - mean_y**2, 0.0)
    denom = max(n - 1, 1)

    A = system.fmap.A
    names = system.detector_names
    rows = {k: system.detector_rows(k) for k in names}
    vac_cov = 0.5 * (A @ A.conj().T)

    joint, stderr = {}, {}
    for i, a in enumerate(names):
        for j in range(i + 1, len(names)):
            b = names[j]
            evv = float(np.sum(np.abs(vac_cov[np.ix_(rows[a], rows[b])]) ** 2))
            k = gains[a] * gains[b]
            val = mean_y[i, j] + evv - mean_d[i] * mean_d[j]
            joint[(a, b)] = float(k * val)
            stderr[(a, b)] = float(k * np.sqrt(var_y[i, j] / denom))
    singles = {a: float(gains[a] * mean_d[i]) for i, a in enumerate(names)}
    singles_err = {a: float(gains[a] * np.sqrt(var_d[i] / denom)) for i, a in enumerate(names)}
    return CoincidenceTable(names, system.sides, joint, singles, stderr, singles_err, "raw", n)


def mc_joint(
    system: System,
    gains: Mapping[str, float] | None = None,
    samples: int = 100_000,
    seed: int = 0,
    shards: int = 1,
) -> CoincidenceTable:
    """Monte-Carlo coincidence table; the result does not depend on ``shards``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n_blocks = -(-samples // BLOCK)
    shards = max(1, min(shards, n_blocks))
    edges = [samples if k == shards else (n_blocks * k // shards) * BLOCK for k in range(shards + 1)]
    acc = None
    for lo, hi in zip(edges[:-1], edges[1:]):
        part = mc_accumulate(system, seed, lo, hi)
        acc = part if acc is None else acc.merge(part)
    return mc_table(system, acc, gains)


def merge_accumulators(parts: Iterable[MCAccumulator]) -> MCAccumulator:
    parts = list(parts)
    acc = parts[0]
    for p in parts[1:]:
        acc = acc.merge(p)
    return acc
