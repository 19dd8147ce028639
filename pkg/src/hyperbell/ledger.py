"""Zeropoint bookkeeping for built networks.

For two photons entangled in ``n`` dichotomic degrees of freedom the source
activates ``2**(n+1)`` vacuum mode sets.  Each analyzer idle channel lets in
two more (H and V).  The number of distinguishable Bell classes is bounded
by the source count minus the number of idle entry points.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .network import System


class AuditError(ValueError):
    pass


@dataclass(frozen=True)
class ZpfLedger:
    n_dof: int
    n_zpf_source: int
    n_idle_channels: int
    n_zpf_side: dict = field(default_factory=dict)

    @property
    def n_max_class(self) -> int:
        return self.n_zpf_source - self.n_idle_channels

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_zpf_side"] = {str(k): v for k, v in sorted(self.n_zpf_side.items())}
        d["n_max_class"] = self.n_max_class
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self) -> str:
        sides = ", ".join(f"side {k}: {v}" for k, v in sorted(self.n_zpf_side.items()))
        return "\n".join(
            [
                f"degrees of freedom        n = {self.n_dof}",
                f"source vacuum mode sets     {self.n_zpf_source}",
                f"idle entry points           {self.n_idle_channels}",
                f"idle mode sets by side      {sides or 'none'}",
                f"max distinguishable classes {self.n_max_class}"
                f" = {self.n_zpf_source} - {self.n_idle_channels}",
            ]
        )


def counting_ledger(n_dof: int) -> ZpfLedger:
    """Pure counting for ``n_dof`` degrees of freedom, no fields built."""
    if n_dof < 1:
        raise ValueError("n_dof must be >= 1")
    per_side = 2 ** n_dof  # 2**(n-1) idle ports per side, two mode sets each
    return ZpfLedger(n_dof, 2 ** (n_dof + 1), 2 ** n_dof, {1: per_side, 2: per_side})


def audit(system: System) -> ZpfLedger:
    basis = system.basis
    for m in basis.modes:
        if basis.sides.get(m.path) not in (1, 2):
            raise AuditError(f"mode {m} has no side provenance")
    n_source = len(basis.source_modes())
    idle = basis.idle_modes()
    entry_points = {m.path for m in idle}
    per_side: dict[int, int] = {}
    for m in idle:
        side = basis.sides[m.path]
        per_side[side] = per_side.get(side, 0) + 1
    n = math.log2(n_source) - 1 if n_source else 0
    if n != int(n):
        raise AuditError(f"{n_source} source mode sets is not 2**(n+1)")
    return ZpfLedger(int(n), n_source, len(entry_points), per_side)


@dataclass(frozen=True)
class ConservationReport:
    n_inputs: int
    n_outputs: int
    dependency: np.ndarray  # detector channels x source modes
    channel_labels: tuple
    source_labels: tuple

    @property
    def conserved(self) -> bool:
        return self.n_inputs == self.n_outputs

    def sources_touched(self) -> dict:
        return {c: int(row.sum()) for c, row in zip(self.channel_labels, self.dependency)}


def check_mode_conservation(system: System, tol: float = 1e-14) -> ConservationReport:
    """Compare detector output channels with input mode sets and map dependencies.

    Without declared detectors every output channel counts.  Rows of the
    dependency matrix mark which source mode sets enter a channel through
    either ``A`` or ``B``; structural zeros are reported, not treated as
    failures.
    """
    fmap = system.fmap
    rows = system.detector_channels() if system.detectors else list(range(fmap.shape[0]))
    src = [system.basis.index(m) for m in system.basis.source_modes()]
    A, B = fmap.A[np.ix_(rows, src)], fmap.B[np.ix_(rows, src)]
    dep = (np.abs(A) > tol) | (np.abs(B) > tol)
    return ConservationReport(
        n_inputs=len(system.basis),
        n_outputs=len(rows),
        dependency=dep,
        channel_labels=tuple(fmap.outputs[r] for r in rows),
        source_labels=tuple(str(system.basis.modes[k]) for k in src),
    )
