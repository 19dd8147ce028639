"""Brute-force two-photon calculation in Fock space.

Used as ground truth for the Wigner engine, so it deliberately shares no
code with :mod:`hyperbell.network`.  A two-photon state is a 4x4 amplitude
matrix ``psi[m1, m2]`` over single-photon modes ``|path pol>`` with
path in (a, b) and pol in (H, V).  Each photon's creation operator evolves
through its own side of the analyzer, ``psi -> U1 psi U2^T``.

Phase conventions match the optics used elsewhere: reflection at any beam
splitter multiplies the amplitude by ``i``; a half-wave plate at 45 deg
swaps H and V.
"""
from __future__ import annotations

import numpy as np

from .detection import CoincidenceTable

MODES = ("aH", "aV", "bH", "bV")
_S = 1 / np.sqrt(2)

_POL_BELL = {
    # rows H, V of photon 1; columns H, V of photon 2
    "Psi+": np.array([[0, 1], [1, 0]]) * _S,
    "Psi-": np.array([[0, 1], [-1, 0]]) * _S,
    "Phi+": np.array([[1, 0], [0, 1]]) * _S,
    "Phi-": np.array([[1, 0], [0, -1]]) * _S,
}
_MOM_BELL = {
    # rows a, b of photon 1; columns a, b of photon 2
    "psi+": np.array([[0, 1], [1, 0]]) * _S,
    "psi-": np.array([[0, 1], [-1, 0]]) * _S,
    "phi+": np.array([[1, 0], [0, 1]]) * _S,
    "phi-": np.array([[1, 0], [0, -1]]) * _S,
}


def make_state(params) -> np.ndarray:
    """Amplitude matrix of |pol Bell> (x) |momentum Bell>, modes ordered as MODES."""
    pol = _POL_BELL[params.polarization_label]
    mom = _MOM_BELL[params.momentum_label]
    psi = np.zeros((4, 4), dtype=complex)
    for p1, path1 in enumerate("ab"):
        for l1, pol1 in enumerate("HV"):
            for p2, path2 in enumerate("ab"):
                for l2, pol2 in enumerate("HV"):
                    psi[2 * p1 + l1, 2 * p2 + l2] = mom[p1, p2] * pol[l1, l2]
    return psi


def state_vector(params) -> np.ndarray:
    """The same state flattened to the 16-dim product basis."""
    return make_state(params).reshape(16)


# Single-photon transfer matrices: column = input mode, row = output mode.


def _cnot_pbs() -> np.ndarray:
    # H reflected in place (factor i); V transmitted to the other path
    U = np.zeros((4, 4), dtype=complex)
    U[0, 0] = 1j  # aH -> i aH
    U[3, 1] = 1  # aV -> bV
    U[2, 2] = 1j  # bH -> i bH
    U[1, 3] = 1  # bV -> aV
    return U


def _diag_analyzers() -> np.ndarray:
    # outputs X+, X-, per path: +45 reflected (i), -45 transmitted
    U = np.zeros((4, 4), dtype=complex)
    for p in range(2):
        h, v = 2 * p, 2 * p + 1
        U[2 * p, h], U[2 * p, v] = 1j * _S, 1j * _S
        U[2 * p + 1, h], U[2 * p + 1, v] = _S, -_S
    return U


def _hwp_on_b() -> np.ndarray:
    U = np.eye(4, dtype=complex)
    U[2:, 2:] = [[0, 1], [1, 0]]
    return U


def _balanced_bs() -> np.ndarray:
    # outputs AH, AV, BH, BV ; A = (i a + b)/sqrt2, B = (a + i b)/sqrt2
    U = np.zeros((4, 4), dtype=complex)
    for l in range(2):
        a, b = l, 2 + l
        U[l, a], U[l, b] = 1j * _S, _S
        U[2 + l, a], U[2 + l, b] = _S, 1j * _S
    return U


def _hv_analyzers() -> np.ndarray:
    return np.diag([1j, 1, 1j, 1])


def setup_unitaries(setup: str) -> tuple[np.ndarray, np.ndarray, list[str], list[str]]:
    """(U1, U2, detectors of photon 1, detectors of photon 2)."""
    if setup == "pol-bsm":
        U = _diag_analyzers() @ _cnot_pbs()
        return U, U.copy(), ["A1+", "A1-", "B1+", "B1-"], ["A2+", "A2-", "B2+", "B2-"]
    if setup == "mom-bsm":
        U = _hv_analyzers() @ _balanced_bs() @ _hwp_on_b()
        return U, U.copy(), ["A1H", "A1V", "B1H", "B1V"], ["A2H", "A2V", "B2H", "B2V"]
    raise ValueError(f"unknown setup {setup!r}")


def setup_matrix(setup: str) -> np.ndarray:
    """Block-diagonal 8x8 single-photon transfer matrix of the whole analyzer."""
    U1, U2, _, _ = setup_unitaries(setup)
    M = np.zeros((8, 8), dtype=complex)
    M[:4, :4], M[4:, 4:] = U1, U2
    return M


def oracle_coincidences(params, setup: str) -> dict[tuple[str, str], float]:
    U1, U2, left, right = setup_unitaries(setup)
    out = U1 @ make_state(params) @ U2.T
    prob = np.abs(out) ** 2
    prob = prob / prob.sum()
    return {(a, b): float(prob[i, j]) for i, a in enumerate(left) for j, b in enumerate(right)}


def oracle_table(params, setup: str) -> CoincidenceTable:
    _, _, left, right = setup_unitaries(setup)
    sides = {**{d: 1 for d in left}, **{d: 2 for d in right}}
    return CoincidenceTable(
        tuple(left + right), sides, oracle_coincidences(params, setup), {}, normalization="normalized"
    )
