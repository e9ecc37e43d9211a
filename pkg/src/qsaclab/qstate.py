"""Exact complex statevector simulation of few-qubit registers.

Conventions, fixed for reproducibility:

* Qubit 0 is the most significant bit of the basis index, so for a
  3-qubit register ``|q0 q1 q2>`` the basis state ``|100>`` sits at
  index 4.
* ``RX(t) = [[cos(t/2), -i sin(t/2)], [-i sin(t/2), cos(t/2)]]``.
* ``ROT(a, b, g) = RZ(g) @ RY(b) @ RZ(a)`` with ``a`` applied first in
  circuit order.
* Per-wire measurements are Pauli-Z expectation values in ``[-1, 1]``.

All operations are pure: they return a fresh ``StateVector`` and never
mutate their input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 12
MAX_ORACLE_QUBITS = 4


@dataclass(frozen=True)
class StateVector:
    """An n-qubit register: 2**n complex amplitudes, unit norm."""

    n_qubits: int
    amplitudes: np.ndarray

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class GateOp:
    """One gate in a circuit description: RX, ROT, or CNOT."""

    kind: str
    target: int
    control: int | None = None
    angles: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        expected = {"RX": 1, "ROT": 3, "CNOT": 0}
        if self.kind not in expected:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.angles) != expected[self.kind]:
            raise ValueError(f"{self.kind} takes {expected[self.kind]} angles, got {len(self.angles)}")
        if (self.control is not None) != (self.kind == "CNOT"):
            raise ValueError("control qubit is required for CNOT and forbidden otherwise")
        if self.kind == "CNOT" and self.control == self.target:
            raise ValueError("CNOT control and target must differ")


def rx_matrix(theta) -> np.ndarray:
    """2x2 RX; accepts a scalar or an array of angles (stacked on the left)."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    m = np.empty(theta.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = c
    m[..., 0, 1] = -1j * s
    m[..., 1, 0] = -1j * s
    m[..., 1, 1] = c
    return m


def ry_matrix(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    m = np.zeros(theta.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = c
    m[..., 0, 1] = -s
    m[..., 1, 0] = s
    m[..., 1, 1] = c
    return m


def rz_matrix(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    m = np.zeros(theta.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = np.exp(-0.5j * theta)
    m[..., 1, 1] = np.exp(0.5j * theta)
    return m


def rot_matrix(alpha, beta, gamma) -> np.ndarray:
    """Composite single-qubit rotation RZ(gamma) @ RY(beta) @ RZ(alpha)."""
    return rz_matrix(gamma) @ ry_matrix(beta) @ rz_matrix(alpha)


_PAIR_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _pair_indices(n_qubits: int, qubit: int) -> tuple[np.ndarray, np.ndarray]:
    """Basis indices with the given qubit's bit 0 (i0) and 1 (i1), paired."""
    key = (n_qubits, qubit)
    cached = _PAIR_CACHE.get(key)
    if cached is None:
        stride = 1 << (n_qubits - 1 - qubit)
        all_idx = np.arange(1 << n_qubits)
        i0 = all_idx[(all_idx & stride) == 0]
        cached = _PAIR_CACHE[key] = (i0, i0 + stride)
    return cached


def apply_2x2(amps: np.ndarray, mat: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Apply a single-qubit unitary to amplitudes of shape [..., 2**n].

    ``mat`` is either one (2, 2) matrix or a stack broadcastable against
    the leading axes of ``amps`` (per-element matrices for batched
    evaluation).
    """
    shape = amps.shape
    lead = shape[:-1]
    t = amps.reshape(lead + (1 << qubit, 2, 1 << (n_qubits - 1 - qubit)))
    a0, a1 = t[..., 0, :], t[..., 1, :]
    if mat.ndim == 2:
        m00, m01, m10, m11 = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]
    else:
        m = mat.reshape(mat.shape[:-2] + (1, 1, 4))
        m00, m01, m10, m11 = m[..., 0], m[..., 1], m[..., 2], m[..., 3]
    out = np.empty_like(t)
    out[..., 0, :] = m00 * a0 + m01 * a1
    out[..., 1, :] = m10 * a0 + m11 * a1
    return out.reshape(shape)


_CNOT_PERM_CACHE: dict[tuple[int, int, int], np.ndarray] = {}


def cnot_permutation(n_qubits: int, control: int, target: int) -> np.ndarray:
    """Basis permutation of CNOT: flips the target bit where control is 1."""
    key = (n_qubits, control, target)
    perm = _CNOT_PERM_CACHE.get(key)
    if perm is None:
        idx = np.arange(1 << n_qubits)
        cbit = 1 << (n_qubits - 1 - control)
        tbit = 1 << (n_qubits - 1 - target)
        perm = np.where(idx & cbit, idx ^ tbit, idx)
        _CNOT_PERM_CACHE[key] = perm
    return perm


def _check_qubit(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits}-qubit state")


def init_zero(n_qubits: int) -> StateVector:
    """The all-zeros register |0...0>."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(1 << n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def apply_rx(state: StateVector, qubit: int, angle: float) -> StateVector:
    _check_qubit(state, qubit)
    amps = apply_2x2(state.amplitudes, rx_matrix(angle), qubit, state.n_qubits)
    return StateVector(state.n_qubits, amps)


def apply_rot(state: StateVector, qubit: int, alpha: float, beta: float, gamma: float) -> StateVector:
    _check_qubit(state, qubit)
    amps = apply_2x2(state.amplitudes, rot_matrix(alpha, beta, gamma), qubit, state.n_qubits)
    return StateVector(state.n_qubits, amps)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise ValueError("CNOT control and target must differ")
    perm = cnot_permutation(state.n_qubits, control, target)
    return StateVector(state.n_qubits, state.amplitudes[perm])


def apply_gate(state: StateVector, op: GateOp) -> StateVector:
    if op.kind == "RX":
        return apply_rx(state, op.target, op.angles[0])
    if op.kind == "ROT":
        return apply_rot(state, op.target, *op.angles)
    return apply_cnot(state, op.control, op.target)


def expect_z(state: StateVector, qubit: int) -> float:
    """Pauli-Z expectation on one wire: sum of |amp|^2 signed by the bit."""
    _check_qubit(state, qubit)
    i0, i1 = _pair_indices(state.n_qubits, qubit)
    probs = np.abs(state.amplitudes) ** 2
    return float(probs[i0].sum() - probs[i1].sum())


def expect_z_all(amps: np.ndarray, n_qubits: int) -> np.ndarray:
    """Per-wire Z expectations for amplitudes of shape [..., 2**n]."""
    probs = (amps.real**2 + amps.imag**2).reshape(amps.shape[:-1] + (2,) * n_qubits)
    lead = len(amps.shape) - 1
    out = np.empty(amps.shape[:-1] + (n_qubits,))
    for q in range(n_qubits):
        axes = tuple(i for i in range(lead, lead + n_qubits) if i != lead + q)
        marg = probs.sum(axis=axes)
        out[..., q] = marg[..., 0] - marg[..., 1]
    return out


def _embed_single(mat: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    left = np.eye(1 << qubit, dtype=complex)
    right = np.eye(1 << (n_qubits - 1 - qubit), dtype=complex)
    return np.kron(np.kron(left, mat), right)


def gate_matrix(op: GateOp, n_qubits: int) -> np.ndarray:
    """Dense 2**n x 2**n matrix of a single gate."""
    if op.target >= n_qubits or (op.control is not None and op.control >= n_qubits):
        raise IndexError(f"gate {op} out of range for {n_qubits} qubits")
    if op.kind == "RX":
        return _embed_single(rx_matrix(op.angles[0]), op.target, n_qubits)
    if op.kind == "ROT":
        return _embed_single(rot_matrix(*op.angles), op.target, n_qubits)
    dim = 1 << n_qubits
    perm = cnot_permutation(n_qubits, op.control, op.target)
    mat = np.zeros((dim, dim), dtype=complex)
    mat[perm, np.arange(dim)] = 1.0
    return mat


def circuit_unitary(ops, n_qubits: int) -> np.ndarray:
    """Dense unitary of a gate sequence, built by Kronecker embedding.

    Brute-force oracle for the sequential-application path; guarded to
    small registers because it is O(4**n) per gate.
    """
    if not 1 <= n_qubits <= MAX_ORACLE_QUBITS:
        raise ValueError(f"circuit_unitary supports 1..{MAX_ORACLE_QUBITS} qubits, got {n_qubits}")
    u = np.eye(1 << n_qubits, dtype=complex)
    for op in ops:
        u = gate_matrix(op, n_qubits) @ u
    return u
