"""Variational circuit policies: two few-qubit architectures with exact gradients.

Two circuit families over ``n_qubits`` wires (one wire per input feature):

* vanilla -- one angle-encoding layer ``RX(s_i)`` on each wire, then
  ``n_layers`` blocks of [per-wire ROT(a, b, g); CNOT ring i -> (i+1) mod n],
  then per-wire ``<Z>``.
* reuploading -- ``n_layers`` blocks of [per-wire ROT; CNOT ring;
  ``RX(lambda_i^l * s_i)`` on each wire] followed by one final
  [per-wire ROT; CNOT ring], then per-wire ``<Z>``. The input scales
  ``lambda`` are trainable.

Every ROT is decomposed into RZ(a), RY(b), RZ(g) (a first), so all
parametrized gates are plain Pauli rotations and the two-point shift rule
``d<Z>/dt = (<Z>(t + pi/2) - <Z>(t - pi/2)) / 2`` is exact. The adjoint
gradient performs the same computation by a reverse sweep over the
statevector; it is simulation-only but much cheaper and is cross-checked
against the shift rule in the test suite.

Flat parameter order:

* vanilla -- ``angles.ravel()``, i.e. (layer, qubit, [a, b, g]).
* reuploading -- ``layer_angles.ravel()`` then ``lambdas.ravel()`` then
  ``final_angles.ravel()``.

The CNOT ring is empty for a single wire (there is nothing to entangle).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qstate import (
    _pair_indices,
    apply_2x2,
    cnot_permutation,
    expect_z_all,
    rx_matrix,
    ry_matrix,
    rz_matrix,
)

VANILLA = "vanilla"
REUPLOADING = "reuploading"


@dataclass(frozen=True)
class VqcArch:
    kind: str
    n_qubits: int
    n_layers: int

    def __post_init__(self):
        if self.kind not in (VANILLA, REUPLOADING):
            raise ValueError(f"unknown architecture kind {self.kind!r}")
        if self.n_qubits < 1 or self.n_layers < 1:
            raise ValueError("n_qubits and n_layers must be >= 1")


@dataclass
class VanillaVqcParams:
    angles: np.ndarray  # [n_layers, n_qubits, 3]


@dataclass
class ReuploadVqcParams:
    layer_angles: np.ndarray  # [n_layers, n_qubits, 3]
    lambdas: np.ndarray  # [n_layers, n_qubits]
    final_angles: np.ndarray  # [n_qubits, 3]


def count_params(arch: VqcArch) -> int:
    n, L = arch.n_qubits, arch.n_layers
    if arch.kind == VANILLA:
        return 3 * n * L
    return L * (3 * n + n) + 3 * n


def init_params(arch: VqcArch, rng: np.random.Generator):
    """Fresh parameters: rotation angles uniform on [-pi, pi], scales at 1."""
    n, L = arch.n_qubits, arch.n_layers
    if arch.kind == VANILLA:
        return VanillaVqcParams(rng.uniform(-np.pi, np.pi, (L, n, 3)))
    return ReuploadVqcParams(
        layer_angles=rng.uniform(-np.pi, np.pi, (L, n, 3)),
        lambdas=np.ones((L, n)),
        final_angles=rng.uniform(-np.pi, np.pi, (n, 3)),
    )


def flatten_params(params) -> np.ndarray:
    if isinstance(params, VanillaVqcParams):
        return params.angles.ravel().copy()
    return np.concatenate(
        [params.layer_angles.ravel(), params.lambdas.ravel(), params.final_angles.ravel()]
    )


def unflatten_params(arch: VqcArch, flat: np.ndarray):
    n, L = arch.n_qubits, arch.n_layers
    flat = np.asarray(flat, dtype=float)
    if flat.size != count_params(arch):
        raise ValueError(f"expected {count_params(arch)} parameters, got {flat.size}")
    if arch.kind == VANILLA:
        return VanillaVqcParams(flat.reshape(L, n, 3).copy())
    k = 3 * n * L
    return ReuploadVqcParams(
        layer_angles=flat[:k].reshape(L, n, 3).copy(),
        lambdas=flat[k : k + n * L].reshape(L, n).copy(),
        final_angles=flat[k + n * L :].reshape(n, 3).copy(),
    )


def arch_of(params) -> VqcArch:
    if isinstance(params, VanillaVqcParams):
        L, n, _ = params.angles.shape
        return VqcArch(VANILLA, n, L)
    L, n = params.lambdas.shape
    return VqcArch(REUPLOADING, n, L)


# ---------------------------------------------------------------------------
# circuit program: a flat list of primitive steps executed on a [B, 2**n]
# amplitude batch.  Rotations with one shared angle are embedded into a
# dense 2**n x 2**n matrix once and applied as a single matmul (the fast
# path for the tiny registers used here); rotations whose angle varies per
# batch element keep their stack of 2x2 matrices and go through the
# pair-index kernel.

_ROT_MATRIX = {"x": rx_matrix, "y": ry_matrix, "z": rz_matrix}


def _embed_t(mat: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Transposed dense embedding of a 2x2 gate, for right-multiplication."""
    i0, i1 = _pair_indices(n_qubits, qubit)
    u = np.zeros((1 << n_qubits, 1 << n_qubits), dtype=complex)
    u[i0, i0] = mat[0, 0]
    u[i0, i1] = mat[0, 1]
    u[i1, i0] = mat[1, 0]
    u[i1, i1] = mat[1, 1]
    return np.ascontiguousarray(u.T)


class _RotStep:
    __slots__ = ("axis", "qubit", "pidx", "scale", "ut", "ud", "mats", "mats_d")

    def __init__(self, axis, qubit, mat, pidx, scale, n_qubits):
        self.axis = axis
        self.qubit = qubit
        self.pidx = pidx
        self.scale = scale
        self.ud = None  # dagger is built lazily; forward-only calls skip it
        self.mats_d = None
        if mat.ndim == 2:
            self.ut = _embed_t(mat, qubit, n_qubits)
            self.mats = None
        else:
            self.ut = None
            self.mats = mat

    def apply(self, amps, n_qubits):
        if self.ut is not None:
            return amps @ self.ut
        return apply_2x2(amps, self.mats, self.qubit, n_qubits)

    def apply_dagger(self, amps, n_qubits):
        if self.ut is not None:
            if self.ud is None:
                self.ud = np.ascontiguousarray(np.conj(self.ut).T)
            return amps @ self.ud
        if self.mats_d is None:
            self.mats_d = self.mats.conj().transpose(0, 2, 1)
        return apply_2x2(amps, self.mats_d, self.qubit, n_qubits)


class _PermStep:
    __slots__ = ("perm", "inv")

    def __init__(self, perm):
        self.perm = perm
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        self.inv = inv


_PAULI_T_CACHE: dict[tuple[str, int, int], np.ndarray] = {}


def _pauli_t(axis: str, qubit: int, n_qubits: int) -> np.ndarray:
    """Transposed dense embedding of a Pauli operator on one wire."""
    key = (axis, qubit, n_qubits)
    mat = _PAULI_T_CACHE.get(key)
    if mat is None:
        i0, i1 = _pair_indices(n_qubits, qubit)
        p = np.zeros((1 << n_qubits, 1 << n_qubits), dtype=complex)
        if axis == "x":
            p[i0, i1] = 1.0
            p[i1, i0] = 1.0
        elif axis == "y":
            p[i0, i1] = -1j
            p[i1, i0] = 1j
        else:
            p[i0, i0] = 1.0
            p[i1, i1] = -1.0
        mat = _PAULI_T_CACHE[key] = np.ascontiguousarray(p.T)
    return mat


_RING_CACHE: dict[int, np.ndarray] = {}


def _ring_permutation(n_qubits: int) -> np.ndarray | None:
    """Composed basis permutation of the CNOT ring i -> (i+1) mod n."""
    if n_qubits < 2:
        return None
    perm = _RING_CACHE.get(n_qubits)
    if perm is None:
        perm = np.arange(1 << n_qubits)
        for i in range(n_qubits):
            perm = perm[cnot_permutation(n_qubits, i, (i + 1) % n_qubits)]
        _RING_CACHE[n_qubits] = perm
    return perm


def _build_program(arch: VqcArch, flat: np.ndarray, s2d: np.ndarray, shifts=None):
    """Compile the circuit for a batch of inputs.

    Returns (steps, parametric) where parametric[k] is the rotation step
    whose angle is driven by flat parameter k.  When ``shifts`` is given
    (shape [B, n_params]) every parametric gate angle is offset per batch
    element, which is how the shift rule evaluates all displaced circuits
    in one batch.
    """
    n, L = arch.n_qubits, arch.n_layers
    if s2d.shape[1] != n:
        raise ValueError(f"input dimension {s2d.shape[1]} != n_qubits {n}")
    ring = _ring_permutation(n)
    steps: list = []
    parametric: list = [None] * count_params(arch)

    def rot(axis, qubit, angle, pidx, scale=1.0):
        if pidx >= 0 and shifts is not None:
            angle = angle + shifts[:, pidx]
        st = _RotStep(axis, qubit, _ROT_MATRIX[axis](angle), pidx, scale, n)
        steps.append(st)
        if pidx >= 0:
            parametric[pidx] = st

    def rot_layer(block, base):  # block: [n, 3] of (a, b, g); base: flat offset
        if shifts is None:
            mz1, my, mz2 = rz_matrix(block[:, 0]), ry_matrix(block[:, 1]), rz_matrix(block[:, 2])
            for i in range(n):
                for k, (axis, mat) in enumerate((("z", mz1[i]), ("y", my[i]), ("z", mz2[i]))):
                    st = _RotStep(axis, i, mat, base + 3 * i + k, 1.0, n)
                    steps.append(st)
                    parametric[base + 3 * i + k] = st
        else:
            for i in range(n):
                for k, axis in enumerate(("z", "y", "z")):
                    rot(axis, i, block[i, k], base + 3 * i + k)

    def entangle():
        if ring is not None:
            steps.append(_PermStep(ring))

    if arch.kind == VANILLA:
        angles = flat.reshape(L, n, 3)
        for i in range(n):
            rot("x", i, s2d[:, i], -1)
        for l in range(L):
            rot_layer(angles[l], 3 * n * l)
            entangle()
    else:
        k = 3 * n * L
        layer_angles = flat[:k].reshape(L, n, 3)
        lambdas = flat[k : k + n * L].reshape(L, n)
        final_angles = flat[k + n * L :].reshape(n, 3)
        for l in range(L):
            rot_layer(layer_angles[l], 3 * n * l)
            entangle()
            for i in range(n):
                rot("x", i, lambdas[l, i] * s2d[:, i], k + n * l + i, scale=s2d[:, i])
        rot_layer(final_angles, k + n * L)
        entangle()
    return steps, parametric


def _run_program(steps, amps: np.ndarray, n_qubits: int) -> np.ndarray:
    for st in steps:
        if isinstance(st, _PermStep):
            amps = amps[:, st.perm]
        else:
            amps = st.apply(amps, n_qubits)
    return amps


def _zero_batch(batch: int, n_qubits: int) -> np.ndarray:
    amps = np.zeros((batch, 1 << n_qubits), dtype=complex)
    amps[:, 0] = 1.0
    return amps


def forward_batch(arch: VqcArch, params, s_batch: np.ndarray) -> np.ndarray:
    """Per-wire <Z> for a batch of inputs; shape [batch, n_qubits]."""
    return forward_batch_tape(arch, params, s_batch)[0]


class VqcTape:
    """Compiled program plus final statevectors, kept for the reverse sweep."""

    __slots__ = ("arch", "steps", "psi")

    def __init__(self, arch, steps, psi):
        self.arch = arch
        self.steps = steps
        self.psi = psi


def forward_batch_tape(arch: VqcArch, params, s_batch: np.ndarray):
    s_batch = np.atleast_2d(np.asarray(s_batch, dtype=float))
    steps, _ = _build_program(arch, flatten_params(params), s_batch)
    psi = _run_program(steps, _zero_batch(s_batch.shape[0], arch.n_qubits), arch.n_qubits)
    return expect_z_all(psi, arch.n_qubits), VqcTape(arch, steps, psi)


def grad_adjoint_tape(tape: VqcTape, upstream: np.ndarray) -> np.ndarray:
    """Adjoint gradient reusing the forward pass recorded in the tape."""
    upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
    return _adjoint_sweep(
        tape.steps, tape.psi, upstream, tape.arch.n_qubits, count_params(tape.arch)
    )


def forward(arch: VqcArch, params, s: np.ndarray) -> np.ndarray:
    return forward_batch(arch, params, np.asarray(s, dtype=float)[None, :])[0]


def forward_vanilla(params: VanillaVqcParams, s: np.ndarray) -> np.ndarray:
    return forward(arch_of(params), params, s)


def forward_reuploading(params: ReuploadVqcParams, s: np.ndarray) -> np.ndarray:
    return forward(arch_of(params), params, s)


# ---------------------------------------------------------------------------
# gradients

_SIGN_CACHE: dict[int, np.ndarray] = {}


def _z_sign_table(n_qubits: int) -> np.ndarray:
    """[n_qubits, 2**n] table of Z eigenvalues (+1/-1) per wire and basis state."""
    table = _SIGN_CACHE.get(n_qubits)
    if table is None:
        idx = np.arange(1 << n_qubits)
        bits = (idx[None, :] >> (n_qubits - 1 - np.arange(n_qubits))[:, None]) & 1
        table = _SIGN_CACHE[n_qubits] = 1.0 - 2.0 * bits
    return table


def _undo_step(st, amps: np.ndarray, n_qubits: int) -> np.ndarray:
    if isinstance(st, _PermStep):
        return amps[:, st.inv]
    return st.apply_dagger(amps, n_qubits)


def grad_adjoint_batch(arch: VqcArch, params, s_batch: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Sum over the batch of d(upstream_b . <Z>_b)/d(theta), by reverse sweep.

    For each Pauli rotation U = exp(-i t P / 2) the contribution is
    Im(<lam | P | psi_after>) chained with d(gate angle)/d(parameter).
    """
    s_batch = np.atleast_2d(np.asarray(s_batch, dtype=float))
    upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
    if upstream.shape != (s_batch.shape[0], arch.n_qubits):
        raise ValueError("upstream must have shape [batch, n_qubits]")
    n = arch.n_qubits
    steps, _ = _build_program(arch, flatten_params(params), s_batch)
    psi = _run_program(steps, _zero_batch(s_batch.shape[0], n), n)
    return _adjoint_sweep(steps, psi, upstream, n, count_params(arch))


def _adjoint_sweep(steps, psi, upstream, n_qubits, n_params) -> np.ndarray:
    lam = (upstream @ _z_sign_table(n_qubits)) * psi
    grad = np.zeros(n_params)
    for st in reversed(steps):
        if isinstance(st, _RotStep) and st.pidx >= 0:
            t = psi @ _pauli_t(st.axis, st.qubit, n_qubits)
            per_elem = np.einsum("bi,bi->b", lam.conj(), t).imag
            grad[st.pidx] += float(np.sum(per_elem * st.scale))
        psi = _undo_step(st, psi, n_qubits)
        lam = _undo_step(st, lam, n_qubits)
    return grad


def grad_adjoint(arch: VqcArch, params, s: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    return grad_adjoint_batch(arch, params, np.asarray(s)[None, :], np.asarray(upstream)[None, :])


def grad_parameter_shift(arch: VqcArch, params, s: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Exact gradient via the two-point shift rule, one batch of 2P circuits.

    Trainable input scales are handled by shifting the encoding-gate angle
    and chaining with d(lambda * s)/d(lambda) = s.
    """
    s = np.asarray(s, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (arch.n_qubits,):
        raise ValueError("upstream must have one entry per wire")
    flat = flatten_params(params)
    n_par = count_params(arch)
    batch = 2 * n_par
    shifts = np.zeros((batch, n_par))
    rows = np.arange(n_par)
    shifts[2 * rows, rows] = 0.5 * np.pi
    shifts[2 * rows + 1, rows] = -0.5 * np.pi
    s2d = np.broadcast_to(s, (batch, arch.n_qubits))
    steps, parametric = _build_program(arch, flat, s2d, shifts=shifts)
    amps = _run_program(steps, _zero_batch(batch, arch.n_qubits), arch.n_qubits)
    expvals = expect_z_all(amps, arch.n_qubits)
    dz = 0.5 * (expvals[0::2] - expvals[1::2])  # [n_par, n_qubits]
    grad = dz @ upstream
    for k, st in enumerate(parametric):
        scale = st.scale if np.isscalar(st.scale) else float(st.scale[0])
        grad[k] *= scale
    return grad
