"""Circuit architecture tests: dense-unitary oracle, shift rule vs adjoint vs
finite differences, parameter counting."""

import numpy as np
import pytest

from qsaclab.qstate import GateOp, circuit_unitary
from qsaclab.vqc import (
    REUPLOADING,
    VANILLA,
    ReuploadVqcParams,
    VanillaVqcParams,
    VqcArch,
    count_params,
    flatten_params,
    forward,
    forward_batch,
    forward_reuploading,
    forward_vanilla,
    grad_adjoint,
    grad_parameter_shift,
    init_params,
    unflatten_params,
)

# ---------------------------------------------------------------------------
# oracle helpers: the expected circuits are spelled out gate by gate here,
# independently of the evaluator's internal program builder.


def _ring_ops(n):
    return [GateOp("CNOT", (i + 1) % n, control=i) for i in range(n)] if n >= 2 else []


def _vanilla_ops(angles, s):
    L, n, _ = angles.shape
    ops = [GateOp("RX", i, angles=(float(s[i]),)) for i in range(n)]
    for l in range(L):
        ops += [GateOp("ROT", i, angles=tuple(angles[l, i])) for i in range(n)]
        ops += _ring_ops(n)
    return ops


def _reup_ops(params, s, include_encoding=True):
    L, n, _ = params.layer_angles.shape
    ops = []
    for l in range(L):
        ops += [GateOp("ROT", i, angles=tuple(params.layer_angles[l, i])) for i in range(n)]
        ops += _ring_ops(n)
        if include_encoding:
            ops += [GateOp("RX", i, angles=(float(params.lambdas[l, i] * s[i]),)) for i in range(n)]
    ops += [GateOp("ROT", i, angles=tuple(params.final_angles[i])) for i in range(n)]
    ops += _ring_ops(n)
    return ops


def _z_of_amps(amps, n):
    probs = np.abs(amps) ** 2
    out = np.zeros(n)
    for q in range(n):
        for b in range(1 << n):
            sign = -1.0 if (b >> (n - 1 - q)) & 1 else 1.0
            out[q] += sign * probs[b]
    return out


def _oracle_expectations(ops, n):
    e0 = np.zeros(1 << n, dtype=complex)
    e0[0] = 1.0
    return _z_of_amps(circuit_unitary(ops, n) @ e0, n)


def _fd_grad(arch, params, s, upstream, h=1e-5):
    flat = flatten_params(params)
    grad = np.zeros_like(flat)
    for k in range(flat.size):
        fp, fm = flat.copy(), flat.copy()
        fp[k] += h
        fm[k] -= h
        zp = forward(arch, unflatten_params(arch, fp), s)
        zm = forward(arch, unflatten_params(arch, fm), s)
        grad[k] = upstream @ (zp - zm) / (2 * h)
    return grad


def _random_instance(rng, kind, n_layers, n_qubits=3):
    arch = VqcArch(kind, n_qubits, n_layers)
    params = init_params(arch, rng)
    if kind == REUPLOADING:
        params.lambdas[:] = rng.uniform(-1.5, 1.5, params.lambdas.shape)
    s = rng.uniform(-np.pi, np.pi, n_qubits)
    upstream = rng.standard_normal(n_qubits)
    return arch, params, s, upstream


# ---------------------------------------------------------------------------
# parameter counting


def test_count_params_matches_closed_forms():
    assert count_params(VqcArch(REUPLOADING, 3, 2)) == 33
    assert count_params(VqcArch(VANILLA, 3, 1)) == 9
    assert count_params(VqcArch(VANILLA, 3, 8)) == 72
    for L in (1, 2, 4, 8):
        assert count_params(VqcArch(VANILLA, 3, L)) == 9 * L
        assert count_params(VqcArch(REUPLOADING, 3, L)) == 12 * L + 9


def test_flatten_unflatten_roundtrip():
    rng = np.random.default_rng(0)
    for kind in (VANILLA, REUPLOADING):
        arch = VqcArch(kind, 3, 2)
        params = init_params(arch, rng)
        flat = flatten_params(params)
        assert flat.size == count_params(arch)
        again = flatten_params(unflatten_params(arch, flat))
        assert np.array_equal(flat, again)


# ---------------------------------------------------------------------------
# vanilla forward


def test_vanilla_identity_circuit():
    params = VanillaVqcParams(np.zeros((2, 3, 3)))
    out = forward_vanilla(params, np.zeros(3))
    assert np.allclose(out, [1, 1, 1], atol=1e-12)


def test_vanilla_pi_input_traces_through_ring():
    # |000> -> RX(pi) on wire 0 -> |100> -> ring flips wires 1, 2, then 0
    params = VanillaVqcParams(np.zeros((1, 3, 3)))
    out = forward_vanilla(params, np.array([np.pi, 0.0, 0.0]))
    assert np.allclose(out, [1, -1, -1], atol=1e-10)


def test_vanilla_matches_unitary_oracle():
    rng = np.random.default_rng(21)
    for _ in range(30):
        L = int(rng.integers(1, 4))
        arch = VqcArch(VANILLA, 3, L)
        params = init_params(arch, rng)
        s = rng.uniform(-np.pi, np.pi, 3)
        expected = _oracle_expectations(_vanilla_ops(params.angles, s), 3)
        assert np.allclose(forward_vanilla(params, s), expected, atol=1e-10)


def test_vanilla_dimension_mismatch():
    params = VanillaVqcParams(np.zeros((1, 3, 3)))
    with pytest.raises(ValueError):
        forward_vanilla(params, np.zeros(2))


# ---------------------------------------------------------------------------
# reuploading forward


def test_reuploading_identity_circuit():
    params = ReuploadVqcParams(np.zeros((2, 3, 3)), np.zeros((2, 3)), np.zeros((3, 3)))
    for s in (np.zeros(3), np.array([0.3, -2.0, 8.0])):
        assert np.allclose(forward_reuploading(params, s), [1, 1, 1], atol=1e-12)


def test_reuploading_zero_input_drops_encoding():
    rng = np.random.default_rng(5)
    arch = VqcArch(REUPLOADING, 3, 2)
    params = init_params(arch, rng)
    params.lambdas[:] = rng.uniform(-2, 2, (2, 3))
    s = np.zeros(3)
    expected = _oracle_expectations(_reup_ops(params, s, include_encoding=False), 3)
    assert np.allclose(forward_reuploading(params, s), expected, atol=1e-10)


def test_reuploading_matches_unitary_oracle():
    rng = np.random.default_rng(22)
    for _ in range(30):
        L = int(rng.integers(1, 4))
        arch = VqcArch(REUPLOADING, 3, L)
        params = init_params(arch, rng)
        params.lambdas[:] = rng.uniform(-1.5, 1.5, (L, 3))
        s = rng.uniform(-np.pi, np.pi, 3)
        expected = _oracle_expectations(_reup_ops(params, s), 3)
        assert np.allclose(forward_reuploading(params, s), expected, atol=1e-10)


# ---------------------------------------------------------------------------
# forward properties


def test_outputs_stay_in_unit_interval():
    rng = np.random.default_rng(9)
    for kind in (VANILLA, REUPLOADING):
        for _ in range(20):
            arch, params, s, _ = _random_instance(rng, kind, int(rng.integers(1, 5)))
            out = forward(arch, params, s)
            assert np.all(out >= -1.0 - 1e-12) and np.all(out <= 1.0 + 1e-12)


def test_rotation_angles_are_2pi_periodic():
    rng = np.random.default_rng(10)
    for kind in (VANILLA, REUPLOADING):
        arch, params, s, _ = _random_instance(rng, kind, 2)
        base = forward(arch, params, s)
        flat = flatten_params(params)
        # any single ROT angle; skip the lambda block for reuploading
        k = int(rng.integers(3 * 3 * 2)) if kind == REUPLOADING else int(rng.integers(flat.size))
        flat2 = flat.copy()
        flat2[k] += 2 * np.pi
        shifted = forward(arch, unflatten_params(arch, flat2), s)
        assert np.allclose(base, shifted, atol=1e-10)


def test_forward_batch_matches_single_calls():
    rng = np.random.default_rng(11)
    for kind in (VANILLA, REUPLOADING):
        arch, params, _, _ = _random_instance(rng, kind, 2)
        s_batch = rng.uniform(-np.pi, np.pi, (8, 3))
        batched = forward_batch(arch, params, s_batch)
        for b in range(8):
            assert np.allclose(batched[b], forward(arch, params, s_batch[b]), atol=1e-12)


# ---------------------------------------------------------------------------
# gradients


def test_single_wire_gradient_is_minus_sine():
    # one wire, one layer, only the RY angle set: <Z> = cos(beta)
    arch = VqcArch(VANILLA, 1, 1)
    for beta, expected in ((0.0, 0.0), (np.pi / 2, -1.0)):
        params = VanillaVqcParams(np.array([[[0.0, beta, 0.0]]]))
        for fn in (grad_parameter_shift, grad_adjoint):
            grad = fn(arch, params, np.zeros(1), np.ones(1))
            assert grad[1] == pytest.approx(expected, abs=1e-10)
            assert grad[0] == pytest.approx(0.0, abs=1e-10)
            assert grad[2] == pytest.approx(0.0, abs=1e-10)


def test_zero_upstream_gives_zero_gradient():
    rng = np.random.default_rng(12)
    arch, params, s, _ = _random_instance(rng, REUPLOADING, 2)
    assert np.all(grad_adjoint(arch, params, s, np.zeros(3)) == 0.0)
    assert np.allclose(grad_parameter_shift(arch, params, s, np.zeros(3)), 0.0)


def test_shift_rule_matches_adjoint():
    rng = np.random.default_rng(13)
    for kind in (VANILLA, REUPLOADING):
        for L in (1, 2, 4, 8):
            for _ in (0, 1, 2):
                arch, params, s, upstream = _random_instance(rng, kind, L)
                g_shift = grad_parameter_shift(arch, params, s, upstream)
                g_adj = grad_adjoint(arch, params, s, upstream)
                assert np.allclose(g_shift, g_adj, atol=1e-8)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(14)
    for kind in (VANILLA, REUPLOADING):
        for L in (1, 2):
            arch, params, s, upstream = _random_instance(rng, kind, L)
            g_fd = _fd_grad(arch, params, s, upstream)
            assert np.allclose(grad_parameter_shift(arch, params, s, upstream), g_fd, atol=1e-5)
            assert np.allclose(grad_adjoint(arch, params, s, upstream), g_fd, atol=1e-5)


def test_adjoint_batch_accumulates_over_elements():
    from qsaclab.vqc import grad_adjoint_batch

    rng = np.random.default_rng(15)
    arch, params, _, _ = _random_instance(rng, REUPLOADING, 2)
    s_batch = rng.uniform(-2, 2, (6, 3))
    upstream = rng.standard_normal((6, 3))
    total = grad_adjoint_batch(arch, params, s_batch, upstream)
    summed = sum(grad_adjoint(arch, params, s_batch[b], upstream[b]) for b in range(6))
    assert np.allclose(total, summed, atol=1e-10)


def test_lambda_gradient_uses_chain_rule():
    # single-wire reuploading with all rotations zero: <Z> = cos(lambda * s)
    arch = VqcArch(REUPLOADING, 1, 1)
    lam, s = 0.7, 1.3
    params = ReuploadVqcParams(np.zeros((1, 1, 3)), np.array([[lam]]), np.zeros((1, 3)))
    expected = -np.sin(lam * s) * s
    k_lambda = 3  # after the one ROT triple
    for fn in (grad_parameter_shift, grad_adjoint):
        grad = fn(arch, params, np.array([s]), np.ones(1))
        assert grad[k_lambda] == pytest.approx(expected, abs=1e-10)


def test_bad_upstream_shape_rejected():
    rng = np.random.default_rng(16)
    arch, params, s, _ = _random_instance(rng, VANILLA, 1)
    with pytest.raises(ValueError):
        grad_parameter_shift(arch, params, s, np.ones(2))
    with pytest.raises(ValueError):
        grad_adjoint(arch, params, s, np.ones(2))
