"""Squashed-Gaussian policies over a bounded continuous action space.

A policy network maps an observation to the mean and log standard
deviation of a Gaussian over pre-squash actions ``u``; the executed action
is ``a_max * tanh(u)`` with the change-of-variables correction applied to
the log density.  Two backends share this interface:

* ClassicalPolicy -- an MLP producing [mu, log_sigma] directly.
* HybridPolicy -- a variational circuit whose per-wire <Z> values feed a
  single linear layer producing [mu, log_sigma].  For the vanilla circuit
  the observation is rescaled before encoding so every rotation angle
  stays in [-pi, pi] (the angular-velocity component of the pendulum
  observation spans [-8, 8]); the re-uploading circuit takes the raw
  observation because its input scales are trainable.

``log_sigma`` is clamped to [-20, 2]; gradients through clamped
coordinates are zero.  All sampling randomness enters through an external
``eps`` so that sampling is reproducible and reparameterized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn, vqc

LOG_SIGMA_MIN = -20.0
LOG_SIGMA_MAX = 2.0

# tanh saturates to exactly +-1.0 in float64 around |u| ~ 19; nudge inside
# so sampled actions stay strictly within the bound
_TANH_HI = np.nextafter(1.0, 0.0)


@dataclass
class PolicyDist:
    mu: np.ndarray
    log_sigma: np.ndarray  # clamped to [LOG_SIGMA_MIN, LOG_SIGMA_MAX]


@dataclass
class SquashedSample:
    action: np.ndarray
    log_prob: np.ndarray
    pre_squash: np.ndarray


@dataclass
class ClassicalPolicy:
    net: nn.DenseNet
    action_dim: int = 1


@dataclass
class HybridPolicy:
    arch: vqc.VqcArch
    vqc_params: object
    head: nn.DenseNet  # single linear layer, n_qubits -> 2 * action_dim
    input_scale: np.ndarray
    action_dim: int = 1


@dataclass
class PolicyTape:
    net_tape: nn.Tape
    raw_log_sigma: np.ndarray  # before clamping
    single: bool
    vqc_tape: object = None
    s_scaled: np.ndarray = None  # circuit inputs, kept for shift-rule verification


def make_classical_policy(rng: np.random.Generator, obs_dim: int = 3, action_dim: int = 1,
                          hidden=(32, 32)) -> ClassicalPolicy:
    net = nn.dense_net([obs_dim, *hidden, 2 * action_dim], rng)
    return ClassicalPolicy(net, action_dim)


def make_hybrid_policy(kind: str, n_layers: int, rng: np.random.Generator,
                       obs_dim: int = 3, action_dim: int = 1,
                       input_scale: np.ndarray | None = None) -> HybridPolicy:
    arch = vqc.VqcArch(kind, obs_dim, n_layers)
    params = vqc.init_params(arch, rng)
    head = nn.dense_net([obs_dim, 2 * action_dim], rng)
    if input_scale is None:
        input_scale = np.ones(obs_dim)
        if kind == vqc.VANILLA and obs_dim == 3:
            input_scale[2] = np.pi / 8.0  # velocity bound of the pendulum
    return HybridPolicy(arch, params, head, np.asarray(input_scale, dtype=float), action_dim)


def n_policy_params(policy) -> int:
    if isinstance(policy, ClassicalPolicy):
        return nn.n_params(policy.net)
    return vqc.count_params(policy.arch) + nn.n_params(policy.head)


def policy_params(policy) -> np.ndarray:
    if isinstance(policy, ClassicalPolicy):
        return nn.get_params(policy.net)
    return np.concatenate([vqc.flatten_params(policy.vqc_params), nn.get_params(policy.head)])


def set_policy_params(policy, flat: np.ndarray) -> None:
    if isinstance(policy, ClassicalPolicy):
        nn.set_params(policy.net, flat)
        return
    k = vqc.count_params(policy.arch)
    policy.vqc_params = vqc.unflatten_params(policy.arch, flat[:k])
    nn.set_params(policy.head, flat[k:])


def policy_forward(policy, s: np.ndarray) -> tuple[PolicyDist, PolicyTape]:
    """Distribution parameters for one observation or a [batch, obs] matrix."""
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    d = policy.action_dim
    if isinstance(policy, ClassicalPolicy):
        out, net_tape = nn.forward(policy.net, s)
        tape = PolicyTape(net_tape, out[..., d:], single)
    else:
        x = np.atleast_2d(s) * policy.input_scale
        z, vqc_tape = vqc.forward_batch_tape(policy.arch, policy.vqc_params, x)
        out, net_tape = nn.forward(policy.head, z[0] if single else z)
        tape = PolicyTape(net_tape, out[..., d:], single, vqc_tape=vqc_tape, s_scaled=x)
    mu = out[..., :d]
    log_sigma = np.clip(out[..., d:], LOG_SIGMA_MIN, LOG_SIGMA_MAX)
    return PolicyDist(mu, log_sigma), tape


def policy_backward(policy, tape: PolicyTape, d_mu: np.ndarray, d_log_sigma: np.ndarray,
                    method: str = "adjoint") -> np.ndarray:
    """Flat parameter gradient given upstream gradients on (mu, log_sigma).

    ``method`` selects the circuit gradient path for hybrid policies:
    "adjoint" (default) or "shift" (hardware-faithful verification mode).
    """
    mask = (tape.raw_log_sigma > LOG_SIGMA_MIN) & (tape.raw_log_sigma < LOG_SIGMA_MAX)
    upstream = np.concatenate(
        [np.atleast_1d(d_mu), np.atleast_1d(d_log_sigma) * mask], axis=-1
    )
    if isinstance(policy, ClassicalPolicy):
        grads, _ = nn.backward(policy.net, tape.net_tape, upstream)
        return grads
    head_grads, dz = nn.backward(policy.head, tape.net_tape, upstream)
    dz = np.atleast_2d(dz)
    if method == "adjoint":
        circuit_grads = vqc.grad_adjoint_tape(tape.vqc_tape, dz)
    elif method == "shift":
        circuit_grads = np.zeros(vqc.count_params(policy.arch))
        for b in range(dz.shape[0]):
            circuit_grads += vqc.grad_parameter_shift(
                policy.arch, policy.vqc_params, tape.s_scaled[b], dz[b]
            )
    else:
        raise ValueError(f"unknown gradient method {method!r}")
    return np.concatenate([circuit_grads, head_grads])


def sample_squashed(dist: PolicyDist, eps: np.ndarray, a_max: float) -> SquashedSample:
    """Reparameterized sample: u = mu + sigma * eps, action = a_max * tanh(u).

    log_prob is the density of the action after the tanh change of
    variables, using the numerically stable form of log(1 - tanh(u)^2).
    """
    sigma = np.exp(dist.log_sigma)
    u = dist.mu + sigma * eps
    squash = np.clip(np.tanh(u), -_TANH_HI, _TANH_HI)
    action = a_max * squash
    log_corr = 2.0 * (np.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))
    terms = -0.5 * eps**2 - dist.log_sigma - 0.5 * np.log(2.0 * np.pi) - log_corr - np.log(a_max)
    return SquashedSample(action, terms.sum(axis=-1), u)


def deterministic_action(dist: PolicyDist, a_max: float) -> np.ndarray:
    return a_max * np.tanh(dist.mu)


def log_prob_pathwise_upstream(dist: PolicyDist, eps: np.ndarray):
    """Upstream gradients of log pi(action(theta) | s) on (mu, log_sigma).

    Includes the pathwise dependence of the sampled action on the
    parameters: with u = mu + sigma * eps the Gaussian term reduces to
    -log sigma, and the tanh correction contributes 2 tanh(u) per unit
    of d(u).
    """
    sigma = np.exp(dist.log_sigma)
    u = dist.mu + sigma * eps
    d_u = 2.0 * np.tanh(u)
    d_mu = d_u
    d_log_sigma = -1.0 + d_u * sigma * eps
    return d_mu, d_log_sigma


def log_prob_grad(policy, s: np.ndarray, eps: np.ndarray, upstream_scalar: float = 1.0,
                  method: str = "adjoint") -> np.ndarray:
    """Exact gradient of upstream_scalar * log pi(action | s) over all params."""
    dist, tape = policy_forward(policy, s)
    d_mu, d_log_sigma = log_prob_pathwise_upstream(dist, np.asarray(eps, dtype=float))
    return policy_backward(
        policy, tape, upstream_scalar * d_mu, upstream_scalar * d_log_sigma, method=method
    )
