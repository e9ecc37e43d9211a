"""Soft actor-critic with twin critics and a pluggable policy backend.

One agent owns a policy (classical MLP or hybrid circuit network), two
action-value networks with Polyak-averaged target copies, three Adam
states, a replay buffer, and a single RNG stream.  Every source of
randomness (weight init, warmup actions, sampling noise, replay draws,
environment resets) comes from that one generator, so a (config, seed)
pair fixes the whole run bit for bit.

Update cadence: after ``warmup_steps`` uniform-random environment steps,
each step performs one gradient update per critic on the squared TD error
against

    y = r + gamma (1 - d) (min_i Q_targ_i(s', a') - alpha log pi(a'|s'))

with a' freshly sampled from the current policy, then one update of the
policy minimizing  E[alpha log pi(a|s) - min_i Q_i(s, a)]  through the
reparameterized action, then a soft update of both targets.  Episodes hit
a 200-step time limit rather than a terminal state, so stored transitions
carry d = 0 and bootstrapping stays active across the cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn, pendulum, vqc
from .policy import (
    log_prob_pathwise_upstream,
    make_classical_policy,
    make_hybrid_policy,
    n_policy_params,
    policy_backward,
    policy_forward,
    policy_params,
    sample_squashed,
    set_policy_params,
)
from .replay import ReplayBuffer, Transition, TransitionBatch

A_MAX = pendulum.MAX_TORQUE
OBS_DIM = 3
ACTION_DIM = 1

CLASSICAL = "classical"
VANILLA_VQC = "vanilla-vqc"
REUPLOADING_VQC = "reuploading-vqc"
POLICY_KINDS = (CLASSICAL, VANILLA_VQC, REUPLOADING_VQC)


@dataclass(frozen=True)
class AgentConfig:
    policy_kind: str = REUPLOADING_VQC
    n_layers: int = 2
    gamma: float = 0.99
    alpha: float = 0.2
    rho: float = 0.995
    critic_lr: float = 3e-3
    policy_lr: float = 3e-4
    batch_size: int = 32
    replay_capacity: int = 10_000
    total_steps: int = 50_000
    warmup_steps: int = 1_000
    updates_per_step: int = 1
    grad_method: str = "adjoint"

    def validate(self) -> None:
        if self.policy_kind not in POLICY_KINDS:
            raise ValueError(f"policy_kind must be one of {POLICY_KINDS}")
        if self.grad_method not in ("adjoint", "shift"):
            raise ValueError("grad_method must be 'adjoint' or 'shift'")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        for name in ("rho", "critic_lr", "policy_lr"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")
        if self.n_layers < 1 or self.batch_size < 1 or self.updates_per_step < 1:
            raise ValueError("n_layers, batch_size, updates_per_step must be >= 1")
        if self.warmup_steps < self.batch_size:
            raise ValueError("warmup_steps must cover at least one batch")
        if self.replay_capacity < self.batch_size:
            raise ValueError("replay_capacity must cover at least one batch")


@dataclass
class EpisodeRecord:
    episode: int
    step: int  # global environment step at which the episode ended
    ret: float  # undiscounted sum of rewards


@dataclass
class Agent:
    config: AgentConfig
    policy: object
    critic1: nn.DenseNet
    critic2: nn.DenseNet
    target1: nn.DenseNet
    target2: nn.DenseNet
    adam_policy: nn.AdamState
    adam_critic1: nn.AdamState
    adam_critic2: nn.AdamState
    buffer: ReplayBuffer
    rng: np.random.Generator
    step: int = 0


def make_agent(config: AgentConfig, seed: int) -> Agent:
    config.validate()
    rng = np.random.default_rng(seed)
    if config.policy_kind == CLASSICAL:
        policy = make_classical_policy(rng, OBS_DIM, ACTION_DIM)
    else:
        kind = vqc.VANILLA if config.policy_kind == VANILLA_VQC else vqc.REUPLOADING
        policy = make_hybrid_policy(kind, config.n_layers, rng, OBS_DIM, ACTION_DIM)
    critic1 = nn.dense_net([OBS_DIM + ACTION_DIM, 32, 32, 1], rng)
    critic2 = nn.dense_net([OBS_DIM + ACTION_DIM, 32, 32, 1], rng)
    return Agent(
        config=config,
        policy=policy,
        critic1=critic1,
        critic2=critic2,
        target1=nn.clone(critic1),
        target2=nn.clone(critic2),
        adam_policy=nn.adam_init(n_policy_params(policy), config.policy_lr),
        adam_critic1=nn.adam_init(nn.n_params(critic1), config.critic_lr),
        adam_critic2=nn.adam_init(nn.n_params(critic2), config.critic_lr),
        buffer=ReplayBuffer(config.replay_capacity, OBS_DIM, ACTION_DIM),
        rng=rng,
    )


def act(agent: Agent, obs: np.ndarray) -> np.ndarray:
    """Uniform-random action during warmup, a policy sample afterwards."""
    if agent.step < agent.config.warmup_steps:
        return agent.rng.uniform(-A_MAX, A_MAX, ACTION_DIM)
    dist, _ = policy_forward(agent.policy, obs)
    eps = agent.rng.standard_normal(ACTION_DIM)
    return sample_squashed(dist, eps, A_MAX).action


def td_target(r, d, min_q_next, logp_next, gamma: float, alpha: float):
    """Entropy-regularized bootstrap target y(r, s', d)."""
    return r + gamma * (1.0 - d) * (min_q_next - alpha * logp_next)


def compute_targets(agent: Agent, batch: TransitionBatch) -> np.ndarray:
    """Target values for a batch; samples a' from the current policy."""
    dist, _ = policy_forward(agent.policy, batch.s_next)
    eps = agent.rng.standard_normal(batch.a.shape)
    nxt = sample_squashed(dist, eps, A_MAX)
    xa = np.concatenate([batch.s_next, nxt.action], axis=1)
    q1, _ = nn.forward(agent.target1, xa)
    q2, _ = nn.forward(agent.target2, xa)
    min_q = np.minimum(q1[:, 0], q2[:, 0])
    return td_target(batch.r, batch.d, min_q, nxt.log_prob, agent.config.gamma, agent.config.alpha)


def _critic_loss_grad(critic: nn.DenseNet, x: np.ndarray, y: np.ndarray):
    q, tape = nn.forward(critic, x)
    err = q[:, 0] - y
    loss = float(np.mean(err**2))
    grads, _ = nn.backward(critic, tape, (2.0 * err / err.size)[:, None])
    return loss, grads


def update_critics(agent: Agent, batch: TransitionBatch, targets: np.ndarray) -> tuple[float, float]:
    """One Adam step per critic on the mean squared error against fixed targets."""
    x = np.concatenate([batch.s, batch.a], axis=1)
    losses = []
    for critic, adam in ((agent.critic1, agent.adam_critic1), (agent.critic2, agent.adam_critic2)):
        loss, grads = _critic_loss_grad(critic, x, targets)
        nn.set_params(critic, nn.adam_step(adam, nn.get_params(critic), grads))
        losses.append(loss)
    return losses[0], losses[1]


def _actor_loss_grad(agent: Agent, batch: TransitionBatch, eps: np.ndarray):
    """Loss E[alpha log pi - min Q] and its exact gradient over policy params.

    Critic parameters receive no update here; their backward pass is used
    only for the gradient of Q with respect to the action.
    """
    cfg = agent.config
    dist, tape = policy_forward(agent.policy, batch.s)
    sample = sample_squashed(dist, eps, A_MAX)
    xa = np.concatenate([batch.s, sample.action], axis=1)
    q1, t1 = nn.forward(agent.critic1, xa)
    q2, t2 = nn.forward(agent.critic2, xa)
    q1, q2 = q1[:, 0], q2[:, 0]
    n = q1.size
    loss = float(np.mean(cfg.alpha * sample.log_prob - np.minimum(q1, q2)))

    pick1 = q1 <= q2  # gradient follows the critic attaining the minimum
    _, in1 = nn.backward(agent.critic1, t1, np.where(pick1, -1.0 / n, 0.0)[:, None])
    _, in2 = nn.backward(agent.critic2, t2, np.where(pick1, 0.0, -1.0 / n)[:, None])
    d_action = (in1 + in2)[:, OBS_DIM:]  # d(loss)/d(a), shape [B, action_dim]

    sigma = np.exp(dist.log_sigma)
    d_act_du = A_MAX * (1.0 - np.tanh(sample.pre_squash) ** 2)
    d_lp_mu, d_lp_ls = log_prob_pathwise_upstream(dist, eps)
    d_mu = (cfg.alpha / n) * d_lp_mu + d_action * d_act_du
    d_ls = (cfg.alpha / n) * d_lp_ls + d_action * d_act_du * sigma * eps
    grads = policy_backward(agent.policy, tape, d_mu, d_ls, method=cfg.grad_method)
    return loss, grads


def update_actor(agent: Agent, batch: TransitionBatch) -> float:
    eps = agent.rng.standard_normal(batch.a.shape)
    loss, grads = _actor_loss_grad(agent, batch, eps)
    set_policy_params(agent.policy, nn.adam_step(agent.adam_policy, policy_params(agent.policy), grads))
    return loss


def soft_update_targets(agent: Agent) -> None:
    rho = agent.config.rho
    nn.set_params(agent.target1, nn.polyak_update(nn.get_params(agent.target1), nn.get_params(agent.critic1), rho))
    nn.set_params(agent.target2, nn.polyak_update(nn.get_params(agent.target2), nn.get_params(agent.critic2), rho))


def train(config: AgentConfig, seed: int) -> list[EpisodeRecord]:
    """Run the full training loop; returns one record per finished episode."""
    agent = make_agent(config, seed)
    records: list[EpisodeRecord] = []
    state, obs = pendulum.reset(agent.rng)
    ep_return = 0.0
    for _ in range(config.total_steps):
        action = act(agent, obs)
        state, obs_next, reward, done = pendulum.step(state, float(action[0]))
        # 200-step cutoff is a time limit, not a terminal state: store d=0
        # so the bootstrap term stays active
        agent.buffer.push(Transition(obs, action, reward, obs_next, 0))
        ep_return += reward
        obs = obs_next
        agent.step += 1
        if done:
            records.append(EpisodeRecord(len(records), agent.step, ep_return))
            ep_return = 0.0
            state, obs = pendulum.reset(agent.rng)
        if agent.step >= config.warmup_steps:
            for _ in range(config.updates_per_step):
                batch = agent.buffer.sample(config.batch_size, agent.rng)
                targets = compute_targets(agent, batch)
                update_critics(agent, batch, targets)
                update_actor(agent, batch)
                soft_update_targets(agent)
    return records
