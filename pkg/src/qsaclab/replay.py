"""Fixed-capacity FIFO experience replay with uniform sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    d: int


@dataclass
class TransitionBatch:
    s: np.ndarray  # [B, obs_dim]
    a: np.ndarray  # [B, action_dim]
    r: np.ndarray  # [B]
    s_next: np.ndarray  # [B, obs_dim]
    d: np.ndarray  # [B]


class ReplayBuffer:
    """Ring buffer; once full, the oldest transition is overwritten."""

    def __init__(self, capacity: int, obs_dim: int = 3, action_dim: int = 1):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._s = np.zeros((capacity, obs_dim))
        self._a = np.zeros((capacity, action_dim))
        self._r = np.zeros(capacity)
        self._s_next = np.zeros((capacity, obs_dim))
        self._d = np.zeros(capacity)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        k = self._cursor
        self._s[k] = t.s
        self._a[k] = t.a
        self._r[k] = t.r
        self._s_next[k] = t.s_next
        self._d[k] = t.d
        self._cursor = (k + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        """Uniform sample with replacement from the stored transitions."""
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self._size < batch_size:
            raise ValueError(f"buffer holds {self._size} transitions, need {batch_size}")
        idx = rng.integers(0, self._size, size=batch_size)
        return TransitionBatch(
            s=self._s[idx].copy(),
            a=self._a[idx].copy(),
            r=self._r[idx].copy(),
            s_next=self._s_next[idx].copy(),
            d=self._d[idx].copy(),
        )
