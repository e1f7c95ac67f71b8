"""Deep Q network: state featurization, a small MLP trained by SGD,
epsilon-greedy action selection with masking, and bounded replay memory.

The network maps a node's state vector to one Q value per child slot, up to
a fixed maximum branching; selection masks the slots beyond the actual
child count.  Targets are computed with the pre-update parameters, and the
update is one plain stochastic-gradient-descent step on the mean squared
target error, so analytic gradients can be checked against finite
differences exactly.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BranchingExceededError,
    InvalidStateError,
    NoActionError,
    NumericFaultError,
)
from .tree import RuleNode, fnv64


@dataclass(frozen=True)
class Featurizer:
    """Turns a tree node into a fixed-length real vector.

    The rule text contributes a bag of hashed character trigrams
    (L2-normalized); the node position contributes its step scaled by the
    depth bound and its index among siblings scaled by the maximum
    branching.
    """

    feature_dim: int = 64
    bmax: int = 16

    @property
    def state_dim(self) -> int:
        return self.feature_dim + 2

    def featurize(self, node: RuleNode, sibling_index: int, depth_bound: int) -> np.ndarray:
        if sibling_index < 0:
            raise ValueError("sibling_index must be non-negative")
        if sibling_index >= self.bmax:
            raise BranchingExceededError(
                f"sibling index {sibling_index} exceeds maximum branching {self.bmax}"
            )
        if depth_bound < 1:
            raise ValueError("depth_bound must be positive")
        vec = np.zeros(self.feature_dim + 2)
        rule = node.rule
        for i in range(len(rule) - 2):
            bucket = fnv64(rule[i : i + 3].encode("utf-8")) % self.feature_dim
            vec[bucket] += 1.0
        norm = float(np.linalg.norm(vec[: self.feature_dim]))
        if norm > 0:
            vec[: self.feature_dim] /= norm
        vec[self.feature_dim] = node.step / depth_bound
        vec[self.feature_dim + 1] = sibling_index / self.bmax
        return vec


@dataclass
class Transition:
    """One recorded selection: state, chosen child slot, reward, successor.

    ``next_state`` is None for the last selection on a path; otherwise
    ``next_valid`` records how many children the successor state offers, so
    target computation can mask its Q vector.
    """

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray | None = None
    next_valid: int = 0

    def __post_init__(self) -> None:
        if self.action < 0:
            raise ValueError("action must be non-negative")
        if not np.isfinite(self.reward):
            raise ValueError("reward must be finite")
        if self.next_state is not None and self.next_valid < 1:
            raise ValueError("non-terminal transition needs next_valid >= 1")


class ReplayMemory:
    """Bounded FIFO of transitions; eviction drops exactly the oldest."""

    def __init__(self, capacity: int = 7000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._buf: deque[Transition] = deque(maxlen=capacity)

    def append(self, transition: Transition) -> None:
        self._buf.append(transition)

    def extend(self, transitions: Iterable[Transition]) -> None:
        for t in transitions:
            self._buf.append(t)

    def __len__(self) -> int:
        return len(self._buf)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self._buf)

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform sample of ``n`` transitions without replacement."""
        if not self._buf:
            raise InvalidStateError("replay memory is empty")
        items = list(self._buf)
        n = min(n, len(items))
        idx = rng.choice(len(items), size=n, replace=False)
        return [items[i] for i in idx]


class QNetwork:
    """MLP from state vectors to per-slot Q values.

    Hidden layers use rectified-linear activations.  The output layer is
    zero-initialized, so every state starts with identical (zero) Q values
    and ties break toward the lowest slot.
    """

    def __init__(
        self,
        feature_dim: int = 64,
        hidden: Sequence[int] = (64, 64),
        bmax: int = 16,
        lr: float = 0.01,
        gamma: float = 0.9,
        init_seed: int = 0,
    ):
        if bmax < 1:
            raise ValueError("bmax must be positive")
        self.feature_dim = feature_dim
        self.hidden = tuple(hidden)
        self.bmax = bmax
        self.lr = lr
        self.gamma = gamma
        dims = [feature_dim + 2, *self.hidden, bmax]
        rng = np.random.default_rng(init_seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for k in range(len(dims) - 1):
            fan_in, fan_out = dims[k], dims[k + 1]
            if k == len(dims) - 2:
                w = np.zeros((fan_in, fan_out))
            else:
                w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    # -- parameter plumbing -------------------------------------------------

    def _param_arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def params_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self._param_arrays())

    def get_params(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self._param_arrays()])

    def set_params(self, flat: np.ndarray) -> None:
        arrays = self._param_arrays()
        if flat.size != sum(a.size for a in arrays):
            raise ValueError("parameter vector has the wrong size")
        pos = 0
        for a in arrays:
            a[...] = flat[pos : pos + a.size].reshape(a.shape)
            pos += a.size

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self._param_arrays())

    # -- forward / backward -------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        z = np.asarray(x, dtype=float)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = np.maximum(z @ w + b, 0.0)
        return z @ self.weights[-1] + self.biases[-1]

    def q_values(self, state: np.ndarray) -> np.ndarray:
        """Q vector of length bmax for one state; deterministic in (params, state)."""
        if not self.params_finite():
            raise NumericFaultError("network parameters are not finite")
        return self.forward(state)

    def loss_and_grads(
        self, states: np.ndarray, actions: np.ndarray, targets: np.ndarray
    ) -> tuple[float, list[np.ndarray]]:
        """Mean squared target error over the batch and its parameter gradients.

        Gradients come back in get_params() order (W0, b0, W1, b1, ...).
        """
        states = np.atleast_2d(np.asarray(states, dtype=float))
        actions = np.asarray(actions, dtype=int)
        targets = np.asarray(targets, dtype=float)
        n = states.shape[0]
        if np.any(actions >= self.bmax):
            raise BranchingExceededError("action index exceeds maximum branching")

        pre = []  # pre-activation of each hidden layer
        acts = [states]
        z = states
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            raw = z @ w + b
            pre.append(raw)
            z = np.maximum(raw, 0.0)
            acts.append(z)
        q = z @ self.weights[-1] + self.biases[-1]

        picked = q[np.arange(n), actions]
        err = picked - targets
        loss = float(np.mean(err**2))

        g_out = np.zeros_like(q)
        g_out[np.arange(n), actions] = 2.0 * err / n
        grads: list[np.ndarray] = []
        g = g_out
        for k in range(len(self.weights) - 1, -1, -1):
            grads.append(g.sum(axis=0))  # bias k
            grads.append(acts[k].T @ g)  # weights k
            if k > 0:
                g = (g @ self.weights[k].T) * (pre[k - 1] > 0)
        grads.reverse()
        return loss, grads

    def apply_gradients(self, grads: list[np.ndarray]) -> None:
        """One SGD step: p -= lr * g."""
        arrays = self._param_arrays()
        for a, g in zip(arrays, grads):
            a -= self.lr * g
        if not self.params_finite():
            raise NumericFaultError("parameters became non-finite after update")


def select_action(
    net: QNetwork,
    state: np.ndarray,
    valid_children: int,
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy choice among the first ``valid_children`` slots.

    Greedy ties break toward the lowest index.  Deterministic given the
    generator state.
    """
    if valid_children == 0:
        raise NoActionError("no valid children to select from")
    if valid_children > net.bmax:
        raise BranchingExceededError(
            f"{valid_children} children exceed maximum branching {net.bmax}"
        )
    if rng.random() < epsilon:
        return int(rng.integers(valid_children))
    q = net.q_values(state)
    return int(np.argmax(q[:valid_children]))


def compute_target(net: QNetwork, transition: Transition) -> float:
    """Q-learning target: r for terminal transitions, else r + gamma * max Q(s')."""
    if transition.next_state is None:
        return float(transition.reward)
    q_next = net.q_values(transition.next_state)
    return float(transition.reward + net.gamma * np.max(q_next[: transition.next_valid]))


def compute_targets(net: QNetwork, batch: Sequence[Transition]) -> np.ndarray:
    """Targets for a batch, all under the same (current) parameters."""
    return np.array([compute_target(net, t) for t in batch])


def train_step(
    net: QNetwork,
    memory: ReplayMemory,
    batch_size: int,
    rng: np.random.Generator,
) -> float:
    """One optimization step on a uniform replay minibatch.

    Samples min(batch_size, len(memory)) transitions without replacement,
    computes every target with the pre-update parameters, applies a single
    SGD step on the mean squared error, and returns the pre-update loss.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    batch = memory.sample(batch_size, rng)
    targets = compute_targets(net, batch)
    states = np.stack([t.state for t in batch])
    actions = np.array([t.action for t in batch])
    loss, grads = net.loss_and_grads(states, actions, targets)
    net.apply_gradients(grads)
    return loss


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear anneal from ``start`` to ``end`` over ``anneal_epochs`` epochs."""

    start: float = 0.99
    end: float = 0.1
    anneal_epochs: int = 100

    def __post_init__(self) -> None:
        if self.anneal_epochs < 1:
            raise ValueError("anneal_epochs must be >= 1")


def epsilon_at(schedule: EpsilonSchedule, epoch: int) -> float:
    """Exploration rate for ``epoch``; constant at ``end`` once annealed.

    Evaluated in decimal-exact arithmetic so the endpoints and midpoints of
    decimal-valued schedules come out exact in floating point.
    """
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    start = Fraction(str(schedule.start))
    end = Fraction(str(schedule.end))
    frac = Fraction(min(epoch, schedule.anneal_epochs), schedule.anneal_epochs)
    return float(start - (start - end) * frac)


@dataclass(frozen=True)
class DqnConfig:
    """Everything the policy side of a run needs, in one bundle."""

    gamma: float = 0.9
    lr: float = 0.01
    capacity: int = 7000
    batch: int = 64
    bmax: int = 16
    hidden: tuple[int, ...] = (64, 64)
    feature_dim: int = 64
    eps_start: float = 0.99
    eps_end: float = 0.1
    eps_anneal: int = 100
    negative_reward: float = -10.0
    positive_reward: float = 10.0
    positive_training: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(self.hidden))
        if self.capacity < 1 or self.batch < 1 or self.bmax < 1:
            raise ValueError("capacity, batch and bmax must be positive")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be positive")

    def build_network(self, init_seed: int) -> QNetwork:
        return QNetwork(
            feature_dim=self.feature_dim,
            hidden=self.hidden,
            bmax=self.bmax,
            lr=self.lr,
            gamma=self.gamma,
            init_seed=init_seed,
        )

    def schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.eps_start, self.eps_end, self.eps_anneal)

    def featurizer(self) -> Featurizer:
        return Featurizer(self.feature_dim, self.bmax)


# -- checkpointing ---------------------------------------------------------

CHECKPOINT_FORMAT = "proofpath-qnet-v1"


def save_checkpoint(net: QNetwork, path: str | Path, config_hash: str = "") -> None:
    """Write parameters plus a header recording shapes and the config hash."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "config_hash": config_hash,
        "feature_dim": net.feature_dim,
        "hidden": list(net.hidden),
        "bmax": net.bmax,
        "lr": net.lr,
        "gamma": net.gamma,
        "shapes": [list(a.shape) for a in net._param_arrays()],
        "params": [float(v) for v in net.get_params()],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def load_checkpoint(path: str | Path) -> tuple[QNetwork, str]:
    """Rebuild a network from a checkpoint; returns (network, config_hash)."""
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} checkpoint: {path}")
    net = QNetwork(
        feature_dim=payload["feature_dim"],
        hidden=payload["hidden"],
        bmax=payload["bmax"],
        lr=payload["lr"],
        gamma=payload["gamma"],
    )
    net.set_params(np.array(payload["params"], dtype=float))
    expected = [list(a.shape) for a in net._param_arrays()]
    if expected != payload["shapes"]:
        raise ValueError("checkpoint shapes do not match rebuilt network")
    return net, payload.get("config_hash", "")
