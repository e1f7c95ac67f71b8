"""The epoch loop: policy-guided acquisition, correctness determination,
reward assignment, and policy optimization.

Each epoch, every worker grows a fresh verification tree from the root,
extending one path node by node.  The frontier node of the path is the
endpoint that gets the next two-depth expansion, and the policy picks which
child to follow.  After every extension the loop detector examines the
path's rule sequence.  The three outcomes:

* a loop (or a dead end, or the hard selection cap): the path is estimated
  incorrect, every selection on it is stored with a negative reward, and
  the tree is discarded;
* the frontier would exceed the depth bound: the path is correct but
  incomplete, so the global bound grows and the same walk continues;
* the backend reports completion: the proof path is returned immediately.

Training happens between epochs on uniform replay samples.  Workers run in
a fixed order with named random streams, so runs are bit-reproducible.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .backend import BackendReply, Children, Complete, Dead
from .dqn import (
    DqnConfig,
    Featurizer,
    QNetwork,
    ReplayMemory,
    Transition,
    epsilon_at,
    select_action,
    train_step,
)
from .errors import BranchingExceededError
from .loops import LoopDetectorConfig, LoopMonitor, SimilarityCache
from .rng import stream_seed, substream
from .tree import ProofPath, RuleNode, VerificationTree


class PathVerdict(enum.Enum):
    """Outcome of correctness determination for one selected path."""

    INCORRECT_LOOP = "incorrect_loop"
    CORRECT_INCOMPLETE = "correct_incomplete"
    CORRECT_COMPLETE = "correct_complete"


@dataclass(frozen=True)
class SearchConfig:
    workers: int = 8
    max_epochs: int = 200
    depth_bound_initial: int = 5
    depth_bound_increment: int = 5
    path_cap: int = 500
    train_steps: int = 1
    seed: int = 0
    measure_wall_time: bool = False
    loop: LoopDetectorConfig = field(default_factory=LoopDetectorConfig)
    dqn: DqnConfig = field(default_factory=DqnConfig)

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.depth_bound_initial < 1 or self.depth_bound_increment < 1:
            raise ValueError("depth bound settings must be positive")
        if self.path_cap < 1:
            raise ValueError("path_cap must be >= 1")
        if self.train_steps < 0:
            raise ValueError("train_steps must be >= 0")


@dataclass
class EpochStats:
    epoch: int
    epsilon: float
    mean_loss: float | None
    transitions_added: int
    verdicts: tuple[str, ...]
    incorrect: int
    incomplete_events: int
    complete: int
    coverage: int
    wall_ms: float = 0.0


@dataclass
class SearchResult:
    verdict: str  # "correct_complete" | "exhausted"
    path: ProofPath | None
    epochs: int
    stats: list[EpochStats]
    coverage: int
    network: QNetwork
    final_depth_bound: int
    tree: VerificationTree | None = None

    @property
    def found(self) -> bool:
        return self.verdict == PathVerdict.CORRECT_COMPLETE.value


@dataclass
class _WalkOutcome:
    verdict: PathVerdict
    path: ProofPath
    tree: VerificationTree
    incomplete_events: int


def assign_rewards(
    tree: VerificationTree,
    path: ProofPath,
    verdict: PathVerdict,
    dqn: DqnConfig,
    featurizer: Featurizer | None = None,
) -> list[Transition]:
    """One transition per selection edge on the path, all with the same reward.

    Incorrect paths earn the negative reward on every edge; complete paths
    earn the positive one (used only when positive training is enabled).
    The last transition is terminal.
    """
    if verdict is PathVerdict.CORRECT_INCOMPLETE:
        raise ValueError("incomplete paths carry no rewards yet")
    if featurizer is None:
        featurizer = dqn.featurizer()
    reward = (
        dqn.positive_reward
        if verdict is PathVerdict.CORRECT_COMPLETE
        else dqn.negative_reward
    )
    bound = tree.depth_bound
    nodes = path.nodes
    transitions: list[Transition] = []
    for i in range(len(nodes) - 1):
        parent, child = nodes[i], nodes[i + 1]
        action = tree.children(parent).index(child)
        state = featurizer.featurize(parent, tree.sibling_index(parent), bound)
        if i == len(nodes) - 2:
            next_state, next_valid = None, 0
        else:
            next_state = featurizer.featurize(child, action, bound)
            next_valid = len(tree.children(child))
        transitions.append(Transition(state, action, reward, next_state, next_valid))
    return transitions


def _acquire_path(
    config: SearchConfig,
    backend,
    net: QNetwork,
    featurizer: Featurizer,
    epsilon: float,
    rng: np.random.Generator,
    depth_bound: int,
    cache: SimilarityCache,
    coverage: set[tuple[str, int]],
) -> tuple[_WalkOutcome, int]:
    """One worker's walk: a fresh tree, one policy-extended path, a verdict.

    Returns the outcome and the (possibly raised) global depth bound.
    """
    tree = VerificationTree(backend.root_rule, depth_bound)
    monitor = LoopMonitor(config.loop, cache)
    node = tree.root
    path_nodes = [tree.root]
    monitor.append(node.rule)
    incomplete_events = 0
    while True:
        reply: BackendReply = backend.expand(ProofPath(list(path_nodes)))
        coverage.add((node.id, node.step))
        if isinstance(reply, Complete):
            verdict = PathVerdict.CORRECT_COMPLETE
            break
        if isinstance(reply, Dead):
            # a contradiction-free dead end ends the path; treated as incorrect
            if node.step + 1 <= tree.depth_bound:
                tree.expand_endpoint(node, [])
            verdict = PathVerdict.INCORRECT_LOOP
            break
        rules = reply.rules
        if len(rules) > net.bmax:
            raise BranchingExceededError(
                f"backend returned {len(rules)} children, maximum is {net.bmax}"
            )
        while node.step + 1 > depth_bound:
            # the path is correct but incomplete: extend the bound and go on
            depth_bound += config.depth_bound_increment
            incomplete_events += 1
        if tree.depth_bound < depth_bound:
            tree.raise_depth_bound(depth_bound)
        children = tree.expand_endpoint(node, rules)
        state = featurizer.featurize(node, tree.sibling_index(node), depth_bound)
        action = select_action(net, state, len(rules), epsilon, rng)
        child = children[action]
        path_nodes.append(child)
        if monitor.append(child.rule):
            verdict = PathVerdict.INCORRECT_LOOP
            break
        if len(path_nodes) - 1 >= config.path_cap:
            # runaway non-similar divergence; treated as an incorrect path
            verdict = PathVerdict.INCORRECT_LOOP
            break
        node = child
    path = ProofPath(path_nodes, verdict)
    return _WalkOutcome(verdict, path, tree, incomplete_events), depth_bound


def run(config: SearchConfig, backend_factory, should_stop=None) -> SearchResult:
    """Run the epoch loop until a complete path is found or epochs run out.

    ``should_stop`` is polled at epoch boundaries for cooperative
    cancellation; a cancelled run returns Exhausted with partial stats.
    """
    featurizer = config.dqn.featurizer()
    net = config.dqn.build_network(init_seed=stream_seed(config.seed, "net"))
    memory = ReplayMemory(config.dqn.capacity)
    schedule = config.dqn.schedule()
    cache = SimilarityCache(config.loop.beta)
    coverage: set[tuple[str, int]] = set()
    depth_bound = config.depth_bound_initial
    stats: list[EpochStats] = []

    for epoch in range(config.max_epochs):
        if should_stop is not None and should_stop():
            break
        t0 = time.perf_counter() if config.measure_wall_time else None
        eps = epsilon_at(schedule, epoch)
        verdicts: list[str] = []
        added = 0
        incomplete_events = 0
        success: _WalkOutcome | None = None

        for w in range(config.workers):
            outcome, depth_bound = _acquire_path(
                config,
                backend_factory(),
                net,
                featurizer,
                eps,
                substream(config.seed, "worker", epoch, w),
                depth_bound,
                cache,
                coverage,
            )
            verdicts.append(outcome.verdict.value)
            incomplete_events += outcome.incomplete_events
            if outcome.verdict is PathVerdict.CORRECT_COMPLETE:
                if config.dqn.positive_training:
                    rewarded = assign_rewards(
                        outcome.tree, outcome.path, outcome.verdict, config.dqn, featurizer
                    )
                    memory.extend(rewarded)
                    added += len(rewarded)
                success = outcome
                break
            rewarded = assign_rewards(
                outcome.tree, outcome.path, outcome.verdict, config.dqn, featurizer
            )
            memory.extend(rewarded)
            added += len(rewarded)

        losses: list[float] = []
        if success is None and len(memory) > 0:
            for step in range(config.train_steps):
                losses.append(
                    train_step(
                        net,
                        memory,
                        config.dqn.batch,
                        substream(config.seed, "replay", epoch, step),
                    )
                )
        wall_ms = (time.perf_counter() - t0) * 1000.0 if t0 is not None else 0.0
        stats.append(
            EpochStats(
                epoch=epoch,
                epsilon=eps,
                mean_loss=float(np.mean(losses)) if losses else None,
                transitions_added=added,
                verdicts=tuple(verdicts),
                incorrect=sum(v == PathVerdict.INCORRECT_LOOP.value for v in verdicts),
                incomplete_events=incomplete_events,
                complete=sum(v == PathVerdict.CORRECT_COMPLETE.value for v in verdicts),
                coverage=len(coverage),
                wall_ms=wall_ms,
            )
        )
        if success is not None:
            return SearchResult(
                verdict=PathVerdict.CORRECT_COMPLETE.value,
                path=success.path,
                epochs=epoch + 1,
                stats=stats,
                coverage=len(coverage),
                network=net,
                final_depth_bound=depth_bound,
                tree=success.tree,
            )

    return SearchResult(
        verdict="exhausted",
        path=None,
        epochs=len(stats),
        stats=stats,
        coverage=len(coverage),
        network=net,
        final_depth_bound=depth_bound,
        tree=None,
    )
