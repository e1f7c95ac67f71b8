"""DFS and BFS searchers sharing the loop detector.

Both count coverage the same way the learned search does: distinct
(id, step) pairs handed to the backend for expansion.  DFS backtracks only
on a detected loop or a dead end; BFS finishes each depth level before
descending, pruning children whose extended path trips the detector.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

from .backend import Complete, Dead
from .loops import LoopDetectorConfig, LoopMonitor, SimilarityCache
from .tree import ProofPath, RuleNode


@dataclass(frozen=True)
class SearchLimits:
    max_nodes: int = 100_000
    max_seconds: float | None = None

    def __post_init__(self) -> None:
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be positive")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise ValueError("max_seconds must be positive")


@dataclass
class BaselineResult:
    verdict: str  # "found" | "exhausted" | "timed-out"
    coverage: int
    backtracks: int
    expansions: int
    wall_ms: float
    path: ProofPath | None

    @property
    def found(self) -> bool:
        return self.verdict == "found"


def _rank_key(rank_prefixes: Sequence[str]) -> Callable[[str], int]:
    def key(rule: str) -> int:
        for k, prefix in enumerate(rank_prefixes):
            if rule.startswith(prefix):
                return k
        return len(rank_prefixes)

    return key


def _make_order(node_order: str, rank_prefixes: Sequence[str] | None):
    if node_order == "first-listed":
        return lambda rules: list(rules)
    if node_order == "static-rank":
        if not rank_prefixes:
            raise ValueError("static-rank ordering needs a rule-prefix priority list")
        key = _rank_key(rank_prefixes)
        return lambda rules: sorted(rules, key=key)  # stable: ties keep listed order
    raise ValueError(f"unknown node order {node_order!r}")


class _Run:
    """Shared bookkeeping: expansion counts, limits, coverage."""

    def __init__(self, backend, limits: SearchLimits):
        self.backend = backend
        self.limits = limits
        self.coverage: set[tuple[str, int]] = set()
        self.expansions = 0
        self.t0 = time.perf_counter()

    def out_of_budget(self) -> bool:
        if self.expansions >= self.limits.max_nodes:
            return True
        if (
            self.limits.max_seconds is not None
            and time.perf_counter() - self.t0 > self.limits.max_seconds
        ):
            return True
        return False

    def expand(self, path: list[RuleNode]):
        self.expansions += 1
        self.coverage.add((path[-1].id, path[-1].step))
        return self.backend.expand(ProofPath(list(path)))

    def result(self, verdict: str, backtracks: int, path: list[RuleNode] | None) -> BaselineResult:
        return BaselineResult(
            verdict=verdict,
            coverage=len(self.coverage),
            backtracks=backtracks,
            expansions=self.expansions,
            wall_ms=(time.perf_counter() - self.t0) * 1000.0,
            path=ProofPath(list(path)) if path is not None else None,
        )


def dfs_search(
    backend_factory,
    loop_cfg: LoopDetectorConfig | None = None,
    node_order: str = "first-listed",
    rank_prefixes: Sequence[str] | None = None,
    limits: SearchLimits = SearchLimits(),
) -> BaselineResult:
    """Depth-first search; single-threaded, backtracks on loop or dead end."""
    if loop_cfg is None:
        loop_cfg = LoopDetectorConfig()
    order = _make_order(node_order, rank_prefixes)
    run = _Run(backend_factory(), limits)
    monitor = LoopMonitor(loop_cfg, SimilarityCache(loop_cfg.beta))

    root = RuleNode(run.backend.root_rule, 0)
    path = [root]
    monitor.append(root.rule)
    backtracks = 0

    reply = run.expand(path)
    if isinstance(reply, Complete):
        return run.result("found", backtracks, path)
    if isinstance(reply, Dead):
        return run.result("exhausted", backtracks, None)
    frames: list[list] = [[order(reply.rules), 0]]

    while frames:
        if run.out_of_budget():
            return run.result("timed-out", backtracks, None)
        children, idx = frames[-1]
        if idx >= len(children):
            frames.pop()
            monitor.pop()
            path.pop()
            backtracks += 1
            continue
        frames[-1][1] = idx + 1
        child = RuleNode(children[idx], len(path))
        path.append(child)
        if monitor.append(child.rule):
            monitor.pop()
            path.pop()
            backtracks += 1
            continue
        reply = run.expand(path)
        if isinstance(reply, Complete):
            return run.result("found", backtracks, path)
        if isinstance(reply, Dead):
            monitor.pop()
            path.pop()
            backtracks += 1
            continue
        frames.append([order(reply.rules), 0])
    return run.result("exhausted", backtracks, None)


class _BfsEntry:
    __slots__ = ("node", "parent")

    def __init__(self, node: RuleNode, parent: "_BfsEntry | None"):
        self.node = node
        self.parent = parent

    def path(self) -> list[RuleNode]:
        nodes = []
        entry: _BfsEntry | None = self
        while entry is not None:
            nodes.append(entry.node)
            entry = entry.parent
        nodes.reverse()
        return nodes


def bfs_search(
    backend_factory,
    loop_cfg: LoopDetectorConfig | None = None,
    limits: SearchLimits = SearchLimits(),
) -> BaselineResult:
    """Breadth-first search with per-path loop pruning, level by level."""
    if loop_cfg is None:
        loop_cfg = LoopDetectorConfig()
    run = _Run(backend_factory(), limits)
    cache = SimilarityCache(loop_cfg.beta)
    backtracks = 0

    root = RuleNode(run.backend.root_rule, 0)
    frontier = [_BfsEntry(root, None)]
    while frontier:
        next_frontier: list[_BfsEntry] = []
        for entry in frontier:
            if run.out_of_budget():
                return run.result("timed-out", backtracks, None)
            path = entry.path()
            reply = run.expand(path)
            if isinstance(reply, Complete):
                return run.result("found", backtracks, path)
            if isinstance(reply, Dead):
                backtracks += 1
                continue
            monitor = LoopMonitor(loop_cfg, cache)
            monitor.rules = [n.rule for n in path]
            for rule in reply.rules:
                if monitor.append(rule):
                    backtracks += 1
                else:
                    next_frontier.append(_BfsEntry(RuleNode(rule, len(path)), entry))
                monitor.pop()
        frontier = next_frontier
    return run.result("exhausted", backtracks, None)
