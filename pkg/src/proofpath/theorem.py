"""Brute-force validation of the random-strategy bound.

Setting: a finite tree with R marked correct root-to-leaf paths, and a
conditioning node somewhere on one of them with x children, y of which are
supporting (lie on a correct path), x > y >= 1.  A walk chooses uniformly
among children at every node.  Conditioned on the walk passing through the
node, the probability that it ends incorrect AND went through a supporting
child, divided by the probability that it ends incorrect, is

    p = p2 / p1 < y / x.

``enumerate_report`` computes every quantity exactly in rational
arithmetic; ``monte_carlo_p`` estimates p by simulation as an independent
cross-check; ``sweep`` exercises both on random trees.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import count

import numpy as np

from .errors import (
    DegenerateInstanceError,
    HypothesisViolatedError,
    InsufficientSamplesError,
)
from .rng import substream
from .tree import RuleNode, VerificationTree


@dataclass(frozen=True)
class MarkedTree:
    """A finite tree with its correct root-to-leaf paths marked."""

    tree: VerificationTree
    correct_leaves: tuple[RuleNode, ...]

    def __post_init__(self) -> None:
        if not self.correct_leaves:
            raise ValueError("at least one correct path is required")
        for leaf in self.correct_leaves:
            if self.tree.children(leaf):
                raise ValueError("correct paths must end at leaves")

    def correct_paths(self) -> list[list[RuleNode]]:
        return [self.tree.path_to(leaf).nodes for leaf in self.correct_leaves]


@dataclass(frozen=True)
class TheoremReport:
    """Exact quantities for one (tree, conditioning node) instance."""

    x: int
    y: int
    n_paths: int
    alphas: tuple[Fraction, ...]
    betas: tuple[tuple[Fraction, ...], ...]  # indexed [path][supporting child]
    p1: Fraction
    p2: Fraction
    p: Fraction
    bound: Fraction
    holds: bool


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    stderr: float
    incorrect_walks: int
    trials: int


def _analyze(marked: MarkedTree, node: RuleNode):
    """Common validation: children, supporting children, conditioning index."""
    children = marked.tree.children(node)
    x = len(children)
    paths = marked.correct_paths()
    i = node.step  # position of the node on any path through it
    if not any(len(p) > i and p[i] is node for p in paths):
        raise ValueError("node is not on any correct path")
    supporting = [
        c for c in children if any(len(p) > i + 1 and p[i + 1] is c for p in paths)
    ]
    y = len(supporting)
    if x <= y or y < 1:
        raise HypothesisViolatedError(
            f"need x > y >= 1 at the conditioning node, got x={x}, y={y}"
        )
    return children, supporting, paths, i, x, y


def enumerate_report(marked: MarkedTree, node: RuleNode) -> TheoremReport:
    """Exact computation of p1, p2, p and the bound check for one node."""
    tree = marked.tree
    children, supporting, paths, i, x, y = _analyze(marked, node)

    alphas: list[Fraction] = []
    betas: list[tuple[Fraction, ...]] = []
    for p in paths:
        through = len(p) > i and p[i] is node
        if not through:
            alphas.append(Fraction(0))
            betas.append((Fraction(0),) * y)
            continue
        alpha = Fraction(1)
        for q in range(i, len(p) - 1):
            alpha /= len(tree.children(p[q]))
        alphas.append(alpha)
        beta = Fraction(1)
        for q in range(i + 1, len(p) - 1):
            beta /= len(tree.children(p[q]))
        row = [Fraction(0)] * y
        row[supporting.index(p[i + 1])] = beta
        betas.append(tuple(row))

    p1 = Fraction(1) - sum(alphas)
    if p1 == 0:
        raise DegenerateInstanceError("every conditioned walk is correct (p1 = 0)")
    p2 = sum(
        Fraction(1, x) * (Fraction(1) - sum(row[s] for row in betas))
        for s in range(y)
    )
    p = p2 / p1
    bound = Fraction(y, x)
    return TheoremReport(
        x=x,
        y=y,
        n_paths=len(paths),
        alphas=tuple(alphas),
        betas=tuple(betas),
        p1=p1,
        p2=p2,
        p=p,
        bound=bound,
        holds=p < bound,
    )


def monte_carlo_p(
    marked: MarkedTree, node: RuleNode, trials: int, seed: int = 0
) -> MonteCarloEstimate:
    """Estimate p by uniform random walks conditioned on the prefix to ``node``.

    Among walks that end incorrect, reports the fraction whose first step
    from the node went through a supporting child, with the binomial
    standard error.
    """
    if trials < 1:
        raise InsufficientSamplesError("trials must be >= 1")
    tree = marked.tree
    children, supporting, _, _, _, _ = _analyze(marked, node)

    nodes = list(tree.walk())
    index = {n: k for k, n in enumerate(nodes)}
    kid_lists = [tree.children(n) for n in nodes]
    n_kids = np.array([len(k) for k in kid_lists])
    width = max(int(n_kids.max()), 1)
    kid_matrix = np.zeros((len(nodes), width), dtype=np.int64)
    for k, kids in enumerate(kid_lists):
        for j, c in enumerate(kids):
            kid_matrix[k, j] = index[c]

    rng = substream(seed, "walks")
    cur = np.full(trials, index[node], dtype=np.int64)
    first = np.full(trials, -1, dtype=np.int64)
    step = 0
    while True:
        alive = n_kids[cur] > 0
        if not alive.any():
            break
        c = n_kids[cur[alive]]
        draw = (rng.random(int(alive.sum())) * c).astype(np.int64)
        nxt = kid_matrix[cur[alive], draw]
        if step == 0:
            first[alive] = nxt
        cur[alive] = nxt
        step += 1

    correct_set = np.array([index[leaf] for leaf in marked.correct_leaves])
    support_set = np.array([index[c] for c in supporting])
    incorrect = ~np.isin(cur, correct_set)
    n_incorrect = int(incorrect.sum())
    if n_incorrect == 0:
        raise InsufficientSamplesError("no conditioned walk ended incorrect")
    hits = int((incorrect & np.isin(first, support_set)).sum())
    estimate = hits / n_incorrect
    stderr = float(np.sqrt(estimate * (1.0 - estimate) / n_incorrect))
    return MonteCarloEstimate(estimate, stderr, n_incorrect, trials)


# -- random instances --------------------------------------------------------


@dataclass
class SweepInstance:
    marked: MarkedTree
    node: RuleNode
    report: TheoremReport


@dataclass
class SweepResult:
    instances: list[SweepInstance]
    degenerate_skipped: int
    all_hold: bool


def random_marked_instance(
    rng: np.random.Generator, max_depth: int = 5, max_branching: int = 4
) -> tuple[MarkedTree, RuleNode]:
    """A random marked tree plus a conditioning node with x > y >= 1."""
    labels = count()
    while True:
        tree = VerificationTree("goal", depth_bound=max_depth)
        queue = [tree.root]
        while queue:
            n = queue.pop(0)
            if n.step >= max_depth:
                continue
            c = int(rng.integers(0, max_branching + 1))
            if n is tree.root and c < 2:
                c = 2
            if c:
                queue.extend(tree.expand_endpoint(n, [f"r{next(labels)}" for _ in range(c)]))
        leaves = [n for n in tree.walk() if not tree.children(n)]
        n_marked = min(int(rng.integers(1, 4)), len(leaves))
        picked = rng.choice(len(leaves), size=n_marked, replace=False)
        marked = MarkedTree(tree, tuple(leaves[int(k)] for k in sorted(picked)))

        paths = marked.correct_paths()
        on_correct = {id(n) for p in paths for n in p}
        candidates = []
        for n in tree.walk():  # BFS order keeps candidate choice deterministic
            if id(n) not in on_correct:
                continue
            children = tree.children(n)
            if not children:
                continue
            i = n.step
            y = sum(
                1
                for c in children
                if any(len(p) > i + 1 and p[i + 1] is c for p in paths)
            )
            if len(children) > y >= 1:
                candidates.append(n)
        if candidates:
            node = candidates[int(rng.integers(len(candidates)))]
            return marked, node


def sweep(seed: int, n_instances: int) -> SweepResult:
    """Generate random instances and report the bound check on each.

    Degenerate instances (p1 = 0) are skipped and counted.
    """
    if n_instances < 1:
        raise ValueError("n_instances must be >= 1")
    instances: list[SweepInstance] = []
    degenerate = 0
    for k in range(n_instances):
        marked, node = random_marked_instance(substream(seed, "sweep", k))
        try:
            report = enumerate_report(marked, node)
        except DegenerateInstanceError:
            degenerate += 1
            continue
        instances.append(SweepInstance(marked, node, report))
    return SweepResult(
        instances=instances,
        degenerate_skipped=degenerate,
        all_hold=all(inst.report.holds for inst in instances),
    )
